#pragma once

#include "divrecruit/bandit.hpp"
#include "divrecruit/experiment.hpp"
#include "divrecruit/model.hpp"
#include "divrecruit/policy.hpp"
#include "divrecruit/random.hpp"
#include "divrecruit/scenario.hpp"
#include "divrecruit/serialization.hpp"
#include "divrecruit/simulator.hpp"
