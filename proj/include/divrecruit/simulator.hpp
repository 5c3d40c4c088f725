#pragma once

// Budgeted round loop (select, sample, realize, update), run metrics,
// alpha-regret against an enumerated comparator, and parameter sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "divrecruit/bandit.hpp"
#include "divrecruit/model.hpp"
#include "divrecruit/policy.hpp"
#include "divrecruit/random.hpp"

namespace divrecruit {

struct RoundRecord {
  std::uint64_t round = 0;
  Selection selection;
  QualityMap realized_qualities;
  double weighted_utility = 0.0;
  double cost = 0.0;
  double remaining_budget_after = 0.0;
};

struct RunResult {
  std::vector<RoundRecord> records;
  double total_weighted_quality = 0.0;
  std::uint64_t rounds = 0;
  double normalized_entropy = 0.0;
  std::string policy_label;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> coverage_counts;  // at termination
  std::vector<double> weight_sums;             // per task, sum over rounds of the weight used that round
};

/// Base-M Shannon entropy of the coverage distribution, in [0,1].
inline double normalized_entropy(const std::vector<std::uint64_t>& counts, std::size_t m) {
  if (m < 2) throw std::invalid_argument("normalized_entropy: needs at least two tasks");
  if (counts.size() != m) throw std::invalid_argument("normalized_entropy: count vector size must equal M");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw std::invalid_argument("normalized_entropy: undefined for zero coverage");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(m)), 0.0, 1.0);
}

/// Quality draw of worker i on task j in round t. Depends only on
/// (seed, t, i, j), never on what the policy did before.
inline double draw_quality(const WorkerTruth& w, std::uint64_t seed, std::uint64_t round, std::size_t task) {
  SplitMix64 gen(derive_seed(seed, {round, static_cast<std::uint64_t>(w.worker_id), static_cast<std::uint64_t>(task)}));
  return w.quality.sample(gen);
}

namespace detail {

inline void play_round(const Scenario& s, const Selection& sel, std::uint64_t seed, WorldState& world,
                       BanditState& bandit, RunResult& out) {
  RoundRecord rec;
  rec.round = world.round;
  for (const auto& ref : sel.chosen)
    for (std::size_t j : s.option(ref.worker, ref.option).task_ids)
      rec.realized_qualities[{ref.worker, j}] = draw_quality(s.workers[ref.worker], seed, world.round, j);
  rec.weighted_utility = round_utility(sel, rec.realized_qualities, world, s);
  for (std::size_t j = 0; j < s.num_tasks(); ++j) out.weight_sums[j] += world.current_weights[j];
  update_coverage(sel, world, s);
  record_round(bandit, sel, rec.realized_qualities, s);
  world.remaining_budget -= sel.total_cost;
  world.cumulative_utility += rec.weighted_utility;
  ++world.round;
  rec.selection = sel;
  rec.cost = sel.total_cost;
  rec.remaining_budget_after = world.remaining_budget;
  out.records.push_back(std::move(rec));
}

}  // namespace detail

/// Runs one policy on one scenario until the budget cannot fund another
/// K-selection. Learning policies first play the bootstrap rounds, which
/// consume budget and count toward the totals.
inline RunResult run(const Scenario& s, const Policy& policy, std::uint64_t seed) {
  validate(s);
  RunResult out;
  out.policy_label = policy.label();
  out.seed = seed;
  out.weight_sums.assign(s.num_tasks(), 0.0);

  WorldState world = make_world(s);
  BanditState bandit = make_bandit_state(s);
  Rng policy_rng(derive_seed(seed, "policy"));

  bool exhausted = false;
  if (policy.learns()) {
    for (const auto& sel : initialize_rounds(s).rounds) {
      if (sel.total_cost > world.remaining_budget) {
        exhausted = true;
        break;
      }
      detail::play_round(s, sel, seed, world, bandit, out);
    }
  }
  while (!exhausted) {
    auto sel = policy_select(policy, bandit, world, s, policy_rng);
    if (!sel) break;
    detail::play_round(s, *sel, seed, world, bandit, out);
  }

  out.rounds = world.round;
  out.total_weighted_quality = world.cumulative_utility;
  out.coverage_counts = world.coverage_counts;
  const bool any = std::any_of(out.coverage_counts.begin(), out.coverage_counts.end(), [](auto c) { return c > 0; });
  out.normalized_entropy = (s.num_tasks() >= 2 && any) ? normalized_entropy(out.coverage_counts, s.num_tasks()) : 0.0;
  return out;
}

/// Throws std::logic_error if a run overspent or played an infeasible round.
inline void check_run_invariants(const RunResult& r, const Scenario& s) {
  double spent = 0.0, total = 0.0;
  double prev_remaining = s.hyper.budget;
  for (const auto& rec : r.records) {
    check_selection(rec.selection, s, s.hyper.K);
    if (rec.weighted_utility < 0.0) throw std::logic_error("negative round utility");
    if (!(rec.remaining_budget_after < prev_remaining)) throw std::logic_error("budget did not decrease");
    prev_remaining = rec.remaining_budget_after;
    spent += rec.cost;
    total += rec.weighted_utility;
  }
  if (spent > s.hyper.budget + 1e-9) throw std::logic_error("run overspent its budget");
  if (std::abs(total - r.total_weighted_quality) > 1e-6) throw std::logic_error("total quality does not match the records");
  if (r.normalized_entropy < 0.0 || r.normalized_entropy > 1.0) throw std::logic_error("entropy out of range");
}

/// Expected overlap-aware quality of each task under true mean qualities.
inline std::vector<double> expected_task_quality(std::span<const OptionRef> refs, const Scenario& s) {
  std::vector<double> best(s.num_tasks(), 0.0), sum(s.num_tasks(), 0.0);
  std::vector<char> covered(s.num_tasks(), 0);
  for (const auto& ref : refs) {
    const double q = s.workers[ref.worker].quality_mean();
    for (std::size_t j : s.option(ref.worker, ref.option).task_ids) {
      best[j] = covered[j] ? std::max(best[j], q) : q;
      sum[j] += q;
      covered[j] = 1;
    }
  }
  const double g = s.hyper.gamma;
  std::vector<double> out(s.num_tasks(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j)
    if (covered[j]) out[j] = (best[j] + g * sum[j]) / (1.0 + g);
  return out;
}

inline double expected_utility(std::span<const OptionRef> refs, std::span<const double> weights, const Scenario& s) {
  const auto u = expected_task_quality(refs, s);
  double total = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) total += weights[j] * u[j];
  return total;
}

/// Cumulative expected utility of replaying `refs` from a fresh world until
/// its cost no longer fits in the budget, with its own weight decay.
inline double replay_total(std::span<const OptionRef> refs, double cost, const Scenario& s) {
  if (!(cost > 0.0)) return 0.0;
  const auto u = expected_task_quality(refs, s);
  std::vector<std::uint64_t> counts(s.num_tasks(), 0);
  double remaining = s.hyper.budget, total = 0.0;
  while (cost <= remaining) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (u[j] == 0.0) continue;
      total += task_weight(counts[j], s.tasks[j].initial_weight, s.hyper.kappa, s.hyper.lambda) * u[j];
      ++counts[j];
    }
    remaining -= cost;
  }
  return total;
}

enum class Comparator {
  LearnerTrajectory,  // fixed best selection scored on the learner's own weight trajectory
  OwnTrajectory,      // fixed best selection replayed alone until the budget runs out
};

struct RegretReport {
  double regret = 0.0;
  double alpha = 1.0;
  double comparator_total = 0.0;
  double learner_total = 0.0;
  Selection optimal;
  double delta_min = 0.0;
  double delta_max = 0.0;
};

struct StaticOptimum {
  Selection selection;
  double utility = 0.0;
  double delta_min = 0.0;
  double delta_max = 0.0;
};

/// Best K-selection under true means and initial weights (no budget limit),
/// plus the gaps to the runner-up and to the worst selection.
inline StaticOptimum static_optimum(const Scenario& s) {
  check_enumeration_guard(s, s.hyper.K);
  std::vector<double> w1;
  for (const auto& t : s.tasks) w1.push_back(t.initial_weight);
  StaticOptimum out;
  double best = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for_each_k_selection(s, s.hyper.K, [&](std::span<const OptionRef> refs, double) {
    const double u = expected_utility(refs, w1, s);
    ++count;
    worst = std::min(worst, u);
    if (u > best) {
      second = best;
      best = u;
      out.selection = make_selection(s, {refs.begin(), refs.end()});
    } else {
      second = std::max(second, u);
    }
  });
  out.utility = best;
  out.delta_min = count > 1 ? best - second : 0.0;
  out.delta_max = count > 1 ? best - worst : 0.0;
  return out;
}

/// alpha * (comparator cumulative expected utility) minus the run's realized
/// cumulative utility. The comparator is the single K-selection affordable
/// within B that maximizes its cumulative expected utility.
inline RegretReport alpha_regret(const RunResult& run_result, const Scenario& s, double alpha,
                                 Comparator mode = Comparator::LearnerTrajectory) {
  check_enumeration_guard(s, s.hyper.K);
  if (run_result.weight_sums.size() != s.num_tasks()) throw std::invalid_argument("alpha_regret: run does not match scenario");
  RegretReport rep;
  rep.alpha = alpha;
  rep.learner_total = run_result.total_weighted_quality;
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for_each_k_selection(s, s.hyper.K, [&](std::span<const OptionRef> refs, double cost) {
    if (cost > s.hyper.budget) return;
    const double total = mode == Comparator::LearnerTrajectory ? expected_utility(refs, run_result.weight_sums, s)
                                                               : replay_total(refs, cost, s);
    if (!found || total > best) {
      found = true;
      best = total;
      rep.optimal = make_selection(s, {refs.begin(), refs.end()});
    }
  });
  rep.comparator_total = found ? best : 0.0;
  rep.regret = alpha * rep.comparator_total - rep.learner_total;
  const auto opt = static_optimum(s);
  rep.delta_min = opt.delta_min;
  rep.delta_max = opt.delta_max;
  return rep;
}

// ---- sweeps ---------------------------------------------------------------

/// Parameter names a sweep may vary.
inline bool is_sweep_parameter(const std::string& name) {
  return name == "budget" || name == "K" || name == "kappa" || name == "gamma" || name == "r" || name == "N" ||
         name == "M";
}

using GridPoint = std::vector<std::pair<std::string, double>>;
using ParameterGrid = std::vector<std::pair<std::string, std::vector<double>>>;

/// Cartesian product of the grid in row-major order (last parameter fastest).
inline std::vector<GridPoint> expand_grid(const ParameterGrid& grid) {
  std::vector<GridPoint> points{GridPoint{}};
  for (const auto& [name, values] : grid) {
    if (!is_sweep_parameter(name)) throw std::invalid_argument("cannot sweep over '" + name + "'");
    if (values.empty()) throw std::invalid_argument("sweep parameter '" + name + "' has no values");
    std::vector<GridPoint> next;
    for (const auto& p : points)
      for (double v : values) {
        auto q = p;
        q.emplace_back(name, v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

/// Applies hyperparameter values of a grid point to a built scenario.
/// N and M change the instance itself and must be handled by the factory.
inline void apply_hyperparameters(Scenario& s, const GridPoint& point) {
  for (const auto& [name, v] : point) {
    if (name == "budget") s.hyper.budget = v;
    else if (name == "K") s.hyper.K = static_cast<std::size_t>(std::llround(v));
    else if (name == "kappa") s.hyper.kappa = v;
    else if (name == "gamma") s.hyper.gamma = v;
    else if (name == "r") s.hyper.r = static_cast<std::size_t>(std::llround(v));
    else if (name == "N" || name == "M")
      throw std::invalid_argument("'" + name + "' can only be swept when the scenario is generated");
    else throw std::invalid_argument("cannot sweep over '" + name + "'");
  }
}

/// Builds the scenario for one (grid point, run seed) cell member.
using ScenarioFactory = std::function<Scenario(const GridPoint&, std::uint64_t seed)>;

struct SweepRun {
  std::size_t cell = 0;
  GridPoint point;
  std::string policy;
  std::uint64_t seed = 0;
  Hyperparameters hyper;
  std::optional<RunResult> result;
  std::string error;
};

/// Every (grid point x policy x seed) combination, ordered by (cell,
/// policy index, seed index) whatever order the workers finish in. A failed
/// run is reported in its slot and does not stop the sweep.
inline std::vector<SweepRun> sweep(const ScenarioFactory& factory, const std::vector<Policy>& policies,
                                   const ParameterGrid& grid, const std::vector<std::uint64_t>& seeds, unsigned jobs = 1,
                                   const std::function<void(RunResult&)>& shrink = {}) {
  const auto points = expand_grid(grid);
  std::vector<SweepRun> runs;
  for (std::size_t c = 0; c < points.size(); ++c)
    for (const auto& p : policies)
      for (auto seed : seeds) runs.push_back({c, points[c], p.label(), seed, {}, std::nullopt, {}});

  std::vector<const Policy*> policy_of(runs.size());
  for (std::size_t a = 0; a < runs.size(); ++a) policy_of[a] = &policies[(a / seeds.size()) % policies.size()];

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t a = next++; a < runs.size(); a = next++) {
      auto& job = runs[a];
      try {
        const Scenario s = factory(job.point, job.seed);
        job.hyper = s.hyper;
        job.result = run(s, *policy_of[a], job.seed);
        check_run_invariants(*job.result, s);
        if (shrink) shrink(*job.result);
      } catch (const std::exception& e) {
        job.result.reset();
        job.error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(runs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return runs;
}

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat st;
  st.count = xs.size();
  if (xs.empty()) return st;
  for (double x : xs) st.mean += x;
  st.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return st;
}

struct CellSummary {
  std::size_t cell = 0;
  GridPoint point;
  std::string policy;
  std::size_t failed = 0;
  Stat total_weighted_quality;
  Stat normalized_entropy;
  Stat rounds;
};

/// Per (cell, policy) means and standard deviations over successful runs.
inline std::vector<CellSummary> summarize_cells(const std::vector<SweepRun>& runs) {
  std::vector<CellSummary> out;
  std::map<std::pair<std::size_t, std::string>, std::size_t> index;
  std::vector<std::vector<double>> q, h, t;
  for (const auto& r : runs) {
    auto key = std::make_pair(r.cell, r.policy);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.cell, r.point, r.policy, 0, {}, {}, {}});
      q.emplace_back();
      h.emplace_back();
      t.emplace_back();
    }
    const std::size_t a = it->second;
    if (!r.result) {
      ++out[a].failed;
      continue;
    }
    q[a].push_back(r.result->total_weighted_quality);
    h[a].push_back(r.result->normalized_entropy);
    t[a].push_back(static_cast<double>(r.result->rounds));
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    out[a].total_weighted_quality = summarize(q[a]);
    out[a].normalized_entropy = summarize(h[a]);
    out[a].rounds = summarize(t[a]);
  }
  return out;
}

}  // namespace divrecruit
