#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "divrecruit/experiment.hpp"

int main(int argc, char** argv) {
  using namespace divrecruit;

  CLI::App app{"Diversity- and overlap-aware budgeted worker recruitment simulator"};
  app.require_subcommand(1);

  CommandOptions gen_opt, run_opt, regret_opt;

  auto add_common = [](CLI::App* cmd, CommandOptions& o) {
    cmd->add_option_function<std::string>("--config", [&o](const std::string& v) { o.config_path = v; }, "Config file (JSON)");
    cmd->add_option_function<std::string>("--out", [&o](const std::string& v) { o.out_path = v; }, "Output path");
    cmd->add_option_function<std::uint64_t>("--seed-override", [&o](std::uint64_t v) { o.seed_override = v; },
                                            "Replace the configured seed(s)");
  };

  auto* gen = app.add_subcommand("generate", "Build a scenario_v1 file from a spec or a mobility trace");
  add_common(gen, gen_opt);
  gen->add_option_function<std::string>("--trace", [&](const std::string& v) { gen_opt.trace_path = v; },
                                        "Trace CSV (entity_id,timestamp,latitude,longitude)");

  auto* runc = app.add_subcommand("run", "Run policies over seeds and an optional sweep grid");
  add_common(runc, run_opt);
  runc->add_option_function<unsigned>("--jobs", [&](unsigned v) { run_opt.jobs = v; }, "Parallel runs");

  auto* reg = app.add_subcommand("regret", "Measure alpha-regret over a budget grid on an enumerable instance");
  add_common(reg, regret_opt);
  reg->add_option_function<unsigned>("--jobs", [&](unsigned v) { regret_opt.jobs = v; }, "Parallel runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (gen->parsed()) return cmd_generate(gen_opt);
  if (runc->parsed()) return cmd_run(run_opt);
  if (reg->parsed()) return cmd_regret(regret_opt);
  return kExitError;
}
