#pragma once

// Experiment configs and the generate / run / regret commands behind the
// command-line tool. Every output embeds the fully resolved config.

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "divrecruit/bandit.hpp"
#include "divrecruit/policy.hpp"
#include "divrecruit/scenario.hpp"
#include "divrecruit/serialization.hpp"
#include "divrecruit/simulator.hpp"

namespace divrecruit {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitValidation = 2,
  kExitGuard = 3,
  kExitRunFailures = 4,
};

struct RegretSettings {
  double alpha = 0.5;
  std::vector<double> budget_multipliers{32, 64, 128, 256, 512, 1024, 2048, 4096};
  std::vector<double> budgets;  // explicit budgets; override the multipliers when set
  Comparator comparator = Comparator::LearnerTrajectory;
};

struct ExperimentConfig {
  std::variant<ScenarioSpec, std::string> scenario = ScenarioSpec{};  // spec or scenario file path
  bool vary_scenario_with_seed = true;
  std::vector<std::string> policies{"diversity_ucb", "old_ucb", "epsilon_greedy:0.1", "epsilon_greedy:0.5"};
  std::vector<std::uint64_t> seeds{1};
  ParameterGrid sweep;
  std::string output_path = "results.csv";
  unsigned jobs = 1;
  RegretSettings regret;
};

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

inline json to_json_doc(const ExperimentConfig& c) {
  json doc;
  if (const auto* spec = std::get_if<ScenarioSpec>(&c.scenario))
    doc["scenario"] = to_json_doc(*spec);
  else
    doc["scenario"] = std::get<std::string>(c.scenario);
  doc["vary_scenario_with_seed"] = c.vary_scenario_with_seed;
  doc["policies"] = c.policies;
  doc["seeds"] = c.seeds;
  json grid = json::array();
  for (const auto& [name, values] : c.sweep) grid.push_back({{"parameter", name}, {"values", values}});
  doc["sweep"] = grid;
  doc["output"] = c.output_path;
  doc["regret"] = {{"alpha", c.regret.alpha},
                   {"budget_multipliers", c.regret.budget_multipliers},
                   {"budgets", c.regret.budgets},
                   {"comparator", c.regret.comparator == Comparator::LearnerTrajectory ? "learner_trajectory"
                                                                                      : "own_trajectory"}};
  return doc;
}

/// The sweep may be given as {"name": [values], ...} (applied in key order)
/// or as [{"parameter": name, "values": [...]}, ...] (applied in list order).
inline ParameterGrid grid_from_json(const json& v) {
  ParameterGrid grid;
  if (v.is_object()) {
    for (const auto& [name, values] : v.items()) grid.emplace_back(name, values.get<std::vector<double>>());
  } else if (v.is_array()) {
    for (const auto& e : v) grid.emplace_back(e.at("parameter").get<std::string>(), e.at("values").get<std::vector<double>>());
  } else {
    throw ValidationError("sweep must be an object or a list");
  }
  for (const auto& [name, values] : grid) {
    if (!is_sweep_parameter(name)) throw ValidationError("sweep parameter '" + name + "' is not a scenario hyperparameter");
    if (values.empty()) throw ValidationError("sweep parameter '" + name + "' has no values");
  }
  return grid;
}

inline ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "scenario") {
        if (v.is_string()) c.scenario = v.get<std::string>();
        else c.scenario = spec_from_json(v);
      } else if (key == "vary_scenario_with_seed") c.vary_scenario_with_seed = v.get<bool>();
      else if (key == "policies") c.policies = v.get<std::vector<std::string>>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "sweep") c.sweep = grid_from_json(v);
      else if (key == "output") c.output_path = v.get<std::string>();
      else if (key == "jobs") c.jobs = v.get<unsigned>();
      else if (key == "regret") {
        for (const auto& [rk, rv] : v.items()) {
          if (rk == "alpha") c.regret.alpha = rv.get<double>();
          else if (rk == "budget_multipliers") c.regret.budget_multipliers = rv.get<std::vector<double>>();
          else if (rk == "budgets") c.regret.budgets = rv.get<std::vector<double>>();
          else if (rk == "comparator") {
            const auto m = rv.get<std::string>();
            if (m == "learner_trajectory") c.regret.comparator = Comparator::LearnerTrajectory;
            else if (m == "own_trajectory") c.regret.comparator = Comparator::OwnTrajectory;
            else throw ValidationError("unknown comparator '" + m + "'");
          } else throw ValidationError("unknown regret key '" + rk + "'");
        }
      } else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  if (c.policies.empty()) throw ValidationError("config needs at least one policy");
  if (c.seeds.empty()) throw ValidationError("config needs at least one seed");
  for (const auto& p : c.policies) {
    try {
      (void)parse_policy(p);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

/// Scenario for one (grid point, run seed). Generated scenarios get a fresh
/// instance per seed unless vary_scenario_with_seed is false.
inline ScenarioFactory make_factory(const ExperimentConfig& c) {
  if (const auto* path = std::get_if<std::string>(&c.scenario)) {
    const Scenario base = read_scenario_file(*path);
    return [base](const GridPoint& point, std::uint64_t) {
      Scenario s = base;
      apply_hyperparameters(s, point);
      validate(s);
      return s;
    };
  }
  const ScenarioSpec spec = std::get<ScenarioSpec>(c.scenario);
  const bool vary = c.vary_scenario_with_seed;
  return [spec, vary](const GridPoint& point, std::uint64_t seed) {
    ScenarioSpec sp = spec;
    for (const auto& [name, v] : point) {
      const auto iv = static_cast<std::size_t>(std::llround(v));
      if (name == "budget") sp.budget = v;
      else if (name == "K") sp.K = iv;
      else if (name == "kappa") sp.kappa = v;
      else if (name == "gamma") sp.gamma = v;
      else if (name == "r") sp.r = iv;
      else if (name == "N") sp.N = iv;
      else if (name == "M") sp.M = iv;
    }
    if (vary) sp.seed = derive_seed(spec.seed, {seed});
    return build_scenario(sp).scenario;
  };
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

inline std::string summary_path(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + ".summary.json";
  return out.substr(0, dot) + ".summary.json";
}

}  // namespace detail

inline std::string summary_path_for(const std::string& out) { return detail::summary_path(out); }

inline const char* kResultsHeader =
    "run_id,policy,seed,B,K,kappa,gamma,lambda,r,rounds,total_weighted_quality,normalized_entropy,status";

/// Results table: config echo comment line, header, one row per run.
inline std::string results_csv(const std::vector<SweepRun>& runs, const json& config_echo) {
  std::string out = "# config: " + config_echo.dump() + "\n";
  out += kResultsHeader;
  out += "\n";
  for (std::size_t a = 0; a < runs.size(); ++a) {
    const auto& r = runs[a];
    const auto& h = r.hyper;
    out += std::to_string(a) + "," + detail::csv_field(r.policy) + "," + std::to_string(r.seed) + ",";
    if (r.result) {
      out += format_number(h.budget) + "," + std::to_string(h.K) + "," + format_number(h.kappa) + "," +
             format_number(h.gamma) + "," + format_number(h.lambda) + "," + std::to_string(h.r) + "," +
             std::to_string(r.result->rounds) + "," + format_number(r.result->total_weighted_quality) + "," +
             format_number(r.result->normalized_entropy) + ",ok\n";
    } else {
      out += ",,,,,,,,," + detail::csv_field("error: " + r.error) + "\n";
    }
  }
  return out;
}

inline json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.count}}; }

inline json results_summary(const std::vector<SweepRun>& runs, const json& config_echo) {
  json cells = json::array();
  for (const auto& c : summarize_cells(runs)) {
    json params = json::object();
    for (const auto& [name, v] : c.point) params[name] = v;
    cells.push_back({{"cell", c.cell},
                     {"params", params},
                     {"policy", c.policy},
                     {"failed", c.failed},
                     {"total_weighted_quality", stat_json(c.total_weighted_quality)},
                     {"normalized_entropy", stat_json(c.normalized_entropy)},
                     {"rounds", stat_json(c.rounds)}});
  }
  return {{"config", config_echo}, {"cells", cells}};
}

inline std::vector<Policy> parse_policies(const std::vector<std::string>& names) {
  std::vector<Policy> out;
  for (const auto& n : names) {
    auto p = parse_policy(n);
    if (p.kind == PolicyKind::Oracle) throw ValidationError("the oracle policy is only available to the regret command");
    out.push_back(p);
  }
  return out;
}

/// Executes every run of the config; returns the sweep rows.
inline std::vector<SweepRun> execute_runs(const ExperimentConfig& c) {
  const auto policies = parse_policies(c.policies);
  return sweep(make_factory(c), policies, c.sweep, c.seeds, c.jobs, [](RunResult& r) { r.records.clear(); });
}

struct CommandOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> trace_path;
  std::optional<std::string> out_path;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed_override;
};

inline ExperimentConfig resolve_config(const CommandOptions& opt) {
  ExperimentConfig c = opt.config_path ? load_config(*opt.config_path) : ExperimentConfig{};
  if (opt.out_path) c.output_path = *opt.out_path;
  if (opt.jobs) c.jobs = *opt.jobs;
  if (opt.seed_override) c.seeds = {*opt.seed_override};
  return c;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const EnumerationGuardError& e) {
    err << "error: " << e.what() << "\n";
    return kExitGuard;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

/// Writes a scenario_v1 file from a spec (config file: either a bare spec or
/// an experiment config with a "scenario" object) or from a trace.
inline int cmd_generate(const CommandOptions& opt, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    ScenarioSpec spec;
    if (opt.config_path) {
      json doc;
      try {
        doc = json::parse(read_text_file(*opt.config_path));
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
      }
      if (doc.is_object() && doc.contains("scenario")) {
        if (!doc["scenario"].is_object()) throw ValidationError("generate needs a scenario spec, not a scenario file");
        doc = doc["scenario"];
      }
      spec = spec_from_json(doc);
    }
    if (opt.trace_path) spec.source = *opt.trace_path;
    if (opt.seed_override) spec.seed = *opt.seed_override;
    validate(spec);
    const auto gen = build_scenario(spec);
    for (const auto& w : gen.warnings) err << "warning: " << w << "\n";
    write_text_file(opt.out_path.value_or("scenario.json"), serialize(gen.scenario));
    return static_cast<int>(kExitOk);
  });
}

/// Runs every (cell, policy, seed) and writes the CSV plus a JSON summary.
inline int cmd_run(const CommandOptions& opt, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto c = resolve_config(opt);
    const json echo = to_json_doc(c);
    const auto runs = execute_runs(c);
    write_text_file(c.output_path, results_csv(runs, echo));
    write_text_file(detail::summary_path(c.output_path), results_summary(runs, echo).dump(2) + "\n");
    std::size_t failed = 0;
    for (const auto& r : runs)
      if (!r.result) {
        ++failed;
        err << "run " << r.policy << " seed " << r.seed << " failed: " << r.error << "\n";
      }
    return static_cast<int>(failed == 0 ? kExitOk : kExitRunFailures);
  });
}

struct LogFit {
  double a = 0.0;
  double b = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit of y = a + b ln(x).
inline std::optional<LogFit> fit_log(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t a = 0; a < xs.size(); ++a) {
    mx += std::log(xs[a]);
    my += ys[a];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t a = 0; a < xs.size(); ++a) {
    const double dx = std::log(xs[a]) - mx, dy = ys[a] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) return std::nullopt;
  LogFit f;
  f.b = sxy / sxx;
  f.a = my - f.b * mx;
  double ss_res = 0.0;
  for (std::size_t a = 0; a < xs.size(); ++a) {
    const double e = ys[a] - (f.a + f.b * std::log(xs[a]));
    ss_res += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  return f;
}

struct RegretPoint {
  std::string policy;
  double budget = 0.0;
  double multiplier = 0.0;  // 0 when the budget was given explicitly
  Stat regret;
  Stat rounds;
};

struct RegretCurve {
  Scenario scenario;
  StaticOptimum optimum;
  std::vector<RegretPoint> points;
  std::map<std::string, std::optional<LogFit>> fits;
};

/// Mean alpha-regret of each policy over the budget grid on one fixed
/// instance. Budgets default to multiples of the optimal selection's cost.
inline RegretCurve regret_curve(const ExperimentConfig& c) {
  RegretCurve curve;
  if (const auto* path = std::get_if<std::string>(&c.scenario))
    curve.scenario = read_scenario_file(*path);
  else
    curve.scenario = build_scenario(std::get<ScenarioSpec>(c.scenario)).scenario;
  const Scenario& base = curve.scenario;
  check_enumeration_guard(base, base.hyper.K);
  curve.optimum = static_optimum(base);
  const double c_star = curve.optimum.selection.total_cost;

  std::vector<std::pair<double, double>> grid;  // (budget, multiplier)
  if (!c.regret.budgets.empty())
    for (double b : c.regret.budgets) grid.emplace_back(b, 0.0);
  else
    for (double m : c.regret.budget_multipliers) grid.emplace_back(m * c_star, m);
  if (grid.empty()) throw ValidationError("regret needs at least one budget");

  std::vector<Policy> policies;
  for (const auto& name : c.policies) {
    auto p = parse_policy(name);
    if (p.kind == PolicyKind::Oracle) p = Policy::oracle(curve.optimum.selection);
    policies.push_back(p);
  }

  // one job per (policy, budget, seed); results land in fixed slots
  struct Job {
    std::size_t policy, budget;
    std::uint64_t seed;
    double regret = 0.0, rounds = 0.0;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < policies.size(); ++p)
    for (std::size_t b = 0; b < grid.size(); ++b)
      for (auto seed : c.seeds) jobs.push_back({p, b, seed});

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t a = next++; a < jobs.size(); a = next++) {
      auto& job = jobs[a];
      try {
        Scenario s = base;
        s.hyper.budget = grid[job.budget].first;
        validate(s);
        const auto res = run(s, policies[job.policy], job.seed);
        check_run_invariants(res, s);
        job.regret = alpha_regret(res, s, c.regret.alpha, c.regret.comparator).regret;
        job.rounds = static_cast<double>(res.rounds);
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(c.jobs, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& job : jobs)
    if (!job.error.empty()) throw std::runtime_error("regret run failed: " + job.error);

  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::vector<double> xs, ys;
    for (std::size_t b = 0; b < grid.size(); ++b) {
      std::vector<double> regrets, rounds;
      for (const auto& job : jobs)
        if (job.policy == p && job.budget == b) {
          regrets.push_back(job.regret);
          rounds.push_back(job.rounds);
        }
      RegretPoint pt{c.policies[p], grid[b].first, grid[b].second, summarize(regrets), summarize(rounds)};
      xs.push_back(pt.budget);
      ys.push_back(pt.regret.mean);
      curve.points.push_back(pt);
    }
    curve.fits[c.policies[p]] = fit_log(xs, ys);
  }
  return curve;
}

inline std::string regret_csv(const RegretCurve& curve, const json& config_echo) {
  std::string out = "# config: " + config_echo.dump() + "\n";
  out += "policy,B,budget_multiplier,runs,mean_regret,std_regret,mean_rounds\n";
  for (const auto& p : curve.points)
    out += detail::csv_field(p.policy) + "," + format_number(p.budget) + "," + format_number(p.multiplier) + "," +
           std::to_string(p.regret.count) + "," + format_number(p.regret.mean) + "," + format_number(p.regret.stddev) +
           "," + format_number(p.rounds.mean) + "\n";
  for (const auto& [policy, fit] : curve.fits) {
    if (fit)
      out += "# fit " + policy + ": a=" + format_number(fit->a) + " b=" + format_number(fit->b) +
             " r2=" + format_number(fit->r2) + "\n";
    else
      out += "# fit " + policy + ": omitted (fewer than two budgets)\n";
  }
  return out;
}

inline json regret_summary(const RegretCurve& curve, const json& config_echo) {
  json fits = json::object();
  for (const auto& [policy, fit] : curve.fits)
    fits[policy] = fit ? json{{"a", fit->a}, {"b", fit->b}, {"r2", fit->r2}}
                       : json{{"omitted", true}, {"reason", "fewer than two budgets"}};
  json points = json::array();
  for (const auto& p : curve.points)
    points.push_back({{"policy", p.policy},
                      {"B", p.budget},
                      {"budget_multiplier", p.multiplier},
                      {"regret", stat_json(p.regret)},
                      {"rounds", stat_json(p.rounds)}});
  json opt = json::array();
  for (const auto& ref : curve.optimum.selection.chosen) opt.push_back({ref.worker, ref.option});
  return {{"config", config_echo},
          {"optimal_selection", opt},
          {"optimal_cost", curve.optimum.selection.total_cost},
          {"optimal_utility", curve.optimum.utility},
          {"delta_min", curve.optimum.delta_min},
          {"delta_max", curve.optimum.delta_max},
          {"points", points},
          {"fits", fits}};
}

inline int cmd_regret(const CommandOptions& opt, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto c = resolve_config(opt);
    if (!opt.out_path && !(opt.config_path && json::parse(read_text_file(*opt.config_path)).contains("output")))
      c.output_path = "regret.csv";
    const json echo = to_json_doc(c);
    const auto curve = regret_curve(c);
    write_text_file(c.output_path, regret_csv(curve, echo));
    write_text_file(detail::summary_path(c.output_path), regret_summary(curve, echo).dump(2) + "\n");
    return static_cast<int>(kExitOk);
  });
}

}  // namespace divrecruit
