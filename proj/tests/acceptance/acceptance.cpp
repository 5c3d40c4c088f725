// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   divrecruit_acceptance            run every criterion
//   divrecruit_acceptance 2 5        run only the listed criteria

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "divrecruit/divrecruit.hpp"
#include "support/oracles.hpp"

using namespace divrecruit;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeeds = 10;

// Criterion 9 bookkeeping: every run played by criteria 2-7 is checked here.
struct InvariantLedger {
  std::mutex mu;
  std::size_t checked = 0;
  std::vector<std::string> violations;

  void run(const RunResult& r, const Scenario& s, const std::string& where) {
    std::string err;
    try {
      check_run_invariants(r, s);
    } catch (const std::exception& e) {
      err = e.what();
    }
    std::lock_guard lock(mu);
    ++checked;
    if (!err.empty()) violations.push_back(where + ": " + err);
  }

  void selection(const Selection& sel, const Scenario& s, double budget, const std::string& where) {
    std::string err;
    try {
      check_selection(sel, s, s.hyper.K);
      if (sel.total_cost > budget + 1e-12) err = "selection exceeds budget";
    } catch (const std::exception& e) {
      err = e.what();
    }
    std::lock_guard lock(mu);
    ++checked;
    if (!err.empty()) violations.push_back(where + ": " + err);
  }
};

InvariantLedger ledger;

struct Verdict {
  bool pass = false;
  std::string detail;
};

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t a = next++; a < n; a = next++) body(a);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(hw, n); ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << std::fixed << v;
  return o.str();
}

// The default synthetic instance for a given replicate.
ScenarioSpec default_spec(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.seed = derive_seed(1, {seed});
  return spec;
}

struct Cell {
  std::vector<double> quality, entropy, rounds;
};

// Runs `policy` on replicate seeds 1..kSeeds of the spec produced by `make`.
Cell replicate(const std::function<ScenarioSpec(std::uint64_t)>& make, const Policy& policy, const std::string& tag) {
  Cell c;
  c.quality.resize(kSeeds);
  c.entropy.resize(kSeeds);
  c.rounds.resize(kSeeds);
  parallel_for(kSeeds, [&](std::size_t a) {
    const std::uint64_t seed = a + 1;
    const auto s = build_scenario(make(seed)).scenario;
    const auto r = run(s, policy, seed);
    ledger.run(r, s, tag + " seed " + std::to_string(seed));
    c.quality[a] = r.total_weighted_quality;
    c.entropy[a] = r.normalized_entropy;
    c.rounds[a] = static_cast<double>(r.rounds);
  });
  return c;
}

double mean(const std::vector<double>& xs) { return summarize(xs).mean; }

// ---------------------------------------------------------------------------

Verdict formula_suite() {
  std::vector<std::string> failed;
  std::size_t count = 0;
  auto check = [&](const std::string& name, double got, double want, double tol) {
    ++count;
    if (!(std::abs(got - want) <= tol)) failed.push_back(name + " got " + std::to_string(got));
  };
  auto check_true = [&](const std::string& name, bool ok) {
    ++count;
    if (!ok) failed.push_back(name);
  };

  check("task_weight m=0", task_weight(0, 0.01, 0.4, 5), 0.01, 1e-9);
  check("task_weight m=5", task_weight(5, 0.01, 0.4, 5), 0.00620728, 1e-8);
  check("task_weight m=1e6", task_weight(1000000, 0.01, 0.4, 5), 0.004, 1e-12);

  // coverage counting: three coverers in one round, then rounds 1 and 3 only
  {
    Scenario s;
    s.tasks = {{0, 0.5}, {1, 0.5}};
    for (std::size_t i = 0; i < 3; ++i) {
      s.workers.push_back({i, 1.0, {}});
      s.options.push_back({{i, 0, {0}, 1.0}});
    }
    s.hyper.K = 3;
    s.hyper.r = 1;
    auto w = make_world(s);
    update_coverage(Selection{}, w, s);
    check_true("empty selection leaves counts", w.coverage_counts == std::vector<std::uint64_t>{0, 0});
    update_coverage(make_selection(s, {{0, 0}, {1, 0}, {2, 0}}), w, s);
    check_true("three coverers count once", w.coverage_counts[0] == 1);
    auto w2 = make_world(s);
    update_coverage(make_selection(s, {{0, 0}}), w2, s);
    update_coverage(Selection{}, w2, s);
    update_coverage(make_selection(s, {{1, 0}}), w2, s);
    check_true("covered in rounds 1 and 3", w2.coverage_counts[0] == 2);
  }

  check("overlap single", overlap_quality({0.7}, 1), 0.7, 1e-9);
  check("overlap gamma 0", overlap_quality({0.5, 0.3}, 0), 0.5, 1e-9);
  check("overlap gamma 1", overlap_quality({0.5, 0.3}, 1), 0.65, 1e-9);

  {
    Scenario s;
    s.tasks = {{0, 0.6}, {1, 0.4}};
    s.workers = {{0, 1.0, {}}, {1, 1.0, {}}, {2, 1.0, {}}};
    s.options = {{{0, 0, {0}, 1.0}}, {{1, 0, {0}, 1.0}}, {{2, 0, {1}, 1.0}}};
    s.hyper.K = 3;
    s.hyper.r = 1;
    const QualityMap q{{{0, 0}, 0.5}, {{1, 0}, 0.3}, {{2, 1}, 0.9}};
    check("round utility empty", round_utility(Selection{}, {}, make_world(s), s), 0.0, 1e-9);
    check("round utility two tasks", round_utility(make_selection(s, {{0, 0}, {1, 0}, {2, 0}}), q, make_world(s), s), 0.75,
          1e-9);
    auto w = make_world(s);
    w.coverage_counts = {1000000, 1000000};
    for (std::size_t j = 0; j < 2; ++j) w.current_weights[j] = task_weight(w.coverage_counts[j], s.tasks[j].initial_weight, 0.4, 5);
    check("round utility saturated", round_utility(make_selection(s, {{2, 0}}), {{{2, 1}, 0.9}}, w, s), 0.4 * 0.4 * 0.9,
          1e-12);
  }

  {
    Scenario s;
    s.tasks = {{0, 0.2}, {1, 0.2}, {2, 0.2}, {3, 0.2}, {4, 0.2}};
    s.workers = {{0, 1.0, {}}, {1, 1.0, {}}};
    s.options = {{{0, 0, {0, 1}, 1.0}, {0, 1, {2, 3, 4}, 1.5}}, {{1, 0, {0}, 1.0}}};
    s.hyper.K = 1;
    s.hyper.r = 1;
    auto b = make_bandit_state(s);
    record_round(b, make_selection(s, {{0, 0}}), {{{0, 0}, 0.4}, {{0, 1}, 0.6}}, s);
    check("record first observation", b.quality_means[0], 0.5, 1e-9);
    check_true("record first count", b.sample_counts[0] == 2);
    record_round(b, make_selection(s, {{0, 1}}), {{{0, 2}, 1.0}, {{0, 3}, 1.0}, {{0, 4}, 1.0}}, s);
    check("record running mean", b.quality_means[0], 0.8, 1e-9);
    check_true("record unselected unchanged", b.sample_counts[1] == 0 && b.quality_means[1] == 0.0);
  }

  {
    BanditState b;
    b.sample_counts = {10, 10, 0};
    b.quality_means = {0.5, 0.5, 0.0};
    b.total_samples = 100;
    check("ucb closed form", ucb_quality(b, 0, 2), 1.675394, 1e-5);
    check_true("ucb unseen infinite", std::isinf(ucb_quality(b, 2, 2)));
    check_true("ucb symmetric", ucb_quality(b, 0, 2) == ucb_quality(b, 1, 2));
  }

  {
    Scenario s;
    s.tasks = {{0, 1.0}};
    for (std::size_t i = 0; i < 3; ++i) {
      s.workers.push_back({i, 1.0, {}});
      s.options.push_back({{i, 0, {0}, 1.0}});
    }
    s.hyper.K = 3;
    const std::vector<OptionRef> all{{0, 0}, {1, 0}, {2, 0}};
    check("U_r truncation", evaluate_utility({{0.5}, {0.9, 0.8, 0.7}, 1.0, 2}, all, s), 1.3 * 0.5, 1e-9);
    check("U_r single worker", evaluate_utility({{0.5}, {0.9, 0.8, 0.7}, 1.0, 2}, std::vector<OptionRef>{{1, 0}}, s), 0.4,
          1e-9);
    check("U_r full accuracy", evaluate_utility({{0.5}, {0.9, 0.8, 0.7}, 1.0, 3}, all, s),
          oracle::utility_r(s, all, {0.5}, {0.9, 0.8, 0.7}, 1.0, 3), 1e-9);
  }

  {
    Scenario s;
    s.tasks = {{0, 0.5}, {1, 0.5}};
    s.workers = {{0, 1.0, {}}, {1, 1.0, {}}};
    s.options = {{{0, 0, {0}, 1.0}}, {{1, 0, {1}, 1.0}}};
    s.hyper.K = 1;
    s.hyper.r = 1;
    const auto g = greedy_select({{0.5, 0.5}, {2.0, 1.0}, 1.0, 1}, s, 10, 1);
    check_true("greedy ratio dominance", g && g->chosen[0].worker == 0);
    check_true("greedy exhausted", !greedy_select({{0.5, 0.5}, {2.0, 1.0}, 1.0, 1}, s, 0.5, 1));
  }

  {
    Scenario s;
    for (std::size_t i = 0; i < 4; ++i) {
      s.tasks.push_back({i, 0.25});
      s.workers.push_back({i, 1.0, {}});
      s.options.push_back({{i, 0, {i}, 1.0}});
    }
    s.hyper.K = 2;
    s.hyper.r = 2;
    const auto bf = brute_force_select({std::vector<double>(4, 0.25), {0.3, 0.9, 0.1, 0.7}, 1.0, 2}, s, 10, 2);
    check_true("brute force separable", bf && bf->chosen == (std::vector<OptionRef>{{1, 0}, {3, 0}}));
  }

  {
    auto unit = [](std::size_t n, std::size_t k) {
      Scenario s;
      for (std::size_t i = 0; i < n; ++i) {
        s.tasks.push_back({i, 1.0 / static_cast<double>(n)});
        s.workers.push_back({i, 1.0, {}});
        s.options.push_back({{i, 0, {i}, 1.0}});
      }
      s.hyper.K = k;
      s.hyper.r = 1;
      return s;
    };
    const auto b6 = initialize_rounds(unit(6, 3));
    check_true("bootstrap partition", b6.rounds.size() == 2 && b6.rounds[1].chosen == (std::vector<OptionRef>{{3, 0}, {4, 0}, {5, 0}}));
    const auto b5 = initialize_rounds(unit(5, 3));
    check_true("bootstrap padding", b5.rounds.size() == 2 && b5.rounds[1].chosen == (std::vector<OptionRef>{{0, 0}, {3, 0}, {4, 0}}));
  }

  check("entropy uniform", normalized_entropy({2, 2, 2, 2}, 4), 1.0, 1e-9);
  check("entropy concentrated", normalized_entropy({0, 5, 0, 0}, 4), 0.0, 1e-9);
  check("entropy two masses", normalized_entropy({2, 2, 0, 0}, 4), 0.5, 1e-9);

  {
    Scenario s;
    std::vector<std::size_t> all;
    for (std::size_t j = 0; j < 10; ++j) {
      s.tasks.push_back({j, 0.1});
      all.push_back(j);
    }
    s.workers = {{0, 0.1, {QualityDistribution::Kind::PointMass, 1.0, 4.0}}};
    s.options = {{{0, 0, all, 1.0}}};
    s.hyper = {1.0, 0.0, 5.0, 1, 1, 3.0};
    const auto r = run(s, Policy::diversity_ucb(), 1);
    check_true("degenerate run rounds", r.rounds == 3);
    check("degenerate run total", r.total_weighted_quality, 3.0, 1e-9);
    s.hyper.budget = 0.5;
    check("tiny budget total", run(s, Policy::diversity_ucb(), 1).total_weighted_quality, 0.0, 1e-9);
  }

  Verdict v;
  v.pass = failed.empty();
  v.detail = std::to_string(count - failed.size()) + "/" + std::to_string(count) + " examples";
  for (const auto& f : failed) v.detail += "; FAILED " + f;
  return v;
}

Verdict oracle_equivalence() {
  constexpr int kInstances = 500;
  std::mt19937_64 gen(20240517);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0, below_half = 0, below_half_unbounded = 0, exhausted_mismatch = 0, compared = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < kInstances; ++trial) {
    const std::size_t n = 2 + gen() % 5, l = 1 + gen() % 2, m = 1 + gen() % 8;
    const std::size_t k = 1 + gen() % std::min<std::size_t>(3, n);
    auto s = oracle::random_instance(gen, n, l, m, k);
    // a mid-run learner: decayed weights and optimistic estimates
    std::vector<double> weights, est;
    for (const auto& t : s.tasks) weights.push_back(task_weight(gen() % 6, t.initial_weight, 0.4, 5.0));
    for (std::size_t i = 0; i < n; ++i) est.push_back(u(gen) + 2.0 * u(gen));
    const double gamma = 2.0 * u(gen);
    const double lo = cheapest_selection_cost(s, k);
    const double budget = u(gen) < 0.3 ? 1e9 : lo * (1.0 + 2.0 * u(gen));
    s.hyper.budget = budget;
    s.hyper.gamma = gamma;
    const UtilityObjective obj{weights, est, gamma, k};
    const auto g = greedy_select(obj, s, budget, k);
    const auto opt = brute_force_select(obj, s, budget, k);
    if (!g || !opt) {
      if (g.has_value() != opt.has_value()) ++exhausted_mismatch;
      continue;
    }
    ledger.selection(*g, s, budget, "oracle instance " + std::to_string(trial));
    ++compared;
    const double ug = evaluate_utility(obj, g->chosen, s);
    const double ug_ref = oracle::utility_r(s, g->chosen, weights, est, gamma, k);
    const double uopt = oracle::utility_r(s, opt->chosen, weights, est, gamma, k);
    if (std::abs(ug - ug_ref) > 1e-9) ++mismatches;
    if (ug < 0.5 * uopt - 1e-12) {
      ++below_half;
      below_half_unbounded += budget >= 1e9;
    }
    if (uopt > 0) worst_ratio = std::min(worst_ratio, ug / uopt);
  }
  Verdict v;
  v.pass = compared >= 100 && mismatches == 0 && below_half == 0 && exhausted_mismatch == 0;
  v.detail = std::to_string(compared) + " instances; U mismatches " + std::to_string(mismatches) + ", below 0.5*opt " +
             std::to_string(below_half) + " (" + std::to_string(below_half_unbounded) + " with a non-binding budget)" + ", feasibility disagreements " + std::to_string(exhausted_mismatch) +
             ", worst greedy/opt " + fmt(worst_ratio);
  return v;
}

Verdict directional_improvement() {
  const std::vector<double> budgets{300, 500, 850};
  const std::vector<std::size_t> ks{10, 17, 25};  // N/5, ceil(N/3), N/2 for N = 50
  const std::vector<Policy> policies{Policy::diversity_ucb(), Policy::old_ucb(), Policy::epsilon_greedy(0.1),
                                     Policy::epsilon_greedy(0.5)};
  const std::size_t per_cell = policies.size() * kSeeds;
  std::vector<double> q(budgets.size() * ks.size() * per_cell);
  parallel_for(q.size(), [&](std::size_t a) {
    const std::size_t cell = a / per_cell, p = (a % per_cell) / kSeeds, seed = a % kSeeds + 1;
    auto spec = default_spec(seed);
    spec.budget = budgets[cell / ks.size()];
    spec.K = ks[cell % ks.size()];
    const auto s = build_scenario(spec).scenario;
    const auto r = run(s, policies[p], seed);
    ledger.run(r, s, "directional cell " + std::to_string(cell) + " " + policies[p].label());
    q[a] = r.total_weighted_quality;
  });
  Verdict v;
  v.pass = true;
  for (std::size_t cell = 0; cell < budgets.size() * ks.size(); ++cell) {
    std::vector<double> means;
    for (std::size_t p = 0; p < policies.size(); ++p) {
      const auto first = q.begin() + static_cast<std::ptrdiff_t>(cell * per_cell + p * kSeeds);
      means.push_back(mean({first, first + static_cast<std::ptrdiff_t>(kSeeds)}));
    }
    const double best_baseline = *std::max_element(means.begin() + 1, means.end());
    const double lift = means[0] / best_baseline - 1.0;
    const bool ok = lift >= 0.05;
    v.pass = v.pass && ok;
    v.detail += "\n      B=" + fmt(budgets[cell / ks.size()], 0) + " K=" + std::to_string(ks[cell % ks.size()]) +
                ": div " + fmt(means[0], 3) + " old " + fmt(means[1], 3) + " eg0.1 " + fmt(means[2], 3) + " eg0.5 " +
                fmt(means[3], 3) + " lift " + fmt(100 * lift, 1) + "%" + (ok ? "" : "  <-- below 5%");
  }
  return v;
}

Verdict entropy_ordering() {
  const auto random = replicate(default_spec, Policy::random(), "entropy random");
  const auto eg = replicate(default_spec, Policy::epsilon_greedy(0.5), "entropy eg0.5");
  auto low_kappa = [](std::uint64_t seed) {
    auto spec = default_spec(seed);
    spec.kappa = 0.1;
    return spec;
  };
  const auto div = replicate(low_kappa, Policy::diversity_ucb(), "entropy div k0.1");
  const auto old = replicate(low_kappa, Policy::old_ucb(), "entropy old k0.1");
  Verdict v;
  const double hr = mean(random.entropy), he = mean(eg.entropy), hd = mean(div.entropy), ho = mean(old.entropy);
  v.pass = hr > he && hd > ho;
  v.detail = "random " + fmt(hr) + " > eps0.5 " + fmt(he) + "; diversity(kappa 0.1) " + fmt(hd) + " > old " + fmt(ho);
  return v;
}

Verdict gamma_monotonicity() {
  const std::vector<double> gammas{0, 0.5, 1, 2, 5};
  std::vector<Stat> stats;
  for (double g : gammas) {
    const auto cell = replicate(
        [g](std::uint64_t seed) {
          auto spec = default_spec(seed);
          spec.gamma = g;
          return spec;
        },
        Policy::diversity_ucb(), "gamma " + fmt(g, 1));
    stats.push_back(summarize(cell.quality));
  }
  int inversions = 0;
  bool within = true;
  Verdict v;
  for (std::size_t a = 0; a < stats.size(); ++a) {
    v.detail += (a ? ", " : "") + std::string("g=") + fmt(gammas[a], 1) + ":" + fmt(stats[a].mean, 3) + "+-" +
                fmt(stats[a].stddev, 3);
    if (a > 0 && stats[a].mean < stats[a - 1].mean) {
      ++inversions;
      const double pooled = std::sqrt((stats[a].stddev * stats[a].stddev + stats[a - 1].stddev * stats[a - 1].stddev) / 2);
      within = within && (stats[a - 1].mean - stats[a].mean) <= pooled;
    }
  }
  v.pass = inversions == 0 || (inversions == 1 && within);
  v.detail += "; inversions " + std::to_string(inversions);
  return v;
}

Verdict r_insensitivity() {
  auto with_r = [](std::size_t r) {
    return [r](std::uint64_t seed) {
      auto spec = default_spec(seed);
      spec.r = r;
      return spec;
    };
  };
  const double q2 = mean(replicate(with_r(2), Policy::diversity_ucb(), "r=2").quality);
  const double q3 = mean(replicate(with_r(3), Policy::diversity_ucb(), "r=3").quality);
  const double rel = std::abs(q3 - q2) / q2;
  return {rel < 0.03, "r=2 " + fmt(q2) + ", r=3 " + fmt(q3) + ", relative difference " + fmt(100 * rel, 2) + "%"};
}

Verdict regret_growth() {
  const auto config = load_config(DIVRECRUIT_SOURCE_DIR "/configs/regret_small.json");
  const auto& spec = std::get<ScenarioSpec>(config.scenario);
  const auto s = build_scenario(spec).scenario;
  if (s.num_workers() != 5 || s.hyper.K != 2 || s.max_options() != 2 || s.num_tasks() != 8)
    return {false, "regret instance is not N=5, K=2, L=2, M=8"};
  const auto opt = static_optimum(s);
  const double c_star = opt.selection.total_cost;
  std::vector<double> budgets;
  for (int e = 5; e <= 12; ++e) budgets.push_back(std::ldexp(c_star, e));
  const std::size_t n_seeds = config.seeds.size();
  std::vector<double> regret(budgets.size() * n_seeds);
  parallel_for(regret.size(), [&](std::size_t a) {
    Scenario sb = s;
    sb.hyper.budget = budgets[a / n_seeds];
    const auto seed = config.seeds[a % n_seeds];
    const auto r = run(sb, Policy::diversity_ucb(), seed);
    ledger.run(r, sb, "regret B=" + fmt(sb.hyper.budget, 1));
    regret[a] = alpha_regret(r, sb, 0.5).regret;
  });
  std::vector<double> means;
  Verdict v;
  v.detail = std::to_string(n_seeds) + " seeds; c*=" + fmt(c_star, 3) + "; mean regret";
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    const auto first = regret.begin() + static_cast<std::ptrdiff_t>(b * n_seeds);
    means.push_back(mean({first, first + static_cast<std::ptrdiff_t>(n_seeds)}));
    v.detail += " " + fmt(means.back(), 2);
  }
  const auto fit = fit_log(budgets, means);
  v.pass = n_seeds >= 30 && fit && fit->r2 >= 0.9 && fit->b > 0;
  if (fit) v.detail += "; fit a=" + fmt(fit->a, 3) + " b=" + fmt(fit->b, 3) + " R2=" + fmt(fit->r2, 4);
  return v;
}

Verdict reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "divrecruit_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto file = [&](const std::string& name) { return (dir / name).string(); };

  // a small trace for the trace-driven generator
  {
    std::ostringstream csv;
    csv << "entity_id,timestamp,latitude,longitude\n";
    std::mt19937_64 gen(5);
    std::normal_distribution<double> jitter(0.0, 0.002);
    for (int e = 0; e < 12; ++e)
      for (int t = 0; t < 60; ++t)
        csv << "cab" << e << "," << 1211018400 + 60 * t << "," << 37.77 + jitter(gen) << "," << -122.42 + jitter(gen) << "\n";
    write_text_file(file("trace.csv"), csv.str());
  }
  write_text_file(file("trace_spec.json"), R"({"M": 20, "N": 8, "K": 3, "option_size_range": [2, 6]})");
  write_text_file(file("run.json"), R"({"scenario": {"M": 80, "N": 12, "K": 4, "budget": 120, "area_m": 2000},
      "policies": ["diversity_ucb", "old_ucb", "epsilon_greedy:0.1", "epsilon_greedy:0.5", "random"],
      "seeds": [1, 2, 3], "sweep": {"gamma": [0, 1]}, "jobs": 4})");

  struct Command {
    std::string name;
    std::function<int(const std::string& out)> exec;
    std::vector<std::string> outputs;
  };
  std::ostringstream sink;
  const std::vector<Command> commands{
      {"generate",
       [&](const std::string& out) {
         CommandOptions o;
         o.out_path = out + ".json";
         return cmd_generate(o, sink);
       },
       {".json"}},
      {"generate-trace",
       [&](const std::string& out) {
         CommandOptions o;
         o.config_path = file("trace_spec.json");
         o.trace_path = file("trace.csv");
         o.out_path = out + ".json";
         return cmd_generate(o, sink);
       },
       {".json"}},
      {"run",
       [&](const std::string& out) {
         CommandOptions o;
         o.config_path = file("run.json");
         o.out_path = out + ".csv";
         return cmd_run(o, sink);
       },
       {".csv", ".summary.json"}},
      {"regret",
       [&](const std::string& out) {
         CommandOptions o;
         o.config_path = DIVRECRUIT_SOURCE_DIR "/configs/regret_small.json";
         o.out_path = out + ".csv";
         return cmd_regret(o, sink);
       },
       {".csv", ".summary.json"}},
  };

  Verdict v{true, ""};
  for (const auto& c : commands) {
    // both runs write to the same path so the echoed config is identical
    std::vector<std::string> first;
    bool ok = true;
    for (int pass = 0; pass < 2 && ok; ++pass) {
      const auto base = file(c.name);
      ok = c.exec(base) == 0;
      std::vector<std::string> bytes;
      for (const auto& ext : c.outputs) bytes.push_back(read_text_file(base + ext));
      if (pass == 0) first = bytes;
      else ok = ok && bytes == first;
    }
    v.pass = v.pass && ok;
    v.detail += (v.detail.empty() ? "" : ", ") + c.name + (ok ? " identical" : " DIFFERS");
  }
  fs::remove_all(dir);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Verdict()> fn;
  };
  const std::vector<Criterion> all{
      {1, "formula unit suite", 1, formula_suite},
      {2, "greedy vs brute-force oracle", 60, oracle_equivalence},
      {3, "directional improvement over baselines (>=5%)", 600, directional_improvement},
      {4, "entropy ordering", 300, entropy_ordering},
      {5, "gamma monotonicity", 300, gamma_monotonicity},
      {6, "r-insensitivity (<3%)", 900, r_insensitivity},
      {7, "regret growth a + b ln B", 600, regret_growth},
      {8, "byte-identical reruns", std::numeric_limits<double>::infinity(), reproducibility},
  };
  std::set<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << c.id << ": " << c.name << " (" << fmt(secs, 2) << " s"
              << (std::isfinite(c.limit_s) ? ", limit " + fmt(c.limit_s, 0) + " s" : "") << (in_time ? "" : ", TOO SLOW")
              << ") " << v.detail << std::endl;
  }

  if (wanted.empty() || wanted.count(9)) {
    const bool pass = ledger.violations.empty() && ledger.checked > 0;
    failures += !pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion 9: budget safety and feasibility invariants ("
              << ledger.checked << " runs/selections checked inline, " << ledger.violations.size() << " violations)";
    for (std::size_t a = 0; a < std::min<std::size_t>(5, ledger.violations.size()); ++a)
      std::cout << "\n      " << ledger.violations[a];
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
