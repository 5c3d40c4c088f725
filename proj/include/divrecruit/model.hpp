#pragma once

// Problem instance and ground-truth utility: task weights with repetition
// decay, overlap-aware per-task quality, and the weighted round utility.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace divrecruit {

struct Task {
  std::size_t id = 0;
  double initial_weight = 0.0;

  friend bool operator==(const Task&, const Task&) = default;
};

/// A bundle of tasks a worker offers for one round, at a fixed cost.
struct WorkerOption {
  std::size_t worker_id = 0;
  std::size_t option_id = 0;
  std::vector<std::size_t> task_ids;
  double cost = 0.0;

  friend bool operator==(const WorkerOption&, const WorkerOption&) = default;
};

/// Bounded quality distribution on [0,1]. Beta is parameterized by its mean
/// and concentration (alpha + beta); PointMass always yields its mean.
struct QualityDistribution {
  enum class Kind { Beta, PointMass };

  Kind kind = Kind::Beta;
  double mean = 0.5;
  double concentration = 4.0;

  template <class Urbg>
  double sample(Urbg& gen) const {
    if (kind == Kind::PointMass) return mean;
    std::gamma_distribution<double> ga(mean * concentration, 1.0);
    std::gamma_distribution<double> gb((1.0 - mean) * concentration, 1.0);
    const double x = ga(gen);
    const double y = gb(gen);
    if (!(x + y > 0.0)) return mean;
    return std::clamp(x / (x + y), 0.0, 1.0);
  }

  friend bool operator==(const QualityDistribution&, const QualityDistribution&) = default;
};

struct WorkerTruth {
  std::size_t worker_id = 0;
  double cost_factor = 1.0;
  QualityDistribution quality;

  double quality_mean() const noexcept { return quality.mean; }

  friend bool operator==(const WorkerTruth&, const WorkerTruth&) = default;
};

struct Hyperparameters {
  double kappa = 0.4;
  double gamma = 1.0;
  double lambda = 5.0;
  std::size_t r = 2;
  std::size_t K = 17;
  double budget = 850.0;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Immutable problem instance. options[i] lists worker i's options, with
/// options[i][l].option_id == l.
struct Scenario {
  std::vector<Task> tasks;
  std::vector<WorkerTruth> workers;
  std::vector<std::vector<WorkerOption>> options;
  Hyperparameters hyper;
  std::uint64_t rng_seed = 0;

  std::size_t num_tasks() const noexcept { return tasks.size(); }
  std::size_t num_workers() const noexcept { return workers.size(); }
  std::size_t max_options() const noexcept {
    std::size_t l = 0;
    for (const auto& opts : options) l = std::max(l, opts.size());
    return l;
  }
  const WorkerOption& option(std::size_t worker, std::size_t opt) const { return options.at(worker).at(opt); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kWeightSumTolerance = 1e-9;

inline void validate(const Hyperparameters& h, std::size_t num_workers) {
  if (!(h.kappa >= 0.0 && h.kappa <= 1.0)) throw ValidationError("kappa must lie in [0,1]");
  if (!(h.gamma >= 0.0)) throw ValidationError("gamma must be non-negative");
  if (!(h.lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (!(h.budget > 0.0)) throw ValidationError("budget must be positive");
  if (h.K == 0) throw ValidationError("K must be positive");
  if (h.K > num_workers)
    throw ValidationError("K (" + std::to_string(h.K) + ") exceeds number of workers (" + std::to_string(num_workers) + ")");
  if (h.r < 1 || h.r > h.K) throw ValidationError("r must lie in [1, K]");
}

/// Checks every structural invariant of a scenario; throws ValidationError.
inline void validate(const Scenario& s) {
  if (s.tasks.empty()) throw ValidationError("scenario has no tasks");
  if (s.workers.empty()) throw ValidationError("scenario has no workers");
  double total = 0.0;
  for (std::size_t j = 0; j < s.tasks.size(); ++j) {
    if (s.tasks[j].id != j) throw ValidationError("task ids must be 0..M-1 in order");
    if (!(s.tasks[j].initial_weight > 0.0)) throw ValidationError("task initial weights must be positive");
    total += s.tasks[j].initial_weight;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) throw ValidationError("task initial weights must sum to 1");
  if (s.options.size() != s.workers.size()) throw ValidationError("options table does not match worker count");
  for (std::size_t i = 0; i < s.workers.size(); ++i) {
    const auto& w = s.workers[i];
    if (w.worker_id != i) throw ValidationError("worker ids must be 0..N-1 in order");
    if (!(w.cost_factor > 0.0)) throw ValidationError("cost factors must be positive");
    if (!(w.quality.mean >= 0.0 && w.quality.mean <= 1.0)) throw ValidationError("quality means must lie in [0,1]");
    if (w.quality.kind == QualityDistribution::Kind::Beta &&
        !(w.quality.mean > 0.0 && w.quality.mean < 1.0 && w.quality.concentration > 0.0))
      throw ValidationError("beta quality needs mean in (0,1) and positive concentration");
    if (s.options[i].empty()) throw ValidationError("worker " + std::to_string(i) + " has no options");
    for (std::size_t l = 0; l < s.options[i].size(); ++l) {
      const auto& o = s.options[i][l];
      if (o.worker_id != i || o.option_id != l) throw ValidationError("option ids out of order");
      if (o.task_ids.empty()) throw ValidationError("option task set must be non-empty");
      if (!(o.cost > 0.0)) throw ValidationError("option cost must be positive");
      auto ids = o.task_ids;
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("option task set has duplicates");
      if (ids.back() >= s.tasks.size()) throw ValidationError("option references unknown task");
    }
    // larger bundles never cost less than smaller ones of the same worker
    for (const auto& a : s.options[i])
      for (const auto& b : s.options[i])
        if (a.task_ids.size() < b.task_ids.size() && a.cost > b.cost)
          throw ValidationError("worker " + std::to_string(i) + " has a larger option cheaper than a smaller one");
  }
  validate(s.hyper, s.workers.size());
}

/// Decayed task weight after `coverage_count` rounds of coverage.
inline double task_weight(std::uint64_t coverage_count, double initial_weight, double kappa, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("task_weight: lambda must be positive");
  return ((1.0 - kappa) * std::exp(-static_cast<double>(coverage_count) / lambda) + kappa) * initial_weight;
}

/// Per-run mutable truth. Weights are always recomputed from the coverage
/// counters, never updated multiplicatively.
struct WorldState {
  std::vector<std::uint64_t> coverage_counts;
  std::vector<double> current_weights;
  double remaining_budget = 0.0;
  std::uint64_t round = 0;
  double cumulative_utility = 0.0;
};

inline WorldState make_world(const Scenario& s) {
  WorldState w;
  w.coverage_counts.assign(s.num_tasks(), 0);
  w.current_weights.reserve(s.num_tasks());
  for (const auto& t : s.tasks) w.current_weights.push_back(t.initial_weight);
  w.remaining_budget = s.hyper.budget;
  return w;
}

struct OptionRef {
  std::size_t worker = 0;
  std::size_t option = 0;

  friend auto operator<=>(const OptionRef&, const OptionRef&) = default;
};

/// Options recruited in one round, sorted by worker.
struct Selection {
  std::vector<OptionRef> chosen;
  double total_cost = 0.0;

  std::size_t size() const noexcept { return chosen.size(); }
  bool empty() const noexcept { return chosen.empty(); }

  friend bool operator==(const Selection&, const Selection&) = default;
};

inline Selection make_selection(const Scenario& s, std::vector<OptionRef> chosen) {
  std::sort(chosen.begin(), chosen.end());
  Selection sel;
  for (const auto& ref : chosen) sel.total_cost += s.option(ref.worker, ref.option).cost;
  sel.chosen = std::move(chosen);
  return sel;
}

/// Throws std::invalid_argument unless the selection has exactly `k`
/// members, at most one option per worker, valid indices and a consistent
/// total cost.
inline void check_selection(const Selection& sel, const Scenario& s, std::size_t k) {
  if (sel.chosen.size() != k) throw std::invalid_argument("selection must contain exactly K options");
  double cost = 0.0;
  for (std::size_t a = 0; a < sel.chosen.size(); ++a) {
    const auto& ref = sel.chosen[a];
    if (ref.worker >= s.num_workers() || ref.option >= s.options[ref.worker].size())
      throw std::invalid_argument("selection references an unknown option");
    if (a > 0 && sel.chosen[a - 1].worker >= ref.worker)
      throw std::invalid_argument("selection must hold at most one option per worker, sorted by worker");
    cost += s.option(ref.worker, ref.option).cost;
  }
  if (std::abs(cost - sel.total_cost) > 1e-9 * std::max(1.0, cost)) throw std::invalid_argument("selection total cost mismatch");
}

/// Realized quality of (worker, task) in one round.
using QualityMap = std::map<std::pair<std::size_t, std::size_t>, double>;

/// Overlap-aware quality of one task covered by workers with the given
/// qualities: interpolates between the max (gamma = 0) and the sum.
inline double overlap_quality(const std::vector<double>& qualities, double gamma) {
  if (qualities.empty()) throw std::invalid_argument("overlap_quality: empty coverer list");
  if (!(gamma >= 0.0)) throw std::invalid_argument("overlap_quality: gamma must be non-negative");
  double best = qualities.front();
  double sum = 0.0;
  for (double q : qualities) {
    best = std::max(best, q);
    sum += q;
  }
  return (best + gamma * sum) / (1.0 + gamma);
}

/// Marks every task covered by the selection once (not once per coverer),
/// then recomputes the current weights.
inline void update_coverage(const Selection& sel, WorldState& world, const Scenario& s) {
  std::vector<char> covered(s.num_tasks(), 0);
  for (const auto& ref : sel.chosen)
    for (std::size_t j : s.option(ref.worker, ref.option).task_ids) covered[j] = 1;
  for (std::size_t j = 0; j < s.num_tasks(); ++j) {
    if (covered[j]) ++world.coverage_counts[j];
    world.current_weights[j] = task_weight(world.coverage_counts[j], s.tasks[j].initial_weight, s.hyper.kappa, s.hyper.lambda);
  }
}

/// Weighted completion quality of a round under the world's current weights.
inline double round_utility(const Selection& sel, const QualityMap& realized, const WorldState& world, const Scenario& s) {
  const std::size_t m = s.num_tasks();
  std::vector<double> best(m, 0.0), sum(m, 0.0);
  std::vector<char> covered(m, 0);
  for (const auto& ref : sel.chosen) {
    for (std::size_t j : s.option(ref.worker, ref.option).task_ids) {
      auto it = realized.find({ref.worker, j});
      if (it == realized.end()) throw std::invalid_argument("round_utility: missing realized quality");
      const double q = it->second;
      best[j] = covered[j] ? std::max(best[j], q) : q;
      sum[j] += q;
      covered[j] = 1;
    }
  }
  const double gamma = s.hyper.gamma;
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    if (covered[j]) total += world.current_weights[j] * (best[j] + gamma * sum[j]) / (1.0 + gamma);
  return total;
}

}  // namespace divrecruit
