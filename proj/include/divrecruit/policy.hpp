#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "divrecruit/bandit.hpp"
#include "divrecruit/model.hpp"
#include "divrecruit/random.hpp"

namespace divrecruit {

enum class PolicyKind { DiversityUcb, OldUcb, EpsilonGreedy, Random, Oracle };

/// A recruitment strategy. Oracle replays a fixed selection and exists as a
/// reference for regret measurements.
struct Policy {
  PolicyKind kind = PolicyKind::DiversityUcb;
  double epsilon = 0.0;
  std::optional<Selection> fixed;

  static Policy diversity_ucb() { return {PolicyKind::DiversityUcb, 0.0, std::nullopt}; }
  static Policy old_ucb() { return {PolicyKind::OldUcb, 0.0, std::nullopt}; }
  static Policy epsilon_greedy(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
    return {PolicyKind::EpsilonGreedy, eps, std::nullopt};
  }
  static Policy random() { return {PolicyKind::Random, 0.0, std::nullopt}; }
  static Policy oracle(Selection sel) { return {PolicyKind::Oracle, 0.0, std::move(sel)}; }

  /// Whether the policy opens with the bootstrap rounds.
  bool learns() const noexcept {
    return kind == PolicyKind::DiversityUcb || kind == PolicyKind::OldUcb || kind == PolicyKind::EpsilonGreedy;
  }

  std::string label() const {
    switch (kind) {
      case PolicyKind::DiversityUcb: return "diversity_ucb";
      case PolicyKind::OldUcb: return "old_ucb";
      case PolicyKind::EpsilonGreedy: {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, epsilon);
        (void)ec;
        return "epsilon_greedy:" + std::string(buf, end);
      }
      case PolicyKind::Random: return "random";
      case PolicyKind::Oracle: return "oracle";
    }
    return "unknown";
  }
};

/// Parses "diversity_ucb", "old_ucb", "epsilon_greedy:<eps>", "random" or
/// "oracle" (the oracle's selection is resolved later by the caller).
inline Policy parse_policy(std::string_view text) {
  if (text == "diversity_ucb") return Policy::diversity_ucb();
  if (text == "old_ucb") return Policy::old_ucb();
  if (text == "random") return Policy::random();
  if (text == "oracle") return {PolicyKind::Oracle, 0.0, std::nullopt};
  constexpr std::string_view eg = "epsilon_greedy:";
  if (text.starts_with(eg)) {
    const auto num = text.substr(eg.size());
    double eps = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), eps);
    if (ec != std::errc{} || ptr != num.data() + num.size() || num.empty())
      throw std::invalid_argument("bad epsilon in policy '" + std::string(text) + "'");
    return Policy::epsilon_greedy(eps);
  }
  throw std::invalid_argument("unknown policy '" + std::string(text) + "'");
}

namespace detail {

inline constexpr int kRandomAttempts = 1000;

// Builds a K-selection worker by worker in a random order, choosing each
// option uniformly among those that keep the selection completable.
inline Selection constrained_random_selection(const Scenario& s, double budget, Rng& rng) {
  const std::size_t k = s.hyper.K;
  const auto mins = cheapest_option_costs(s);
  std::vector<std::size_t> order(s.num_workers());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> used(s.num_workers(), 0);
  std::vector<OptionRef> refs;
  double spent = 0.0;
  auto completion = [&](std::size_t skip, std::size_t count) {
    std::vector<double> c;
    for (std::size_t i = 0; i < s.num_workers(); ++i)
      if (!used[i] && i != skip) c.push_back(mins[i]);
    if (c.size() < count) return std::numeric_limits<double>::infinity();
    std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(count), c.end());
    return std::accumulate(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
  };
  for (std::size_t i : order) {
    if (refs.size() == k) break;
    const std::size_t left = k - refs.size() - 1;
    const double rest = completion(i, left);
    std::vector<std::size_t> ok;
    for (std::size_t l = 0; l < s.options[i].size(); ++l)
      if (spent + s.options[i][l].cost + rest <= budget) ok.push_back(l);
    if (ok.empty()) continue;
    const std::size_t l = ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    used[i] = 1;
    spent += s.options[i][l].cost;
    refs.push_back({i, l});
  }
  return make_selection(s, std::move(refs));
}

}  // namespace detail

/// Uniformly random K workers, each with a uniformly random option,
/// resampled until affordable. Falls back to constrained sequential
/// sampling when affordable draws are rare.
inline SelectionOutcome random_feasible_selection(const Scenario& s, double budget, Rng& rng) {
  const std::size_t k = s.hyper.K;
  if (!can_afford_selection(s, budget, k)) return std::nullopt;
  std::vector<std::size_t> all(s.num_workers());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked(k);
  for (int attempt = 0; attempt < detail::kRandomAttempts; ++attempt) {
    std::sample(all.begin(), all.end(), picked.begin(), static_cast<std::ptrdiff_t>(k), rng);
    std::vector<OptionRef> refs;
    double cost = 0.0;
    for (std::size_t i : picked) {
      const std::size_t l = std::uniform_int_distribution<std::size_t>(0, s.options[i].size() - 1)(rng);
      refs.push_back({i, l});
      cost += s.options[i][l].cost;
    }
    if (cost <= budget) return make_selection(s, std::move(refs));
  }
  auto sel = detail::constrained_random_selection(s, budget, rng);
  if (sel.size() != k) return std::nullopt;
  return sel;
}

/// Top-K workers by best static-weight ratio sum_j w1_j * mean_i / cost,
/// skipping options that would make the selection uncompletable.
inline SelectionOutcome exploit_selection(const BanditState& state, const Scenario& s, double budget) {
  const std::size_t k = s.hyper.K;
  if (!can_afford_selection(s, budget, k)) return std::nullopt;
  struct Cand {
    double ratio;
    OptionRef ref;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < s.num_workers(); ++i) {
    for (std::size_t l = 0; l < s.options[i].size(); ++l) {
      const auto& o = s.options[i][l];
      double w = 0.0;
      for (std::size_t j : o.task_ids) w += s.tasks[j].initial_weight;
      cands.push_back({w * state.quality_means[i] / o.cost, {i, l}});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.ratio > b.ratio; });

  const auto mins = cheapest_option_costs(s);
  std::vector<char> used(s.num_workers(), 0);
  auto completion = [&](std::size_t skip, std::size_t count) {
    std::vector<double> c;
    for (std::size_t i = 0; i < s.num_workers(); ++i)
      if (!used[i] && i != skip) c.push_back(mins[i]);
    std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(count), c.end());
    return std::accumulate(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
  };
  std::vector<OptionRef> refs;
  double spent = 0.0;
  for (const auto& c : cands) {
    if (refs.size() == k) break;
    if (used[c.ref.worker]) continue;
    const double cost = s.option(c.ref.worker, c.ref.option).cost;
    if (spent + cost + completion(c.ref.worker, k - refs.size() - 1) > budget) continue;
    used[c.ref.worker] = 1;
    spent += cost;
    refs.push_back(c.ref);
  }
  if (refs.size() != k) return std::nullopt;
  return make_selection(s, std::move(refs));
}

/// One round's recruitment decision for any policy kind.
inline SelectionOutcome policy_select(const Policy& policy, const BanditState& state, const WorldState& world,
                                      const Scenario& s, Rng& rng) {
  switch (policy.kind) {
    case PolicyKind::DiversityUcb:
      return greedy_select(state, world, s);
    case PolicyKind::OldUcb: {
      UtilityObjective obj;
      obj.weights.reserve(s.num_tasks());
      for (const auto& t : s.tasks) obj.weights.push_back(t.initial_weight);
      obj.estimates = ucb_estimates(state, s.hyper.K);
      obj.gamma = s.hyper.gamma;
      obj.accuracy = 1;
      return greedy_select(obj, s, world.remaining_budget, s.hyper.K);
    }
    case PolicyKind::EpsilonGreedy: {
      const double spent = s.hyper.budget - world.remaining_budget;
      if (spent < policy.epsilon * s.hyper.budget) return random_feasible_selection(s, world.remaining_budget, rng);
      return exploit_selection(state, s, world.remaining_budget);
    }
    case PolicyKind::Random:
      return random_feasible_selection(s, world.remaining_budget, rng);
    case PolicyKind::Oracle:
      if (!policy.fixed) throw std::logic_error("oracle policy has no selection");
      if (policy.fixed->total_cost > world.remaining_budget) return std::nullopt;
      return policy.fixed;
  }
  return std::nullopt;
}

}  // namespace divrecruit
