#pragma once

// Learner statistics, UCB quality estimates and the r-accurate greedy
// recruitment rule, plus an exhaustive selector used as a reference.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divrecruit/model.hpp"

namespace divrecruit {

struct BanditState {
  std::vector<std::vector<std::uint64_t>> option_counts;  // [worker][option]
  std::vector<std::uint64_t> sample_counts;               // per worker
  std::vector<double> quality_means;                      // per worker
  std::uint64_t total_samples = 0;

  friend bool operator==(const BanditState&, const BanditState&) = default;
};

inline BanditState make_bandit_state(const Scenario& s) {
  BanditState b;
  b.option_counts.reserve(s.num_workers());
  for (const auto& opts : s.options) b.option_counts.emplace_back(opts.size(), 0);
  b.sample_counts.assign(s.num_workers(), 0);
  b.quality_means.assign(s.num_workers(), 0.0);
  return b;
}

/// Folds one round of observations into the running means. Each selected
/// option contributes one sample per task it covers.
inline void record_round(BanditState& state, const Selection& sel, const QualityMap& realized, const Scenario& s) {
  std::size_t expected = 0;
  for (const auto& ref : sel.chosen) expected += s.option(ref.worker, ref.option).task_ids.size();
  if (realized.size() != expected) throw std::invalid_argument("record_round: observations do not match the selected options");

  for (const auto& ref : sel.chosen) {
    const auto& opt = s.option(ref.worker, ref.option);
    double sum = 0.0;
    for (std::size_t j : opt.task_ids) {
      auto it = realized.find({ref.worker, j});
      if (it == realized.end()) throw std::invalid_argument("record_round: missing observation for a covered task");
      if (!(it->second >= 0.0 && it->second <= 1.0)) throw std::invalid_argument("record_round: quality outside [0,1]");
      sum += it->second;
    }
    const auto n = static_cast<double>(state.sample_counts[ref.worker]);
    const auto added = static_cast<double>(opt.task_ids.size());
    state.quality_means[ref.worker] = (state.quality_means[ref.worker] * n + sum) / (n + added);
    state.sample_counts[ref.worker] += opt.task_ids.size();
    state.option_counts[ref.worker][ref.option] += 1;
    state.total_samples += opt.task_ids.size();
  }
}

/// Optimistic quality estimate; +inf for a worker never observed.
inline double ucb_quality(const BanditState& state, std::size_t worker, std::size_t k) {
  const std::uint64_t n = state.sample_counts.at(worker);
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double bonus = std::sqrt(static_cast<double>(k + 1) * std::log(static_cast<double>(state.total_samples)) /
                                 static_cast<double>(n));
  return state.quality_means[worker] + bonus;
}

inline std::vector<double> ucb_estimates(const BanditState& state, std::size_t k) {
  std::vector<double> out(state.sample_counts.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ucb_quality(state, i, k);
  return out;
}

/// What the greedy rule maximizes: per-task weights, per-worker quality
/// estimates, the overlap factor and the accuracy r (number of coverers
/// whose estimates enter the overlap sum).
struct UtilityObjective {
  std::vector<double> weights;
  std::vector<double> estimates;
  double gamma = 1.0;
  std::size_t accuracy = 2;
};

/// U_r of a set of options: the max term uses every coverer, the sum term
/// keeps only the `accuracy` largest estimates of each task.
inline double evaluate_utility(const UtilityObjective& obj, std::span<const OptionRef> refs, const Scenario& s) {
  std::vector<std::vector<double>> coverers(s.num_tasks());
  for (const auto& ref : refs)
    for (std::size_t j : s.option(ref.worker, ref.option).task_ids) coverers[j].push_back(obj.estimates[ref.worker]);
  double total = 0.0;
  for (std::size_t j = 0; j < coverers.size(); ++j) {
    auto& q = coverers[j];
    if (q.empty()) continue;
    std::sort(q.begin(), q.end(), std::greater<>());
    const std::size_t keep = std::min(q.size(), obj.accuracy);
    const double sum = std::accumulate(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(keep), 0.0);
    total += obj.weights[j] * (q.front() + obj.gamma * sum) / (1.0 + obj.gamma);
  }
  return total;
}

inline UtilityObjective diversity_objective(const BanditState& state, const WorldState& world, const Scenario& s) {
  return {world.current_weights, ucb_estimates(state, s.hyper.K), s.hyper.gamma, s.hyper.r};
}

inline double ucb_round_utility(const Selection& candidate, const BanditState& state, const WorldState& world,
                                const Scenario& s, double gamma, std::size_t r) {
  const UtilityObjective obj{world.current_weights, ucb_estimates(state, s.hyper.K), gamma, r};
  return evaluate_utility(obj, candidate.chosen, s);
}

/// std::nullopt means the budget cannot fund any further K-selection.
using SelectionOutcome = std::optional<Selection>;

inline std::vector<double> cheapest_option_costs(const Scenario& s) {
  std::vector<double> out(s.num_workers());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& o : s.options[i]) c = std::min(c, o.cost);
    out[i] = c;
  }
  return out;
}

/// Cost of the cheapest possible K-selection.
inline double cheapest_selection_cost(const Scenario& s, std::size_t k) {
  auto mins = cheapest_option_costs(s);
  if (k > mins.size()) return std::numeric_limits<double>::infinity();
  std::partial_sort(mins.begin(), mins.begin() + static_cast<std::ptrdiff_t>(k), mins.end());
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) total += mins[a];
  return total;
}

inline bool can_afford_selection(const Scenario& s, double budget, std::size_t k) {
  return cheapest_selection_cost(s, k) <= budget;
}

namespace detail {

inline std::size_t bit_words(std::size_t m) { return (m + 63) / 64; }

// Fills a greedy selection batch by batch. Per-task state of the partial
// selection is the sorted list of its top-r estimates.
class GreedyFill {
 public:
  GreedyFill(const UtilityObjective& obj, const Scenario& s, double budget, std::size_t k)
      : obj_(obj), s_(s), budget_(budget), k_(k), m_(s.num_tasks()), words_(bit_words(m_)), r_(obj.accuracy) {
    if (obj.weights.size() != m_ || obj.estimates.size() != s.num_workers())
      throw std::invalid_argument("greedy_select: objective does not match scenario");
    if (r_ < 1) throw std::invalid_argument("greedy_select: accuracy must be at least 1");
    for (double q : obj.estimates)
      if (!std::isfinite(q)) throw std::logic_error("greedy_select: every worker needs an observation first");

    offset_.resize(s.num_workers() + 1, 0);
    for (std::size_t i = 0; i < s.num_workers(); ++i) offset_[i + 1] = offset_[i] + s.options[i].size();
    bits_.assign(offset_.back() * words_, 0);
    for (std::size_t i = 0; i < s.num_workers(); ++i)
      for (std::size_t l = 0; l < s.options[i].size(); ++l)
        for (std::size_t j : s.options[i][l].task_ids) bits_[(offset_[i] + l) * words_ + j / 64] |= 1ULL << (j % 64);

    top_.assign(m_ * r_, 0.0);
    top_count_.assign(m_, 0);
    base_.assign(m_, 0.0);
    used_.assign(s.num_workers(), 0);
    min_cost_ = cheapest_option_costs(s);
    single_gain_.assign(offset_.back(), 0.0);
  }

  SelectionOutcome run() {
    if (k_ > s_.num_workers() || !can_afford_selection(s_, budget_, k_)) return std::nullopt;
    std::vector<OptionRef> chosen;
    while (chosen.size() < k_) {
      const std::size_t batch = std::min(r_, k_ - chosen.size());
      prepare_step(chosen.size(), batch);
      if (!best_found_) return std::nullopt;
      for (std::size_t d = 0; d < batch; ++d) {
        commit(best_[d]);
        chosen.push_back(best_[d]);
      }
    }
    return make_selection(s_, std::move(chosen));
  }

 private:
  const std::uint64_t* option_bits(std::size_t flat) const { return bits_.data() + flat * words_; }

  double task_value(const double* vals, std::size_t count) const {
    if (count == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t a = 0; a < count; ++a) sum += vals[a];
    return (vals[0] + obj_.gamma * sum) / (1.0 + obj_.gamma);
  }

  // Value of task j after adding `extra` (sorted descending) to its coverers.
  double task_value_with(std::size_t j, const double* extra, std::size_t n_extra) {
    const double* cur = top_.data() + j * r_;
    const std::size_t c = top_count_[j];
    merged_.clear();
    std::size_t a = 0, b = 0;
    while (merged_.size() < r_ && (a < c || b < n_extra)) {
      if (b >= n_extra || (a < c && cur[a] >= extra[b]))
        merged_.push_back(cur[a++]);
      else
        merged_.push_back(extra[b++]);
    }
    return task_value(merged_.data(), merged_.size());
  }

  void commit(const OptionRef& ref) {
    used_[ref.worker] = 1;
    cost_so_far_ += s_.option(ref.worker, ref.option).cost;
    const double q = obj_.estimates[ref.worker];
    for (std::size_t j : s_.option(ref.worker, ref.option).task_ids) {
      double* cur = top_.data() + j * r_;
      std::size_t& c = top_count_[j];
      std::size_t pos = c;
      while (pos > 0 && cur[pos - 1] < q) --pos;
      if (pos < r_) {
        const std::size_t last = std::min(c, r_ - 1);
        for (std::size_t t = last; t > pos; --t) cur[t] = cur[t - 1];
        cur[pos] = q;
        c = std::min(c + 1, r_);
      }
      base_[j] = task_value(cur, c);
    }
  }

  void prepare_step(std::size_t chosen, std::size_t batch) {
    avail_.clear();
    for (std::size_t i = 0; i < s_.num_workers(); ++i)
      if (!used_[i]) avail_.push_back(i);

    for (std::size_t i : avail_) {
      const double q = obj_.estimates[i];
      for (std::size_t l = 0; l < s_.options[i].size(); ++l) {
        double g = 0.0;
        for (std::size_t j : s_.options[i][l].task_ids) g += obj_.weights[j] * (task_value_with(j, &q, 1) - base_[j]);
        single_gain_[offset_[i] + l] = g;
      }
    }

    by_cost_ = avail_;
    std::sort(by_cost_.begin(), by_cost_.end(), [&](std::size_t a, std::size_t b) {
      return min_cost_[a] != min_cost_[b] ? min_cost_[a] < min_cost_[b] : a < b;
    });
    cost_rank_.assign(s_.num_workers(), std::numeric_limits<std::size_t>::max());
    prefix_.assign(by_cost_.size() + 1, 0.0);
    for (std::size_t a = 0; a < by_cost_.size(); ++a) {
      cost_rank_[by_cost_[a]] = a;
      prefix_[a + 1] = prefix_[a] + min_cost_[by_cost_[a]];
    }

    batch_ = batch;
    completion_ = k_ - chosen - batch;
    members_.assign(batch, {});
    member_flat_.assign(batch, 0);
    covered_.assign((batch + 1) * words_, 0);
    multi_.assign((batch + 1) * words_, 0);
    best_found_ = false;
    best_ratio_ = -std::numeric_limits<double>::infinity();
    search(0, 0, 0.0, 0.0);
  }

  // Cheapest way to fill `completion_` more slots with available workers
  // outside the current batch.
  double completion_cost() const {
    std::size_t t = 0;
    for (;;) {
      std::size_t t2 = 0;
      for (std::size_t d = 0; d < batch_; ++d)
        if (cost_rank_[members_[d].worker] < completion_ + t) ++t2;
      if (t2 == t) break;
      t = t2;
    }
    double total = prefix_[completion_ + t];
    for (std::size_t d = 0; d < batch_; ++d)
      if (cost_rank_[members_[d].worker] < completion_ + t) total -= min_cost_[members_[d].worker];
    return total;
  }

  void search(std::size_t depth, std::size_t start, double gain, double cost) {
    for (std::size_t pos = start; pos < avail_.size(); ++pos) {
      if (avail_.size() - pos < batch_ - depth) return;
      const std::size_t i = avail_[pos];
      for (std::size_t l = 0; l < s_.options[i].size(); ++l) {
        const std::size_t flat = offset_[i] + l;
        const double c = cost + s_.options[i][l].cost;
        if (cost_so_far_ + c > budget_) continue;
        members_[depth] = {i, l};
        member_flat_[depth] = flat;
        const std::uint64_t* ob = option_bits(flat);
        const std::uint64_t* cov = covered_.data() + depth * words_;
        const std::uint64_t* mul = multi_.data() + depth * words_;
        std::uint64_t* cov2 = covered_.data() + (depth + 1) * words_;
        std::uint64_t* mul2 = multi_.data() + (depth + 1) * words_;
        for (std::size_t w = 0; w < words_; ++w) {
          mul2[w] = mul[w] | (cov[w] & ob[w]);
          cov2[w] = cov[w] | ob[w];
        }
        const double g = gain + single_gain_[flat];
        if (depth + 1 < batch_)
          search(depth + 1, pos + 1, g, c);
        else
          leaf(g, c);
      }
    }
  }

  void leaf(double gain, double cost) {
    if (cost_so_far_ + cost + completion_cost() > budget_) return;
    const std::uint64_t* mul = multi_.data() + batch_ * words_;
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t bits = mul[w];
      while (bits) {
        const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        extra_.clear();
        double singles = 0.0;
        for (std::size_t d = 0; d < batch_; ++d) {
          if (option_bits(member_flat_[d])[j / 64] & (1ULL << (j % 64))) {
            const double q = obj_.estimates[members_[d].worker];
            extra_.push_back(q);
            singles += task_value_with(j, &q, 1) - base_[j];
          }
        }
        std::sort(extra_.begin(), extra_.end(), std::greater<>());
        const double joint = task_value_with(j, extra_.data(), extra_.size()) - base_[j];
        gain += obj_.weights[j] * (joint - singles);
      }
    }
    const double ratio = gain / cost;
    if (!best_found_ || ratio > best_ratio_) {
      best_found_ = true;
      best_ratio_ = ratio;
      best_.assign(members_.begin(), members_.end());
    }
  }

  const UtilityObjective& obj_;
  const Scenario& s_;
  double budget_;
  std::size_t k_, m_, words_, r_;

  std::vector<std::size_t> offset_;
  std::vector<std::uint64_t> bits_;
  std::vector<double> top_;
  std::vector<std::size_t> top_count_;
  std::vector<double> base_;
  std::vector<char> used_;
  std::vector<double> min_cost_;
  std::vector<double> single_gain_;
  double cost_so_far_ = 0.0;

  std::vector<std::size_t> avail_, by_cost_, cost_rank_;
  std::vector<double> prefix_;
  std::size_t batch_ = 0, completion_ = 0;
  std::vector<OptionRef> members_, best_;
  std::vector<std::size_t> member_flat_;
  std::vector<std::uint64_t> covered_, multi_;
  std::vector<double> merged_, extra_;
  bool best_found_ = false;
  double best_ratio_ = 0.0;
};

}  // namespace detail

/// Greedy recruitment: repeatedly adds the batch of min(r, K - |chosen|)
/// options from distinct unchosen workers with the largest marginal-U per
/// unit cost. A batch is admissible only if the selection can still be
/// completed within `budget` using the cheapest options of the other
/// workers. Ties go to the lexicographically smallest batch.
inline SelectionOutcome greedy_select(const UtilityObjective& obj, const Scenario& s, double budget, std::size_t k) {
  return detail::GreedyFill(obj, s, budget, k).run();
}

inline SelectionOutcome greedy_select(const BanditState& state, const WorldState& world, const Scenario& s) {
  return greedy_select(diversity_objective(state, world, s), s, world.remaining_budget, s.hyper.K);
}

class EnumerationGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kEnumerationGuard = 1e7;

/// Upper bound on the number of K-selections: C(N, K) * L^K.
inline double enumeration_size(std::size_t n, std::size_t k, std::size_t l) {
  if (k > n) return 0.0;
  double comb = 1.0;
  for (std::size_t a = 0; a < k; ++a) comb = comb * static_cast<double>(n - a) / static_cast<double>(a + 1);
  return comb * std::pow(static_cast<double>(l), static_cast<double>(k));
}

inline void check_enumeration_guard(const Scenario& s, std::size_t k) {
  const double size = enumeration_size(s.num_workers(), k, s.max_options());
  if (size > kEnumerationGuard)
    throw EnumerationGuardError("instance too large to enumerate (" + std::to_string(size) + " selections > 1e7)");
}

/// Visits every K-selection (one option per chosen worker) in lexicographic
/// (worker, option) order.
inline void for_each_k_selection(const Scenario& s, std::size_t k,
                                 const std::function<void(std::span<const OptionRef>, double)>& visit) {
  std::vector<OptionRef> cur;
  cur.reserve(k);
  const std::size_t n = s.num_workers();
  std::function<void(std::size_t, double)> rec = [&](std::size_t start, double cost) {
    if (cur.size() == k) {
      visit(cur, cost);
      return;
    }
    for (std::size_t i = start; i + (k - cur.size()) <= n; ++i) {
      for (std::size_t l = 0; l < s.options[i].size(); ++l) {
        cur.push_back({i, l});
        rec(i + 1, cost + s.options[i][l].cost);
        cur.pop_back();
      }
    }
  };
  rec(0, 0.0);
}

/// Exact maximizer of U (every coverer counted) over K-selections costing at
/// most `budget`. Throws EnumerationGuardError on instances that are too big.
inline SelectionOutcome brute_force_select(const UtilityObjective& obj, const Scenario& s, double budget, std::size_t k) {
  check_enumeration_guard(s, k);
  UtilityObjective full = obj;
  full.accuracy = std::max<std::size_t>(k, 1);
  SelectionOutcome best;
  double best_value = -std::numeric_limits<double>::infinity();
  for_each_k_selection(s, k, [&](std::span<const OptionRef> refs, double cost) {
    if (cost > budget) return;
    const double v = evaluate_utility(full, refs, s);
    if (!best || v > best_value) {
      best_value = v;
      best = make_selection(s, {refs.begin(), refs.end()});
    }
  });
  return best;
}

inline SelectionOutcome brute_force_select(const BanditState& state, const WorldState& world, const Scenario& s) {
  return brute_force_select(diversity_objective(state, world, s), s, world.remaining_budget, s.hyper.K);
}

struct Bootstrap {
  BanditState state;
  std::vector<Selection> rounds;
};

/// ceil(N/K) opening selections that recruit every worker at least once
/// with its option 0; the last one is padded with the lowest-index workers.
inline Bootstrap initialize_rounds(const Scenario& s) {
  Bootstrap out{make_bandit_state(s), {}};
  const std::size_t n = s.num_workers();
  const std::size_t k = s.hyper.K;
  if (k == 0) throw std::invalid_argument("initialize_rounds: K must be positive");
  for (std::size_t first = 0; first < n; first += k) {
    std::vector<OptionRef> refs;
    for (std::size_t i = first; i < std::min(n, first + k); ++i) refs.push_back({i, 0});
    for (std::size_t pad = 0; refs.size() < k; ++pad) refs.push_back({pad, 0});
    out.rounds.push_back(make_selection(s, std::move(refs)));
  }
  return out;
}

}  // namespace divrecruit
