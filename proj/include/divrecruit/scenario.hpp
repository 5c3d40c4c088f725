#pragma once

// Scenario construction from mobility traces (CSV: entity_id, timestamp,
// latitude, longitude) or from a synthetic city, following the recipe:
// popular locations become tasks, each worker is eligible for tasks near its
// trace, options are random subsets of eligible tasks with linear costs.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "divrecruit/model.hpp"
#include "divrecruit/random.hpp"

namespace divrecruit {

struct TracePoint {
  std::string entity_id;
  double timestamp = 0.0;  // seconds since the Unix epoch
  double latitude = 0.0;
  double longitude = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct TraceData {
  std::vector<TracePoint> points;
  std::size_t data_rows = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based line numbers
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to generate a scenario. K == 0 means ceil(N / 3).
struct ScenarioSpec {
  std::size_t M = 300;
  std::size_t N = 50;
  std::size_t K = 0;
  double kappa = 0.4;
  double gamma = 1.0;
  double lambda = 5.0;
  std::size_t r = 2;
  double budget = 850.0;
  std::size_t option_size_min = 5;
  std::size_t option_size_max = 15;
  std::size_t options_per_worker = 5;
  double assignment_radius_m = 200.0;
  std::uint64_t seed = 1;
  std::string source = "synthetic";

  double quality_concentration = 4.0;
  double quality_mean_min = 0.05;
  double quality_mean_max = 0.95;

  // synthetic city
  double area_m = 10000.0;
  std::size_t walk_steps = 200;
  double walk_step_m = 150.0;

  // trace ingestion
  double grid_cell_m = 100.0;
  std::size_t min_visits = 5;

  std::size_t resolved_K() const noexcept { return K == 0 ? (N + 2) / 3 : K; }

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

inline void validate(const ScenarioSpec& spec) {
  if (spec.M == 0) throw ValidationError("M must be positive");
  if (spec.N == 0) throw ValidationError("N must be positive");
  if (spec.option_size_min < 1 || spec.option_size_min > spec.option_size_max || spec.option_size_max > spec.M)
    throw ValidationError("option size range must satisfy 1 <= min <= max <= M");
  if (spec.options_per_worker == 0) throw ValidationError("options_per_worker must be positive");
  if (!(spec.assignment_radius_m > 0.0)) throw ValidationError("assignment radius must be positive");
  if (!(spec.quality_concentration > 0.0)) throw ValidationError("quality concentration must be positive");
  if (!(spec.quality_mean_min > 0.0 && spec.quality_mean_min < spec.quality_mean_max && spec.quality_mean_max < 1.0))
    throw ValidationError("quality mean range must lie inside (0,1)");
  if (!(spec.area_m > 0.0 && spec.walk_step_m >= 0.0 && spec.grid_cell_m > 0.0))
    throw ValidationError("geometry parameters must be positive");
  Hyperparameters h{spec.kappa, spec.gamma, spec.lambda, spec.r, spec.resolved_K(), spec.budget};
  validate(h, spec.N);
}

inline constexpr double kEarthRadiusM = 6371000.0;

inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Epoch seconds, or ISO-8601 "YYYY-MM-DD[T ]hh:mm:ss[.fff][Z|+hh:mm|-hh:mm]".
inline bool parse_timestamp(std::string_view s, double& out) {
  s = trim(s);
  if (parse_double(s, out)) return true;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
    return false;
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d) ||
      !parse_int(s.substr(11, 2), hh) || !parse_int(s.substr(14, 2), mm) || !parse_int(s.substr(17, 2), ss))
    return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) return false;
  double frac = 0.0;
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t n = 1;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
    if (n == 1) return false;
    std::string digits = "0" + std::string(rest.substr(0, n));
    if (!parse_double(digits, frac)) return false;
    rest.remove_prefix(n);
  }
  double offset = 0.0;
  if (rest == "Z" || rest.empty()) {
  } else if ((rest.front() == '+' || rest.front() == '-') && rest.size() == 6 && rest[3] == ':') {
    unsigned oh = 0, om = 0;
    if (!parse_int(rest.substr(1, 2), oh) || !parse_int(rest.substr(4, 2), om)) return false;
    offset = (rest.front() == '+' ? 1.0 : -1.0) * (oh * 3600.0 + om * 60.0);
  } else {
    return false;
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  out = static_cast<double>(days) * 86400.0 + hh * 3600.0 + mm * 60.0 + ss + frac - offset;
  return true;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Parses a trace held in memory. Malformed rows (wrong arity, bad numbers,
/// coordinates out of range) are skipped; more than 1% of them is fatal.
inline TraceData parse_trace_text(std::string_view text) {
  TraceData data;
  std::size_t line_no = 0;
  bool first = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (first) {
      first = false;
      double tmp = 0.0;
      if (fields.size() == 4 && !detail::parse_double(fields[2], tmp) && !detail::parse_double(fields[3], tmp)) continue;
    }
    ++data.data_rows;
    TracePoint p;
    const bool ok = fields.size() == 4 && !detail::trim(fields[0]).empty() &&
                    detail::parse_timestamp(fields[1], p.timestamp) && detail::parse_double(fields[2], p.latitude) &&
                    detail::parse_double(fields[3], p.longitude) && p.latitude >= -90.0 && p.latitude <= 90.0 &&
                    p.longitude >= -180.0 && p.longitude <= 180.0;
    if (!ok) {
      data.malformed_lines.push_back(line_no);
      continue;
    }
    p.entity_id = std::string(detail::trim(fields[0]));
    data.points.push_back(std::move(p));
  }
  if (data.data_rows == 0) throw TraceError("trace is empty");
  if (static_cast<double>(data.malformed_lines.size()) > 0.01 * static_cast<double>(data.data_rows)) {
    std::string msg = "trace has " + std::to_string(data.malformed_lines.size()) + " malformed rows out of " +
                      std::to_string(data.data_rows) + " (limit 1%); lines:";
    for (auto l : data.malformed_lines) msg += " " + std::to_string(l);
    throw TraceError(msg);
  }
  std::stable_sort(data.points.begin(), data.points.end(), [](const TracePoint& a, const TracePoint& b) {
    return std::tie(a.entity_id, a.timestamp) < std::tie(b.entity_id, b.timestamp);
  });
  return data;
}

inline TraceData parse_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_trace_text(text);
}

struct GeneratedScenario {
  Scenario scenario;
  std::vector<std::string> warnings;
};

namespace detail {

/// Common tail of both builders: options, costs, qualities and weights from
/// per-worker eligible task lists.
inline GeneratedScenario assemble(const std::vector<std::vector<std::size_t>>& eligible, const ScenarioSpec& spec) {
  GeneratedScenario out;
  Scenario& s = out.scenario;
  s.rng_seed = spec.seed;
  Rng rng(derive_seed(spec.seed, "assemble"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mean_dist(spec.quality_mean_min, spec.quality_mean_max);

  std::vector<double> raw(spec.M);
  double total = 0.0;
  for (auto& w : raw) {
    do w = unit(rng);
    while (w <= 0.0);
    total += w;
  }
  for (std::size_t j = 0; j < spec.M; ++j) s.tasks.push_back({j, raw[j] / total});

  for (std::size_t src = 0; src < eligible.size(); ++src) {
    double eps = 0.0;
    do eps = unit(rng);
    while (eps <= 0.0);
    const double mean = mean_dist(rng);
    const auto& elig = eligible[src];
    if (elig.empty()) {
      out.warnings.push_back("worker candidate " + std::to_string(src) + " has no eligible tasks and was dropped");
      continue;
    }
    const std::size_t i = s.workers.size();
    s.workers.push_back({i, eps, {QualityDistribution::Kind::Beta, mean, spec.quality_concentration}});

    std::vector<std::vector<std::size_t>> subsets;
    if (elig.size() < spec.option_size_min) {
      subsets.push_back(elig);
    } else {
      const std::size_t hi = std::min(spec.option_size_max, elig.size());
      std::uniform_int_distribution<std::size_t> size_dist(spec.option_size_min, hi);
      for (std::size_t l = 0; l < spec.options_per_worker; ++l) {
        std::vector<std::size_t> sub(size_dist(rng));
        std::sample(elig.begin(), elig.end(), sub.begin(), static_cast<std::ptrdiff_t>(sub.size()), rng);
        subsets.push_back(std::move(sub));
      }
    }
    // option 0 is the smallest (and hence cheapest) bundle
    std::stable_sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    std::vector<WorkerOption> opts;
    for (std::size_t l = 0; l < subsets.size(); ++l)
      opts.push_back({i, l, subsets[l], eps * static_cast<double>(subsets[l].size())});
    s.options.push_back(std::move(opts));
  }
  if (s.workers.size() < spec.N)
    out.warnings.push_back("N reduced from " + std::to_string(spec.N) + " to " + std::to_string(s.workers.size()));
  s.hyper = {spec.kappa, spec.gamma, spec.lambda, spec.r, spec.resolved_K(), spec.budget};
  validate(s);
  return out;
}

struct PlanePoint {
  double x = 0.0, y = 0.0;
};

}  // namespace detail

/// Synthetic city: tasks uniform in an area_m x area_m square; each worker
/// performs a reflected random walk from a uniform home point, and is
/// eligible for tasks within the assignment radius of any visited point.
/// Walks that reach fewer than option_size_min tasks are extended.
inline GeneratedScenario build_synthetic(const ScenarioSpec& spec) {
  validate(spec);
  Rng rng(derive_seed(spec.seed, "synthetic"));
  std::uniform_real_distribution<double> coord(0.0, spec.area_m);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  std::vector<detail::PlanePoint> tasks(spec.M);
  for (auto& t : tasks) t = {coord(rng), coord(rng)};

  const double cell = spec.assignment_radius_m;
  const auto cells = static_cast<std::int64_t>(std::ceil(spec.area_m / cell)) + 1;
  std::vector<std::vector<std::size_t>> bucket(static_cast<std::size_t>(cells * cells));
  auto cell_of = [&](double v) { return std::clamp<std::int64_t>(static_cast<std::int64_t>(v / cell), 0, cells - 1); };
  for (std::size_t j = 0; j < tasks.size(); ++j)
    bucket[static_cast<std::size_t>(cell_of(tasks[j].x) * cells + cell_of(tasks[j].y))].push_back(j);

  auto reflect = [&](double v) {
    if (v < 0.0) v = -v;
    if (v > spec.area_m) v = 2.0 * spec.area_m - v;
    return std::clamp(v, 0.0, spec.area_m);
  };

  std::vector<std::vector<std::size_t>> eligible(spec.N);
  const double r2 = spec.assignment_radius_m * spec.assignment_radius_m;
  for (std::size_t i = 0; i < spec.N; ++i) {
    detail::PlanePoint p{coord(rng), coord(rng)};
    std::vector<char> hit(spec.M, 0);
    std::size_t reached = 0;
    // walk on (up to 10x the nominal length) until a full-size bundle is possible
    const std::size_t max_steps = 10 * spec.walk_steps;
    for (std::size_t step = 0; step <= max_steps && (step <= spec.walk_steps || reached < spec.option_size_min); ++step) {
      if (step > 0) {
        const double a = angle(rng);
        p = {reflect(p.x + spec.walk_step_m * std::cos(a)), reflect(p.y + spec.walk_step_m * std::sin(a))};
      }
      const auto cx = cell_of(p.x), cy = cell_of(p.y);
      for (auto gx = std::max<std::int64_t>(0, cx - 1); gx <= std::min(cells - 1, cx + 1); ++gx)
        for (auto gy = std::max<std::int64_t>(0, cy - 1); gy <= std::min(cells - 1, cy + 1); ++gy)
          for (std::size_t j : bucket[static_cast<std::size_t>(gx * cells + gy)]) {
            const double dx = tasks[j].x - p.x, dy = tasks[j].y - p.y;
            if (!hit[j] && dx * dx + dy * dy <= r2) {
              hit[j] = 1;
              ++reached;
            }
          }
    }
    for (std::size_t j = 0; j < spec.M; ++j)
      if (hit[j]) eligible[i].push_back(j);
  }
  return detail::assemble(eligible, spec);
}

/// Trace-driven construction. Task locations are the centers of the M most
/// visited grid cells; entities near those locations fewer than
/// spec.min_visits times are dropped and the N most active remaining
/// entities become workers.
inline GeneratedScenario build_from_trace(const std::vector<TracePoint>& points, const ScenarioSpec& spec) {
  validate(spec);
  if (points.empty()) throw TraceError("trace has no points");
  double lat0 = 0.0;
  for (const auto& p : points) lat0 += p.latitude;
  lat0 /= static_cast<double>(points.size());
  constexpr double rad = std::numbers::pi / 180.0;
  const double m_per_deg_lat = kEarthRadiusM * rad;
  const double m_per_deg_lon = kEarthRadiusM * rad * std::cos(lat0 * rad);
  auto cell_key = [&](const TracePoint& p) {
    return std::make_pair(static_cast<std::int64_t>(std::floor(p.latitude * m_per_deg_lat / spec.grid_cell_m)),
                          static_cast<std::int64_t>(std::floor(p.longitude * m_per_deg_lon / spec.grid_cell_m)));
  };

  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> visits;
  for (const auto& p : points) ++visits[cell_key(p)];
  if (visits.size() < spec.M)
    throw TraceError("trace covers only " + std::to_string(visits.size()) + " grid cells, fewer than M");
  std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, std::size_t>> ranked(visits.begin(), visits.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  struct Site {
    double lat, lon;
  };
  std::vector<Site> sites;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> site_cells;
  for (std::size_t j = 0; j < spec.M; ++j) {
    const auto [cy, cx] = ranked[j].first;
    sites.push_back({(static_cast<double>(cy) + 0.5) * spec.grid_cell_m / m_per_deg_lat,
                     (static_cast<double>(cx) + 0.5) * spec.grid_cell_m / m_per_deg_lon});
    site_cells[ranked[j].first].push_back(j);
  }
  const auto reach = static_cast<std::int64_t>(std::ceil(spec.assignment_radius_m / spec.grid_cell_m)) + 1;

  // per entity: near-site visit count and eligible task set
  std::vector<std::string> ids;
  std::vector<std::size_t> near_visits;
  std::vector<std::vector<char>> hit;
  for (std::size_t a = 0; a < points.size(); ++a) {
    const auto& p = points[a];
    if (ids.empty() || ids.back() != p.entity_id) {
      ids.push_back(p.entity_id);
      near_visits.push_back(0);
      hit.emplace_back(spec.M, 0);
    }
    const auto [cy, cx] = cell_key(p);
    bool near = false;
    for (auto gy = cy - reach; gy <= cy + reach; ++gy)
      for (auto gx = cx - reach; gx <= cx + reach; ++gx) {
        auto it = site_cells.find({gy, gx});
        if (it == site_cells.end()) continue;
        for (std::size_t j : it->second)
          if (haversine_m(p.latitude, p.longitude, sites[j].lat, sites[j].lon) <= spec.assignment_radius_m) {
            hit.back()[j] = 1;
            near = true;
          }
      }
    if (near) ++near_visits.back();
  }

  std::vector<std::size_t> keep;
  for (std::size_t e = 0; e < ids.size(); ++e)
    if (near_visits[e] >= spec.min_visits) keep.push_back(e);
  if (keep.size() < spec.N)
    throw TraceError("only " + std::to_string(keep.size()) + " entities visit the task locations often enough; need N = " +
                     std::to_string(spec.N));
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return near_visits[a] > near_visits[b]; });
  keep.resize(spec.N);

  std::vector<std::vector<std::size_t>> eligible;
  for (std::size_t e : keep) {
    std::vector<std::size_t> el;
    for (std::size_t j = 0; j < spec.M; ++j)
      if (hit[e][j]) el.push_back(j);
    eligible.push_back(std::move(el));
  }
  return detail::assemble(eligible, spec);
}

/// Builds from spec.source: "synthetic" or a trace file path.
inline GeneratedScenario build_scenario(const ScenarioSpec& spec) {
  if (spec.source == "synthetic") return build_synthetic(spec);
  return build_from_trace(parse_trace(spec.source).points, spec);
}

}  // namespace divrecruit
