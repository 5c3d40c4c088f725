#pragma once

// JSON documents: scenario files ("scenario_v1") and scenario specs.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "divrecruit/model.hpp"
#include "divrecruit/scenario.hpp"

namespace divrecruit {

using json = nlohmann::json;

inline constexpr const char* kScenarioVersion = "scenario_v1";

inline json to_json_doc(const Scenario& s) {
  json tasks = json::array();
  for (const auto& t : s.tasks) tasks.push_back({{"id", t.id}, {"initial_weight", t.initial_weight}});
  json workers = json::array();
  for (std::size_t i = 0; i < s.workers.size(); ++i) {
    const auto& w = s.workers[i];
    json opts = json::array();
    for (const auto& o : s.options[i]) opts.push_back({{"id", o.option_id}, {"tasks", o.task_ids}, {"cost", o.cost}});
    json quality = {{"distribution", w.quality.kind == QualityDistribution::Kind::Beta ? "beta" : "point_mass"},
                    {"mean", w.quality.mean},
                    {"concentration", w.quality.concentration}};
    workers.push_back({{"id", w.worker_id}, {"cost_factor", w.cost_factor}, {"quality", quality}, {"options", opts}});
  }
  const auto& h = s.hyper;
  return {{"version", kScenarioVersion},
          {"rng_seed", s.rng_seed},
          {"hyperparameters",
           {{"kappa", h.kappa}, {"gamma", h.gamma}, {"lambda", h.lambda}, {"r", h.r}, {"K", h.K}, {"budget", h.budget}}},
          {"tasks", tasks},
          {"workers", workers}};
}

inline Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("version", std::string{}) != kScenarioVersion)
    throw ValidationError(std::string("scenario document must have version \"") + kScenarioVersion + "\"");
  Scenario s;
  try {
    s.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    const auto& h = doc.at("hyperparameters");
    s.hyper.kappa = h.at("kappa").get<double>();
    s.hyper.gamma = h.at("gamma").get<double>();
    s.hyper.lambda = h.at("lambda").get<double>();
    s.hyper.r = h.at("r").get<std::size_t>();
    s.hyper.K = h.at("K").get<std::size_t>();
    s.hyper.budget = h.at("budget").get<double>();
    for (const auto& t : doc.at("tasks")) s.tasks.push_back({t.at("id").get<std::size_t>(), t.at("initial_weight").get<double>()});
    for (const auto& w : doc.at("workers")) {
      WorkerTruth wt;
      wt.worker_id = w.at("id").get<std::size_t>();
      wt.cost_factor = w.at("cost_factor").get<double>();
      const auto& q = w.at("quality");
      const auto dist = q.at("distribution").get<std::string>();
      if (dist == "beta") wt.quality.kind = QualityDistribution::Kind::Beta;
      else if (dist == "point_mass") wt.quality.kind = QualityDistribution::Kind::PointMass;
      else throw ValidationError("unknown quality distribution '" + dist + "'");
      wt.quality.mean = q.at("mean").get<double>();
      wt.quality.concentration = q.value("concentration", 4.0);
      std::vector<WorkerOption> opts;
      for (const auto& o : w.at("options"))
        opts.push_back({wt.worker_id, o.at("id").get<std::size_t>(), o.at("tasks").get<std::vector<std::size_t>>(),
                        o.at("cost").get<double>()});
      s.workers.push_back(wt);
      s.options.push_back(std::move(opts));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scenario document: ") + e.what());
  }
  validate(s);
  return s;
}

/// Canonical text form: two-space indent, trailing newline.
inline std::string serialize(const Scenario& s) { return to_json_doc(s).dump(2) + "\n"; }

inline Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline Scenario read_scenario_file(const std::string& path) { return parse_scenario(read_text_file(path)); }

inline json to_json_doc(const ScenarioSpec& spec) {
  return {{"M", spec.M},
          {"N", spec.N},
          {"K", spec.resolved_K()},
          {"kappa", spec.kappa},
          {"gamma", spec.gamma},
          {"lambda", spec.lambda},
          {"r", spec.r},
          {"budget", spec.budget},
          {"option_size_range", {spec.option_size_min, spec.option_size_max}},
          {"options_per_worker", spec.options_per_worker},
          {"assignment_radius_m", spec.assignment_radius_m},
          {"seed", spec.seed},
          {"source", spec.source},
          {"quality_concentration", spec.quality_concentration},
          {"quality_mean_range", {spec.quality_mean_min, spec.quality_mean_max}},
          {"area_m", spec.area_m},
          {"walk_steps", spec.walk_steps},
          {"walk_step_m", spec.walk_step_m},
          {"grid_cell_m", spec.grid_cell_m},
          {"min_visits", spec.min_visits}};
}

/// Reads a spec; absent keys keep their defaults, unknown keys are errors.
inline ScenarioSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("scenario spec must be an object");
  ScenarioSpec s;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "M") s.M = v.get<std::size_t>();
      else if (key == "N") s.N = v.get<std::size_t>();
      else if (key == "K") s.K = v.get<std::size_t>();
      else if (key == "kappa") s.kappa = v.get<double>();
      else if (key == "gamma") s.gamma = v.get<double>();
      else if (key == "lambda") s.lambda = v.get<double>();
      else if (key == "r") s.r = v.get<std::size_t>();
      else if (key == "budget") s.budget = v.get<double>();
      else if (key == "option_size_range") {
        const auto r = v.get<std::vector<std::size_t>>();
        if (r.size() != 2) throw ValidationError("option_size_range needs [min, max]");
        s.option_size_min = r[0];
        s.option_size_max = r[1];
      } else if (key == "options_per_worker") s.options_per_worker = v.get<std::size_t>();
      else if (key == "assignment_radius_m") s.assignment_radius_m = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "source") s.source = v.get<std::string>();
      else if (key == "quality_concentration") s.quality_concentration = v.get<double>();
      else if (key == "quality_mean_range") {
        const auto r = v.get<std::vector<double>>();
        if (r.size() != 2) throw ValidationError("quality_mean_range needs [min, max]");
        s.quality_mean_min = r[0];
        s.quality_mean_max = r[1];
      } else if (key == "area_m") s.area_m = v.get<double>();
      else if (key == "walk_steps") s.walk_steps = v.get<std::size_t>();
      else if (key == "walk_step_m") s.walk_step_m = v.get<double>();
      else if (key == "grid_cell_m") s.grid_cell_m = v.get<double>();
      else if (key == "min_visits") s.min_visits = v.get<std::size_t>();
      else throw ValidationError("unknown scenario spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scenario spec: ") + e.what());
  }
  validate(s);
  return s;
}

}  // namespace divrecruit
