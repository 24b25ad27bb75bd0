#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>

#include "carhhmm/features.hpp"
#include "carhhmm/inference.hpp"
#include "carhhmm/models.hpp"
#include "carhhmm/simulate.hpp"

namespace carhhmm {

using nlohmann::json;

// ===========================================================================
// Run configuration
// ===========================================================================
//
// A single JSON document with four sections (model / features / fit / sim);
// every field has a default, so {} is a valid configuration. The variant name
// is the one switch that matters: it selects the exact structure of the model.

struct RunConfig {
  // model
  Variant variant = Variant::kCarHhmmDft;
  int n_coarse = 2;
  int n_fine = 2;
  int n_channels = 1;
  bool shared_fine = true;

  // features
  FeatureConfig features;         // window_h = 100, omega = 10
  double window_seconds = 2.0;
  double smooth_seconds = 0.1;
  double depth_threshold_m = 0.5;
  double min_dive_seconds = 10.0;

  // fit
  FitOptions fit;

  // sim
  int sim_n_dives = 100;
  WiggleFamily wiggle_family = WiggleFamily::kGamma;
  std::optional<json> sim_params;  // overrides the stock generating model

  ModelSpec model_spec() const {
    ModelSpec spec = make_model_spec(variant, n_coarse, n_fine, n_channels);
    spec.fine.shared_across_coarse = shared_fine;
    return spec;
  }
};

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("variant")) c.variant = parse_variant(m.at("variant").get<std::string>());
    c.n_coarse = m.value("n_coarse", c.n_coarse);
    c.n_fine = m.value("n_fine", c.n_fine);
    c.n_channels = m.value("n_channels", c.n_channels);
    c.shared_fine = m.value("shared_fine", c.shared_fine);
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    c.features.window_h = f.value("window_h", c.features.window_h);
    c.features.max_freq_omega = f.value("max_freq", c.features.max_freq_omega);
    c.window_seconds = f.value("window_seconds", c.window_seconds);
    c.smooth_seconds = f.value("smooth_seconds", c.smooth_seconds);
    c.depth_threshold_m = f.value("depth_threshold_m", c.depth_threshold_m);
    c.min_dive_seconds = f.value("min_dive_seconds", c.min_dive_seconds);
  }
  if (j.contains("fit")) {
    const json& f = j.at("fit");
    c.fit.restarts = f.value("restarts", c.fit.restarts);
    c.fit.seed = f.value("seed", c.fit.seed);
    c.fit.threads = f.value("threads", c.fit.threads);
    c.fit.max_iters = f.value("max_iters", c.fit.max_iters);
    c.fit.grad_tol_rel = f.value("grad_tol", c.fit.grad_tol_rel);
    c.fit.step_tol_rel = f.value("step_tol", c.fit.step_tol_rel);
  }
  if (j.contains("sim")) {
    const json& s = j.at("sim");
    c.sim_n_dives = s.value("n_dives", c.sim_n_dives);
    if (s.contains("wiggle_family")) {
      const std::string fam = s.at("wiggle_family").get<std::string>();
      if (fam == "gamma")
        c.wiggle_family = WiggleFamily::kGamma;
      else if (fam == "lognormal")
        c.wiggle_family = WiggleFamily::kLognormal;
      else
        throw std::invalid_argument("config: unknown wiggle_family '" + fam + "'");
    }
    if (s.contains("params")) c.sim_params = s.at("params");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  json j;
  in >> j;
  return config_from_json(j);
}

// ===========================================================================
// Parameter (de)serialization
// ===========================================================================

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  return m;
}

inline json params_to_json(const HierModel& model) {
  const auto& p = model.params;
  json j;
  if (model.spec.coarse.structure == CoarseStructure::kHmm)
    j["coarse_gamma"] = matrix_to_json(p.coarse_gamma->probs);
  json durations = json::array();
  for (const auto& g : p.coarse_emissions) durations.push_back({{"mean", g.mean}, {"sd", g.sd}});
  j["durations"] = std::move(durations);
  json fine_gammas = json::array();
  for (const auto& g : p.fine_gammas) fine_gammas.push_back(matrix_to_json(g.probs));
  j["fine_gammas"] = std::move(fine_gammas);
  json sets = json::array();
  for (const auto& set : p.fine_emissions) {
    json states = json::array();
    for (const auto& e : set) {
      json s;
      s["avg_mean"] = std::vector<double>(e.avg.mean.data(), e.avg.mean.data() + e.avg.mean.size());
      s["avg_sd"] = std::vector<double>(e.avg.sd.data(), e.avg.sd.data() + e.avg.sd.size());
      if (model.spec.fine.use_car) s["phi"] = e.avg.phi;
      if (e.wiggle) {
        s["wiggle_mean"] = e.wiggle->mean;
        s["wiggle_sd"] = e.wiggle->sd;
      }
      states.push_back(std::move(s));
    }
    sets.push_back(std::move(states));
  }
  j["fine_emissions"] = std::move(sets);
  return j;
}

inline HierModelParams params_from_json(const json& j, const ModelSpec& spec) {
  HierModelParams p;
  if (spec.coarse.structure == CoarseStructure::kHmm)
    p.coarse_gamma = TransitionMatrix(matrix_from_json(j.at("coarse_gamma")));
  for (const auto& d : j.at("durations"))
    p.coarse_emissions.emplace_back(d.at("mean").get<double>(), d.at("sd").get<double>());
  for (const auto& g : j.at("fine_gammas"))
    p.fine_gammas.push_back(TransitionMatrix(matrix_from_json(g)));
  for (const auto& set : j.at("fine_emissions")) {
    std::vector<FineEmission> out;
    for (const auto& s : set) {
      FineEmission e;
      const auto mean = s.at("avg_mean").get<std::vector<double>>();
      const auto sd = s.at("avg_sd").get<std::vector<double>>();
      Eigen::VectorXd mv = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      Eigen::VectorXd sv = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
      const double phi = spec.fine.use_car ? s.at("phi").get<double>() : 0.0;
      e.avg = CarNormalParams(std::move(mv), std::move(sv), phi);
      if (spec.fine.has_wiggle)
        e.wiggle = GammaMeanSd(s.at("wiggle_mean").get<double>(), s.at("wiggle_sd").get<double>());
      out.push_back(std::move(e));
    }
    p.fine_emissions.push_back(std::move(out));
  }
  return p;
}

inline json spec_to_json(const ModelSpec& spec) {
  json j;
  j["structure"] = spec.coarse.structure == CoarseStructure::kHmm ? "hmm" : "iid";
  j["n_coarse"] = spec.coarse.n_states;
  j["n_fine"] = spec.fine.n_states;
  j["n_channels"] = spec.n_channels;
  j["use_car"] = spec.fine.use_car;
  j["has_wiggle"] = spec.fine.has_wiggle;
  j["shared_fine"] = spec.fine.shared_across_coarse;
  j["model_first_avg"] = spec.fine.model_first_avg;
  return j;
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.coarse.structure =
      j.at("structure").get<std::string>() == "hmm" ? CoarseStructure::kHmm : CoarseStructure::kIid;
  spec.coarse.n_states = j.at("n_coarse").get<int>();
  spec.fine.n_states = j.at("n_fine").get<int>();
  spec.n_channels = j.at("n_channels").get<int>();
  spec.fine.use_car = j.at("use_car").get<bool>();
  spec.fine.has_wiggle = j.at("has_wiggle").get<bool>();
  spec.fine.shared_across_coarse = j.at("shared_fine").get<bool>();
  spec.fine.model_first_avg = j.value("model_first_avg", false);
  return spec;
}

/// fit.json document: variant, structure, natural-scale parameters, the
/// stationary distributions they imply, and the optimization record.
inline json fit_to_json(const FitResult& res, Variant variant) {
  json j;
  j["variant"] = variant_name(variant);
  j["model"] = spec_to_json(res.model.spec);
  j["params"] = params_to_json(res.model);
  json stat;
  if (res.model.spec.coarse.structure == CoarseStructure::kHmm) {
    const StationaryDist d = stationary(*res.model.params.coarse_gamma);
    stat["coarse"] = std::vector<double>(d.probs.data(), d.probs.data() + d.probs.size());
  }
  json fine_stat = json::array();
  for (const auto& g : res.model.params.fine_gammas) {
    const StationaryDist d = stationary(g);
    fine_stat.push_back(std::vector<double>(d.probs.data(), d.probs.data() + d.probs.size()));
  }
  stat["fine"] = std::move(fine_stat);
  j["stationary"] = std::move(stat);
  j["nll"] = res.nll;
  j["converged"] = res.converged;
  j["n_evals"] = res.n_evals;
  j["best_of_restarts"] = res.best_of_restarts;
  j["grad_inf_norm"] = res.grad_inf_norm;
  json restarts = json::array();
  for (const auto& r : res.restart_log)
    restarts.push_back(
        {{"restart", r.restart}, {"nll", r.nll}, {"converged", r.converged}, {"n_evals", r.n_evals}});
  j["restarts"] = std::move(restarts);
  return j;
}

inline HierModel model_from_fit_json(const json& j) {
  const ModelSpec spec = spec_from_json(j.at("model"));
  return HierModel{spec, params_from_json(j.at("params"), spec)};
}

}  // namespace carhhmm
