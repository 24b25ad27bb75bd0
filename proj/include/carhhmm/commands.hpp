#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "carhhmm/config.hpp"
#include "carhhmm/csv.hpp"
#include "carhhmm/decode.hpp"
#include "carhhmm/features.hpp"
#include "carhhmm/inference.hpp"
#include "carhhmm/simulate.hpp"
#include "carhhmm/study.hpp"

namespace carhhmm {

// stable exit-code contract shared by every command
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitEmptyResult = 3;
inline constexpr int kExitNoConvergence = 4;

namespace cmdio {

// ---------------------------------------------------------------------------
// features.csv: dive_id, window_idx, duration_s, avg_1..avg_d, wiggliness.
// A dive whose series is shorter than one window keeps a single row with
// window_idx = -1 and empty feature cells, so durations survive the round
// trip.
// ---------------------------------------------------------------------------

inline std::vector<std::string> feature_header(int n_channels) {
  std::vector<std::string> header{"dive_id", "window_idx", "duration_s"};
  for (int c = 1; c <= n_channels; ++c) header.push_back("avg_" + std::to_string(c));
  header.push_back("wiggliness");
  return header;
}

inline void write_features_csv(const std::string& path, std::span<const DiveRecord> dives,
                               int n_channels) {
  CsvWriter out(path, feature_header(n_channels));
  for (const auto& dive : dives) {
    if (dive.windows.empty()) {
      std::vector<std::string> row{std::to_string(dive.dive_id), "-1", g17(dive.duration_s)};
      for (int c = 0; c < n_channels; ++c) row.emplace_back();
      row.emplace_back();
      out.row(row);
      continue;
    }
    for (std::size_t w = 0; w < dive.windows.size(); ++w) {
      std::vector<std::string> row{std::to_string(dive.dive_id), std::to_string(w),
                                   g17(dive.duration_s)};
      for (int c = 0; c < n_channels; ++c) row.push_back(g17(dive.windows[w].avg(c)));
      row.push_back(g17(dive.windows[w].wiggliness));
      out.row(row);
    }
  }
}

struct FeatureFile {
  std::vector<DiveRecord> dives;
  int n_channels = 0;
};

inline FeatureFile read_features_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  FeatureFile out;
  const int id_col = table.require_column("dive_id");
  const int window_col = table.require_column("window_idx");
  const int duration_col = table.require_column("duration_s");
  const int wiggle_col = table.require_column("wiggliness");
  std::vector<int> avg_cols;
  for (int c = 1; table.column("avg_" + std::to_string(c)) >= 0; ++c)
    avg_cols.push_back(table.column("avg_" + std::to_string(c)));
  if (avg_cols.empty()) throw CsvError(1, "no avg_<k> columns found");
  out.n_channels = static_cast<int>(avg_cols.size());
  if (table.rows.empty()) throw CsvError(1, "no data rows in '" + path + "'");

  std::map<long, std::size_t> index_of;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const long dive_id = table.cell_long(r, id_col);
    const long window_idx = table.cell_long(r, window_col);
    auto it = index_of.find(dive_id);
    if (it == index_of.end()) {
      DiveRecord dive;
      dive.dive_id = static_cast<int>(dive_id);
      dive.duration_s = table.cell_double(r, duration_col);
      index_of.emplace(dive_id, out.dives.size());
      out.dives.push_back(std::move(dive));
      it = index_of.find(dive_id);
    }
    DiveRecord& dive = out.dives[it->second];
    if (window_idx < 0) continue;  // duration-only marker row
    if (window_idx != static_cast<long>(dive.windows.size()))
      throw CsvError(table.line_numbers[r],
                     "window_idx out of order for dive " + std::to_string(dive_id));
    WindowFeatures feat;
    feat.avg = Eigen::VectorXd::Zero(out.n_channels);
    for (int c = 0; c < out.n_channels; ++c)
      feat.avg(c) = table.cell_double(r, avg_cols[static_cast<std::size_t>(c)]);
    feat.wiggliness = table.cell_double(r, wiggle_col);
    dive.windows.push_back(std::move(feat));
  }
  return out;
}

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

/// Generating model for the simulate command: stock parameters unless the
/// configuration carries an explicit params block.
inline HierModel simulation_model(const RunConfig& config) {
  if (!config.sim_params) return default_generating_model();
  const ModelSpec spec = config.model_spec();
  return HierModel{spec, params_from_json(*config.sim_params, spec)};
}

}  // namespace cmdio

// ===========================================================================
// transform
// ===========================================================================

inline int cmd_transform(const std::string& raw_csv, const RunConfig& config,
                         const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    const CsvTable table = read_csv(raw_csv);
    const int time_col = table.require_column("time_s");
    const int depth_col = table.column("depth_m");
    std::vector<int> acc_cols;
    for (const char* name : {"acc_x", "acc_y", "acc_z"})
      if (table.column(name) >= 0) acc_cols.push_back(table.column(name));
    if (acc_cols.empty() || table.column("acc_x") < 0) throw CsvError(1, "missing column 'acc_x'");
    if (table.rows.size() < 2) throw CsvError(2, "need at least two samples");

    RawSeries series;
    std::vector<double> dt;
    double prev_t = table.cell_double(0, time_col);
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      const double t = table.cell_double(r, time_col);
      dt.push_back(t - prev_t);
      prev_t = t;
    }
    std::nth_element(dt.begin(), dt.begin() + static_cast<long>(dt.size() / 2), dt.end());
    const double median_dt = dt[dt.size() / 2];
    if (!(median_dt > 0.0)) throw CsvError(2, "time_s must be strictly increasing");
    series.sample_rate_hz = 1.0 / median_dt;

    series.channels.resize(acc_cols.size());
    if (depth_col >= 0) series.depth = std::vector<double>();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      for (std::size_t c = 0; c < acc_cols.size(); ++c)
        series.channels[c].push_back(table.cell_double(r, acc_cols[c]));
      if (depth_col >= 0) series.depth->push_back(table.cell_double(r, depth_col));
    }

    const RawSeries smoothed = smooth(series, config.smooth_seconds);
    std::vector<std::pair<std::size_t, std::size_t>> intervals;
    if (smoothed.depth) {
      intervals = segment_dives(smoothed, config.depth_threshold_m, config.min_dive_seconds);
    } else {
      intervals.emplace_back(0, smoothed.n_samples());  // no depth: the whole series is one curve
    }
    if (intervals.empty()) {
      err << "transform: no dives found (depth never exceeded " << config.depth_threshold_m
          << " m for " << config.min_dive_seconds << " s)\n";
      return kExitEmptyResult;
    }

    std::vector<DiveRecord> dives;
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      const auto [start, end] = intervals[k];
      std::vector<std::vector<double>> slice(smoothed.channels.size());
      for (std::size_t c = 0; c < slice.size(); ++c)
        slice[c].assign(smoothed.channels[c].begin() + static_cast<long>(start),
                        smoothed.channels[c].begin() + static_cast<long>(end));
      DiveRecord dive;
      dive.dive_id = static_cast<int>(k);
      dive.duration_s = static_cast<double>(end - start) / smoothed.sample_rate_hz;
      dive.windows = window_transform(slice, config.features);
      if (dive.windows.empty())
        err << "transform: dive " << k << " is shorter than one window; keeping duration only\n";
      dives.push_back(std::move(dive));
    }
    const auto dir = cmdio::prepare_out_dir(out_dir);
    cmdio::write_features_csv((dir / "features.csv").string(), dives,
                              static_cast<int>(series.channels.size()));
    return kExitOk;
  } catch (const CsvError& e) {
    err << "transform: " << raw_csv << ": " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "transform: " << e.what() << '\n';
    return kExitInputError;
  }
}

// ===========================================================================
// simulate
// ===========================================================================

inline int cmd_simulate(const RunConfig& config, std::uint64_t seed, bool write_raw,
                        const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    SimConfig sim;
    sim.model = cmdio::simulation_model(config);
    sim.n_dives = config.sim_n_dives;
    sim.seed = seed;
    sim.window_seconds = config.window_seconds;
    sim.samples_per_window = config.features.window_h;
    sim.wiggle_family = config.wiggle_family;
    sim.validate();
    const SimDataset data = simulate_dataset(sim);
    const auto dir = cmdio::prepare_out_dir(out_dir);

    {
      CsvWriter coarse((dir / "coarse.csv").string(), {"dive_id", "duration_s", "n_windows"});
      for (const auto& dive : data.dives)
        coarse.row({std::to_string(dive.dive_id), g17(dive.duration_s),
                    std::to_string(dive.windows.size())});
    }
    cmdio::write_features_csv((dir / "features.csv").string(), data.dives,
                              sim.model.spec.n_channels);
    {
      CsvWriter truth((dir / "truth_coarse.csv").string(), {"dive_id", "state"});
      for (std::size_t t = 0; t < data.dives.size(); ++t)
        truth.row({std::to_string(data.dives[t].dive_id),
                   std::to_string(data.coarse_states[t] + 1)});
    }
    {
      CsvWriter truth((dir / "truth_fine.csv").string(), {"dive_id", "window_idx", "state"});
      for (std::size_t t = 0; t < data.dives.size(); ++t)
        for (std::size_t w = 0; w < data.fine_states[t].size(); ++w)
          truth.row({std::to_string(data.dives[t].dive_id), std::to_string(w),
                     std::to_string(data.fine_states[t][w] + 1)});
    }
    if (write_raw) {
      if (sim.model.spec.n_channels != 1) {
        err << "simulate: raw reconstruction supports a single channel\n";
        return kExitInputError;
      }
      ReconstructionParams recon = default_reconstruction_params();
      recon.samples_per_window = sim.samples_per_window;
      if (static_cast<int>(recon.states.size()) < sim.model.spec.fine.n_states) {
        err << "simulate: no spectral parameters for " << sim.model.spec.fine.n_states
            << " fine states\n";
        return kExitInputError;
      }
      CsvWriter raw((dir / "raw.csv").string(), {"dive_id", "sample_idx", "acc_x"});
      for (std::size_t t = 0; t < data.dives.size(); ++t) {
        const ReconstructedDive rec =
            reconstruct_raw(data.fine_states[t], recon, seed, static_cast<std::uint64_t>(t));
        for (std::size_t n = 0; n < rec.samples.size(); ++n)
          raw.row({std::to_string(data.dives[t].dive_id), std::to_string(n), g17(rec.samples[n])});
      }
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitInputError;
  }
}

// ===========================================================================
// fit
// ===========================================================================

inline int cmd_fit(const std::string& features_csv, const RunConfig& config,
                   const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    const cmdio::FeatureFile file = cmdio::read_features_csv(features_csv);
    ModelSpec spec = config.model_spec();
    spec.n_channels = file.n_channels;

    FitResult result = fit(file.dives, spec, std::nullopt, config.fit);
    const auto dir = cmdio::prepare_out_dir(out_dir);
    cmdio::write_json(dir / "fit.json", fit_to_json(result, config.variant));

    {
      CsvWriter se_csv((dir / "se.csv").string(), {"parameter", "estimate", "se", "defined"});
      if (result.converged) {
        FitOptions opts = config.fit;
        StdErrors se = observed_fisher_se(result, file.dives, opts);
        for (std::size_t i = 0; i < se.names.size(); ++i) {
          const double v = se.se(static_cast<Eigen::Index>(i));
          se_csv.row({se.names[i], g17(se.estimates(static_cast<Eigen::Index>(i))),
                      std::isfinite(v) ? g17(v) : "nan", std::isfinite(v) ? "1" : "0"});
        }
      } else {
        const NaturalParams nat = natural_params(result.model.params, spec);
        for (std::size_t i = 0; i < nat.names.size(); ++i)
          se_csv.row({nat.names[i], g17(nat.values(static_cast<Eigen::Index>(i))), "nan", "0"});
      }
    }
    if (!result.converged) {
      err << "fit: no restart converged (best nll " << result.nll << ")\n";
      return kExitNoConvergence;
    }
    return kExitOk;
  } catch (const CsvError& e) {
    err << "fit: " << features_csv << ": " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "fit: " << e.what() << '\n';
    return kExitInputError;
  }
}

// ===========================================================================
// decode
// ===========================================================================

inline int cmd_decode(const std::string& features_csv, const std::string& fit_json,
                      const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    const cmdio::FeatureFile file = cmdio::read_features_csv(features_csv);
    std::ifstream in(fit_json);
    if (!in) throw std::invalid_argument("cannot open '" + fit_json + "'");
    json j;
    in >> j;
    const HierModel model = model_from_fit_json(j);
    if (model.spec.n_channels != file.n_channels)
      throw std::invalid_argument("features have " + std::to_string(file.n_channels) +
                                  " channels but the fit expects " +
                                  std::to_string(model.spec.n_channels));

    const CoarsePosterior coarse = coarse_posterior(file.dives, model);
    const FinePosterior fine = fine_posterior(file.dives, model, coarse);
    const int n = model.spec.coarse.n_states;
    const int n_fine = model.spec.fine.n_states;

    const auto dir = cmdio::prepare_out_dir(out_dir);
    std::vector<std::string> header{"dive_id", "window_idx"};
    for (int i = 1; i <= n; ++i) header.push_back("p_divetype_" + std::to_string(i));
    header.push_back("divetype");
    for (int i = 1; i <= n_fine; ++i) header.push_back("p_subdive_" + std::to_string(i));
    header.push_back("subdive");
    CsvWriter out((dir / "posteriors.csv").string(), header);

    for (std::size_t t = 0; t < file.dives.size(); ++t) {
      const auto coarse_row = [&]() {
        std::vector<std::string> cells;
        for (int i = 0; i < n; ++i) cells.push_back(g17(coarse.probs(static_cast<int>(t), i)));
        int best = 0;
        for (int i = 1; i < n; ++i)
          if (coarse.probs(static_cast<int>(t), i) > coarse.probs(static_cast<int>(t), best))
            best = i;
        cells.push_back(std::to_string(best + 1));
        return cells;
      }();
      if (file.dives[t].windows.empty()) {
        std::vector<std::string> row{std::to_string(file.dives[t].dive_id), "-1"};
        row.insert(row.end(), coarse_row.begin(), coarse_row.end());
        for (int i = 0; i < n_fine; ++i) row.emplace_back();
        row.emplace_back();
        out.row(row);
        continue;
      }
      const Eigen::MatrixXd& post = fine.probs[t];
      const std::vector<int> map_states = most_probable_states(post);
      for (int w = 0; w < post.rows(); ++w) {
        std::vector<std::string> row{std::to_string(file.dives[t].dive_id), std::to_string(w)};
        row.insert(row.end(), coarse_row.begin(), coarse_row.end());
        for (int i = 0; i < n_fine; ++i) row.push_back(g17(post(w, i)));
        row.push_back(std::to_string(map_states[static_cast<std::size_t>(w)] + 1));
        out.row(row);
      }
    }

    // summary block: transition matrices with their stationary distributions
    json summary;
    if (model.spec.coarse.structure == CoarseStructure::kHmm) {
      summary["coarse_gamma"] = matrix_to_json(model.params.coarse_gamma->probs);
      const StationaryDist d = stationary(*model.params.coarse_gamma);
      summary["coarse_stationary"] =
          std::vector<double>(d.probs.data(), d.probs.data() + d.probs.size());
    }
    json fine_gammas = json::array();
    json fine_stationary = json::array();
    for (const auto& g : model.params.fine_gammas) {
      fine_gammas.push_back(matrix_to_json(g.probs));
      const StationaryDist d = stationary(g);
      fine_stationary.push_back(std::vector<double>(d.probs.data(), d.probs.data() + d.probs.size()));
    }
    summary["fine_gammas"] = std::move(fine_gammas);
    summary["fine_stationary"] = std::move(fine_stationary);
    cmdio::write_json(dir / "summary.json", summary);
    return kExitOk;
  } catch (const CsvError& e) {
    err << "decode: " << features_csv << ": " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "decode: " << e.what() << '\n';
    return kExitInputError;
  }
}

// ===========================================================================
// diagnose
// ===========================================================================

inline int cmd_diagnose(const std::string& features_csv, const std::string& fit_json,
                        const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    const cmdio::FeatureFile file = cmdio::read_features_csv(features_csv);
    std::ifstream in(fit_json);
    if (!in) throw std::invalid_argument("cannot open '" + fit_json + "'");
    json j;
    in >> j;
    const HierModel model = model_from_fit_json(j);
    const auto dir = cmdio::prepare_out_dir(out_dir);

    CsvWriter res_csv((dir / "residuals.csv").string(),
                      {"kind", "dive_id", "window_idx", "channel", "value", "residual", "defined",
                       "infinite"});
    json summary;
    auto emit = [&](const std::string& kind, const std::vector<ResidualEntry>& entries) {
      for (const auto& e : entries)
        res_csv.row({kind, std::to_string(e.dive_id), std::to_string(e.window_idx),
                     e.channel >= 0 ? std::to_string(e.channel + 1) : "",
                     g17(e.value), e.defined ? g17(e.residual) : "",
                     e.defined ? "1" : "0", e.infinite ? "1" : "0"});
      const ResidualSummary s = residual_summary(entries);
      summary[kind] = {{"n_total", s.n_total},       {"n_finite", s.n_finite},
                       {"n_undefined", s.n_undefined}, {"n_infinite", s.n_infinite},
                       {"mean", s.mean},             {"sd", s.sd},
                       {"skewness", s.skewness},     {"ks_distance", s.ks_distance}};
    };
    emit("duration", pseudoresiduals(file.dives, model, ResidualTarget::kDuration));
    emit("avg", pseudoresiduals(file.dives, model, ResidualTarget::kAvgChannel));
    if (model.spec.fine.has_wiggle)
      emit("wiggliness", pseudoresiduals(file.dives, model, ResidualTarget::kWiggliness));

    const CoarsePosterior coarse = coarse_posterior(file.dives, model);
    const FinePosterior fine = fine_posterior(file.dives, model, coarse);
    {
      std::vector<std::string> header{"dive_id", "duration_s"};
      for (int i = 1; i <= model.spec.coarse.n_states; ++i)
        header.push_back("w_divetype_" + std::to_string(i));
      CsvWriter w_csv((dir / "weights_coarse.csv").string(), header);
      for (std::size_t t = 0; t < file.dives.size(); ++t) {
        std::vector<std::string> row{std::to_string(file.dives[t].dive_id),
                                     g17(file.dives[t].duration_s)};
        for (int i = 0; i < model.spec.coarse.n_states; ++i)
          row.push_back(g17(coarse.probs(static_cast<int>(t), i)));
        w_csv.row(row);
      }
    }
    {
      std::vector<std::string> header{"dive_id", "window_idx"};
      for (int c = 1; c <= model.spec.n_channels; ++c) header.push_back("avg_" + std::to_string(c));
      header.push_back("wiggliness");
      for (int i = 1; i <= model.spec.fine.n_states; ++i)
        header.push_back("w_subdive_" + std::to_string(i));
      CsvWriter w_csv((dir / "weights_fine.csv").string(), header);
      for (std::size_t t = 0; t < file.dives.size(); ++t) {
        for (std::size_t w = 0; w < file.dives[t].windows.size(); ++w) {
          std::vector<std::string> row{std::to_string(file.dives[t].dive_id), std::to_string(w)};
          for (int c = 0; c < model.spec.n_channels; ++c)
            row.push_back(g17(file.dives[t].windows[w].avg(c)));
          row.push_back(g17(file.dives[t].windows[w].wiggliness));
          for (int i = 0; i < model.spec.fine.n_states; ++i)
            row.push_back(g17(fine.probs[t](static_cast<int>(w), i)));
          w_csv.row(row);
        }
      }
    }
    cmdio::write_json(dir / "diagnose_summary.json", summary);
    return kExitOk;
  } catch (const CsvError& e) {
    err << "diagnose: " << features_csv << ": " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "diagnose: " << e.what() << '\n';
    return kExitInputError;
  }
}

// ===========================================================================
// simulation study
// ===========================================================================

inline int cmd_study(const RunConfig& config, int replicates, std::uint64_t seed, int threads,
                     const std::string& out_dir, std::ostream& err = std::cerr) {
  try {
    StudyConfig study;
    study.n_replicates = replicates;
    study.n_train_dives = config.sim_n_dives;
    study.n_test_dives = config.sim_n_dives;
    study.generating_model = cmdio::simulation_model(config);
    study.seed = seed;
    study.restarts = config.fit.restarts;
    study.max_iters = config.fit.max_iters;
    study.threads = threads;
    const StudyResult result = simulation_study(study);
    const auto dir = cmdio::prepare_out_dir(out_dir);

    {
      CsvWriter rep_csv((dir / "study_replicates.csv").string(),
                        {"variant", "replicate", "converged", "nll", "fit_seconds",
                         "dive_accuracy", "subdive_accuracy"});
      for (const auto& c : result.cells)
        rep_csv.row({variant_name(c.variant), std::to_string(c.replicate),
                     c.converged ? "1" : "0", g17(c.nll), g17(c.fit_seconds),
                     c.dive_accuracy ? g17(*c.dive_accuracy) : "", g17(c.subdive_accuracy)});
    }
    {
      CsvWriter acc_csv((dir / "study_accuracy.csv").string(),
                        {"variant", "dive_type", "subdive_state", "dive_accuracy",
                         "sd_dive_accuracy", "subdive_accuracy", "sd_subdive_accuracy",
                         "mean_fit_seconds"});
      for (Variant v : study.variants) {
        const VariantSummary s = summarize_variant(result, v);
        acc_csv.row({variant_name(v), "both", "both",
                     s.mean_dive_accuracy ? g17(*s.mean_dive_accuracy) : "",
                     s.sd_dive_accuracy ? g17(*s.sd_dive_accuracy) : "",
                     g17(s.mean_subdive_accuracy), g17(s.sd_subdive_accuracy),
                     g17(s.mean_fit_seconds)});
        for (const auto& [key, acc] : s.mean_subdive_by_truth) {
          const auto dive_it = s.mean_dive_by_type.find(key.first);
          acc_csv.row({variant_name(v), std::to_string(key.first + 1),
                       std::to_string(key.second + 1),
                       dive_it != s.mean_dive_by_type.end() ? g17(dive_it->second) : "", "",
                       g17(acc), "", ""});
        }
      }
    }
    {
      CsvWriter par_csv((dir / "study_params.csv").string(),
                        {"variant", "parameter", "truth", "mean_estimate", "empirical_se",
                         "mean_estimated_se"});
      const NaturalParams truth =
          natural_params(study.generating_model.params, study.generating_model.spec);
      std::map<std::string, double> truth_by_name;
      for (std::size_t i = 0; i < truth.names.size(); ++i)
        truth_by_name[truth.names[i]] = truth.values(static_cast<Eigen::Index>(i));
      for (Variant v : study.variants) {
        const VariantSummary s = summarize_variant(result, v);
        for (const auto& [name, mean_est] : s.mean_estimate) {
          const auto t = truth_by_name.find(name);
          const auto se = s.mean_estimated_se.find(name);
          par_csv.row({variant_name(v), name,
                       t != truth_by_name.end() ? g17(t->second) : "", g17(mean_est),
                       g17(s.empirical_se.at(name)),
                       se != s.mean_estimated_se.end() ? g17(se->second) : ""});
        }
      }
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "study: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace carhhmm
