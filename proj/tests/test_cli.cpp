#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "carhhmm/commands.hpp"

using namespace carhhmm;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = fs::temp_directory_path() / ("carhhmm_test_" + std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~TempDir() { fs::remove_all(dir_); }
  fs::path path() const { return dir_; }
  std::string file(const std::string& name) const { return (dir_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path dir_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string toy_raw_csv(int dive_samples, double depth, int surface_samples = 250) {
  std::ostringstream out;
  out << "time_s,depth_m,acc_x\n";
  int i = 0;
  for (; i < dive_samples; ++i) out << i / 50.0 << "," << depth << ",0.5\n";
  for (int k = 0; k < surface_samples; ++k, ++i) out << i / 50.0 << ",0.05,0.5\n";
  return out.str();
}

}  // namespace

// =============================================================================
// transform
// =============================================================================

TEST(CmdTransform, ConstantDiveProducesTenQuietWindows) {
  TempDir tmp;
  write_file(tmp.file("raw.csv"), toy_raw_csv(1000, 2.0));
  std::ostringstream err;
  ASSERT_EQ(cmd_transform(tmp.file("raw.csv"), RunConfig{}, tmp.path().string(), err), kExitOk);
  const auto features = cmdio::read_features_csv(tmp.file("features.csv"));
  ASSERT_EQ(features.dives.size(), 1u);
  EXPECT_EQ(features.dives[0].windows.size(), 10u);
  for (const auto& w : features.dives[0].windows) {
    EXPECT_NEAR(w.avg(0), 0.5, 1e-12);
    EXPECT_LT(w.wiggliness, 1e-12);
  }
}

TEST(CmdTransform, SurfaceOnlyIsEmptyResult) {
  TempDir tmp;
  write_file(tmp.file("raw.csv"), toy_raw_csv(0, 0.0, 1000));
  std::ostringstream err;
  EXPECT_EQ(cmd_transform(tmp.file("raw.csv"), RunConfig{}, tmp.path().string(), err),
            kExitEmptyResult);
}

TEST(CmdTransform, MalformedCsvReportsLineNumber) {
  TempDir tmp;
  write_file(tmp.file("raw.csv"), "time_s,depth_m,acc_x\n0.0,2.0,0.5\n0.02,not_a_number,0.5\n");
  std::ostringstream err;
  EXPECT_EQ(cmd_transform(tmp.file("raw.csv"), RunConfig{}, tmp.path().string(), err),
            kExitInputError);
  EXPECT_NE(err.str().find("line 3"), std::string::npos) << err.str();
}

TEST(RunConfig, CaseStudyDefaultsWhenOmitted) {
  // an empty configuration keeps the stock window length and frequency cutoff
  const RunConfig config = config_from_json(json::object());
  EXPECT_EQ(config.features.window_h, 100);
  EXPECT_EQ(config.features.max_freq_omega, 10);
  EXPECT_EQ(config.sim_n_dives, 100);
  EXPECT_EQ(config.fit.restarts, 10);
}

// =============================================================================
// simulate
// =============================================================================

TEST(CmdSimulate, SameSeedGivesByteIdenticalFiles) {
  TempDir a, b;
  RunConfig config;
  config.sim_n_dives = 30;
  std::ostringstream err;
  ASSERT_EQ(cmd_simulate(config, 7, false, a.path().string(), err), kExitOk);
  ASSERT_EQ(cmd_simulate(config, 7, false, b.path().string(), err), kExitOk);
  for (const char* name : {"coarse.csv", "features.csv", "truth_coarse.csv", "truth_fine.csv"})
    EXPECT_EQ(read_file(a.file(name)), read_file(b.file(name))) << name;
}

TEST(CmdSimulate, RawFlagWritesReconstructedCurves) {
  TempDir tmp;
  RunConfig config;
  config.sim_n_dives = 5;
  std::ostringstream err;
  ASSERT_EQ(cmd_simulate(config, 3, true, tmp.path().string(), err), kExitOk);
  const CsvTable raw = read_csv(tmp.file("raw.csv"));
  const CsvTable coarse = read_csv(tmp.file("coarse.csv"));
  long expected_samples = 0;
  const int windows_col = coarse.require_column("n_windows");
  for (std::size_t r = 0; r < coarse.rows.size(); ++r)
    expected_samples += 100 * coarse.cell_long(r, windows_col);
  EXPECT_EQ(static_cast<long>(raw.rows.size()), expected_samples);
}

// =============================================================================
// fit
// =============================================================================

namespace {

RunConfig fast_fit_config() {
  RunConfig config;
  config.fit.restarts = 1;
  config.fit.threads = 1;
  return config;
}

void make_features(const TempDir& tmp, int n_dives, std::uint64_t seed) {
  RunConfig config;
  config.sim_n_dives = n_dives;
  std::ostringstream err;
  ASSERT_EQ(cmd_simulate(config, seed, false, tmp.path().string(), err), kExitOk);
}

}  // namespace

TEST(CmdFit, EmptyFeaturesFileIsInputError) {
  TempDir tmp;
  write_file(tmp.file("features.csv"), "");
  std::ostringstream err;
  EXPECT_EQ(cmd_fit(tmp.file("features.csv"), fast_fit_config(), tmp.path().string(), err),
            kExitInputError);
  write_file(tmp.file("features.csv"), "dive_id,window_idx,duration_s,avg_1,wiggliness\n");
  EXPECT_EQ(cmd_fit(tmp.file("features.csv"), fast_fit_config(), tmp.path().string(), err),
            kExitInputError);
}

TEST(CmdFit, WritesFitJsonAndSeCsv) {
  TempDir tmp;
  make_features(tmp, 50, 11);
  std::ostringstream err;
  ASSERT_EQ(cmd_fit(tmp.file("features.csv"), fast_fit_config(), tmp.path().string(), err), kExitOk)
      << err.str();
  json j;
  std::ifstream(tmp.file("fit.json")) >> j;
  EXPECT_EQ(j.at("variant"), "carhhmm-dft");
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_TRUE(j.at("params").contains("coarse_gamma"));
  EXPECT_EQ(j.at("restarts").size(), 1u);
  const CsvTable se = read_csv(tmp.file("se.csv"));
  EXPECT_GT(se.rows.size(), 10u);
}

TEST(CmdFit, SingleDiveTypeVariantHasNoCoarseGamma) {
  TempDir tmp;
  make_features(tmp, 50, 13);
  RunConfig config = fast_fit_config();
  config.variant = Variant::kCarHmmDft;
  std::ostringstream err;
  ASSERT_EQ(cmd_fit(tmp.file("features.csv"), config, tmp.path().string(), err), kExitOk);
  json j;
  std::ifstream(tmp.file("fit.json")) >> j;
  EXPECT_EQ(j.at("variant"), "carhmm-dft");
  EXPECT_FALSE(j.at("params").contains("coarse_gamma"));
  EXPECT_FALSE(j.at("stationary").contains("coarse"));
}

TEST(CmdFit, NonConvergenceStillWritesArtifacts) {
  TempDir tmp;
  make_features(tmp, 50, 19);
  RunConfig config = fast_fit_config();
  config.fit.max_iters = 1;  // cannot reach the gradient tolerance in one step
  std::ostringstream err;
  EXPECT_EQ(cmd_fit(tmp.file("features.csv"), config, tmp.path().string(), err),
            kExitNoConvergence);
  json j;
  std::ifstream(tmp.file("fit.json")) >> j;
  EXPECT_FALSE(j.at("converged").get<bool>());
  EXPECT_TRUE(fs::exists(tmp.file("se.csv")));
}

TEST(Fit, ThreadCountDoesNotChangeResult) {
  TempDir tmp;
  make_features(tmp, 40, 23);
  const auto file = cmdio::read_features_csv(tmp.file("features.csv"));
  const ModelSpec spec = make_model_spec(Variant::kCarHhmmDft, 2, 2, 1);
  FitOptions opts;
  opts.restarts = 3;
  opts.threads = 1;
  const FitResult a = fit(file.dives, spec, std::nullopt, opts);
  opts.threads = 2;
  const FitResult b = fit(file.dives, spec, std::nullopt, opts);
  EXPECT_EQ(a.nll, b.nll);
  EXPECT_EQ(a.best_of_restarts, b.best_of_restarts);
}

// =============================================================================
// decode / diagnose
// =============================================================================

namespace {

struct FittedPipeline {
  TempDir tmp;
  FittedPipeline() {
    RunConfig config;
    config.sim_n_dives = 50;
    std::ostringstream err;
    EXPECT_EQ(cmd_simulate(config, 17, false, tmp.path().string(), err), kExitOk);
    RunConfig fit_config;
    fit_config.fit.restarts = 1;
    EXPECT_EQ(cmd_fit(tmp.file("features.csv"), fit_config, tmp.path().string(), err), kExitOk);
  }
};

}  // namespace

TEST(CmdDecode, PosteriorRowsSumToOne) {
  FittedPipeline p;
  std::ostringstream err;
  ASSERT_EQ(cmd_decode(p.tmp.file("features.csv"), p.tmp.file("fit.json"), p.tmp.path().string(),
                       err),
            kExitOk)
      << err.str();
  const CsvTable post = read_csv(p.tmp.file("posteriors.csv"));
  const int p1 = post.require_column("p_divetype_1");
  const int p2 = post.require_column("p_divetype_2");
  const int s1 = post.require_column("p_subdive_1");
  const int s2 = post.require_column("p_subdive_2");
  for (std::size_t r = 0; r < post.rows.size(); ++r) {
    EXPECT_NEAR(post.cell_double(r, p1) + post.cell_double(r, p2), 1.0, 1e-8);
    if (!post.cell_empty(r, s1))
      EXPECT_NEAR(post.cell_double(r, s1) + post.cell_double(r, s2), 1.0, 1e-8);
  }
  json summary;
  std::ifstream(p.tmp.file("summary.json")) >> summary;
  ASSERT_TRUE(summary.contains("coarse_stationary"));
  const auto delta = summary.at("coarse_stationary").get<std::vector<double>>();
  EXPECT_NEAR(delta[0] + delta[1], 1.0, 1e-10);
  EXPECT_EQ(summary.at("fine_stationary").size(), 2u);
}

TEST(CmdDiagnose, DurationResidualCountEqualsDiveCount) {
  FittedPipeline p;
  std::ostringstream err;
  ASSERT_EQ(cmd_diagnose(p.tmp.file("features.csv"), p.tmp.file("fit.json"),
                         p.tmp.path().string(), err),
            kExitOk)
      << err.str();
  const CsvTable residuals = read_csv(p.tmp.file("residuals.csv"));
  const int kind_col = residuals.require_column("kind");
  long n_duration = 0;
  for (std::size_t r = 0; r < residuals.rows.size(); ++r)
    if (residuals.rows[r][static_cast<std::size_t>(kind_col)] == "duration") ++n_duration;
  EXPECT_EQ(n_duration, 50);
  const CsvTable weights = read_csv(p.tmp.file("weights_coarse.csv"));
  EXPECT_EQ(weights.rows.size(), 50u);
  json summary;
  std::ifstream(p.tmp.file("diagnose_summary.json")) >> summary;
  EXPECT_TRUE(summary.contains("duration"));
  EXPECT_TRUE(summary.contains("wiggliness"));
}

// =============================================================================
// study (single replicate shakedown; the full run lives in the acceptance suite)
// =============================================================================

TEST(CmdStudy, EmitsAccuracyTable) {
  TempDir tmp;
  RunConfig config;
  config.sim_n_dives = 30;
  config.fit.restarts = 1;
  std::ostringstream err;
  ASSERT_EQ(cmd_study(config, 1, 9, 2, tmp.path().string(), err), kExitOk) << err.str();
  const CsvTable acc = read_csv(tmp.file("study_accuracy.csv"));
  const int variant_col = acc.require_column("variant");
  const int dive_col = acc.require_column("dive_accuracy");
  bool saw_full = false, saw_single = false;
  for (std::size_t r = 0; r < acc.rows.size(); ++r) {
    if (acc.rows[r][static_cast<std::size_t>(acc.require_column("dive_type"))] != "both") continue;
    const std::string& variant = acc.rows[r][static_cast<std::size_t>(variant_col)];
    if (variant == "carhhmm-dft") {
      saw_full = true;
      EXPECT_FALSE(acc.cell_empty(r, dive_col));
    }
    if (variant == "carhmm-dft") {
      saw_single = true;
      // the single-type variant reports no dive accuracy
      EXPECT_TRUE(acc.cell_empty(r, dive_col));
    }
  }
  EXPECT_TRUE(saw_full);
  EXPECT_TRUE(saw_single);
  EXPECT_TRUE(fs::exists(tmp.file("study_replicates.csv")));
  EXPECT_TRUE(fs::exists(tmp.file("study_params.csv")));
}

TEST(Study, SingleReplicateProducesSaneCell) {
  StudyConfig config;
  config.n_replicates = 1;
  config.n_train_dives = 40;
  config.n_test_dives = 40;
  config.variants = {Variant::kCarHhmmDft};
  config.restarts = 1;
  config.threads = 1;
  config.seed = 5;
  const StudyResult result = simulation_study(config);
  ASSERT_EQ(result.cells.size(), 1u);
  const StudyCell& cell = result.cells[0];
  EXPECT_TRUE(cell.converged);
  ASSERT_TRUE(cell.dive_accuracy.has_value());
  EXPECT_GT(*cell.dive_accuracy, 0.5);
  EXPECT_LE(*cell.dive_accuracy, 1.0);
  EXPECT_GT(cell.subdive_accuracy, 0.5);
  EXPECT_FALSE(cell.estimates.empty());
  EXPECT_FALSE(cell.std_errors.empty());
  const VariantSummary s = summarize_variant(result, Variant::kCarHhmmDft);
  EXPECT_EQ(s.n_replicates, 1);
  EXPECT_EQ(s.n_converged, 1);
}
