#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "carhhmm/inference.hpp"
#include "carhhmm/simulate.hpp"
#include "support/random_instances.hpp"

using namespace carhhmm;

// =============================================================================
// pack / unpack
// =============================================================================

TEST(PackUnpack, RoundTripOnGeneratingParameters) {
  const HierModel model = default_generating_model();
  const Eigen::VectorXd v = pack(model.params, model.spec);
  const HierModelParams back = unpack(v, model.spec);
  const NaturalParams a = natural_params(model.params, model.spec);
  const NaturalParams b = natural_params(back, model.spec);
  ASSERT_EQ(a.names, b.names);
  for (int i = 0; i < a.values.size(); ++i)
    EXPECT_NEAR(a.values(i), b.values(i), 1e-12 * std::max(1.0, std::abs(a.values(i))))
        << a.names[static_cast<std::size_t>(i)];
}

TEST(PackUnpack, VectorRoundTrip) {
  const ModelSpec spec = make_model_spec(Variant::kCarHhmmDft, 2, 3, 2);
  SplitRng rng(211);
  Eigen::VectorXd v(ParamLayout{spec}.dim());
  for (int i = 0; i < v.size(); ++i) v(i) = rng.uniform(-2.0, 2.0);
  const Eigen::VectorXd back = pack(unpack(v, spec), spec);
  ASSERT_EQ(back.size(), v.size());
  for (int i = 0; i < v.size(); ++i) EXPECT_NEAR(back(i), v(i), 1e-12);
}

TEST(PackUnpack, ZerosMapToNeutralParameters) {
  const ModelSpec spec = make_model_spec(Variant::kCarHhmmDft, 2, 2, 1);
  const HierModelParams p = unpack(Eigen::VectorXd::Zero(ParamLayout{spec}.dim()), spec);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(p.coarse_gamma->probs(i, j), 0.5, 1e-15);
  for (const auto& g : p.coarse_emissions) {
    EXPECT_EQ(g.mean, 1.0);
    EXPECT_EQ(g.sd, 1.0);
  }
  for (const auto& e : p.fine_emissions.front()) {
    EXPECT_EQ(e.avg.mean(0), 0.0);
    EXPECT_EQ(e.avg.sd(0), 1.0);
    EXPECT_NEAR(e.avg.phi, 0.5, 1e-15);
    EXPECT_EQ(e.wiggle->mean, 1.0);
    EXPECT_EQ(e.wiggle->sd, 1.0);
  }
}

TEST(PackUnpack, BoundaryPhiRejected) {
  HierModel model = default_generating_model();
  model.params.fine_emissions[0][0].avg.phi = 1.0;
  EXPECT_THROW(pack(model.params, model.spec), std::domain_error);
}

TEST(PackUnpack, ZeroTransitionEntryRejected) {
  HierModel model = default_generating_model();
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.0, 0.5, 0.5;
  model.params.coarse_gamma = TransitionMatrix(g);
  EXPECT_THROW(pack(model.params, model.spec), std::domain_error);
}

// =============================================================================
// Link Jacobian
// =============================================================================

TEST(NaturalJacobian, MatchesNumericalDifferentiation) {
  const ModelSpec spec = make_model_spec(Variant::kCarHhmmDft, 2, 2, 1);
  SplitRng rng(223);
  Eigen::VectorXd v(ParamLayout{spec}.dim());
  for (int i = 0; i < v.size(); ++i) v(i) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd jac = natural_jacobian(v, spec);
  const double h = 1e-6;
  Eigen::VectorXd vp = v;
  for (int j = 0; j < v.size(); ++j) {
    vp(j) = v(j) + h;
    const Eigen::VectorXd fp = natural_params(unpack(vp, spec), spec).values;
    vp(j) = v(j) - h;
    const Eigen::VectorXd fm = natural_params(unpack(vp, spec), spec).values;
    vp(j) = v(j);
    for (int i = 0; i < fp.size(); ++i)
      EXPECT_NEAR(jac(i, j), (fp(i) - fm(i)) / (2.0 * h), 1e-6) << "entry " << i << "," << j;
  }
}

// =============================================================================
// Fitting
// =============================================================================

namespace {

std::vector<DiveRecord> gamma_only_dives(int n, double mean, double sd, std::uint64_t seed) {
  const GammaMeanSd g(mean, sd);
  SplitRng rng(seed);
  std::vector<DiveRecord> dives(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    dives[static_cast<std::size_t>(t)].dive_id = t;
    dives[static_cast<std::size_t>(t)].duration_s = rng.gamma(g.shape(), g.scale());
  }
  return dives;
}

}  // namespace

TEST(Fit, RecoversGammaMeanFromDurationsOnly) {
  // single dive type, no windows: the fit reduces to a Gamma MLE on durations
  const double mean = 25.68, sd = 9.57;
  const auto dives = gamma_only_dives(500, mean, sd, 31u);
  const ModelSpec spec = make_model_spec(Variant::kCarHmmDft, 1, 1, 1);
  FitOptions opts;
  opts.restarts = 1;
  const FitResult res = fit(dives, spec, std::nullopt, opts);
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.model.params.coarse_emissions[0].mean, mean, 3.0 * sd / std::sqrt(500.0));
  // monotonicity: the fitted nll does not exceed the initialization's
  const Eigen::VectorXd v0 = pack(moment_init(dives, spec), spec);
  const double init_nll = -hier_loglik(dives, HierModel{spec, unpack(v0, spec)});
  EXPECT_LE(res.nll, init_nll + 1e-9);
  // declared gradient tolerance holds at the reported optimum
  EXPECT_LT(res.grad_inf_norm, 1e-5 * std::max(1.0, std::abs(res.nll)));
}

TEST(Fit, InvariantUnderInitialLabelPermutation) {
  SimConfig config;
  config.model = default_generating_model();
  config.n_dives = 60;
  config.seed = 77;
  const SimDataset data = simulate_dataset(config);

  const ModelSpec spec = config.model.spec;
  HierModelParams init = moment_init(data.dives, spec);
  HierModelParams permuted = init;
  std::swap(permuted.coarse_emissions[0], permuted.coarse_emissions[1]);
  std::swap(permuted.fine_gammas[0], permuted.fine_gammas[1]);

  FitOptions opts;
  opts.restarts = 1;
  opts.max_iters = 400;
  const FitResult a = fit(data.dives, spec, init, opts);
  const FitResult b = fit(data.dives, spec, permuted, opts);
  EXPECT_NEAR(a.nll, b.nll, 1e-6 * std::max(1.0, std::abs(a.nll)));
}

TEST(Fit, UnderIdentifiedDataDoesNotConverge) {
  std::vector<DiveRecord> dives(1);
  dives[0].dive_id = 0;
  dives[0].duration_s = 12.0;
  WindowFeatures w;
  w.avg = Eigen::VectorXd::Constant(1, 0.2);
  w.wiggliness = 5.0;
  dives[0].windows.push_back(w);
  const ModelSpec spec = make_model_spec(Variant::kCarHmmDft, 1, 1, 1);
  FitOptions opts;
  opts.restarts = 1;
  opts.max_iters = 60;
  const FitResult res = fit(dives, spec, std::nullopt, opts);
  EXPECT_FALSE(res.converged);
}

TEST(Fit, NanLikelihoodAtInitIsUsageError) {
  auto dives = gamma_only_dives(10, 20.0, 5.0, 5u);
  dives[3].duration_s = std::nan("");
  const ModelSpec spec = make_model_spec(Variant::kCarHmmDft, 1, 1, 1);
  EXPECT_THROW(fit(dives, spec), std::invalid_argument);
}

// =============================================================================
// Standard errors
// =============================================================================

TEST(ObservedFisherSe, ClosedFormNormalMean) {
  // 1000 iid Normal window averages: se(mu) = sigma / sqrt(n)
  const double mu = 0.5, sigma = 0.2;
  ModelSpec spec;
  spec.coarse = {1, CoarseStructure::kIid};
  spec.fine = {1, /*use_car=*/false, /*has_wiggle=*/false, true, false};
  spec.n_channels = 1;

  SplitRng rng(301);
  std::vector<DiveRecord> dives(200);
  for (int t = 0; t < 200; ++t) {
    auto& d = dives[static_cast<std::size_t>(t)];
    d.dive_id = t;
    d.duration_s = rng.gamma(16.0, 1.25);
    for (int w = 0; w < 5; ++w) {
      WindowFeatures feat;
      feat.avg = Eigen::VectorXd::Constant(1, rng.normal(mu, sigma));
      feat.wiggliness = 0.0;
      d.windows.push_back(std::move(feat));
    }
  }
  FitOptions opts;
  opts.restarts = 1;
  FitResult res = fit(dives, spec, std::nullopt, opts);
  ASSERT_TRUE(res.converged);
  const StdErrors se = observed_fisher_se(res, dives, opts);
  ASSERT_TRUE(se.hessian_positive_definite);
  int idx = -1;
  for (std::size_t i = 0; i < se.names.size(); ++i)
    if (se.names[i] == "avg.mu.1.1") idx = static_cast<int>(i);
  ASSERT_GE(idx, 0);
  const double fitted_sigma = res.model.params.fine_emissions[0][0].avg.sd(0);
  EXPECT_NEAR(se.se(idx), fitted_sigma / std::sqrt(1000.0), 0.05 * fitted_sigma / std::sqrt(1000.0));
}

TEST(ObservedFisherSe, HessianSymmetric) {
  const auto dives = gamma_only_dives(100, 20.0, 6.0, 11u);
  const ModelSpec spec = make_model_spec(Variant::kCarHmmDft, 1, 1, 1);
  FitOptions opts;
  opts.restarts = 1;
  FitResult res = fit(dives, spec, std::nullopt, opts);
  ASSERT_TRUE(res.converged);
  observed_fisher_se(res, dives, opts);
  ASSERT_TRUE(res.hessian.has_value());
  const Eigen::MatrixXd& h = *res.hessian;
  EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-4 * h.cwiseAbs().maxCoeff());
}

TEST(ObservedFisherSe, DeltaMethodChainRuleForLogLink) {
  // for a log-linked scalar parameter, se_natural = estimate * se_log
  ModelSpec spec;
  spec.coarse = {1, CoarseStructure::kIid};
  spec.fine = {1, /*use_car=*/false, /*has_wiggle=*/false, true, false};
  spec.n_channels = 1;
  SplitRng rng(303);
  std::vector<DiveRecord> dives(150);
  for (int t = 0; t < 150; ++t) {
    auto& d = dives[static_cast<std::size_t>(t)];
    d.dive_id = t;
    d.duration_s = rng.gamma(9.0, 2.8);
    for (int w = 0; w < 4; ++w) {
      WindowFeatures feat;
      feat.avg = Eigen::VectorXd::Constant(1, rng.normal(0.3, 0.15));
      d.windows.push_back(std::move(feat));
    }
  }
  FitOptions opts;
  opts.restarts = 1;
  FitResult res = fit(dives, spec, std::nullopt, opts);
  ASSERT_TRUE(res.converged);
  const StdErrors se = observed_fisher_se(res, dives, opts);
  ASSERT_TRUE(se.hessian_positive_definite);

  // duration.mu is the first natural parameter (iid structure has no gamma)
  ASSERT_EQ(se.names[0], "duration.mu.1");
  // and log duration.mu is the first packed coordinate
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*res.hessian);
  const Eigen::MatrixXd cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();
  const double se_log = std::sqrt(cov(0, 0));
  EXPECT_NEAR(se.se(0), se.estimates(0) * se_log, 1e-10 * se.se(0));
}

TEST(ObservedFisherSe, RequiresConvergedFit) {
  FitResult res;
  res.converged = false;
  std::vector<DiveRecord> dives;
  EXPECT_THROW(observed_fisher_se(res, dives), std::invalid_argument);
}

// =============================================================================
// Canonical ordering
// =============================================================================

TEST(Canonicalize, SortsCoarseByDurationAndFineByWiggle) {
  HierModel model = default_generating_model();
  // scramble
  std::swap(model.params.coarse_emissions[0], model.params.coarse_emissions[1]);
  std::swap(model.params.fine_gammas[0], model.params.fine_gammas[1]);
  Eigen::MatrixXd g = model.params.coarse_gamma->probs;
  Eigen::MatrixXd swapped(2, 2);
  swapped << g(1, 1), g(1, 0), g(0, 1), g(0, 0);
  model.params.coarse_gamma = TransitionMatrix(swapped);
  std::swap(model.params.fine_emissions[0][0], model.params.fine_emissions[0][1]);
  for (auto& fg : model.params.fine_gammas) {
    Eigen::MatrixXd f = fg.probs;
    Eigen::MatrixXd fs(2, 2);
    fs << f(1, 1), f(1, 0), f(0, 1), f(0, 0);
    fg = TransitionMatrix(fs);
  }

  canonicalize_states(model);
  const HierModel reference = default_generating_model();
  EXPECT_LT((model.params.coarse_gamma->probs - reference.params.coarse_gamma->probs)
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
  EXPECT_EQ(model.params.coarse_emissions[0].mean, reference.params.coarse_emissions[0].mean);
  EXPECT_EQ(model.params.fine_emissions[0][0].wiggle->mean,
            reference.params.fine_emissions[0][0].wiggle->mean);
  for (int i = 0; i < 2; ++i)
    EXPECT_LT((model.params.fine_gammas[static_cast<std::size_t>(i)].probs -
               reference.params.fine_gammas[static_cast<std::size_t>(i)].probs)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
}
