#include <gtest/gtest.h>

#include <cmath>

#include "edgemix/gradcheck.hpp"
#include "edgemix/latent.hpp"

using namespace edgemix;

TEST(KlW, StandardNormalIsZero) {
  EXPECT_EQ(kl_w(Matrix(2, 3), Matrix(2, 3, 1.0)), 0.0);
}

TEST(KlW, ClosedFormOneDimension) {
  // 1/2 (2 + 0 - 1 - ln 2)
  EXPECT_NEAR(kl_w(Matrix(1, 1), Matrix(1, 1, std::sqrt(2.0))), 0.153426, 1e-6);
  EXPECT_NEAR(kl_w(Matrix(1, 1), Matrix(1, 1, std::sqrt(2.0))), 0.5 * (1.0 - std::log(2.0)), 1e-15);
}

TEST(KlW, RejectsNonPositiveSigma) {
  EXPECT_THROW(kl_w(Matrix(1, 1), Matrix(1, 1, 0.0)), NumericError);
}

TEST(KlZ, UniformPriorAtVertex) {
  const std::vector<double> z{1.0, 0.0};
  EXPECT_NEAR(kl_z(z, PriorSpec::uniform()), std::log(2.0), 1e-15);
}

TEST(KlZ, UniformPriorAtCenterIsZero) {
  const std::vector<double> z{0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(kl_z(z, PriorSpec::uniform()), 0.0, 1e-15);
}

TEST(KlZ, LabeledPriorValue) {
  const std::vector<double> z{0.5, 0.5};
  // p = (0.1, 1.1) / 1.2
  const double oracle = 0.5 * std::log(0.5 / (0.1 / 1.2)) + 0.5 * std::log(0.5 / (1.1 / 1.2));
  EXPECT_NEAR(kl_z(z, PriorSpec::labeled(1, 0.1)), oracle, 1e-15);
  // 0.5 ln 6 + 0.5 ln(6/11)
  EXPECT_NEAR(kl_z(z, PriorSpec::labeled(1, 0.1)), 0.5 * std::log(36.0 / 11.0), 1e-15);
}

TEST(PriorSpec, LabeledProbabilities) {
  const auto p = PriorSpec::labeled(2, 0.1).probabilities(3);
  EXPECT_NEAR(p[0], 0.1 / 1.3, 1e-15);
  EXPECT_NEAR(p[2], 1.1 / 1.3, 1e-15);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_THROW(PriorSpec::labeled(3, 0.1).probabilities(3), ConfigError);
  EXPECT_THROW(PriorSpec::labeled(0, 0.0).probabilities(3), ConfigError);
}

TEST(SampleZ, ZeroNoiseGumbelSoftmax) {
  const std::vector<double> logits{std::log(0.75), std::log(0.25)};
  const std::vector<double> g{0.0, 0.0};
  const auto z = sample_z(logits, g, 0.5);
  // (0.75^2, 0.25^2) normalized
  EXPECT_NEAR(z[0], 0.9, 1e-12);
  EXPECT_NEAR(z[1], 0.1, 1e-12);
  EXPECT_THROW(sample_z(logits, g, 0.0), ConfigError);
}

TEST(SampleZ, DrawsStayOnSimplex) {
  Rng rng(1);
  const std::vector<double> logits{0.3, -1.2, 2.0};
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> g{rng.gumbel(), rng.gumbel(), rng.gumbel()};
    const auto z = sample_z(logits, g, 0.5);
    double s = 0.0;
    for (double v : z) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(SampleZ, LowTemperatureArgmaxMatchesSoftmax) {
  Rng rng(2);
  const std::vector<double> logits{0.5, -0.5, 1.0};
  std::vector<double> p(3);
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) total += (p[k] = std::exp(logits[k]));
  std::vector<double> freq(3, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    std::vector<double> g{rng.gumbel(), rng.gumbel(), rng.gumbel()};
    const auto z = sample_z(logits, g, 0.1);
    freq[std::max_element(z.begin(), z.end()) - z.begin()] += 1.0 / n;
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < 3; ++k) tv += 0.5 * std::abs(freq[k] - p[k] / total);
  EXPECT_LT(tv, 0.02);
}

TEST(SampleW, MeanWithinThreeStandardErrors) {
  Rng rng(3);
  const Matrix mean(1, 2, {0.7, -1.5});
  const Matrix sigma(1, 2, {0.5, 2.0});
  const int n = 100000;
  std::vector<double> acc(2, 0.0);
  for (int i = 0; i < n; ++i) {
    Matrix eps(1, 2, {rng.normal(), rng.normal()});
    const Matrix w = sample_w(mean, sigma, eps);
    acc[0] += w[0];
    acc[1] += w[1];
  }
  for (std::size_t d = 0; d < 2; ++d)
    EXPECT_LT(std::abs(acc[d] / n - mean[d]), 3.0 * sigma[d] / std::sqrt(double(n)));
}

TEST(ComposeH, WeightedSumOfRows) {
  const Matrix w(2, 3, {1, 2, 3, 10, 20, 30});
  const std::vector<double> z{0.25, 0.75};
  EXPECT_EQ(compose_h(z, w), (std::vector<double>{7.75, 15.5, 23.25}));
  const std::vector<double> bad{1.0};
  EXPECT_THROW(compose_h(bad, w), ShapeError);
}

TEST(RecordedLatent, MatchesPlainForms) {
  Rng rng(4);
  Matrix mean(2, 3), log_std(2, 3), logits(4, 2);
  for (double& v : mean.values()) v = rng.normal();
  for (double& v : log_std.values()) v = 0.3 * rng.normal();
  for (double& v : logits.values()) v = rng.normal();
  const LatentNoise noise = draw_latent_noise(rng, 4, 2, 3);
  const double tau = 0.7;

  Tape t(false);
  Var m = t.constant(mean), s = t.constant(log_std), l = t.constant(logits);
  Matrix sigma(2, 3);
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::exp(log_std[i]);
  EXPECT_NEAR(kl_w(m, s).item(), kl_w(mean, sigma), 1e-12);

  const auto w = sample_w(m, s, noise.epsilon);
  Var z = sample_z(l, noise.gumbel, tau);
  Var h = compose_h(z, w);
  for (std::size_t b = 0; b < 4; ++b) {
    Matrix eps_b(2, 3);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t d = 0; d < 3; ++d) eps_b(k, d) = noise.epsilon[k](b, d);
    const Matrix wb = sample_w(mean, sigma, eps_b);
    const auto zb = sample_z(logits.row_span(b), noise.gumbel.row_span(b), tau);
    const auto hb = compose_h(zb, wb);
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(h.value()(b, d), hb[d], 1e-12);
  }

  std::vector<PriorSpec> priors{PriorSpec::uniform(), PriorSpec::labeled(0, 0.1),
                                PriorSpec::labeled(1, 0.1), PriorSpec::uniform()};
  double expected = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    const double mx = std::max(logits(b, 0), logits(b, 1));
    const double z0 = std::exp(logits(b, 0) - mx), z1 = std::exp(logits(b, 1) - mx);
    const std::vector<double> pi{z0 / (z0 + z1), z1 / (z0 + z1)};
    expected += kl_z(pi, priors[b]) / 4.0;
  }
  EXPECT_NEAR(kl_z(l, log_prior_rows(priors, 2)).item(), expected, 1e-12);
}

TEST(RecordedLatent, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  ParameterStore store;
  Matrix mean(2, 3), log_std(2, 3), logits(4, 2);
  for (double& v : mean.values()) v = rng.normal();
  for (double& v : log_std.values()) v = 0.3 * rng.normal();
  for (double& v : logits.values()) v = rng.normal();
  store.add("mean", mean);
  store.add("log_std", log_std);
  store.add("logits", logits);
  const LatentNoise noise = draw_latent_noise(rng, 4, 2, 3);
  const Matrix prior = log_prior_rows({PriorSpec::uniform(), PriorSpec::labeled(1, 0.1),
                                       PriorSpec::uniform(), PriorSpec::labeled(0, 0.1)},
                                      2);
  Objective f = [&](Tape& t) {
    Var m = t.parameter(store, "mean"), s = t.parameter(store, "log_std");
    Var l = t.parameter(store, "logits");
    Var h = compose_h(sample_z(l, noise.gumbel, 0.5), sample_w(m, s, noise.epsilon));
    return add(add(sum(mul(h, h)), kl_w(m, s)), kl_z(l, prior));
  };
  EXPECT_LT(grad_check(f, store).max_relative_error, 1e-6);
}

TEST(LatentNoise, DrawOrderIsEpsilonThenGumbel) {
  Rng rng(6), oracle(6);
  const LatentNoise n = draw_latent_noise(rng, 2, 2, 3);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(n.epsilon[k][i], oracle.normal());
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t b = 0; b < 2; ++b) EXPECT_EQ(n.gumbel(b, k), oracle.gumbel());
}
