#include <gtest/gtest.h>

#include <cmath>

#include "edgemix/decoders.hpp"
#include "edgemix/gradcheck.hpp"

using namespace edgemix;

namespace {

Model tiny_model(std::size_t attr_dim, std::size_t content_dim, std::uint64_t seed) {
  ModelDims d;
  d.attribute_dim = attr_dim;
  d.content_dim = content_dim;
  d.gcn_dims = {3};
  d.fnn_hidden = 2;
  d.kappa_h = 4;
  d.decoder_hidden = 5;
  Rng rng(seed);
  return Model::initialize(d, rng);
}

}  // namespace

TEST(LinkLoss, ZeroLogitIsLogTwo) {
  Tape t(false);
  const std::vector<double> pos{1.0}, neg{0.0};
  EXPECT_NEAR(link_loss_from_logits(t.constant(Matrix(1, 1)), pos).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(link_loss_from_logits(t.constant(Matrix(1, 1)), neg).item(), std::log(2.0), 1e-15);
}

TEST(LinkLoss, BatchMeanOfCrossEntropy) {
  Tape t(false);
  const std::vector<double> y{1.0, 0.0, 1.0};
  const Matrix x(3, 1, {2.0, 1.0, -0.5});
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-x[i]));
    oracle -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  EXPECT_NEAR(link_loss_from_logits(t.constant(x), y).item(), oracle / 3.0, 1e-14);
}

TEST(LinkLoss, ExtremeLogitsAreClampedAndFinite) {
  Tape t;
  const std::vector<double> y{0.0, 1.0};
  ParameterStore store;
  store.add("x", Matrix(2, 1, {1000.0, -1000.0}));
  Var loss = link_loss_from_logits(t.parameter(store, "x"), y);
  // Both terms equal softplus(30).
  const double softplus30 = 30.0 + std::log1p(std::exp(-30.0));
  EXPECT_NEAR(loss.item(), softplus30, 1e-12);
  t.backward(loss);
  EXPECT_EQ(store["x"].grad[0], 0.0);
  EXPECT_EQ(store["x"].grad[1], 0.0);
}

TEST(LinkLoss, RejectsBadTargetsAndShapes) {
  Tape t(false);
  const std::vector<double> half{0.5};
  EXPECT_THROW(link_loss_from_logits(t.constant(Matrix(1, 1)), half), Error);
  const std::vector<double> two{1.0, 0.0};
  EXPECT_THROW(link_loss_from_logits(t.constant(Matrix(1, 1)), two), ShapeError);
}

TEST(L2Reconstruction, BatchMeanOfSquaredNorms) {
  Tape t(false);
  const Matrix pred(2, 2, {1.0, 2.0, 0.0, 0.0});
  const Matrix target(2, 2, {1.0, 0.0, 3.0, 4.0});
  // (0 + 4 + 9 + 16) / 2
  EXPECT_NEAR(l2_reconstruction(t.constant(pred), target).item(), 14.5, 1e-15);
  EXPECT_THROW(l2_reconstruction(t.constant(pred), Matrix(2, 3)), ShapeError);
}

TEST(Decode, OutputWidths) {
  Model m = tiny_model(3, 5, 1);
  Tape t(false);
  Var h = t.constant(Matrix(6, 4, 0.3));
  EXPECT_EQ(decode(h, decoder_weights(t, m, Decoder::link)).cols(), 1u);
  EXPECT_EQ(decode(h, decoder_weights(t, m, Decoder::attribute)).cols(), 6u);
  EXPECT_EQ(decode(h, decoder_weights(t, m, Decoder::diffusion)).cols(), 5u);
  EXPECT_EQ(decode(h, decoder_weights(t, m, Decoder::diffusion)).rows(), 6u);
}

TEST(Decode, MissingDiffusionDecoderRejected) {
  Model m = tiny_model(3, 0, 1);
  Tape t(false);
  EXPECT_FALSE(m.has_decoder(Decoder::diffusion));
  EXPECT_THROW(decoder_weights(t, m, Decoder::diffusion), Error);
}

TEST(Decode, AffineReluAffine) {
  Model m = tiny_model(1, 2, 2);
  const auto& p = m.params;
  Tape t(false);
  const Matrix h(1, 4, {0.5, -1.0, 2.0, 0.25});
  const Matrix out = decode(t.constant(h), decoder_weights(t, m, Decoder::diffusion)).value();
  const Matrix& w1 = p[names::decoder(Decoder::diffusion, "hidden.weight")].value;
  const Matrix& w2 = p[names::decoder(Decoder::diffusion, "out.weight")].value;
  for (std::size_t o = 0; o < 2; ++o) {
    double y = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      double a = 0.0;
      for (std::size_t i = 0; i < 4; ++i) a += h[i] * w1(i, j);
      y += std::max(a, 0.0) * w2(j, o);
    }
    EXPECT_NEAR(out[o], y, 1e-12);
  }
}

TEST(Decoders, GradientsMatchFiniteDifferences) {
  Model m = tiny_model(2, 3, 3);
  Rng rng(4);
  Matrix h(5, 4), attr(5, 4), content(5, 3);
  for (double& v : h.values()) v = rng.normal();
  for (double& v : attr.values()) v = rng.normal();
  for (double& v : content.values()) v = rng.normal();
  m.params.add("h", h);
  const std::vector<double> y{1, 0, 1, 1, 0};
  Objective f = [&](Tape& t) {
    Var hv = t.parameter(m.params, "h");
    Var l = link_loss(hv, y, decoder_weights(t, m, Decoder::link));
    Var a = attribute_loss(hv, attr, decoder_weights(t, m, Decoder::attribute));
    Var d = diffusion_loss(hv, content, decoder_weights(t, m, Decoder::diffusion));
    return add(add(l, a), d);
  };
  EXPECT_LT(grad_check(f, m.params).max_relative_error, 1e-6);
}
