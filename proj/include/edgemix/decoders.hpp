#pragma once

// Reconstruction losses from edge embeddings. Each decoder is a two-layer FNN
// (affine, ReLU, affine); every loss is averaged over the batch.

#include <cstddef>
#include <span>

#include "edgemix/autodiff.hpp"
#include "edgemix/error.hpp"
#include "edgemix/model.hpp"

namespace edgemix {

/// Logits beyond this magnitude are clamped before the sigmoid.
inline constexpr double kLogitClamp = 30.0;

struct DecoderWeights {
  Var hidden_weight;
  Var hidden_bias;
  Var out_weight;
  Var out_bias;
};

inline DecoderWeights decoder_weights(Tape& tape, Model& model, Decoder d) {
  if (!model.has_decoder(d))
    throw Error(std::string("model has no ") + decoder_name(d) + " decoder");
  auto& p = model.params;
  return {tape.parameter(p, names::decoder(d, "hidden.weight")),
          tape.parameter(p, names::decoder(d, "hidden.bias")),
          tape.parameter(p, names::decoder(d, "out.weight")),
          tape.parameter(p, names::decoder(d, "out.bias"))};
}

inline Var decode(const Var& h, const DecoderWeights& w) {
  return affine(relu(affine(h, w.hidden_weight, w.hidden_bias)), w.out_weight, w.out_bias);
}

/// Mean binary cross-entropy of clamped link logits (B x 1) against 0/1 targets.
inline Var link_loss_from_logits(const Var& logits, std::span<const double> targets) {
  Tape& t = *logits.tape();
  if (logits.cols() != 1 || logits.rows() != targets.size())
    throw ShapeError("link_loss: " + logits.value().shape() + " logits for " +
                     std::to_string(targets.size()) + " targets");
  Matrix pos(targets.size(), 1), neg(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0.0 && targets[i] != 1.0) throw Error("link_loss: targets must be 0 or 1");
    pos[i] = targets[i];
    neg[i] = 1.0 - targets[i];
  }
  Var x = clamp(logits, -kLogitClamp, kLogitClamp);
  Var ll = add(mul(t.constant(std::move(pos)), log_sigmoid(x)),
               mul(t.constant(std::move(neg)), log_sigmoid(scalar_mul(x, -1.0))));
  return scalar_mul(sum(ll), -1.0 / static_cast<double>(targets.size()));
}

inline Var link_loss(const Var& h, std::span<const double> targets, const DecoderWeights& w) {
  return link_loss_from_logits(decode(h, w), targets);
}

/// Mean squared l2 reconstruction error, sum over dimensions.
inline Var l2_reconstruction(const Var& predicted, const Matrix& targets) {
  Tape& t = *predicted.tape();
  if (!predicted.value().same_shape(targets))
    throw ShapeError("reconstruction: prediction " + predicted.value().shape() + " vs target " +
                     targets.shape());
  return scalar_mul(l2_norm_sq(sub(t.constant(targets), predicted)),
                    1.0 / static_cast<double>(targets.rows()));
}

/// Targets are concatenated endpoint attributes, width 2L.
inline Var attribute_loss(const Var& h, const Matrix& targets, const DecoderWeights& w) {
  return l2_reconstruction(decode(h, w), targets);
}

/// Targets are the sampled diffusion's content, width L_c.
inline Var diffusion_loss(const Var& h, const Matrix& targets, const DecoderWeights& w) {
  return l2_reconstruction(decode(h, w), targets);
}

}  // namespace edgemix
