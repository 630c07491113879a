#pragma once

// Relation interpretation: sample edge embeddings from the learned mixture,
// decode them with the diffusion decoder and rank reference diffusion
// contents by cosine similarity.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/decoders.hpp"
#include "edgemix/error.hpp"
#include "edgemix/model.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

/// Cosine similarity; 0 when either vector is zero.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

struct ReferenceMatch {
  std::size_t reference = 0;
  double similarity = 0.0;

  bool operator==(const ReferenceMatch&) const = default;
};

struct Interpretation {
  std::vector<double> decoded;
  std::vector<ReferenceMatch> ranked;  // best first

  bool operator==(const Interpretation&) const = default;
};

struct InterpretOptions {
  std::size_t samples = 100;
  std::size_t top = 5;
  bool zero_noise = false;  // decode the mixture mean instead of random draws
};

/// The `top` references most similar to `decoded`; ties keep the lower index.
inline std::vector<ReferenceMatch> rank_references(std::span<const double> decoded,
                                                   const std::vector<std::vector<double>>& references,
                                                   std::size_t top) {
  std::vector<ReferenceMatch> all;
  all.reserve(references.size());
  for (std::size_t i = 0; i < references.size(); ++i)
    all.push_back({i, cosine_similarity(decoded, references[i])});
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.similarity > b.similarity; });
  all.resize(std::min(top, all.size()));
  return all;
}

/// Draws h = sum_k weight_k (mu_k + sigma_k eps_k) and decodes each draw.
/// Noise is drawn only for components with nonzero weight, in component order.
inline std::vector<Interpretation> interpret_mixture(Model& model, const std::vector<double>& weights,
                                                     const std::vector<std::vector<double>>& references,
                                                     Rng& rng, const InterpretOptions& opt = {}) {
  const std::size_t k = model.dims.relations;
  if (weights.size() != k)
    throw Error("interpret: expected " + std::to_string(k) + " mixture weights");
  if (references.empty()) throw Error("interpret: no reference diffusions");
  if (!model.has_decoder(Decoder::diffusion)) throw Error("interpret: model has no diffusion decoder");
  for (const auto& r : references)
    if (r.size() != model.dims.content_dim) throw ShapeError("interpret: reference width mismatch");

  const Matrix& mean = model.params[names::mixture_mean].value;
  const Matrix& log_std = model.params[names::mixture_log_std].value;
  const std::size_t width = model.dims.kappa_h;
  Matrix h(opt.samples, width);
  for (std::size_t s = 0; s < opt.samples; ++s)
    for (std::size_t c = 0; c < k; ++c) {
      if (weights[c] == 0.0) continue;
      for (std::size_t d = 0; d < width; ++d) {
        const double eps = opt.zero_noise ? 0.0 : rng.normal();
        h(s, d) += weights[c] * (mean(c, d) + std::exp(log_std(c, d)) * eps);
      }
    }

  Tape tape(false);
  const Matrix decoded = decode(tape.constant(std::move(h)), decoder_weights(tape, model, Decoder::diffusion)).value();
  std::vector<Interpretation> out;
  out.reserve(opt.samples);
  for (std::size_t s = 0; s < opt.samples; ++s) {
    auto row = decoded.row_span(s);
    out.push_back({{row.begin(), row.end()}, rank_references(row, references, opt.top)});
  }
  return out;
}

/// Samples from component `component` alone (one-hot relation factor).
inline std::vector<Interpretation> interpret_relation(Model& model, std::size_t component,
                                                      const std::vector<std::vector<double>>& references,
                                                      Rng& rng, const InterpretOptions& opt = {}) {
  if (component >= model.dims.relations)
    throw Error("interpret: component " + std::to_string(component) + " outside [0, " +
                std::to_string(model.dims.relations) + ")");
  std::vector<double> weights(model.dims.relations, 0.0);
  weights[component] = 1.0;
  return interpret_mixture(model, weights, references, rng, opt);
}

}  // namespace edgemix
