#pragma once

// Finite-difference check of every training objective on a tiny random
// instance: encoder, latent sampling, each decoder loss and both KL terms.

#include <cstdint>
#include <vector>

#include "edgemix/gradcheck.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/model.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/sampling.hpp"
#include "edgemix/trainer.hpp"

namespace edgemix {

/// Small config used by the gradient check; every width is at most 8.
inline TrainConfig tiny_check_config(std::uint64_t seed) {
  TrainConfig c;
  c.K = 2;
  c.gcn_dims = {6, 5};
  c.fnn_hidden = 3;
  c.kappa_h = 4;
  c.decoder_hidden = 5;
  c.fixed_size = 3;
  c.batch_size = 4;
  c.batches = 1;
  c.seed = seed;
  return c;
}

/// Ring on `n` nodes plus random chords, random attributes and contents,
/// two diffusions and labels on a third of the edges.
inline Graph tiny_check_graph(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    edges.push_back(canonical(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n)));
  for (std::size_t i = 0; i < n / 2; ++i) {
    const auto a = static_cast<NodeId>(rng.index(n));
    const auto b = static_cast<NodeId>(rng.index(n));
    if (a != b) edges.push_back(canonical(a, b));
  }
  Matrix attributes(n, 4);
  for (double& v : attributes.values()) v = rng.normal();
  std::vector<DiffusionNet> diffusions;
  for (std::size_t d = 0; d < 2; ++d) {
    DiffusionNet net;
    for (std::size_t k = 0; k < 3; ++k) net.covered_edges.push_back(edges[rng.index(n)]);
    for (std::size_t c = 0; c < 3; ++c) net.content.push_back(rng.normal());
    diffusions.push_back(std::move(net));
  }
  EdgeLabels labels;
  for (std::size_t i = 0; i < n; i += 3) labels.emplace(edges[i], static_cast<int>(rng.index(2)));
  return Graph(n, std::move(edges), std::move(attributes), std::move(diffusions), std::move(labels));
}

struct ModelCheckResult {
  GradCheckResult worst;
  Signal worst_signal = Signal::link;
  std::size_t entries = 0;
};

/// Checks the full per-signal objective (lambda_s * reconstruction + KL terms)
/// at one random point. Sampling randomness is frozen so every probe sees the
/// same batch, neighborhoods and noise.
inline ModelCheckResult check_model_gradients(std::uint64_t seed, double step = 1e-5) {
  const TrainConfig cfg = tiny_check_config(seed);
  const Graph g = tiny_check_graph(10, seed);
  TrainState state = initialize_training(g, cfg);
  ModelCheckResult out;
  bool first = true;
  for (Signal s : {Signal::link, Signal::attribute, Signal::diffusion}) {
    const EdgeBatch batch = sample_batch(g, s, cfg, state.rng);
    const Rng frozen = state.rng;
    Objective f = [&](Tape& tape) {
      Rng rng = frozen;
      return record_step(tape, g, batch, state.model, cfg, cfg.tau, rng).total;
    };
    const GradCheckResult r = grad_check(f, state.model.params, step);
    out.entries += r.entries;
    if (first || r.max_relative_error > out.worst.max_relative_error) {
      out.worst = r;
      out.worst_signal = s;
      first = false;
    }
    state.rng.next_u64();
  }
  return out;
}

}  // namespace edgemix
