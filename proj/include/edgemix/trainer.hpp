#pragma once

// Per-signal training loop: for each outer batch, one optimizer step per
// signal in the order link, attribute, diffusion. Each step minimizes
//
//   lambda_s * reconstruction_s + KL(W) + mean_b KL(z_b || prior_b)
//
// where prior_b is the smoothed one-hot prior on labeled pairs and uniform
// elsewhere.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/config.hpp"
#include "edgemix/decoders.hpp"
#include "edgemix/encoder.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/latent.hpp"
#include "edgemix/model.hpp"
#include "edgemix/optimizer.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/sampling.hpp"

namespace edgemix {

struct TrainConfig {
  std::size_t K = 2;
  std::vector<std::size_t> gcn_dims{200, 100};
  std::size_t fnn_hidden = 3;
  std::size_t kappa_h = 100;
  std::size_t decoder_hidden = 200;
  std::size_t fixed_size = 30;
  std::array<double, 3> lambda{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double tau = 0.5;
  bool tau_anneal = false;  // linear 1.0 -> tau over the run
  double eta = 0.1;
  std::size_t batch_size = 1024;
  std::size_t batches = 0;  // T; required
  double learning_rate = 0.001;
  double neg_ratio = 1.0;
  std::uint64_t seed = 0;
  bool label_balanced = false;  // half of each positive batch from labeled edges
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
    if (K < 2) fail("K must be >= 2");
    if (gcn_dims.empty()) fail("gcn_dims must list at least one layer");
    for (auto d : gcn_dims)
      if (d == 0) fail("gcn_dims entries must be positive");
    if (fnn_hidden == 0 || kappa_h == 0 || decoder_hidden == 0 || fixed_size == 0)
      fail("layer sizes and fixed_size must be positive");
    double total = 0.0;
    for (double l : lambda) {
      if (l < 0.0) fail("lambda entries must be >= 0");
      total += l;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("lambda must sum to 1");
    if (!(tau > 0.0)) fail("tau must be > 0");
    if (!(eta > 0.0)) fail("eta must be > 0");
    if (batch_size < 2) fail("batch_size must be >= 2");
    if (batches == 0) fail("batches must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(neg_ratio > 0.0)) fail("neg_ratio must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      fail("adam betas must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  }

  AdamOptions adam() const { return {adam_beta1, adam_beta2, adam_epsilon}; }

  static TrainConfig parse(const std::string& text, const std::string& source = "config") {
    TrainConfig c;
    using namespace config;
    auto size = [](std::size_t& dst) {
      return [&dst](const std::string& k, const std::string& v) {
        dst = static_cast<std::size_t>(to_uint(k, v));
      };
    };
    auto real = [](double& dst) {
      return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); };
    };
    auto flag = [](bool& dst) {
      return [&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); };
    };
    Binder b;
    b.bind("K", size(c.K))
        .bind("gcn_dims", [&](const std::string& k, const std::string& v) { c.gcn_dims = to_sizes(k, v); })
        .bind("fnn_hidden", size(c.fnn_hidden))
        .bind("kappa_h", size(c.kappa_h))
        .bind("decoder_hidden", size(c.decoder_hidden))
        .bind("fixed_size", size(c.fixed_size))
        .bind("lambda",
              [&](const std::string& k, const std::string& v) {
                auto l = to_doubles(k, v);
                if (l.size() != 3) throw ConfigError("lambda: expected 3 values");
                c.lambda = {l[0], l[1], l[2]};
              })
        .bind("tau", real(c.tau))
        .bind("tau_anneal", flag(c.tau_anneal))
        .bind("eta", real(c.eta))
        .bind("batch_size", size(c.batch_size))
        .bind("batches", size(c.batches))
        .bind("learning_rate", real(c.learning_rate))
        .bind("neg_ratio", real(c.neg_ratio))
        .bind("seed", [&](const std::string& k, const std::string& v) { c.seed = to_uint(k, v); })
        .bind("label_balanced", flag(c.label_balanced))
        .bind("adam_beta1", real(c.adam_beta1))
        .bind("adam_beta2", real(c.adam_beta2))
        .bind("adam_epsilon", real(c.adam_epsilon));
    b.apply(parse_pairs(text, source), source);
    c.validate();
    return c;
  }

  static TrainConfig load(const std::filesystem::path& path) {
    return parse(config::read_file(path), path.string());
  }

  /// Canonical text form; `parse(to_text())` reproduces every field exactly.
  std::string to_text() const {
    using config::join_list;
    auto real = [](double v) { return io::format_double(v); };
    std::string s;
    auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    line("K", std::to_string(K));
    line("gcn_dims", join_list(gcn_dims));
    line("fnn_hidden", std::to_string(fnn_hidden));
    line("kappa_h", std::to_string(kappa_h));
    line("decoder_hidden", std::to_string(decoder_hidden));
    line("fixed_size", std::to_string(fixed_size));
    line("lambda", join_list(lambda));
    line("tau", real(tau));
    line("tau_anneal", tau_anneal ? "true" : "false");
    line("eta", real(eta));
    line("batch_size", std::to_string(batch_size));
    line("batches", std::to_string(batches));
    line("learning_rate", real(learning_rate));
    line("neg_ratio", real(neg_ratio));
    line("seed", std::to_string(seed));
    line("label_balanced", label_balanced ? "true" : "false");
    line("adam_beta1", real(adam_beta1));
    line("adam_beta2", real(adam_beta2));
    line("adam_epsilon", real(adam_epsilon));
    return s;
  }
};

inline ModelDims model_dims(const Graph& g, const TrainConfig& cfg) {
  ModelDims d;
  d.attribute_dim = g.attribute_dim();
  d.content_dim = g.content_dim();
  d.relations = cfg.K;
  d.gcn_dims = cfg.gcn_dims;
  d.fnn_hidden = cfg.fnn_hidden;
  d.kappa_h = cfg.kappa_h;
  d.decoder_hidden = cfg.decoder_hidden;
  return d;
}

/// Everything that evolves during training. Save/load via checkpoint.hpp.
struct TrainState {
  TrainConfig config;
  Model model;
  Rng rng;
  std::uint64_t batch = 0;  // completed outer batches

  bool operator==(const TrainState&) const = default;
};

/// Seeds the random source with `cfg.seed` and initializes all parameters.
inline TrainState initialize_training(const Graph& g, const TrainConfig& cfg) {
  cfg.validate();
  for (const auto& [e, r] : g.labels())
    if (static_cast<std::size_t>(r) >= cfg.K)
      throw ConfigError("relation label " + std::to_string(r) + " on edge " + std::to_string(e.u) +
                        "-" + std::to_string(e.v) + " is outside [0, K)");
  TrainState s;
  s.config = cfg;
  s.rng = Rng(cfg.seed);
  s.model = Model::initialize(model_dims(g, cfg), s.rng);
  return s;
}

struct StepLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl_w = 0.0;
  double kl_z = 0.0;
};

inline double temperature_at(const TrainConfig& cfg, std::uint64_t batch) {
  if (!cfg.tau_anneal || cfg.batches <= 1) return cfg.tau;
  const double frac =
      std::min(1.0, static_cast<double>(batch) / static_cast<double>(cfg.batches - 1));
  return 1.0 + (cfg.tau - 1.0) * frac;
}

inline bool has_signal(const Graph& g, Signal s) {
  return s == Signal::diffusion ? !g.diffusions().empty() : g.edge_count() > 0;
}

/// Batch for one signal. Link batches hold ceil(B / (1 + neg_ratio)) positives
/// plus their corruptions, so every signal sees about B pairs.
inline EdgeBatch sample_batch(const Graph& g, Signal signal, const TrainConfig& cfg, Rng& rng) {
  const double labeled_share = cfg.label_balanced ? 0.5 : 0.0;
  switch (signal) {
    case Signal::link: {
      const auto positives = static_cast<std::size_t>(
          std::ceil(static_cast<double>(cfg.batch_size) / (1.0 + cfg.neg_ratio)));
      return sample_link_pairs(g, positives, cfg.neg_ratio, rng, labeled_share);
    }
    case Signal::attribute: return sample_attribute_batch(g, cfg.batch_size, rng, labeled_share);
    case Signal::diffusion: return sample_diffusion_batch(g, cfg.batch_size, rng);
  }
  throw Error("unknown signal");
}

/// Recorded negative ELBO terms for one batch; shared by training and gradient checks.
struct StepGraph {
  Var reconstruction;
  Var kl_w;
  Var kl_z;
  Var total;
};

namespace detail {
template <typename Fn>
auto guarded(const char* term, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string("non-finite ") + term + " term: " + e.what());
  }
}
}  // namespace detail

inline StepGraph record_step(Tape& tape, const Graph& g, const EdgeBatch& batch, Model& model,
                             const TrainConfig& cfg, double tau, Rng& rng) {
  const std::size_t k = model.dims.relations;
  const std::size_t n = batch.pairs.size();
  StepGraph out;
  EncodedPairs enc = detail::guarded("encoder", [&] {
    return encode_pair_logits(tape, g, batch.pairs, model, cfg.fixed_size, rng);
  });
  const LatentNoise noise = draw_latent_noise(rng, n, k, model.dims.kappa_h);
  Var mean = tape.parameter(model.params, names::mixture_mean);
  Var log_std = tape.parameter(model.params, names::mixture_log_std);
  Var h = detail::guarded("latent", [&] {
    auto w = sample_w(mean, log_std, noise.epsilon);
    Var z = sample_z(enc.logits, noise.gumbel, tau);
    return compose_h(z, w);
  });

  const double lambda = cfg.lambda[static_cast<std::size_t>(batch.signal)];
  out.reconstruction = detail::guarded("reconstruction", [&] {
    switch (batch.signal) {
      case Signal::link:
        return link_loss(h, batch.link_targets, decoder_weights(tape, model, Decoder::link));
      case Signal::attribute:
        return attribute_loss(h, batch.content_targets,
                              decoder_weights(tape, model, Decoder::attribute));
      case Signal::diffusion:
        return diffusion_loss(h, batch.content_targets,
                              decoder_weights(tape, model, Decoder::diffusion));
    }
    throw Error("unknown signal");
  });

  out.kl_w = detail::guarded("KL(W)", [&] { return edgemix::kl_w(mean, log_std); });

  std::vector<PriorSpec> priors(n);
  for (std::size_t b = 0; b < n; ++b)
    if (auto label = g.label(enc.pairs[b])) priors[b] = PriorSpec::labeled(*label, cfg.eta);
  out.kl_z = detail::guarded("KL(Z)", [&] { return edgemix::kl_z(enc.logits, log_prior_rows(priors, k)); });

  out.total = detail::guarded("total", [&] {
    return add(add(scalar_mul(out.reconstruction, lambda), out.kl_w), out.kl_z);
  });
  return out;
}

/// One optimizer step on one signal. Returns nothing when the graph lacks
/// the signal (no diffusions); the step is then skipped.
inline std::optional<StepLoss> train_step(const Graph& g, Signal signal, TrainState& state) {
  if (!has_signal(g, signal)) return std::nullopt;
  const TrainConfig& cfg = state.config;
  const double tau = temperature_at(cfg, state.batch);
  EdgeBatch batch = sample_batch(g, signal, cfg, state.rng);
  Tape tape;
  StepGraph step = record_step(tape, g, batch, state.model, cfg, tau, state.rng);
  StepLoss loss{step.total.item(), step.reconstruction.item(), step.kl_w.item(),
                step.kl_z.item()};
  tape.backward(step.total);
  optimizer_step(state.model.params, cfg.learning_rate, cfg.adam());
  return loss;
}

struct TraceEntry {
  std::uint64_t batch = 0;
  Signal signal = Signal::link;
  double loss = 0.0;

  bool operator==(const TraceEntry&) const = default;
};

using LossTrace = std::vector<TraceEntry>;

/// Runs `count` outer batches (all of the configured T when omitted),
/// appending one trace entry per executed step.
inline void train(const Graph& g, TrainState& state, LossTrace& trace,
                  std::optional<std::uint64_t> count = std::nullopt,
                  const std::function<void(const TraceEntry&, const StepLoss&)>& on_step = {}) {
  const std::uint64_t todo = count.value_or(state.config.batches > state.batch
                                                ? state.config.batches - state.batch
                                                : 0);
  for (std::uint64_t i = 0; i < todo; ++i) {
    for (Signal s : {Signal::link, Signal::attribute, Signal::diffusion}) {
      auto loss = train_step(g, s, state);
      if (!loss) continue;
      TraceEntry entry{state.batch, s, loss->total};
      trace.push_back(entry);
      if (on_step) on_step(entry, *loss);
    }
    ++state.batch;
  }
}

/// Fresh state plus a full run of cfg.batches.
inline TrainState train(const Graph& g, const TrainConfig& cfg, LossTrace& trace) {
  TrainState state = initialize_training(g, cfg);
  train(g, state, trace);
  return state;
}

inline void write_trace(const LossTrace& trace, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  for (const auto& e : trace)
    out << e.batch << '\t' << signal_name(e.signal) << '\t' << io::format_double(e.loss) << '\n';
}

}  // namespace edgemix
