#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/error.hpp"
#include "edgemix/parameters.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

/// Layer sizes of the encoder, the mixture and the three decoders.
struct ModelDims {
  std::size_t attribute_dim = 0;     // L
  std::size_t content_dim = 0;       // L_c; 0 disables the diffusion decoder
  std::size_t relations = 2;         // K
  std::vector<std::size_t> gcn_dims{200, 100};
  std::size_t fnn_hidden = 3;
  std::size_t kappa_h = 100;         // edge embedding width
  std::size_t decoder_hidden = 200;

  bool operator==(const ModelDims&) const = default;
};

enum class Decoder { link, attribute, diffusion };

inline const char* decoder_name(Decoder d) {
  switch (d) {
    case Decoder::link: return "link";
    case Decoder::attribute: return "attribute";
    case Decoder::diffusion: return "diffusion";
  }
  return "?";
}

namespace names {
inline std::string gcn(std::size_t layer) { return "gcn." + std::to_string(layer) + ".weight"; }
inline const std::string relation_hidden_w = "relation.hidden.weight";
inline const std::string relation_hidden_b = "relation.hidden.bias";
inline const std::string relation_out_w = "relation.out.weight";
inline const std::string relation_out_b = "relation.out.bias";
inline const std::string mixture_mean = "mixture.mean";
inline const std::string mixture_log_std = "mixture.log_std";
inline std::string decoder(Decoder d, const char* part) {
  return std::string("decoder.") + decoder_name(d) + "." + part;
}
}  // namespace names

/// All trainable parameters: GCN weights, relation FNN, the K global Gaussian
/// components (mean and log standard deviation, K x kappa_h each) and the
/// decoder FNNs.
struct Model {
  ModelDims dims;
  ParameterStore params;

  std::size_t decoder_output(Decoder d) const {
    switch (d) {
      case Decoder::link: return 1;
      case Decoder::attribute: return 2 * dims.attribute_dim;
      case Decoder::diffusion: return dims.content_dim;
    }
    return 0;
  }

  bool has_decoder(Decoder d) const { return decoder_output(d) > 0; }

  /// Weights ~ N(0, 2 / fan_in), biases 0, component means ~ N(0, 0.1^2),
  /// log standard deviations 0. Draw order follows parameter order.
  static Model initialize(const ModelDims& dims, Rng& rng) {
    if (dims.relations < 2) throw ConfigError("model: need at least 2 relations");
    if (dims.gcn_dims.empty()) throw ConfigError("model: need at least one GCN layer");
    if (dims.attribute_dim == 0) throw ConfigError("model: attribute dimension is 0");
    Model m;
    m.dims = dims;
    auto he = [&](std::size_t fan_in, std::size_t fan_out) {
      Matrix w(fan_in, fan_out);
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : w.values()) v = sd * rng.normal();
      return w;
    };
    std::size_t in = dims.attribute_dim;
    for (std::size_t l = 0; l < dims.gcn_dims.size(); ++l) {
      m.params.add(names::gcn(l), he(in, dims.gcn_dims[l]));
      in = dims.gcn_dims[l];
    }
    m.params.add(names::relation_hidden_w, he(2 * in, dims.fnn_hidden));
    m.params.add(names::relation_hidden_b, Matrix(1, dims.fnn_hidden));
    m.params.add(names::relation_out_w, he(dims.fnn_hidden, dims.relations));
    m.params.add(names::relation_out_b, Matrix(1, dims.relations));

    Matrix mean(dims.relations, dims.kappa_h);
    for (double& v : mean.values()) v = 0.1 * rng.normal();
    m.params.add(names::mixture_mean, std::move(mean));
    m.params.add(names::mixture_log_std, Matrix(dims.relations, dims.kappa_h));

    for (Decoder d : {Decoder::link, Decoder::attribute, Decoder::diffusion}) {
      if (!m.has_decoder(d)) continue;
      m.params.add(names::decoder(d, "hidden.weight"), he(dims.kappa_h, dims.decoder_hidden));
      m.params.add(names::decoder(d, "hidden.bias"), Matrix(1, dims.decoder_hidden));
      m.params.add(names::decoder(d, "out.weight"), he(dims.decoder_hidden, m.decoder_output(d)));
      m.params.add(names::decoder(d, "out.bias"), Matrix(1, m.decoder_output(d)));
    }
    return m;
  }

  bool operator==(const Model&) const = default;
};

}  // namespace edgemix
