#pragma once

// Gaussian-mixture edge embedding: h = sum_k z_k * w_k with w_k ~ N(mu_k, sigma_k^2)
// drawn by the location-scale trick and z a Gumbel-Softmax relaxation of the
// relation distribution, plus the two KL regularizers.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/error.hpp"
#include "edgemix/matrix.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

/// Prior over the relation factor of one pair.
struct PriorSpec {
  enum class Kind { uniform, labeled };
  Kind kind = Kind::uniform;
  int label = 0;
  double eta = 0.1;

  static PriorSpec uniform() { return {}; }
  static PriorSpec labeled(int label, double eta) { return {Kind::labeled, label, eta}; }

  /// p(z = k); the labeled form is (1[k = label] + eta) / (1 + K eta).
  std::vector<double> probabilities(std::size_t k) const {
    std::vector<double> p(k, 1.0 / static_cast<double>(k));
    if (kind == Kind::labeled) {
      if (!(eta > 0.0)) throw ConfigError("PriorSpec: eta must be > 0");
      if (label < 0 || static_cast<std::size_t>(label) >= k)
        throw ConfigError("PriorSpec: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(k) + ")");
      const double norm = 1.0 + static_cast<double>(k) * eta;
      for (std::size_t i = 0; i < k; ++i)
        p[i] = ((static_cast<int>(i) == label ? 1.0 : 0.0) + eta) / norm;
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Plain-value forms.

/// w_k = mu_k + sigma_k * eps_k, row k per component.
inline Matrix sample_w(const Matrix& mean, const Matrix& sigma, const Matrix& epsilon) {
  if (!mean.same_shape(sigma) || !mean.same_shape(epsilon))
    throw ShapeError("sample_w: shapes " + mean.shape() + " " + sigma.shape() + " " +
                     epsilon.shape());
  Matrix w(mean.rows(), mean.cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = mean[i] + sigma[i] * epsilon[i];
  return w;
}

/// Gumbel-Softmax: softmax((logits + g) / tau).
inline std::vector<double> sample_z(std::span<const double> logits, std::span<const double> gumbel,
                                    double tau) {
  if (!(tau > 0.0)) throw ConfigError("sample_z: temperature must be > 0");
  if (logits.size() != gumbel.size()) throw ShapeError("sample_z: logits/noise size mismatch");
  std::vector<double> z(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) mx = std::max(mx, (z[i] = (logits[i] + gumbel[i]) / tau));
  double total = 0.0;
  for (double& v : z) total += (v = std::exp(v - mx));
  for (double& v : z) v /= total;
  return z;
}

/// h = sum_k z_k w_k.
inline std::vector<double> compose_h(std::span<const double> z, const Matrix& w) {
  if (z.size() != w.rows()) throw ShapeError("compose_h: weight count != components");
  std::vector<double> h(w.cols(), 0.0);
  for (std::size_t k = 0; k < z.size(); ++k)
    for (std::size_t d = 0; d < w.cols(); ++d) h[d] += z[k] * w(k, d);
  return h;
}

/// Noise-free embedding sum_k pi_k mu_k.
inline std::vector<double> expected_h(std::span<const double> pi, const Matrix& mean) {
  return compose_h(pi, mean);
}

/// sum_k 1/2 sum_d (sigma^2 + mu^2 - 1 - ln sigma^2): KL of the components to N(0, I).
inline double kl_w(const Matrix& mean, const Matrix& sigma) {
  if (!mean.same_shape(sigma)) throw ShapeError("kl_w: shape mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double s = sigma[i];
    if (!(s > 0.0)) throw NumericError("kl_w: non-positive standard deviation");
    kl += 0.5 * (s * s + mean[i] * mean[i] - 1.0 - std::log(s * s));
  }
  return kl;
}

/// KL(z || prior) with 0 ln 0 = 0. For the uniform prior this is ln K + sum z ln z.
inline double kl_z(std::span<const double> z, const PriorSpec& prior) {
  const auto p = prior.probabilities(z.size());
  double kl = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (p[k] <= 0.0) throw NumericError("kl_z: zero prior mass");
    if (z[k] > 0.0) kl += z[k] * std::log(z[k] / p[k]);
  }
  return kl;
}

// ---------------------------------------------------------------------------
// Noise. Drawn epsilon first (component-major, then row, then dimension),
// then Gumbel (component-major, then row).

struct LatentNoise {
  std::vector<Matrix> epsilon;  // K matrices, B x kappa_h
  Matrix gumbel;                // B x K
};

inline LatentNoise draw_latent_noise(Rng& rng, std::size_t batch, std::size_t components,
                                     std::size_t width) {
  LatentNoise n;
  for (std::size_t k = 0; k < components; ++k) {
    Matrix e(batch, width);
    for (double& v : e.values()) v = rng.normal();
    n.epsilon.push_back(std::move(e));
  }
  n.gumbel = Matrix(batch, components);
  for (std::size_t k = 0; k < components; ++k)
    for (std::size_t b = 0; b < batch; ++b) n.gumbel(b, k) = rng.gumbel();
  return n;
}

// ---------------------------------------------------------------------------
// Recorded forms used in training.

/// Per-component draws, each B x kappa_h: mean_k + exp(log_std_k) * eps_k.
inline std::vector<Var> sample_w(const Var& mean, const Var& log_std,
                                 const std::vector<Matrix>& epsilon) {
  Tape& t = *mean.tape();
  if (epsilon.size() != mean.rows()) throw ShapeError("sample_w: noise count != components");
  Var sigma = exp(log_std);
  std::vector<Var> w;
  for (std::size_t k = 0; k < epsilon.size(); ++k) {
    Var eps = t.constant(epsilon[k]);
    w.push_back(add(slice_rows(mean, k, k + 1), mul(slice_rows(sigma, k, k + 1), eps)));
  }
  return w;
}

/// Row-wise Gumbel-Softmax of B x K logits.
inline Var sample_z(const Var& logits, const Matrix& gumbel, double tau) {
  if (!(tau > 0.0)) throw ConfigError("sample_z: temperature must be > 0");
  Tape& t = *logits.tape();
  return softmax(scalar_mul(add(logits, t.constant(gumbel)), 1.0 / tau));
}

/// h = sum_k z[:, k] * w_k.
inline Var compose_h(const Var& z, const std::vector<Var>& w) {
  if (w.empty() || z.cols() != w.size()) throw ShapeError("compose_h: component mismatch");
  Var h = mul(slice_col(z, 0), w[0]);
  for (std::size_t k = 1; k < w.size(); ++k) h = add(h, mul(slice_col(z, k), w[k]));
  return h;
}

/// KL of all components to N(0, I), as a function of (mean, log_std).
inline Var kl_w(const Var& mean, const Var& log_std) {
  const double entries = static_cast<double>(mean.value().size());
  // 1/2 [ sum sigma^2 + sum mu^2 - n - 2 sum log_std ]
  Var s = add(sum(exp(scalar_mul(log_std, 2.0))), l2_norm_sq(mean));
  s = sub(s, scalar_mul(sum(log_std), 2.0));
  return scalar_mul(add_scalar(s, -entries), 0.5);
}

/// Batch mean of KL(softmax(logits_b) || prior_b); `log_prior` is B x K.
inline Var kl_z(const Var& logits, const Matrix& log_prior) {
  Tape& t = *logits.tape();
  if (!logits.value().same_shape(log_prior)) throw ShapeError("kl_z: prior shape mismatch");
  Var log_pi = log_softmax(logits);
  Var pi = softmax(logits);
  Var kl = sum(mul(pi, sub(log_pi, t.constant(log_prior))));
  return scalar_mul(kl, 1.0 / static_cast<double>(logits.rows()));
}

/// Log prior rows for a batch.
inline Matrix log_prior_rows(const std::vector<PriorSpec>& priors, std::size_t k) {
  Matrix m(priors.size(), k);
  for (std::size_t b = 0; b < priors.size(); ++b) {
    const auto p = priors[b].probabilities(k);
    for (std::size_t i = 0; i < k; ++i) m(b, i) = std::log(p[i]);
  }
  return m;
}

}  // namespace edgemix
