#pragma once

// Edge embedding export and downstream relation classification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/config.hpp"
#include "edgemix/encoder.hpp"
#include "edgemix/error.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/io.hpp"
#include "edgemix/latent.hpp"
#include "edgemix/model.hpp"
#include "edgemix/optimizer.hpp"
#include "edgemix/parameters.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

/// One embedding row per pair.
struct EmbeddingTable {
  std::vector<Edge> pairs;
  Matrix values;

  bool operator==(const EmbeddingTable&) const = default;
};

/// Pairs are encoded this many at a time to bound memory.
inline constexpr std::size_t kEncodeChunk = 512;

/// Relation distributions for all pairs, chunked.
inline std::vector<EdgeEncoding> encode_all(const Graph& g, const std::vector<Edge>& pairs,
                                            Model& model, std::size_t fixed_size, Rng& rng) {
  std::vector<EdgeEncoding> out;
  out.reserve(pairs.size());
  for (std::size_t begin = 0; begin < pairs.size(); begin += kEncodeChunk) {
    const std::size_t end = std::min(pairs.size(), begin + kEncodeChunk);
    std::vector<Edge> chunk(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                            pairs.begin() + static_cast<std::ptrdiff_t>(end));
    auto enc = encode_edges(g, chunk, model, fixed_size, rng);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  return out;
}

/// Noise-free edge embeddings sum_k pi_k mu_k.
inline EmbeddingTable export_embeddings(const Graph& g, Model& model,
                                        const std::vector<Edge>& pairs, std::size_t fixed_size,
                                        Rng& rng) {
  const Matrix& mean = model.params[names::mixture_mean].value;
  EmbeddingTable t;
  t.values = Matrix(pairs.size(), mean.cols());
  std::size_t row = 0;
  for (const auto& enc : encode_all(g, pairs, model, fixed_size, rng)) {
    const auto h = expected_h(enc.pi, mean);
    std::copy(h.begin(), h.end(), t.values.row_span(row++).begin());
    t.pairs.push_back(enc.pair);
  }
  return t;
}

inline void write_embeddings(const EmbeddingTable& t, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  for (std::size_t i = 0; i < t.pairs.size(); ++i)
    out << t.pairs[i].u << '\t' << t.pairs[i].v << '\t' << io::join(t.values.row_span(i)) << '\n';
}

inline EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  io::LineReader r(path);
  EmbeddingTable t;
  std::vector<double> flat;
  std::size_t width = 0;
  std::string line;
  while (r.next(line)) {
    auto f = io::split(line, '\t');
    if (f.size() != 3) r.fail("expected: src dst h1,...,hk");
    const NodeId u = io::parse_node(r, f[0]);
    const NodeId v = io::parse_node(r, f[1]);
    auto h = io::parse_vector(r, f[2]);
    if (t.pairs.empty()) width = h.size();
    if (h.size() != width) r.fail("embedding width " + std::to_string(h.size()) + " != " +
                                  std::to_string(width));
    t.pairs.push_back(canonical(u, v));
    flat.insert(flat.end(), h.begin(), h.end());
  }
  t.values = Matrix(t.pairs.size(), width, std::move(flat));
  return t;
}

// ---------------------------------------------------------------------------
// Downstream classifier.

struct ClassifierConfig {
  std::size_t hidden = 32;
  std::size_t steps = 200;
  double learning_rate = 0.01;
  std::size_t splits = 5;
  double train_ratio = 0.8;
  std::uint64_t seed = 0;

  bool operator==(const ClassifierConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("classifier config: " + m); };
    if (hidden == 0 || steps == 0) fail("hidden and steps must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (splits == 0) fail("splits must be positive");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) fail("train_ratio must be in (0, 1)");
  }

  static ClassifierConfig parse(const std::string& text, const std::string& source = "config") {
    ClassifierConfig c;
    using namespace config;
    auto size = [](std::size_t& dst) {
      return [&dst](const std::string& k, const std::string& v) {
        dst = static_cast<std::size_t>(to_uint(k, v));
      };
    };
    Binder b;
    b.bind("hidden", size(c.hidden))
        .bind("steps", size(c.steps))
        .bind("learning_rate",
              [&](const std::string& k, const std::string& v) { c.learning_rate = to_double(k, v); })
        .bind("splits", size(c.splits))
        .bind("train_ratio",
              [&](const std::string& k, const std::string& v) { c.train_ratio = to_double(k, v); })
        .bind("seed", [&](const std::string& k, const std::string& v) { c.seed = to_uint(k, v); });
    b.apply(parse_pairs(text, source), source);
    c.validate();
    return c;
  }

  static ClassifierConfig load(const std::filesystem::path& path) {
    return parse(config::read_file(path), path.string());
  }

  std::string to_text() const {
    std::string s;
    auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    line("hidden", std::to_string(hidden));
    line("steps", std::to_string(steps));
    line("learning_rate", io::format_double(learning_rate));
    line("splits", std::to_string(splits));
    line("train_ratio", io::format_double(train_ratio));
    line("seed", std::to_string(seed));
    return s;
  }
};

/// Test accuracies of one evaluation. The standard deviation divides by the
/// number of splits.
struct EvalReport {
  std::vector<double> split_accuracies;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double train_ratio = 0.8;
  double majority_baseline = 0.0;  // frequency of the most common class

  bool operator==(const EvalReport&) const = default;
};

/// Fills mean and population standard deviation from the per-split values.
inline void summarize(EvalReport& r) {
  const double n = static_cast<double>(r.split_accuracies.size());
  r.accuracy_mean = std::accumulate(r.split_accuracies.begin(), r.split_accuracies.end(), 0.0) / n;
  double var = 0.0;
  for (double a : r.split_accuracies) var += (a - r.accuracy_mean) * (a - r.accuracy_mean);
  r.accuracy_std = std::sqrt(var / n);
}

namespace detail {

/// One-hidden-layer ReLU softmax classifier, trained full batch with Adam.
class Mlp {
 public:
  Mlp(std::size_t in, std::size_t hidden, std::size_t classes, Rng& rng) {
    auto he = [&](std::size_t fan_in, std::size_t fan_out) {
      Matrix w(fan_in, fan_out);
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : w.values()) v = sd * rng.normal();
      return w;
    };
    params_.add("w1", he(in, hidden));
    params_.add("b1", Matrix(1, hidden));
    params_.add("w2", he(hidden, classes));
    params_.add("b2", Matrix(1, classes));
  }

  void fit(const Matrix& x, const std::vector<int>& y, std::size_t classes, std::size_t steps,
           double lr) {
    Matrix onehot(x.rows(), classes);
    for (std::size_t i = 0; i < y.size(); ++i) onehot(i, static_cast<std::size_t>(y[i])) = 1.0;
    for (std::size_t s = 0; s < steps; ++s) {
      Tape t;
      Var logp = log_softmax(logits(t, t.constant(x)));
      Var loss = scalar_mul(sum(mul(t.constant(onehot), logp)),
                            -1.0 / static_cast<double>(x.rows()));
      t.backward(loss);
      optimizer_step(params_, lr);
    }
  }

  std::vector<int> predict(const Matrix& x) {
    Tape t(false);
    const Matrix out = logits(t, t.constant(x)).value();
    std::vector<int> pred(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto row = out.row_span(i);
      pred[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return pred;
  }

 private:
  Var logits(Tape& t, const Var& x) {
    Var h = relu(affine(x, t.parameter(params_, "w1"), t.parameter(params_, "b1")));
    return affine(h, t.parameter(params_, "w2"), t.parameter(params_, "b2"));
  }

  ParameterStore params_;
};

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return out;
}

/// Standardizes `x` in place with column statistics of `reference`.
inline void standardize(Matrix& x, const Matrix& reference) {
  const double n = static_cast<double>(reference.rows());
  for (std::size_t c = 0; c < reference.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r) mean += reference(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r)
      var += (reference(r, c) - mean) * (reference(r, c) - mean);
    const double sd = std::sqrt(var / n);
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) = (x(r, c) - mean) * scale;
  }
}

}  // namespace detail

/// Classifies labeled rows of `table` over seeded random train/test splits.
/// Rows without a label are ignored.
inline EvalReport evaluate_downstream(const EmbeddingTable& table, const EdgeLabels& labels,
                                      const ClassifierConfig& cfg = {}) {
  if (cfg.splits == 0) throw ConfigError("evaluate_downstream: need at least one split");
  if (!(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0))
    throw ConfigError("evaluate_downstream: train_ratio must be in (0, 1)");
  std::vector<std::size_t> rows;
  std::vector<int> y;
  for (std::size_t i = 0; i < table.pairs.size(); ++i) {
    auto it = labels.find(canonical(table.pairs[i]));
    if (it == labels.end()) continue;
    if (it->second < 0) throw Error("evaluate_downstream: negative class label");
    rows.push_back(i);
    y.push_back(it->second);
  }
  std::map<int, std::size_t> counts;
  for (int c : y) ++counts[c];
  if (counts.size() < 2) throw Error("evaluate_downstream: need at least 2 classes");
  const std::size_t classes = static_cast<std::size_t>(counts.rbegin()->first) + 1;
  const Matrix x = detail::gather_rows(table.values, rows);

  EvalReport report;
  report.train_ratio = cfg.train_ratio;
  std::size_t majority = 0;
  for (const auto& [c, n] : counts) majority = std::max(majority, n);
  report.majority_baseline = static_cast<double>(majority) / static_cast<double>(y.size());

  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_ratio * y.size()));
  if (n_train == 0 || n_train == y.size())
    throw Error("evaluate_downstream: too few labeled rows to split");
  Rng rng(cfg.seed);
  for (std::size_t s = 0; s < cfg.splits; ++s) {
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
      std::swap(order[i], order[i + rng.index(order.size() - i)]);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::vector<int> y_train, y_test;
    for (auto i : train) y_train.push_back(y[i]);
    for (auto i : test) y_test.push_back(y[i]);
    if (std::all_of(y_train.begin(), y_train.end(), [&](int c) { return c == y_train[0]; }))
      throw Error("evaluate_downstream: split " + std::to_string(s) +
                  " has a single class in its training part");

    Matrix x_train = detail::gather_rows(x, train);
    Matrix x_test = detail::gather_rows(x, test);
    detail::standardize(x_test, x_train);
    detail::standardize(x_train, Matrix(x_train));

    detail::Mlp mlp(x.cols(), cfg.hidden, classes, rng);
    mlp.fit(x_train, y_train, classes, cfg.steps, cfg.learning_rate);
    const auto pred = mlp.predict(x_test);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y_test[i];
    report.split_accuracies.push_back(static_cast<double>(correct) /
                                      static_cast<double>(pred.size()));
  }
  summarize(report);
  return report;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("adjusted_rand_index: length mismatch");
  if (a.size() < 2) throw Error("adjusted_rand_index: need at least 2 items");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto pairs = [](double n) { return n * (n - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, n] : joint) index += pairs(n);
  for (const auto& [k, n] : ra) sa += pairs(n);
  for (const auto& [k, n] : rb) sb += pairs(n);
  const double expected = sa * sb / pairs(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

/// Rows `split <i> <accuracy>` followed by aggregate rows.
inline void write_report(std::ostream& out, const EvalReport& r, const std::string& prefix = {}) {
  for (std::size_t i = 0; i < r.split_accuracies.size(); ++i)
    out << prefix << "split\t" << i << '\t' << io::format_double(r.split_accuracies[i]) << '\n';
  out << prefix << "accuracy_mean\t" << io::format_double(r.accuracy_mean) << '\n';
  out << prefix << "accuracy_std\t" << io::format_double(r.accuracy_std) << '\n';
  out << prefix << "train_ratio\t" << io::format_double(r.train_ratio) << '\n';
  out << prefix << "majority_baseline\t" << io::format_double(r.majority_baseline) << '\n';
}

}  // namespace edgemix
