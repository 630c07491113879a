#pragma once

// Graph edge encoder: GCN node representations over sampled neighborhoods,
// concatenated per pair, then a small FNN producing K relation logits.

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <unordered_set>
#include <vector>

#include "edgemix/autodiff.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/model.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/sampling.hpp"

namespace edgemix {

/// Explicit small graph on local indices 0..node_count-1.
struct Subgraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;
};

/// D^-1/2 (E + I) D^-1/2 with D the row sums of E + I. Duplicate edges count once.
inline SparseRows normalized_adjacency(const Subgraph& sg) {
  std::vector<std::vector<std::size_t>> nbrs(sg.node_count);
  std::unordered_set<std::uint64_t> seen;
  for (Edge e : sg.edges) {
    if (e.u >= sg.node_count || e.v >= sg.node_count)
      throw ShapeError("normalized_adjacency: edge outside subgraph");
    if (e.u == e.v || !seen.insert(edge_key(e)).second) continue;
    nbrs[e.u].push_back(e.v);
    nbrs[e.v].push_back(e.u);
  }
  std::vector<double> inv_sqrt(sg.node_count);
  for (std::size_t i = 0; i < sg.node_count; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(nbrs[i].size() + 1));
  SparseRows s;
  s.cols = sg.node_count;
  for (std::size_t i = 0; i < sg.node_count; ++i) {
    auto& row = nbrs[i];
    row.push_back(i);
    std::sort(row.begin(), row.end());
    for (std::size_t j : row) s.push(j, inv_sqrt[i] * inv_sqrt[j]);
    s.end_row();
  }
  return s;
}

/// One GCN layer, ReLU(A_hat U W), with A_hat the renormalized adjacency of `sg`.
inline Var gcn_layer(const Var& features, const Subgraph& sg, const Var& weights) {
  if (features.rows() != sg.node_count)
    throw ShapeError("gcn_layer: " + std::to_string(features.rows()) + " feature rows for " +
                     std::to_string(sg.node_count) + " nodes");
  auto adj = std::make_shared<const SparseRows>(normalized_adjacency(sg));
  return relu(matmul(spmm(adj, features), weights));
}

/// Computation tree from fixed-size neighborhood sampling.
///
/// Level 0 holds the targets; every position on levels 0..depth-1 gets
/// `fixed_size` sampled neighbors as children on the next level (none for an
/// isolated node, whose self-loop is its only aggregation target). Positions are
/// stored level by level, so the rows a layer needs form a prefix. Propagation
/// uses the renormalized adjacency of the tree itself (parent, children, self),
/// which keeps per-batch work independent of the graph size.
class NeighborhoodTree {
 public:
  static constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

  NeighborhoodTree(const Graph& g, const std::vector<NodeId>& targets, std::size_t depth,
                   std::size_t fixed_size, Rng& rng)
      : depth_(depth) {
    node_ = targets;
    parent_.assign(targets.size(), kNoParent);
    level_end_.push_back(node_.size());
    std::size_t begin = 0;
    for (std::size_t d = 0; d < depth; ++d) {
      const std::size_t end = level_end_.back();
      for (std::size_t p = begin; p < end; ++p) {
        child_begin_.push_back(node_.size());
        const NodeId v = node_[p];
        if (g.degree(v) > 0) {
          for (NodeId w : sample_neighbors(g, v, fixed_size, rng)) {
            node_.push_back(w);
            parent_.push_back(p);
          }
        }
        child_end_.push_back(node_.size());
      }
      level_end_.push_back(node_.size());
      begin = end;
    }
    // Leaves have no children.
    child_begin_.resize(node_.size(), node_.size());
    child_end_.resize(node_.size(), node_.size());

    inv_sqrt_degree_.resize(node_.size());
    for (std::size_t p = 0; p < node_.size(); ++p) {
      const std::size_t deg =
          1 + (child_end_[p] - child_begin_[p]) + (parent_[p] == kNoParent ? 0 : 1);
      inv_sqrt_degree_[p] = 1.0 / std::sqrt(static_cast<double>(deg));
    }
  }

  std::size_t depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return node_.size(); }
  NodeId node(std::size_t p) const { return node_[p]; }
  std::size_t level_end(std::size_t d) const { return level_end_.at(d); }

  /// Propagation rows for GCN layer `layer` (1-based): output rows are the
  /// positions on levels 0..depth-layer, columns the positions one level deeper.
  SparseRows propagation(std::size_t layer) const {
    if (layer == 0 || layer > depth_) throw ShapeError("NeighborhoodTree: bad layer index");
    const std::size_t rows = level_end_[depth_ - layer];
    SparseRows s;
    s.cols = level_end_[depth_ - layer + 1];
    for (std::size_t p = 0; p < rows; ++p) {
      const double dp = inv_sqrt_degree_[p];
      if (parent_[p] != kNoParent) s.push(parent_[p], dp * inv_sqrt_degree_[parent_[p]]);
      s.push(p, dp * dp);
      for (std::size_t c = child_begin_[p]; c < child_end_[p]; ++c)
        s.push(c, dp * inv_sqrt_degree_[c]);
      s.end_row();
    }
    return s;
  }

 private:
  std::size_t depth_;
  std::vector<NodeId> node_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> level_end_;
  std::vector<std::size_t> child_begin_;
  std::vector<std::size_t> child_end_;
  std::vector<double> inv_sqrt_degree_;
};

/// Node representations for `targets` (one row each) through every GCN layer.
inline Var encode_nodes(Tape& tape, const Graph& g, const std::vector<NodeId>& targets,
                        Model& model, std::size_t fixed_size, Rng& rng) {
  const std::size_t depth = model.dims.gcn_dims.size();
  if (g.attribute_dim() != model.dims.attribute_dim)
    throw ShapeError("encode_nodes: graph attribute dim " + std::to_string(g.attribute_dim()) +
                     " != model " + std::to_string(model.dims.attribute_dim));
  for (NodeId t : targets)
    if (t >= g.node_count()) throw Error("encode_nodes: target out of range");
  NeighborhoodTree tree(g, targets, depth, fixed_size, rng);

  // First layer aggregates raw attributes, which carry no gradient.
  const SparseRows first = tree.propagation(1);
  const Matrix& a = g.attributes();
  const std::size_t dim = a.cols();
  Matrix aggregated(first.rows, dim);
  for (std::size_t r = 0; r < first.rows; ++r) {
    double* out = aggregated.data() + r * dim;
    for (std::size_t e = first.row_start[r]; e < first.row_start[r + 1]; ++e) {
      const double w = first.weight[e];
      const double* in = a.data() + static_cast<std::size_t>(tree.node(first.col[e])) * dim;
      for (std::size_t c = 0; c < dim; ++c) out[c] += w * in[c];
    }
  }
  Var u = relu(matmul(tape.constant(std::move(aggregated)), tape.parameter(model.params, names::gcn(0))));
  for (std::size_t layer = 2; layer <= depth; ++layer) {
    auto prop = std::make_shared<const SparseRows>(tree.propagation(layer));
    u = relu(matmul(spmm(prop, u), tape.parameter(model.params, names::gcn(layer - 1))));
  }
  return u;
}

/// Recorded encoder outputs for a batch of canonical pairs.
struct EncodedPairs {
  std::vector<Edge> pairs;
  Var features;  // y = [u_i, u_j]
  Var logits;    // relation factors before softmax, B x K
};

/// Relation FNN: affine -> ReLU -> affine to K logits.
inline Var relation_logits(Tape& tape, Model& model, const Var& edge_features) {
  auto& p = model.params;
  Var hidden = relu(affine(edge_features, tape.parameter(p, names::relation_hidden_w),
                           tape.parameter(p, names::relation_hidden_b)));
  return affine(hidden, tape.parameter(p, names::relation_out_w),
                tape.parameter(p, names::relation_out_b));
}

inline EncodedPairs encode_pair_logits(Tape& tape, const Graph& g, const std::vector<Edge>& pairs,
                                       Model& model, std::size_t fixed_size, Rng& rng) {
  EncodedPairs out;
  out.pairs.reserve(pairs.size());
  std::vector<NodeId> targets(2 * pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Edge e = canonical(pairs[k]);
    out.pairs.push_back(e);
    targets[k] = e.u;
    targets[pairs.size() + k] = e.v;
  }
  Var u = encode_nodes(tape, g, targets, model, fixed_size, rng);
  const std::size_t b = pairs.size();
  out.features = concat_cols({slice_rows(u, 0, b), slice_rows(u, b, 2 * b)});
  out.logits = relation_logits(tape, model, out.features);
  return out;
}

/// Relation distribution of one pair.
struct EdgeEncoding {
  Edge pair;
  std::vector<double> logits;
  std::vector<double> pi;

  bool operator==(const EdgeEncoding&) const = default;
};

/// Noise-free evaluation of the encoder for a list of pairs.
inline std::vector<EdgeEncoding> encode_edges(const Graph& g, const std::vector<Edge>& pairs,
                                              Model& model, std::size_t fixed_size, Rng& rng) {
  Tape tape(false);
  EncodedPairs enc = encode_pair_logits(tape, g, pairs, model, fixed_size, rng);
  Var pi = softmax(enc.logits);
  std::vector<EdgeEncoding> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto l = enc.logits.value().row_span(k);
    auto p = pi.value().row_span(k);
    out.push_back({enc.pairs[k], {l.begin(), l.end()}, {p.begin(), p.end()}});
  }
  return out;
}

}  // namespace edgemix
