#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/matrix.hpp"

namespace edgemix {

using NodeId = std::uint32_t;

/// Undirected node pair. Stored canonically with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  auto operator<=>(const Edge&) const = default;
};

inline Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
inline Edge canonical(Edge e) { return canonical(e.u, e.v); }

inline std::uint64_t edge_key(Edge e) {
  e = canonical(e);
  return (static_cast<std::uint64_t>(e.u) << 32) | e.v;
}

/// Relation index per edge, keyed in canonical form.
using EdgeLabels = std::map<Edge, int>;

/// Subnetwork touched by one propagated item, plus the item's content vector.
struct DiffusionNet {
  std::vector<Edge> covered_edges;
  std::vector<double> content;

  bool operator==(const DiffusionNet&) const = default;
};

/// Immutable multi-modal social graph: nodes, undirected edges, per-node
/// attributes, diffusion subnetworks with contents, and optional relation labels.
class Graph {
 public:
  Graph() = default;

  /// Validates every invariant. Edges are canonicalized and deduplicated
  /// (first occurrence wins the position); diffusion edges likewise.
  Graph(std::size_t node_count, std::vector<Edge> edges, Matrix attributes,
        std::vector<DiffusionNet> diffusions = {}, EdgeLabels labels = {})
      : node_count_(node_count), attributes_(std::move(attributes)), labels_(std::move(labels)) {
    if (attributes_.rows() != node_count_)
      throw Error("Graph: attribute rows " + std::to_string(attributes_.rows()) +
                  " != node count " + std::to_string(node_count_));
    if (!attributes_.all_finite()) throw Error("Graph: non-finite attribute value");

    adjacency_.assign(node_count_, {});
    edges_.reserve(edges.size());
    for (Edge e : edges) {
      check_node(e.u);
      check_node(e.v);
      if (e.u == e.v) throw Error("Graph: self-loop on node " + std::to_string(e.u));
      e = canonical(e);
      if (!edge_set_.insert(edge_key(e)).second) continue;
      edges_.push_back(e);
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());

    for (auto& d : diffusions) {
      std::vector<Edge> unique;
      std::unordered_set<std::uint64_t> seen;
      for (Edge e : d.covered_edges) {
        e = canonical(e);
        if (!has_edge(e.u, e.v))
          throw Error("Graph: diffusion covers nonexistent edge " + std::to_string(e.u) + "-" +
                      std::to_string(e.v));
        if (seen.insert(edge_key(e)).second) unique.push_back(e);
      }
      if (unique.empty()) throw Error("Graph: empty diffusion");
      if (diffusions_.empty())
        content_dim_ = d.content.size();
      else if (d.content.size() != content_dim_)
        throw Error("Graph: diffusion content dimension " + std::to_string(d.content.size()) +
                    " != " + std::to_string(content_dim_));
      for (double c : d.content)
        if (!std::isfinite(c)) throw Error("Graph: non-finite diffusion content");
      diffusions_.push_back({std::move(unique), std::move(d.content)});
    }

    EdgeLabels canon;
    for (const auto& [e, r] : labels_) {
      const Edge c = canonical(e);
      if (!has_edge(c.u, c.v))
        throw Error("Graph: label on nonexistent edge " + std::to_string(c.u) + "-" +
                    std::to_string(c.v));
      if (r < 0) throw Error("Graph: negative relation id");
      canon[c] = r;
    }
    labels_ = std::move(canon);
  }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t attribute_dim() const noexcept { return attributes_.cols(); }
  std::size_t content_dim() const noexcept { return content_dim_; }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& attributes() const noexcept { return attributes_; }
  const std::vector<DiffusionNet>& diffusions() const noexcept { return diffusions_; }
  const EdgeLabels& labels() const noexcept { return labels_; }
  const std::vector<NodeId>& neighbors(NodeId v) const { return adjacency_.at(v); }
  std::size_t degree(NodeId v) const { return adjacency_.at(v).size(); }

  bool has_edge(NodeId a, NodeId b) const {
    return a != b && edge_set_.contains(edge_key(canonical(a, b)));
  }

  std::optional<int> label(Edge e) const {
    auto it = labels_.find(canonical(e));
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  /// Structural equality (edge order included), bit-exact on values.
  bool operator==(const Graph& o) const {
    return node_count_ == o.node_count_ && edges_ == o.edges_ && attributes_ == o.attributes_ &&
           diffusions_ == o.diffusions_ && labels_ == o.labels_;
  }

 private:
  void check_node(NodeId v) const {
    if (v >= node_count_)
      throw Error("Graph: node " + std::to_string(v) + " out of range [0, " +
                  std::to_string(node_count_) + ")");
  }

  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  Matrix attributes_;
  std::vector<DiffusionNet> diffusions_;
  EdgeLabels labels_;
  std::size_t content_dim_ = 0;
  std::vector<std::vector<NodeId>> adjacency_;
  std::unordered_set<std::uint64_t> edge_set_;
};

/// Concatenated endpoint attributes [a_u, a_v] of a canonical pair.
inline std::vector<double> edge_attributes(const Graph& g, Edge e) {
  e = canonical(e);
  const auto a = g.attributes().row_span(e.u);
  const auto b = g.attributes().row_span(e.v);
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace edgemix
