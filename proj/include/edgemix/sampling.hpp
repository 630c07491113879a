#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/matrix.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

enum class Signal { link, attribute, diffusion };

inline const char* signal_name(Signal s) {
  switch (s) {
    case Signal::link: return "link";
    case Signal::attribute: return "attribute";
    case Signal::diffusion: return "diffusion";
  }
  return "?";
}

/// Sampled node pairs with reconstruction targets for one signal.
struct EdgeBatch {
  Signal signal = Signal::link;
  std::vector<Edge> pairs;           // canonical
  std::vector<double> link_targets;  // link signal only, 0/1 per pair
  Matrix content_targets;            // attribute / diffusion signal, one row per pair

  bool operator==(const EdgeBatch&) const = default;
};

/// Resample budget for a corrupted pair that lands on an observed edge.
inline constexpr int kNegativeResamples = 10;

/// `count` positive edges drawn uniformly with replacement. With
/// `labeled_share` > 0 that fraction of them is drawn from labeled edges only.
inline std::vector<Edge> sample_positive_edges(const Graph& g, std::size_t count, Rng& rng,
                                               double labeled_share = 0.0) {
  if (g.edge_count() == 0) throw Error("sampling: graph has no edges");
  std::vector<Edge> labeled;
  if (labeled_share > 0.0)
    for (const auto& [e, r] : g.labels()) labeled.push_back(e);
  const std::size_t from_labeled =
      labeled.empty() ? 0 : static_cast<std::size_t>(std::floor(labeled_share * count));
  std::vector<Edge> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (k < from_labeled)
      out.push_back(labeled[rng.index(labeled.size())]);
    else
      out.push_back(g.edges()[rng.index(g.edge_count())]);
  }
  return out;
}

/// Corrupts one uniformly chosen endpoint of `positive` with a uniform node.
/// The replacement never reproduces the positive pair or a self-loop; pairs
/// landing on observed edges are redrawn up to kNegativeResamples times and
/// then accepted as (possibly false) negatives.
inline Edge corrupt_pair(const Graph& g, Edge positive, Rng& rng) {
  const std::size_t n = g.node_count();
  if (n < 3) throw Error("sampling: negative pairs need at least 3 nodes");
  Edge candidate{};
  for (int attempt = 0; attempt <= kNegativeResamples; ++attempt) {
    const bool replace_u = rng.index(2) == 0;
    const NodeId keep = replace_u ? positive.v : positive.u;
    NodeId other;
    do {
      other = static_cast<NodeId>(rng.index(n));
    } while (other == positive.u || other == positive.v);
    candidate = canonical(keep, other);
    if (!g.has_edge(candidate.u, candidate.v)) break;
  }
  return candidate;
}

/// `count` positives and floor(count * neg_ratio) corrupted negatives,
/// positives first. Negative k corrupts positive k mod count.
inline EdgeBatch sample_link_pairs(const Graph& g, std::size_t count, double neg_ratio, Rng& rng,
                                   double labeled_share = 0.0) {
  if (count == 0) throw Error("sample_link_pairs: count must be positive");
  if (!(neg_ratio > 0.0)) throw Error("sample_link_pairs: neg_ratio must be positive");
  EdgeBatch batch;
  batch.signal = Signal::link;
  batch.pairs = sample_positive_edges(g, count, rng, labeled_share);
  batch.link_targets.assign(count, 1.0);
  const auto negatives = static_cast<std::size_t>(std::floor(count * neg_ratio + 1e-9));
  for (std::size_t k = 0; k < negatives; ++k) {
    batch.pairs.push_back(corrupt_pair(g, batch.pairs[k % count], rng));
    batch.link_targets.push_back(0.0);
  }
  return batch;
}

/// Exactly `fixed_size` neighbors: without replacement when the degree allows,
/// with replacement below that, and copies of `node` itself when isolated.
inline std::vector<NodeId> sample_neighbors(const Graph& g, NodeId node, std::size_t fixed_size,
                                            Rng& rng) {
  const auto& nbrs = g.neighbors(node);
  std::vector<NodeId> out;
  out.reserve(fixed_size);
  if (nbrs.empty()) {
    out.assign(fixed_size, node);
  } else if (nbrs.size() >= fixed_size) {
    std::vector<NodeId> pool(nbrs);
    for (std::size_t k = 0; k < fixed_size; ++k) {
      const std::size_t pick = k + rng.index(pool.size() - k);
      std::swap(pool[k], pool[pick]);
      out.push_back(pool[k]);
    }
  } else {
    for (std::size_t k = 0; k < fixed_size; ++k) out.push_back(nbrs[rng.index(nbrs.size())]);
  }
  return out;
}

/// One diffusion chosen uniformly, then `count` of its covered edges with
/// replacement; every target row is that diffusion's content.
inline EdgeBatch sample_diffusion_batch(const Graph& g, std::size_t count, Rng& rng) {
  if (g.diffusions().empty()) throw Error("sample_diffusion_batch: graph has no diffusions");
  const DiffusionNet& d = g.diffusions()[rng.index(g.diffusions().size())];
  EdgeBatch batch;
  batch.signal = Signal::diffusion;
  batch.content_targets = Matrix(count, d.content.size());
  for (std::size_t k = 0; k < count; ++k) {
    batch.pairs.push_back(d.covered_edges[rng.index(d.covered_edges.size())]);
    std::copy(d.content.begin(), d.content.end(), batch.content_targets.row_span(k).begin());
  }
  return batch;
}

/// `count` positive edges with targets [a_u, a_v] (canonical order, width 2L).
inline EdgeBatch sample_attribute_batch(const Graph& g, std::size_t count, Rng& rng,
                                        double labeled_share = 0.0) {
  EdgeBatch batch;
  batch.signal = Signal::attribute;
  batch.pairs = sample_positive_edges(g, count, rng, labeled_share);
  batch.content_targets = Matrix(count, 2 * g.attribute_dim());
  for (std::size_t k = 0; k < count; ++k) {
    const auto target = edge_attributes(g, batch.pairs[k]);
    std::copy(target.begin(), target.end(), batch.content_targets.row_span(k).begin());
  }
  return batch;
}

/// Copy of `g` with attributes a + noise_scale * N(0, 1) and
/// floor(removal_fraction * |E|) uniformly chosen edges removed. Labels and
/// diffusion coverage on removed edges are dropped; diffusions left with no
/// covered edge are dropped.
inline Graph perturb(const Graph& g, double noise_scale, double removal_fraction, Rng& rng) {
  if (noise_scale < 0.0) throw Error("perturb: noise_scale must be >= 0");
  if (removal_fraction < 0.0 || removal_fraction >= 1.0)
    throw Error("perturb: removal_fraction must be in [0, 1)");

  Matrix attributes = g.attributes();
  if (noise_scale > 0.0)
    for (double& v : attributes.values()) v += noise_scale * rng.normal();

  const auto remove =
      static_cast<std::size_t>(std::floor(removal_fraction * g.edge_count() + 1e-9));
  std::vector<char> removed(g.edge_count(), 0);
  if (remove > 0) {
    std::vector<std::size_t> order(g.edge_count());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < remove; ++k) {
      const std::size_t pick = k + rng.index(order.size() - k);
      std::swap(order[k], order[pick]);
      removed[order[k]] = 1;
    }
  }
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> gone;
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    if (removed[i])
      gone.insert(edge_key(g.edges()[i]));
    else
      edges.push_back(g.edges()[i]);
  }
  std::vector<DiffusionNet> diffusions;
  for (const auto& d : g.diffusions()) {
    DiffusionNet kept{{}, d.content};
    for (const Edge& e : d.covered_edges)
      if (!gone.contains(edge_key(e))) kept.covered_edges.push_back(e);
    if (!kept.covered_edges.empty()) diffusions.push_back(std::move(kept));
  }
  EdgeLabels labels;
  for (const auto& [e, r] : g.labels())
    if (!gone.contains(edge_key(e))) labels.emplace(e, r);
  return Graph(g.node_count(), std::move(edges), std::move(attributes), std::move(diffusions),
               std::move(labels));
}

}  // namespace edgemix
