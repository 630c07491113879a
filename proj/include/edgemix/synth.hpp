#pragma once

// Planted-relation generator. Every node belongs to one community per
// relation; an edge of relation r joins two members of the same r-community.
// Attributes are sums of community centroids, diffusion contents are noisy
// relation centroids, and a fraction of the planted relations is exposed as
// graph labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "edgemix/config.hpp"
#include "edgemix/error.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/io.hpp"
#include "edgemix/matrix.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

struct SynthConfig {
  std::size_t n_nodes = 200;
  std::size_t n_relations = 2;
  std::size_t communities_per_relation = 2;
  double edges_per_node = 8.0;       // mean degree of planted edges
  double noise_edge_fraction = 0.1;  // share of all edges that are noise
  std::size_t attr_dim = 16;
  double attr_noise = 0.2;
  std::size_t n_diffusions = 40;
  std::size_t diffusion_size = 20;
  std::size_t content_dim = 16;
  double label_fraction = 0.25;
  std::uint64_t seed = 0;

  bool operator==(const SynthConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("synth config: " + m); };
    if (n_nodes == 0 || n_relations == 0 || communities_per_relation == 0 || attr_dim == 0 ||
        n_diffusions == 0 || diffusion_size == 0 || content_dim == 0)
      fail("all counts must be positive");
    if (!(edges_per_node > 0.0)) fail("edges_per_node must be > 0");
    if (!(noise_edge_fraction >= 0.0 && noise_edge_fraction < 1.0))
      fail("noise_edge_fraction must be in [0, 1)");
    if (!(attr_noise >= 0.0)) fail("attr_noise must be >= 0");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0)) fail("label_fraction must be in (0, 1]");
    if (n_nodes / communities_per_relation < 2)
      fail("infeasible edge target: communities would have fewer than 2 members");
  }

  static SynthConfig parse(const std::string& text, const std::string& source = "config") {
    SynthConfig c;
    using namespace config;
    auto size = [](std::size_t& dst) {
      return [&dst](const std::string& k, const std::string& v) {
        dst = static_cast<std::size_t>(to_uint(k, v));
      };
    };
    auto real = [](double& dst) {
      return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); };
    };
    Binder b;
    b.bind("n_nodes", size(c.n_nodes))
        .bind("n_relations", size(c.n_relations))
        .bind("communities_per_relation", size(c.communities_per_relation))
        .bind("edges_per_node", real(c.edges_per_node))
        .bind("noise_edge_fraction", real(c.noise_edge_fraction))
        .bind("attr_dim", size(c.attr_dim))
        .bind("attr_noise", real(c.attr_noise))
        .bind("n_diffusions", size(c.n_diffusions))
        .bind("diffusion_size", size(c.diffusion_size))
        .bind("content_dim", size(c.content_dim))
        .bind("label_fraction", real(c.label_fraction))
        .bind("seed", [&](const std::string& k, const std::string& v) { c.seed = to_uint(k, v); });
    b.apply(parse_pairs(text, source), source);
    c.validate();
    return c;
  }

  static SynthConfig load(const std::filesystem::path& path) {
    return parse(config::read_file(path), path.string());
  }

  std::string to_text() const {
    auto real = [](double v) { return io::format_double(v); };
    std::string s;
    auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    line("n_nodes", std::to_string(n_nodes));
    line("n_relations", std::to_string(n_relations));
    line("communities_per_relation", std::to_string(communities_per_relation));
    line("edges_per_node", real(edges_per_node));
    line("noise_edge_fraction", real(noise_edge_fraction));
    line("attr_dim", std::to_string(attr_dim));
    line("attr_noise", real(attr_noise));
    line("n_diffusions", std::to_string(n_diffusions));
    line("diffusion_size", std::to_string(diffusion_size));
    line("content_dim", std::to_string(content_dim));
    line("label_fraction", real(label_fraction));
    line("seed", std::to_string(seed));
    return s;
  }
};

/// Generated graph with everything needed to score recovery.
struct SynthData {
  Graph graph;
  EdgeLabels ground_truth;              // every planted edge; noise edges absent
  std::vector<int> diffusion_relation;  // planted relation of each diffusion
  std::vector<std::vector<std::size_t>> community;  // [relation][node]
  std::vector<Matrix> attribute_centroids;          // per relation, communities x L
  Matrix content_centroids;                         // relations x L_c

  /// Ground truth minus the exposed labels.
  EdgeLabels withheld() const {
    EdgeLabels out;
    for (const auto& [e, r] : ground_truth)
      if (!graph.labels().contains(e)) out.emplace(e, r);
    return out;
  }
};

namespace detail {

inline Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

/// Uniformly chosen `k` elements of `items` (partial Fisher-Yates on a copy).
template <typename T>
std::vector<T> choose(std::vector<T> items, std::size_t k, Rng& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(items[i], items[i + rng.index(items.size() - i)]);
  items.resize(k);
  return items;
}

}  // namespace detail

/// Draw order: community partitions, attribute centroids, node attribute
/// noise, content centroids, planted edges, noise edges, diffusions, labels.
inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_nodes;
  const std::size_t relations = cfg.n_relations;
  const std::size_t communities = cfg.communities_per_relation;
  SynthData out;

  // Balanced random partition per relation.
  std::vector<std::vector<std::vector<NodeId>>> members(relations,
                                                        std::vector<std::vector<NodeId>>(communities));
  out.community.assign(relations, std::vector<std::size_t>(n));
  for (std::size_t r = 0; r < relations; ++r) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    order = detail::choose(std::move(order), n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      out.community[r][order[i]] = i % communities;
      members[r][i % communities].push_back(order[i]);
    }
    for (auto& m : members[r]) std::sort(m.begin(), m.end());
  }

  for (std::size_t r = 0; r < relations; ++r)
    out.attribute_centroids.push_back(detail::normal_matrix(communities, cfg.attr_dim, rng));
  Matrix attributes(n, cfg.attr_dim);
  for (std::size_t v = 0; v < n; ++v) {
    auto row = attributes.row_span(v);
    for (std::size_t r = 0; r < relations; ++r) {
      auto c = out.attribute_centroids[r].row_span(out.community[r][v]);
      for (std::size_t d = 0; d < cfg.attr_dim; ++d) row[d] += c[d];
    }
    if (cfg.attr_noise > 0.0)
      for (double& x : row) x += cfg.attr_noise * rng.normal();
  }
  out.content_centroids = detail::normal_matrix(relations, cfg.content_dim, rng);

  // Planted edges. A pair sharing communities under two relations would make
  // its relation ambiguous, so such pairs are never planted.
  const auto planted_target =
      static_cast<std::size_t>(std::llround(cfg.edges_per_node * static_cast<double>(n) / 2.0));
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> present;
  std::vector<std::vector<std::vector<Edge>>> by_community(
      relations, std::vector<std::vector<Edge>>(communities));
  for (std::size_t r = 0; r < relations; ++r) {
    const std::size_t target = planted_target / relations + (r < planted_target % relations ? 1 : 0);
    std::size_t placed = 0;
    const std::size_t budget = 1000 * target + 1000;
    for (std::size_t attempt = 0; placed < target && attempt < budget; ++attempt) {
      const std::size_t c = rng.index(communities);
      const auto& m = members[r][c];
      const NodeId a = m[rng.index(m.size())];
      const NodeId b = m[rng.index(m.size())];
      if (a == b) continue;
      bool ambiguous = false;
      for (std::size_t o = 0; o < relations; ++o)
        if (o != r && out.community[o][a] == out.community[o][b]) ambiguous = true;
      const Edge e = canonical(a, b);
      if (ambiguous || !present.insert(edge_key(e)).second) continue;
      edges.push_back(e);
      out.ground_truth.emplace(e, static_cast<int>(r));
      by_community[r][c].push_back(e);
      ++placed;
    }
    if (placed < target)
      throw ConfigError("synth: could only place " + std::to_string(placed) + " of " +
                        std::to_string(target) + " edges for relation " + std::to_string(r));
  }

  // Noise edges: noise / (planted + noise) = noise_edge_fraction.
  const double f = cfg.noise_edge_fraction;
  const auto noise_target =
      static_cast<std::size_t>(std::llround(f * static_cast<double>(edges.size()) / (1.0 - f)));
  const std::size_t max_edges = n * (n - 1) / 2;
  if (edges.size() + noise_target > max_edges)
    throw ConfigError("synth: edge target exceeds the number of node pairs");
  for (std::size_t placed = 0; placed < noise_target;) {
    const auto a = static_cast<NodeId>(rng.index(n));
    const auto b = static_cast<NodeId>(rng.index(n));
    if (a == b) continue;
    const Edge e = canonical(a, b);
    if (!present.insert(edge_key(e)).second) continue;
    edges.push_back(e);
    ++placed;
  }

  std::vector<DiffusionNet> diffusions;
  for (std::size_t d = 0; d < cfg.n_diffusions; ++d) {
    std::size_t r = 0;
    std::size_t c = 0;
    for (int attempt = 0;; ++attempt) {
      r = rng.index(relations);
      c = rng.index(communities);
      if (!by_community[r][c].empty()) break;
      if (attempt > 1000) throw ConfigError("synth: no community has planted edges");
    }
    DiffusionNet net;
    net.covered_edges = detail::choose(by_community[r][c], cfg.diffusion_size, rng);
    auto centroid = out.content_centroids.row_span(r);
    net.content.assign(centroid.begin(), centroid.end());
    for (double& x : net.content) x += 0.1 * rng.normal();
    diffusions.push_back(std::move(net));
    out.diffusion_relation.push_back(static_cast<int>(r));
  }

  std::vector<Edge> truth_edges;
  for (const auto& [e, r] : out.ground_truth) truth_edges.push_back(e);
  const auto label_count = static_cast<std::size_t>(
      std::llround(cfg.label_fraction * static_cast<double>(truth_edges.size())));
  EdgeLabels labels;
  for (Edge e : detail::choose(std::move(truth_edges), label_count, rng))
    labels.emplace(e, out.ground_truth.at(e));

  out.graph = Graph(n, std::move(edges), std::move(attributes), std::move(diffusions),
                    std::move(labels));
  return out;
}

/// Graph files plus ground_truth.tsv (src, dst, relation) and
/// diffusion_relations.tsv (diffusion id, relation).
inline void save_synth(const SynthData& data, const std::filesystem::path& dir) {
  save_graph(data.graph, dir);
  save_edge_labels(data.ground_truth, dir / "ground_truth.tsv");
  auto out = io::open_out(dir / "diffusion_relations.tsv");
  for (std::size_t d = 0; d < data.diffusion_relation.size(); ++d)
    out << d << '\t' << data.diffusion_relation[d] << '\n';
}

/// Reads diffusion_relations.tsv back, indexed by diffusion id.
inline std::vector<int> load_diffusion_relations(const std::filesystem::path& path) {
  io::LineReader r(path);
  std::vector<int> out;
  std::string line;
  while (r.next(line)) {
    auto f = io::split(line, '\t');
    if (f.size() != 2) r.fail("expected: diffusion_id relation");
    auto id = io::parse_number<std::size_t>(f[0]);
    auto rel = io::parse_number<int>(f[1]);
    if (!id || !rel || *rel < 0) r.fail("invalid diffusion relation row");
    if (*id >= out.size()) out.resize(*id + 1, -1);
    out[*id] = *rel;
  }
  return out;
}

}  // namespace edgemix
