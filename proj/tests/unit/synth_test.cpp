#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "edgemix/io.hpp"
#include "edgemix/synth.hpp"
#include "support.hpp"

using namespace edgemix;
using edgemix::testing::TempDir;
using edgemix::testing::read_file;

namespace {

double squared_distance(std::span<const double> a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(Synth, CountsMatchConfig) {
  SynthConfig c;
  c.n_nodes = 200;
  c.n_relations = 2;
  c.label_fraction = 0.25;
  const SynthData d = generate(c);
  EXPECT_EQ(d.graph.node_count(), 200u);
  EXPECT_EQ(d.ground_truth.size(), 800u);  // 8 * 200 / 2 planted
  const double expected_labels = 0.25 * static_cast<double>(d.ground_truth.size());
  EXPECT_LE(std::abs(static_cast<double>(d.graph.labels().size()) - expected_labels), 1.0);
  // Noise is 10% of all edges.
  const double noise = static_cast<double>(d.graph.edge_count() - d.ground_truth.size());
  EXPECT_NEAR(noise / static_cast<double>(d.graph.edge_count()), 0.1, 0.002);
  EXPECT_EQ(d.graph.diffusions().size(), c.n_diffusions);
  EXPECT_EQ(d.graph.attribute_dim(), c.attr_dim);
  EXPECT_EQ(d.graph.content_dim(), c.content_dim);
  EXPECT_EQ(d.withheld().size() + d.graph.labels().size(), d.ground_truth.size());
}

TEST(Synth, GroundTruthEdgesArePlantedInsideCommunities) {
  SynthConfig c;
  c.communities_per_relation = 4;
  const SynthData d = generate(c);
  for (const auto& [e, r] : d.ground_truth) {
    ASSERT_TRUE(d.graph.has_edge(e.u, e.v));
    EXPECT_EQ(d.community[r][e.u], d.community[r][e.v]);
    for (std::size_t o = 0; o < c.n_relations; ++o)
      if (o != static_cast<std::size_t>(r)) {
        EXPECT_NE(d.community[o][e.u], d.community[o][e.v]);
      }
  }
  for (const auto& [e, r] : d.graph.labels()) EXPECT_EQ(d.ground_truth.at(e), r);
}

TEST(Synth, ZeroNoiseGivesIdenticalAttributesPerCombination) {
  SynthConfig c;
  c.attr_noise = 0.0;
  const SynthData d = generate(c);
  std::map<std::vector<std::size_t>, std::vector<double>> seen;
  for (std::size_t v = 0; v < c.n_nodes; ++v) {
    std::vector<std::size_t> combo;
    for (std::size_t r = 0; r < c.n_relations; ++r) combo.push_back(d.community[r][v]);
    auto row = d.graph.attributes().row_span(v);
    std::vector<double> values(row.begin(), row.end());
    auto [it, fresh] = seen.emplace(combo, values);
    if (!fresh) {
      EXPECT_EQ(it->second, values);
    }
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a, b;
  SynthConfig c;
  c.seed = 17;
  save_synth(generate(c), a.path());
  save_synth(generate(c), b.path());
  for (const char* f : {"nodes.tsv", "edges.tsv", "diffusions.tsv", "diffusion_contents.tsv",
                        "labels.tsv", "ground_truth.tsv", "diffusion_relations.tsv"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  c.seed = 18;
  TempDir other;
  save_synth(generate(c), other.path());
  EXPECT_NE(read_file(a / "edges.tsv"), read_file(other / "edges.tsv"));
}

TEST(Synth, SavedFilesLoadBack) {
  TempDir dir;
  const SynthData d = generate(SynthConfig{});
  save_synth(d, dir.path());
  EXPECT_EQ(load_graph(GraphFiles::in_directory(dir.path())), d.graph);
  EXPECT_EQ(load_edge_labels(dir / "ground_truth.tsv", d.graph.node_count()), d.ground_truth);
  EXPECT_EQ(load_diffusion_relations(dir / "diffusion_relations.tsv"), d.diffusion_relation);
}

TEST(Synth, EachDiffusionCarriesOneRelation) {
  const SynthData d = generate(SynthConfig{});
  for (std::size_t s = 0; s < d.graph.diffusions().size(); ++s) {
    const auto& net = d.graph.diffusions()[s];
    const int r = d.diffusion_relation[s];
    EXPECT_LE(net.covered_edges.size(), SynthConfig{}.diffusion_size);
    for (const Edge& e : net.covered_edges) EXPECT_EQ(d.ground_truth.at(e), r);
    const auto centroid = d.content_centroids.row_span(static_cast<std::size_t>(r));
    EXPECT_LT(squared_distance(centroid, net.content), 16 * 0.25);  // 0.1 sd per entry
  }
}

TEST(Synth, NearestCentroidSeparatesRelationsWithoutNoise) {
  SynthConfig c;
  c.attr_noise = 0.0;
  c.noise_edge_fraction = 0.0;
  for (std::uint64_t seed : {0, 1, 2}) {
    c.seed = seed;
    const SynthData d = generate(c);
    // Class centroids of concatenated endpoint attributes, per relation and
    // per community-combination pattern of the endpoints.
    std::map<std::pair<int, std::vector<std::size_t>>, std::pair<std::vector<double>, double>> sums;
    auto pattern = [&](Edge e) {
      std::vector<std::size_t> p;
      for (std::size_t r = 0; r < c.n_relations; ++r) {
        p.push_back(d.community[r][e.u]);
        p.push_back(d.community[r][e.v]);
      }
      return p;
    };
    for (const auto& [e, r] : d.ground_truth) {
      auto& [sum, n] = sums[{r, pattern(e)}];
      const auto x = edge_attributes(d.graph, e);
      if (sum.empty()) sum.assign(x.size(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) sum[i] += x[i];
      n += 1.0;
    }
    std::size_t correct = 0;
    for (const auto& [e, r] : d.ground_truth) {
      const auto x = edge_attributes(d.graph, e);
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      for (const auto& [key, acc] : sums) {
        std::vector<double> mean = acc.first;
        for (double& v : mean) v /= acc.second;
        const double dist = squared_distance(x, mean);
        if (dist < best) {
          best = dist;
          label = key.first;
        }
      }
      correct += label == r;
    }
    EXPECT_EQ(correct, d.ground_truth.size()) << "seed " << seed;
  }
}

TEST(Synth, ConfigParseRoundTripAndErrors) {
  SynthConfig c;
  c.edges_per_node = 6.5;
  c.seed = 99;
  EXPECT_EQ(SynthConfig::parse(c.to_text()), c);
  EXPECT_THROW(SynthConfig::parse("n_nodes = 3\ncommunities_per_relation = 2\n"), ConfigError);
  EXPECT_THROW(SynthConfig::parse("label_fraction = 0\n"), ConfigError);
  EXPECT_THROW(SynthConfig::parse("noise_edge_fraction = 1\n"), ConfigError);
  EXPECT_THROW(SynthConfig::parse("colour = red\n"), ConfigError);
}

TEST(Synth, InfeasibleEdgeTargetRejected) {
  SynthConfig c;
  c.n_nodes = 12;
  c.communities_per_relation = 6;
  c.edges_per_node = 20.0;
  EXPECT_THROW(generate(c), ConfigError);
}
