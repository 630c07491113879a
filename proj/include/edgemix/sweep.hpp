#pragma once

// Robustness sweep: perturb the graph along one axis at a time, retrain,
// and evaluate on a fixed set of held-out relation labels.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/eval.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/sampling.hpp"
#include "edgemix/trainer.hpp"

namespace edgemix {

enum class SweepAxis { baseline, label_fraction, attr_noise, link_removal };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::baseline: return "baseline";
    case SweepAxis::label_fraction: return "label_fraction";
    case SweepAxis::attr_noise: return "attr_noise";
    case SweepAxis::link_removal: return "link_removal";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  for (SweepAxis a : {SweepAxis::baseline, SweepAxis::label_fraction, SweepAxis::attr_noise,
                      SweepAxis::link_removal})
    if (s == axis_name(a)) return a;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

struct SweepPoint {
  SweepAxis axis = SweepAxis::baseline;
  double value = 0.0;

  bool operator==(const SweepPoint&) const = default;
};

struct SweepRow {
  SweepPoint point;
  EvalReport report;

  bool operator==(const SweepRow&) const = default;
};

/// Default grids of the three axes.
inline std::vector<double> default_axis_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::label_fraction: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    case SweepAxis::attr_noise: return {0.1, 0.2, 0.3, 0.4, 0.5};
    case SweepAxis::link_removal: return {0.02, 0.04, 0.06, 0.08, 0.10};
    case SweepAxis::baseline: return {0.0};
  }
  return {};
}

/// Keeps round(fraction * |labels|) uniformly chosen labels.
inline Graph subsample_labels(const Graph& g, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("label fraction must be in [0, 1]");
  std::vector<std::pair<Edge, int>> all(g.labels().begin(), g.labels().end());
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(all.size())));
  EdgeLabels labels;
  if (keep == all.size()) {
    labels = g.labels();
  } else {
    for (std::size_t i = 0; i < keep; ++i) {
      std::swap(all[i], all[i + rng.index(all.size() - i)]);
      labels.insert(all[i]);
    }
  }
  return Graph(g.node_count(), g.edges(), g.attributes(), g.diffusions(), std::move(labels));
}

/// The perturbed graph of one grid point. Perturbation randomness comes from
/// a stream derived from the training seed and the point index.
inline Graph apply_point(const Graph& g, const SweepPoint& p, std::uint64_t seed) {
  Rng rng(seed);
  switch (p.axis) {
    case SweepAxis::baseline: return g;
    case SweepAxis::label_fraction: return subsample_labels(g, p.value, rng);
    case SweepAxis::attr_noise: return perturb(g, p.value, 0.0, rng);
    case SweepAxis::link_removal: return perturb(g, 0.0, p.value, rng);
  }
  throw Error("unknown sweep axis");
}

/// Train on one graph and evaluate held-out labels of edges still present.
inline EvalReport train_and_evaluate(const Graph& g, const EdgeLabels& eval_labels,
                                     const TrainConfig& cfg, const ClassifierConfig& classifier) {
  LossTrace trace;
  TrainState state = train(g, cfg, trace);
  std::vector<Edge> pairs;
  for (const auto& [e, r] : eval_labels)
    if (g.has_edge(e.u, e.v)) pairs.push_back(e);
  Rng rng(cfg.seed);
  EmbeddingTable table = export_embeddings(g, state.model, pairs, cfg.fixed_size, rng);
  return evaluate_downstream(table, eval_labels, classifier);
}

inline std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1));
}

/// One report per point, in input order. Points are independent and run on
/// up to `threads` workers.
inline std::vector<SweepRow> robustness_sweep(const Graph& g, const EdgeLabels& eval_labels,
                                              const TrainConfig& cfg,
                                              const std::vector<SweepPoint>& points,
                                              const ClassifierConfig& classifier = {},
                                              std::size_t threads = 1) {
  std::vector<std::optional<SweepRow>> rows(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
      try {
        const Graph perturbed = apply_point(g, points[i], point_seed(cfg.seed, i));
        rows[i] = SweepRow{points[i], train_and_evaluate(perturbed, eval_labels, cfg, classifier)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, points.size()));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<SweepRow> out;
  for (auto& r : rows) out.push_back(std::move(*r));
  return out;
}

/// Table rows `axis value split accuracy`, then per-point aggregate rows.
inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "axis\tvalue\tsplit\taccuracy\n";
  for (const auto& row : rows) {
    const std::string key = std::string(axis_name(row.point.axis)) + '\t' + io::format_double(row.point.value);
    for (std::size_t s = 0; s < row.report.split_accuracies.size(); ++s)
      out << key << '\t' << s << '\t' << io::format_double(row.report.split_accuracies[s]) << '\n';
    out << key << "\tmean\t" << io::format_double(row.report.accuracy_mean) << '\n';
    out << key << "\tstd\t" << io::format_double(row.report.accuracy_std) << '\n';
  }
}

}  // namespace edgemix
