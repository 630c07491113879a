// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "edgemix/edgemix.hpp"
#include "support.hpp"

using namespace edgemix;
using edgemix::testing::TempDir;
using edgemix::testing::read_file;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

SynthConfig recovery_fixture(std::uint64_t seed) {
  SynthConfig c;
  c.n_nodes = 200;
  c.n_relations = 2;
  c.label_fraction = 0.25;
  c.attr_noise = 0.2;
  c.noise_edge_fraction = 0.1;
  c.seed = seed;
  return c;
}

TrainConfig recovery_training(std::uint64_t seed) {
  TrainConfig c;
  c.batches = 100;
  c.batch_size = 256;
  c.seed = seed;
  return c;
}

Graph without_labels(const Graph& g) {
  return Graph(g.node_count(), g.edges(), g.attributes(), g.diffusions());
}

std::vector<Edge> keys(const EdgeLabels& labels) {
  std::vector<Edge> out;
  for (const auto& [e, r] : labels) out.push_back(e);
  return out;
}

/// Shared state of the semi-supervised run on the recovery fixture.
struct RecoveryRun {
  SynthData data;
  TrainState state;
  LossTrace trace;
  double seconds = 0.0;
};

RecoveryRun run_recovery(std::uint64_t seed, bool supervised) {
  SynthData data = generate(recovery_fixture(seed));
  const Graph g = supervised ? data.graph : without_labels(data.graph);
  LossTrace trace;
  const auto t0 = Clock::now();
  TrainState state = train(g, recovery_training(seed), trace);
  const double secs = seconds_since(t0);
  return {std::move(data), std::move(state), std::move(trace), secs};
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelCheckResult r = check_model_gradients(seed);
    if (r.worst.max_relative_error > worst) {
      worst = r.worst.max_relative_error;
      where = r.worst.worst_parameter + " (" + signal_name(r.worst_signal) + ", seed " +
              std::to_string(seed) + ")";
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max relative error " + fmt(worst, 3) + " at " + where + " [< 1e-4], " + fmt(secs, 3) +
              " s [< 60 s]"};
}

Outcome closed_form_values() {
  std::vector<std::string> bad;
  std::ostringstream d;
  auto check = [&](const char* name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    if (!ok) bad.push_back(name);
    d << name << "=" << fmt(got, 10) << " ";
  };
  check("kl_w", kl_w(Matrix(1, 1), Matrix(1, 1, std::sqrt(2.0))), 0.153426, 1e-6);
  check("kl_w_exact", kl_w(Matrix(1, 1), Matrix(1, 1, std::sqrt(2.0))), 0.5 * (1.0 - std::log(2.0)), 1e-9);
  const std::vector<double> vertex{1.0, 0.0}, center{0.5, 0.5};
  check("kl_z_uniform", kl_z(vertex, PriorSpec::uniform()), 0.693147, 1e-6);
  check("kl_z_uniform_exact", kl_z(vertex, PriorSpec::uniform()), std::log(2.0), 1e-9);
  // Closed form with exact priors (1/12, 11/12): 0.5 ln 6 + 0.5 ln(6/11).
  check("kl_z_labeled", kl_z(center, PriorSpec::labeled(1, 0.1)), 0.5 * std::log(36.0 / 11.0), 1e-6);
  Tape t(false);
  const std::vector<double> positive{1.0};
  check("link_loss", link_loss_from_logits(t.constant(Matrix(1, 1)), positive).item(), std::log(2.0), 1e-9);
  const std::vector<double> logits{std::log(0.75), std::log(0.25)}, zero{0.0, 0.0};
  const auto z = sample_z(logits, zero, 0.5);
  check("gumbel_softmax_0", z[0], 0.9, 1e-9);
  check("gumbel_softmax_1", z[1], 0.1, 1e-9);
  std::string detail = d.str();
  if (!bad.empty()) {
    detail += "| failed:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

Outcome simplex_and_distributions() {
  Rng rng(2024);
  const std::vector<double> logits{0.3, -1.2, 2.0};
  double worst_sum = 0.0;
  bool negative = false;
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> g{rng.gumbel(), rng.gumbel(), rng.gumbel()};
    const auto z = sample_z(logits, g, 0.5);
    double s = 0.0;
    for (double v : z) {
      negative |= v < -1e-9;
      s += v;
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }

  std::vector<double> p(3), freq(3, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) total += (p[k] = std::exp(logits[k]));
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const std::vector<double> g{rng.gumbel(), rng.gumbel(), rng.gumbel()};
    const auto z = sample_z(logits, g, 0.1);
    freq[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())] += 1.0 / draws;
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < 3; ++k) tv += 0.5 * std::abs(freq[k] - p[k] / total);

  const Matrix mean(1, 3, {0.7, -1.5, 0.0});
  const Matrix sigma(1, 3, {0.5, 2.0, 1.0});
  const int n = 100000;
  std::vector<double> acc(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const Matrix eps(1, 3, {rng.normal(), rng.normal(), rng.normal()});
    const Matrix w = sample_w(mean, sigma, eps);
    for (std::size_t d = 0; d < 3; ++d) acc[d] += w[d];
  }
  double worst_se = 0.0;
  for (std::size_t d = 0; d < 3; ++d)
    worst_se = std::max(worst_se, std::abs(acc[d] / n - mean[d]) / (sigma[d] / std::sqrt(double(n))));

  const bool ok = worst_sum <= 1e-9 && !negative && tv < 0.02 && worst_se < 3.0;
  return {ok, "simplex deviation " + fmt(worst_sum, 3) + " [<= 1e-9], argmax TV " + fmt(tv, 4) +
                  " [< 0.02], sample_w mean error " + fmt(worst_se, 3) + " SE [< 3]"};
}

Outcome semi_supervised_recovery(RecoveryRun& run) {
  const EdgeLabels withheld = run.data.withheld();
  Rng rng(run.state.config.seed);
  const EmbeddingTable table =
      export_embeddings(run.data.graph, run.state.model, keys(withheld),
                        run.state.config.fixed_size, rng);
  const EvalReport r = evaluate_downstream(table, withheld);
  return {r.accuracy_mean >= 0.85 && run.seconds < 300.0,
          "accuracy " + fmt(r.accuracy_mean, 4) + " +- " + fmt(r.accuracy_std, 3) +
              " [>= 0.85] vs majority " + fmt(r.majority_baseline, 4) + ", training " +
              fmt(run.seconds, 3) + " s [< 300 s]"};
}

std::vector<int> argmax_clusters(const Graph& g, Model& model, const std::vector<Edge>& pairs,
                                 std::size_t fixed_size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out;
  for (const auto& enc : encode_all(g, pairs, model, fixed_size, rng))
    out.push_back(static_cast<int>(std::max_element(enc.pi.begin(), enc.pi.end()) - enc.pi.begin()));
  return out;
}

Outcome unsupervised_recovery() {
  RecoveryRun run = run_recovery(0, false);
  const std::vector<Edge> pairs = keys(run.data.ground_truth);
  std::vector<int> truth;
  for (Edge e : pairs) truth.push_back(run.data.ground_truth.at(e));
  const Graph g = without_labels(run.data.graph);
  const auto clusters =
      argmax_clusters(g, run.state.model, pairs, run.state.config.fixed_size, run.state.config.seed);
  std::size_t used = 0;
  for (int k = 0; k < 2; ++k) used += std::count(clusters.begin(), clusters.end(), k) > 0;
  const double ari = adjusted_rand_index(clusters, truth);
  return {ari >= 0.5, "ARI " + fmt(ari, 4) + " [>= 0.5], non-empty clusters " + std::to_string(used)};
}

/// Total loss of each outer batch (sum over its signals).
std::vector<double> batch_totals(const LossTrace& trace) {
  std::vector<double> out;
  for (const auto& e : trace) {
    if (e.batch >= out.size()) out.resize(e.batch + 1, 0.0);
    out[e.batch] += e.loss;
  }
  return out;
}

Outcome loss_descent(const RecoveryRun& first) {
  std::ostringstream d;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const LossTrace trace = seed == 0 ? first.trace : run_recovery(seed, true).trace;
    const auto totals = batch_totals(trace);
    double start = 0.0, end = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      start += totals[i] / 10.0;
      end += totals[totals.size() - 10 + i] / 10.0;
    }
    const double drop = (start - end) / start;
    ok &= drop >= 0.10;
    d << "seed " << seed << ": " << fmt(start, 5) << " -> " << fmt(end, 5) << " (" << fmt(100 * drop, 3)
      << "%) ";
  }
  return {ok, d.str() + "[drop >= 10% each]"};
}

Outcome determinism() {
  TempDir dir;
  const SynthData data = generate(recovery_fixture(5));
  const Graph& g = data.graph;
  TrainConfig cfg = recovery_training(5);
  cfg.batches = 6;
  const std::vector<Edge> pairs = keys(data.ground_truth);

  auto run = [&](const std::string& tag) {
    LossTrace trace;
    TrainState s = train(g, cfg, trace);
    write_trace(trace, dir / (tag + ".trace"));
    Rng rng(cfg.seed);
    write_embeddings(export_embeddings(g, s.model, pairs, cfg.fixed_size, rng), dir / (tag + ".emb"));
    return trace;
  };
  const LossTrace a = run("a");
  run("b");
  const bool traces = read_file(dir / "a.trace") == read_file(dir / "b.trace");
  const bool embeddings = read_file(dir / "a.emb") == read_file(dir / "b.emb");

  TrainState part = initialize_training(g, cfg);
  LossTrace resumed;
  train(g, part, resumed, 3);
  save_checkpoint(part, dir / "mid.ckpt");
  TrainState loaded = load_checkpoint(dir / "mid.ckpt");
  train(g, loaded, resumed);
  const bool resume = resumed == a;

  return {traces && embeddings && resume,
          std::string("traces ") + (traces ? "identical" : "DIFFER") + ", embedding files " +
              (embeddings ? "identical" : "DIFFER") + ", checkpoint resume " +
              (resume ? "identical" : "DIFFERS")};
}

/// Training state on a generated graph of `nodes` nodes, warmed up.
struct TimedRun {
  Graph graph;
  TrainState state;
  std::vector<double> times;

  explicit TimedRun(std::size_t nodes)
      : graph([&] {
          SynthConfig sc;
          sc.n_nodes = nodes;
          sc.seed = 1;
          return generate(sc).graph;
        }()),
        state([&] {
          TrainConfig cfg;
          cfg.batch_size = 256;
          cfg.batches = 1000;
          cfg.seed = 1;
          return initialize_training(graph, cfg);
        }()) {
    LossTrace trace;
    train(graph, state, trace, 2);
  }

  void time_one_batch() {
    LossTrace trace;
    const auto t0 = Clock::now();
    train(graph, state, trace, 1);
    times.push_back(seconds_since(t0));
  }

  double median() const {
    std::vector<double> t = times;
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
  }
};

Outcome scalability() {
  TimedRun small(2000), large(4000);
  // Alternate the two runs so machine load drifts affect both alike.
  for (int i = 0; i < 9; ++i) {
    small.time_one_batch();
    large.time_one_batch();
  }
  const double a = small.median(), b = large.median();
  const double diff = std::abs(b - a) / a;
  return {diff < 0.25, "median per-batch " + fmt(a, 4) + " s (N=2000) vs " + fmt(b, 4) +
                           " s (N=4000), difference " + fmt(100 * diff, 3) + "% [< 25%]"};
}

Outcome interpretation(RecoveryRun& run) {
  std::vector<std::vector<double>> refs;
  for (const auto& d : run.data.graph.diffusions()) refs.push_back(d.content);
  // hits[k][r]: samples of component k whose top-1 reference carries relation r
  double hits[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t k = 0; k < 2; ++k) {
    Rng rng(run.state.config.seed + 100 + k);
    for (const auto& s : interpret_relation(run.state.model, k, refs, rng))
      hits[k][run.data.diffusion_relation[s.ranked.front().reference]] += 1.0;
  }
  const bool swap = hits[0][1] + hits[1][0] > hits[0][0] + hits[1][1];
  const double r0 = swap ? hits[0][1] : hits[0][0];
  const double r1 = swap ? hits[1][0] : hits[1][1];
  return {r0 >= 80 && r1 >= 80, "component 0 -> relation " + std::to_string(swap ? 1 : 0) + ": " +
                                    fmt(r0) + "/100, component 1 -> relation " +
                                    std::to_string(swap ? 0 : 1) + ": " + fmt(r1) + "/100 [>= 80 each]"};
}

Outcome robustness_harness() {
  const SynthData data = generate(recovery_fixture(3));
  TrainConfig cfg = recovery_training(3);
  cfg.batches = 5;
  const EdgeLabels eval = data.withheld();
  std::vector<SweepPoint> points{{SweepAxis::baseline, 0.0}};
  for (double v : {0.1, 0.3, 0.5}) points.push_back({SweepAxis::attr_noise, v});
  for (double v : {0.02, 0.06, 0.10}) points.push_back({SweepAxis::link_removal, v});
  const auto rows = robustness_sweep(data.graph, eval, cfg, points);
  bool ok = rows.size() == points.size();
  for (std::size_t i = 0; ok && i < rows.size(); ++i)
    ok = rows[i].point == points[i] && rows[i].report.split_accuracies.size() == 5;
  const EvalReport baseline = train_and_evaluate(data.graph, eval, cfg, ClassifierConfig{});
  const bool same = !rows.empty() && rows[0].report == baseline;
  return {ok && same, std::to_string(rows.size()) + " reports for " + std::to_string(points.size()) +
                          " grid points, zero-perturbation row " +
                          (same ? "equals" : "DIFFERS from") + " the baseline run"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail
              << " {" << fmt(seconds_since(t0), 3) << " s}" << std::endl;
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "closed-form values", closed_form_values);
  report(3, "simplex and distributions", simplex_and_distributions);
  RecoveryRun run = run_recovery(0, true);
  report(4, "semi-supervised recovery", [&] { return semi_supervised_recovery(run); });
  report(5, "unsupervised recovery", unsupervised_recovery);
  report(6, "loss descent", [&] { return loss_descent(run); });
  report(7, "determinism", determinism);
  report(8, "scalability shape", scalability);
  report(9, "interpretation", [&] { return interpretation(run); });
  report(10, "robustness harness", robustness_harness);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
