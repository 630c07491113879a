// edgemix command-line tool: generate, train, embed, eval, interpret, sweep, gradcheck.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "edgemix/edgemix.hpp"

namespace fs = std::filesystem;
using namespace edgemix;

namespace {

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " file not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::is_directory(path)) throw Error(std::string(what) + " directory not found: " + path);
}

void require_out(const std::string& path) {
  if (path.empty()) throw ConfigError("missing --out");
}

void echo(const std::string& title, const std::string& text) {
  std::cout << "# " << title << '\n';
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) std::cout << "#   " << line << '\n';
}

void echo_seed(std::uint64_t seed) { std::cout << "# seed = " << seed << '\n'; }

Graph load_data(const std::string& dir) {
  require_dir(dir, "data");
  return load_graph(GraphFiles::in_directory(dir));
}

/// Held-out evaluation labels: an explicit file, else the generator's ground
/// truth minus the labels visible to training, else the training labels.
EdgeLabels evaluation_labels(const std::string& dir, const Graph& g, const std::string& override_path) {
  if (!override_path.empty()) {
    require_file(override_path, "labels");
    return load_edge_labels(override_path, g.node_count(), &g);
  }
  const fs::path truth = fs::path(dir) / "ground_truth.tsv";
  if (fs::exists(truth)) {
    EdgeLabels out;
    for (const auto& [e, r] : load_edge_labels(truth, g.node_count(), &g))
      if (!g.labels().contains(e)) out.emplace(e, r);
    return out;
  }
  return g.labels();
}

TrainState load_state(const CommonFlags& f) {
  require_file(f.checkpoint, "checkpoint");
  TrainState state = load_checkpoint(f.checkpoint);
  if (f.seed) state.config.seed = *f.seed;
  return state;
}

void check_compatible(const Graph& g, const TrainState& s) {
  if (g.attribute_dim() != s.model.dims.attribute_dim)
    throw Error("checkpoint attribute width " + std::to_string(s.model.dims.attribute_dim) +
                " does not match data width " + std::to_string(g.attribute_dim()));
}

ClassifierConfig classifier_config(const std::string& path, std::optional<std::uint64_t> seed) {
  ClassifierConfig c;
  if (!path.empty()) {
    require_file(path, "classifier-config");
    c = ClassifierConfig::load(path);
  }
  if (seed) c.seed = *seed;
  return c;
}

TrainConfig train_config(const CommonFlags& f) {
  require_file(f.config, "config");
  TrainConfig c = TrainConfig::load(f.config);
  if (f.seed) c.seed = *f.seed;
  return c;
}

int run_generate(const CommonFlags& f) {
  SynthConfig c;
  if (!f.config.empty()) {
    require_file(f.config, "config");
    c = SynthConfig::load(f.config);
  }
  if (f.seed) c.seed = *f.seed;
  c.validate();
  require_out(f.out);
  echo("synth config", c.to_text());
  echo_seed(c.seed);
  const SynthData data = generate(c);
  fs::create_directories(f.out);
  save_synth(data, f.out);
  io::open_out(fs::path(f.out) / "synth.cfg") << c.to_text();
  std::cout << "nodes " << data.graph.node_count() << " edges " << data.graph.edge_count()
            << " diffusions " << data.graph.diffusions().size() << " labels "
            << data.graph.labels().size() << " ground_truth " << data.ground_truth.size() << '\n';
  return 0;
}

int run_train(const CommonFlags& f, std::optional<std::uint64_t> limit) {
  const Graph g = load_data(f.data);
  require_out(f.out);
  TrainState state = [&] {
    if (!f.checkpoint.empty()) {
      if (!f.config.empty()) throw ConfigError("--config and --checkpoint are exclusive for train");
      TrainState s = load_state(CommonFlags{"", "", "", f.checkpoint, std::nullopt});
      if (f.seed) throw ConfigError("--seed cannot change a resumed run");
      check_compatible(g, s);
      return s;
    }
    return initialize_training(g, train_config(f));
  }();
  echo("train config", state.config.to_text());
  echo_seed(state.config.seed);
  std::cout << "# start batch = " << state.batch << '\n';
  fs::create_directories(f.out);
  LossTrace trace;
  train(g, state, trace, limit, [](const TraceEntry& e, const StepLoss& l) {
    std::cout << e.batch << '\t' << signal_name(e.signal) << '\t' << io::format_double(l.total)
              << '\n';
  });
  write_trace(trace, fs::path(f.out) / "trace.tsv");
  save_checkpoint(state, fs::path(f.out) / "checkpoint.bin");
  io::open_out(fs::path(f.out) / "train.cfg") << state.config.to_text();
  std::cout << "# finished at batch " << state.batch << " of " << state.config.batches << '\n';
  return 0;
}

std::vector<Edge> embedding_pairs(const Graph& g, const std::string& which, const std::string& dir,
                                  const std::string& labels) {
  if (which == "edges") return g.edges();
  if (which == "eval") {
    std::vector<Edge> out;
    for (const auto& [e, r] : evaluation_labels(dir, g, labels)) out.push_back(e);
    return out;
  }
  throw ConfigError("--pairs must be 'edges' or 'eval'");
}

int run_embed(const CommonFlags& f, const std::string& which, const std::string& labels) {
  const Graph g = load_data(f.data);
  TrainState state = load_state(f);
  check_compatible(g, state);
  require_out(f.out);
  echo("train config", state.config.to_text());
  echo_seed(state.config.seed);
  Rng rng(state.config.seed);
  const EmbeddingTable table =
      export_embeddings(g, state.model, embedding_pairs(g, which, f.data, labels),
                        state.config.fixed_size, rng);
  write_embeddings(table, f.out);
  std::cout << "wrote " << table.pairs.size() << " embeddings of width " << table.values.cols()
            << '\n';
  return 0;
}

int run_eval(const CommonFlags& f, const std::string& embeddings, const std::string& labels) {
  const Graph g = load_data(f.data);
  const EdgeLabels target = evaluation_labels(f.data, g, labels);
  EmbeddingTable table;
  std::optional<std::uint64_t> seed = f.seed;
  if (!embeddings.empty()) {
    require_file(embeddings, "embeddings");
    table = read_embeddings(embeddings);
  } else {
    TrainState state = load_state(f);
    check_compatible(g, state);
    if (!seed) seed = state.config.seed;
    std::vector<Edge> pairs;
    for (const auto& [e, r] : target) pairs.push_back(e);
    Rng rng(state.config.seed);
    table = export_embeddings(g, state.model, pairs, state.config.fixed_size, rng);
  }
  const ClassifierConfig cc = classifier_config(f.config, seed);
  echo("classifier config", cc.to_text());
  echo_seed(cc.seed);
  const EvalReport report = evaluate_downstream(table, target, cc);
  write_report(std::cout, report);
  if (!f.out.empty()) {
    auto out = io::open_out(f.out);
    write_report(out, report);
  }
  return 0;
}

std::vector<double> parse_weights(const std::string& text) {
  return config::to_doubles("weights", text);
}

int run_interpret(const CommonFlags& f, std::optional<std::size_t> component,
                  const std::string& weights, InterpretOptions opt) {
  const Graph g = load_data(f.data);
  TrainState state = load_state(f);
  check_compatible(g, state);
  std::vector<std::vector<double>> refs;
  for (const auto& d : g.diffusions()) refs.push_back(d.content);
  std::vector<int> ref_relation;
  if (fs::exists(fs::path(f.data) / "diffusion_relations.tsv"))
    ref_relation = load_diffusion_relations(fs::path(f.data) / "diffusion_relations.tsv");
  echo("train config", state.config.to_text());
  echo_seed(state.config.seed);

  std::vector<std::pair<std::string, std::vector<double>>> mixtures;
  if (!weights.empty()) {
    mixtures.emplace_back("weights " + weights, parse_weights(weights));
  } else {
    for (std::size_t k = 0; k < state.model.dims.relations; ++k) {
      if (component && *component != k) continue;
      std::vector<double> w(state.model.dims.relations, 0.0);
      w[k] = 1.0;
      mixtures.emplace_back("component " + std::to_string(k), std::move(w));
    }
    if (mixtures.empty()) throw ConfigError("--component outside [0, K)");
  }

  std::ofstream file;
  if (!f.out.empty()) file = io::open_out(f.out);
  std::ostream& out = f.out.empty() ? std::cout : file;
  out << "mixture\tsample\trank\treference\tsimilarity\n";
  Rng rng(state.config.seed);
  for (const auto& [name, w] : mixtures) {
    const auto result = interpret_mixture(state.model, w, refs, rng, opt);
    std::map<int, std::size_t> top1;
    for (std::size_t s = 0; s < result.size(); ++s) {
      const auto& ranked = result[s].ranked;
      for (std::size_t r = 0; r < ranked.size(); ++r)
        out << name << '\t' << s << '\t' << r << '\t' << ranked[r].reference << '\t'
            << io::format_double(ranked[r].similarity) << '\n';
      if (!ranked.empty() && ranked[0].reference < ref_relation.size())
        ++top1[ref_relation[ranked[0].reference]];
    }
    if (!top1.empty()) {
      std::cout << "# " << name << " top-1 reference relations:";
      for (const auto& [r, n] : top1) std::cout << " r" << r << '=' << n;
      std::cout << '\n';
    }
  }
  return 0;
}

int run_sweep(const CommonFlags& f, const std::vector<std::string>& axes,
              const std::vector<double>& values, const std::string& labels, std::size_t threads,
              const std::string& classifier_path) {
  const Graph g = load_data(f.data);
  const TrainConfig cfg = train_config(f);
  const EdgeLabels target = evaluation_labels(f.data, g, labels);
  const ClassifierConfig cc = classifier_config(classifier_path, cfg.seed);
  require_out(f.out);
  if (axes.empty()) throw ConfigError("sweep needs at least one --axis");
  if (!values.empty() && axes.size() != 1) throw ConfigError("--values needs exactly one --axis");
  echo("train config", cfg.to_text());
  echo("classifier config", cc.to_text());
  echo_seed(cfg.seed);

  std::vector<SweepPoint> points{{SweepAxis::baseline, 0.0}};
  for (const auto& name : axes) {
    const SweepAxis axis = parse_axis(name);
    if (axis == SweepAxis::baseline) continue;
    for (double v : values.empty() ? default_axis_values(axis) : values) points.push_back({axis, v});
  }
  const auto rows = robustness_sweep(g, target, cfg, points, cc, threads);
  auto out = io::open_out(f.out);
  write_sweep(out, rows);
  for (const auto& row : rows)
    std::cout << axis_name(row.point.axis) << '\t' << io::format_double(row.point.value) << '\t'
              << io::format_double(row.report.accuracy_mean) << " +- "
              << io::format_double(row.report.accuracy_std) << '\n';
  return 0;
}

int run_gradcheck(const CommonFlags& f) {
  const std::uint64_t seed = f.seed.value_or(0);
  echo("gradcheck config", tiny_check_config(seed).to_text());
  echo_seed(seed);
  const ModelCheckResult r = check_model_gradients(seed);
  std::cout << "entries " << r.entries << " max_relative_error "
            << io::format_double(r.worst.max_relative_error) << " worst_signal "
            << signal_name(r.worst_signal) << " worst_parameter " << r.worst.worst_parameter << '\n';
  return r.worst.max_relative_error < 1e-4 ? 0 : 1;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool config, bool data, bool out, bool checkpoint) {
  if (config) cmd->add_option("--config", f.config, "configuration file");
  if (data) cmd->add_option("--data", f.data, "data directory");
  if (out) cmd->add_option("--out", f.out, "output path");
  if (checkpoint) cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  cmd->add_option("--seed", f.seed, "seed override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-aware edge representation learning on multi-modal graphs"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);
  CommonFlags f;

  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic planted-relation graph");
  add_common(generate_cmd, f, true, false, true, false);

  std::optional<std::uint64_t> batches;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes checkpoint.bin and trace.tsv");
  add_common(train_cmd, f, true, true, true, true);
  train_cmd->add_option("--batches", batches, "stop after this many outer batches");

  std::string pairs = "edges";
  std::string labels;
  auto* embed_cmd = app.add_subcommand("embed", "export edge embeddings");
  add_common(embed_cmd, f, false, true, true, true);
  embed_cmd->add_option("--pairs", pairs, "'edges' (all) or 'eval' (held-out labeled edges)");
  embed_cmd->add_option("--labels", labels, "label file used by --pairs eval");

  std::string embeddings;
  auto* eval_cmd = app.add_subcommand("eval", "downstream relation classification");
  add_common(eval_cmd, f, true, true, true, true);
  eval_cmd->add_option("--embeddings", embeddings, "embedding table instead of a checkpoint");
  eval_cmd->add_option("--labels", labels, "evaluation label file");

  std::optional<std::size_t> component;
  std::string weights;
  InterpretOptions iopt;
  auto* interpret_cmd = app.add_subcommand("interpret", "decode mixture components to diffusions");
  add_common(interpret_cmd, f, false, true, true, true);
  interpret_cmd->add_option("--component", component, "single component (default: all)");
  interpret_cmd->add_option("--weights", weights, "comma-separated mixture weights");
  interpret_cmd->add_option("--samples", iopt.samples, "draws per mixture");
  interpret_cmd->add_option("--top", iopt.top, "references listed per draw");
  interpret_cmd->add_flag("--zero-noise", iopt.zero_noise, "decode the mixture mean");

  std::vector<std::string> axes;
  std::vector<double> values;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::string classifier;
  auto* sweep_cmd = app.add_subcommand("sweep", "robustness sweep over perturbation axes");
  add_common(sweep_cmd, f, true, true, true, false);
  sweep_cmd->add_option("--axis", axes, "label_fraction, attr_noise or link_removal (repeatable)");
  sweep_cmd->add_option("--values", values, "grid values for a single axis");
  sweep_cmd->add_option("--labels", labels, "evaluation label file");
  sweep_cmd->add_option("--threads", threads, "worker threads");
  sweep_cmd->add_option("--classifier-config", classifier, "classifier configuration file");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the model");
  add_common(gradcheck_cmd, f, false, false, false, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) return run_generate(f);
    if (train_cmd->parsed()) return run_train(f, batches);
    if (embed_cmd->parsed()) return run_embed(f, pairs, labels);
    if (eval_cmd->parsed()) return run_eval(f, embeddings, labels);
    if (interpret_cmd->parsed()) {
      if (component && !weights.empty()) throw ConfigError("--component and --weights are exclusive");
      return run_interpret(f, component, weights, iopt);
    }
    if (sweep_cmd->parsed()) return run_sweep(f, axes, values, labels, threads, classifier);
    if (gradcheck_cmd->parsed()) return run_gradcheck(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
