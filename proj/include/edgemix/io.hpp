#pragma once

// Plain-text graph formats (tab separated, '#' comments, LF or CRLF):
//
//   nodes              node_id<TAB>v1,v2,...,vL        ids contiguous 0..N-1
//   edges              src<TAB>dst
//   diffusions         diffusion_id<TAB>src<TAB>dst    one covered edge per line
//   diffusion contents diffusion_id<TAB>c1,...,cLc
//   labels             src<TAB>dst<TAB>relation_id
//   embeddings         src<TAB>dst<TAB>h1,...,hk

#include <charconv>
#include <cmath>
#include <span>
#include <type_traits>
#include <unordered_set>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/graph.hpp"

namespace edgemix {

namespace io {

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, end);
}

inline std::string join(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

/// Reads a text file line by line, stripping CR and skipping blanks and comments.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw ParseError(path_, 0, "cannot open file");
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      return true;
    }
    return false;
  }

  std::size_t line_number() const noexcept { return number_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, number_, what); }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t number_ = 0;
};

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (first != last && *first == '+') ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

inline std::vector<double> parse_vector(const LineReader& r, std::string_view s) {
  std::vector<double> out;
  for (auto field : split(s, ',')) {
    auto v = parse_number<double>(field);
    if (!v) r.fail("invalid real number '" + std::string(field) + "'");
    if (!std::isfinite(*v)) r.fail("non-finite value");
    out.push_back(*v);
  }
  return out;
}

inline NodeId parse_node(const LineReader& r, std::string_view s) {
  auto v = parse_number<NodeId>(s);
  if (!v) r.fail("invalid node id '" + std::string(s) + "'");
  return *v;
}

inline void check_node(const LineReader& r, NodeId v, std::size_t n) {
  if (v >= n) r.fail("node " + std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
}

inline Edge parse_pair(const LineReader& r, std::string_view a, std::string_view b, std::size_t n) {
  const NodeId u = parse_node(r, a);
  const NodeId v = parse_node(r, b);
  check_node(r, u, n);
  check_node(r, v, n);
  if (u == v) r.fail("self-loop " + std::to_string(u));
  return canonical(u, v);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace io

struct GraphFiles {
  std::filesystem::path nodes;
  std::filesystem::path edges;
  std::optional<std::filesystem::path> diffusions;
  std::optional<std::filesystem::path> diffusion_contents;
  std::optional<std::filesystem::path> labels;

  /// Standard file names inside a data directory; optional files are used when present.
  static GraphFiles in_directory(const std::filesystem::path& dir) {
    GraphFiles f{dir / "nodes.tsv", dir / "edges.tsv", {}, {}, {}};
    if (std::filesystem::exists(dir / "diffusions.tsv")) {
      f.diffusions = dir / "diffusions.tsv";
      f.diffusion_contents = dir / "diffusion_contents.tsv";
    }
    if (std::filesystem::exists(dir / "labels.tsv")) f.labels = dir / "labels.tsv";
    return f;
  }
};

/// Reads an edge -> relation file (`src<TAB>dst<TAB>relation_id`).
/// When `g` is given, every pair must be an edge of it.
inline EdgeLabels load_edge_labels(const std::filesystem::path& path, std::size_t node_count,
                                   const Graph* g = nullptr) {
  io::LineReader r(path);
  EdgeLabels labels;
  std::string line;
  while (r.next(line)) {
    auto f = io::split(line, '\t');
    if (f.size() != 3) r.fail("expected 3 tab-separated fields");
    const Edge e = io::parse_pair(r, f[0], f[1], node_count);
    auto rel = io::parse_number<int>(f[2]);
    if (!rel || *rel < 0) r.fail("invalid relation id '" + std::string(f[2]) + "'");
    if (g && !g->has_edge(e.u, e.v))
      r.fail("label references nonexistent edge " + std::to_string(e.u) + "-" +
             std::to_string(e.v));
    auto [it, fresh] = labels.emplace(e, *rel);
    if (!fresh && it->second != *rel) r.fail("conflicting relation ids for one edge");
  }
  return labels;
}

inline Graph load_graph(const GraphFiles& files) {
  // Nodes.
  std::vector<std::vector<double>> rows;
  {
    io::LineReader r(files.nodes);
    std::string line;
    while (r.next(line)) {
      auto f = io::split(line, '\t');
      if (f.size() != 2) r.fail("expected node_id<TAB>values");
      const NodeId id = io::parse_node(r, f[0]);
      if (id != rows.size())
        r.fail("node ids must be contiguous from 0; expected " + std::to_string(rows.size()));
      auto values = io::parse_vector(r, f[1]);
      if (!rows.empty() && values.size() != rows.front().size())
        r.fail("attribute dimension " + std::to_string(values.size()) + " != " +
               std::to_string(rows.front().size()));
      rows.push_back(std::move(values));
    }
  }
  const std::size_t n = rows.size();
  const std::size_t dim = n ? rows.front().size() : 0;
  Matrix attributes(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(rows[i].begin(), rows[i].end(), attributes.row_span(i).begin());

  // Edges.
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> edge_set;
  {
    io::LineReader r(files.edges);
    std::string line;
    while (r.next(line)) {
      auto f = io::split(line, '\t');
      if (f.size() != 2) r.fail("expected src<TAB>dst");
      const Edge e = io::parse_pair(r, f[0], f[1], n);
      if (edge_set.insert(edge_key(e)).second) edges.push_back(e);
    }
  }

  // Diffusions, ordered by id.
  std::vector<DiffusionNet> diffusions;
  if (files.diffusions) {
    if (!files.diffusion_contents)
      throw ParseError(files.diffusions->string(), 0, "diffusion contents file missing");
    std::map<std::uint64_t, DiffusionNet> by_id;
    {
      io::LineReader r(*files.diffusion_contents);
      std::string line;
      std::optional<std::size_t> content_dim;
      while (r.next(line)) {
        auto f = io::split(line, '\t');
        if (f.size() != 2) r.fail("expected diffusion_id<TAB>values");
        auto id = io::parse_number<std::uint64_t>(f[0]);
        if (!id) r.fail("invalid diffusion id '" + std::string(f[0]) + "'");
        auto values = io::parse_vector(r, f[1]);
        if (content_dim && values.size() != *content_dim)
          r.fail("content dimension " + std::to_string(values.size()) + " != " +
                 std::to_string(*content_dim));
        content_dim = values.size();
        if (!by_id.emplace(*id, DiffusionNet{{}, std::move(values)}).second)
          r.fail("duplicate diffusion id " + std::to_string(*id));
      }
    }
    io::LineReader r(*files.diffusions);
    std::string line;
    while (r.next(line)) {
      auto f = io::split(line, '\t');
      if (f.size() != 3) r.fail("expected diffusion_id<TAB>src<TAB>dst");
      auto id = io::parse_number<std::uint64_t>(f[0]);
      if (!id) r.fail("invalid diffusion id '" + std::string(f[0]) + "'");
      auto it = by_id.find(*id);
      if (it == by_id.end()) r.fail("diffusion " + std::to_string(*id) + " has no content");
      const Edge e = io::parse_pair(r, f[1], f[2], n);
      if (!edge_set.contains(edge_key(e)))
        r.fail("diffusion references nonexistent edge " + std::to_string(e.u) + "-" +
               std::to_string(e.v));
      it->second.covered_edges.push_back(e);
    }
    for (auto& [id, d] : by_id) {
      if (d.covered_edges.empty())
        throw ParseError(files.diffusions->string(), 0,
                         "diffusion " + std::to_string(id) + " covers no edges");
      diffusions.push_back(std::move(d));
    }
  }

  Graph probe(n, edges, attributes);
  EdgeLabels labels;
  if (files.labels) labels = load_edge_labels(*files.labels, n, &probe);

  return Graph(n, std::move(edges), std::move(attributes), std::move(diffusions),
               std::move(labels));
}

inline void save_edge_labels(const EdgeLabels& labels, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  for (const auto& [e, r] : labels) out << e.u << '\t' << e.v << '\t' << r << '\n';
}

/// Writes the graph in the formats above; the inverse of `load_graph`.
inline GraphFiles save_graph(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  GraphFiles files{dir / "nodes.tsv", dir / "edges.tsv", {}, {}, {}};
  {
    auto out = io::open_out(files.nodes);
    for (std::size_t i = 0; i < g.node_count(); ++i)
      out << i << '\t' << io::join(g.attributes().row_span(i)) << '\n';
  }
  {
    auto out = io::open_out(files.edges);
    for (const Edge& e : g.edges()) out << e.u << '\t' << e.v << '\n';
  }
  if (!g.diffusions().empty()) {
    files.diffusions = dir / "diffusions.tsv";
    files.diffusion_contents = dir / "diffusion_contents.tsv";
    auto out = io::open_out(*files.diffusions);
    auto contents = io::open_out(*files.diffusion_contents);
    for (std::size_t d = 0; d < g.diffusions().size(); ++d) {
      const auto& net = g.diffusions()[d];
      for (const Edge& e : net.covered_edges) out << d << '\t' << e.u << '\t' << e.v << '\n';
      contents << d << '\t' << io::join(net.content) << '\n';
    }
  }
  if (!g.labels().empty()) {
    files.labels = dir / "labels.tsv";
    save_edge_labels(g.labels(), *files.labels);
  }
  return files;
}

}  // namespace edgemix
