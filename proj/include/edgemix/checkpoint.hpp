#pragma once

// Versioned binary checkpoint of a TrainState. Layout (little-endian host order):
//
//   magic "EMCK" | u32 version | str config | u64 attribute_dim | u64 content_dim
//   | u64 param count | per param: str name, u64 rows, u64 cols, f64 value[],
//     f64 first_moment[], f64 second_moment[], u64 updates
//   | u64 optimizer steps | u64 batch | str rng state | magic "END."
//
// Strings are u64 length plus bytes. No timestamps, so identical states
// produce identical files.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "edgemix/error.hpp"
#include "edgemix/trainer.hpp"

namespace edgemix {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline constexpr std::array<char, 4> kCheckpointMagic{'E', 'M', 'C', 'K'};
inline constexpr std::array<char, 4> kCheckpointTrailer{'E', 'N', 'D', '.'};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void doubles(const Matrix& m) { bytes(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double)); }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw CheckpointError(path_ + ": truncated checkpoint");
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (std::uint64_t{1} << 32)) throw CheckpointError(path_ + ": corrupt string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void doubles(Matrix& m) { read(reinterpret_cast<char*>(m.data()), m.size() * sizeof(double)); }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace detail

inline void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  detail::BinaryWriter w(out);
  w.bytes(detail::kCheckpointMagic.data(), 4);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(state.config.to_text());
  w.pod<std::uint64_t>(state.model.dims.attribute_dim);
  w.pod<std::uint64_t>(state.model.dims.content_dim);
  const auto& params = state.model.params.all();
  w.pod<std::uint64_t>(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    w.pod<std::uint64_t>(p.value.rows());
    w.pod<std::uint64_t>(p.value.cols());
    w.doubles(p.value);
    w.doubles(p.first_moment);
    w.doubles(p.second_moment);
    w.pod<std::uint64_t>(p.updates);
  }
  w.pod<std::uint64_t>(state.model.params.step_count());
  w.pod<std::uint64_t>(state.batch);
  w.str(state.rng.state());
  w.bytes(detail::kCheckpointTrailer.data(), 4);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

inline TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  detail::BinaryReader r(in, path.string());
  std::array<char, 4> magic{};
  r.read(magic.data(), 4);
  if (magic != detail::kCheckpointMagic) throw CheckpointError(path.string() + ": not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));

  TrainState s;
  s.config = TrainConfig::parse(r.str(), path.string() + " (embedded config)");
  ModelDims dims;
  dims.attribute_dim = r.pod<std::uint64_t>();
  dims.content_dim = r.pod<std::uint64_t>();
  dims.relations = s.config.K;
  dims.gcn_dims = s.config.gcn_dims;
  dims.fnn_hidden = s.config.fnn_hidden;
  dims.kappa_h = s.config.kappa_h;
  dims.decoder_hidden = s.config.decoder_hidden;
  s.model.dims = dims;

  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows * cols > (std::uint64_t{1} << 32))
      throw CheckpointError(path.string() + ": corrupt shape for " + name);
    Matrix value(rows, cols);
    r.doubles(value);
    Parameter& p = s.model.params.add(name, std::move(value));
    r.doubles(p.first_moment);
    r.doubles(p.second_moment);
    p.updates = r.pod<std::uint64_t>();
  }
  s.model.params.set_step_count(r.pod<std::uint64_t>());
  s.batch = r.pod<std::uint64_t>();
  s.rng.set_state(r.str());
  std::array<char, 4> trailer{};
  r.read(trailer.data(), 4);
  if (trailer != detail::kCheckpointTrailer)
    throw CheckpointError(path.string() + ": corrupt checkpoint trailer");
  return s;
}

}  // namespace edgemix
