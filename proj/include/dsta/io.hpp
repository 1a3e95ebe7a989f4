#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/model.hpp"
#include "dsta/oim.hpp"
#include "dsta/spatial.hpp"

namespace dsta {

namespace detail {

// All file numbers are little-endian so byte-level tests are platform-fixed.
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t f64_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return bits;
}

inline double bits_f64(std::uint64_t bits) {
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline void put_f64(std::string& out, double v) { put_u64(out, f64_bits(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string name)
      : data_(data), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }

  double f64() { return bits_f64(u64()); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const {
    if (!at_end()) throw Error(Errc::io_error, name_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) throw Error(Errc::io_error, name_ + ": truncated file");
  }
  const std::string& data_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::string read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_binary_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "short write to " + path);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// FeatureGridFile: u32 header (N_frames, H_g, W_g, D), then frame-major,
// cell-major little-endian doubles.

inline std::string encode_feature_grids(const std::vector<FrameFeatureGrid>& frames) {
  if (frames.empty()) throw Error(Errc::invalid_input, "no frames to encode");
  const std::size_t h = frames.front().grid_h;
  const std::size_t w = frames.front().grid_w;
  const std::size_t d = frames.front().feature_dim();
  std::string out;
  out.reserve(16 + frames.size() * h * w * d * 8);
  detail::put_u32(out, static_cast<std::uint32_t>(frames.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(h));
  detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (const FrameFeatureGrid& g : frames) {
    if (g.grid_h != h || g.grid_w != w || g.feature_dim() != d)
      throw Error(Errc::shape_mismatch, "inconsistent frame shapes");
    for (double v : g.cells.data) detail::put_f64(out, v);
  }
  return out;
}

inline std::vector<FrameFeatureGrid> decode_feature_grids(const std::string& bytes,
                                                          const std::string& name) {
  detail::ByteReader r(bytes, name);
  const std::uint32_t n = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t d = r.u32();
  if (n == 0 || h == 0 || w == 0 || d == 0)
    throw Error(Errc::io_error, name + ": zero dimension in header");
  std::vector<FrameFeatureGrid> frames;
  frames.reserve(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    FrameFeatureGrid g(h, w, d);
    for (double& v : g.cells.data) v = r.f64();
    frames.push_back(std::move(g));
  }
  r.expect_end();
  return frames;
}

inline void save_feature_grids(const std::string& path,
                               const std::vector<FrameFeatureGrid>& frames) {
  detail::write_binary_file(path, encode_feature_grids(frames));
}

inline std::vector<FrameFeatureGrid> load_feature_grids(const std::string& path) {
  return decode_feature_grids(detail::read_binary_file(path), path);
}

// ---------------------------------------------------------------------------
// Checkpoint: "DVAT" magic, u32 version, hyperparameter block, named
// parameter arrays (ModelParams order, then the OIM table), trailing u64
// checksum = sum of all array-value bit patterns mod 2^64.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Hyperparams hp;
  ModelParams params;
  OimState state;
};

namespace detail {

inline void put_hyperparams(std::string& out, const Hyperparams& hp, std::uint64_t identities) {
  put_u64(out, hp.chunks);
  put_u64(out, hp.heads);
  put_u64(out, hp.grid_h);
  put_u64(out, hp.grid_w);
  put_u64(out, hp.feature_dim);
  put_u64(out, hp.hidden_dim);
  put_u64(out, hp.embed_dim);
  put_u64(out, hp.lr_drop_epoch);
  put_u64(out, hp.epochs);
  put_u64(out, hp.batch_size);
  put_u64(out, hp.warmup_epochs);
  put_u64(out, hp.seed);
  put_u64(out, identities);
  put_f64(out, hp.lambda_div);
  put_f64(out, hp.tau);
  put_f64(out, hp.gamma);
  put_f64(out, hp.sigma);
  put_f64(out, hp.lr_initial);
  put_f64(out, hp.lr_dropped);
  put_f64(out, hp.sgd_momentum);
  put_u32(out, static_cast<std::uint32_t>(hp.penalty));
  put_u32(out, static_cast<std::uint32_t>(hp.loss));
  put_u32(out, static_cast<std::uint32_t>(hp.spatial_mode));
  put_u32(out, static_cast<std::uint32_t>(hp.temporal_mode));
  put_u32(out, static_cast<std::uint32_t>(hp.temporal_norm));
  put_u32(out, hp.enhancement ? 1 : 0);
}

inline std::uint64_t get_hyperparams(ByteReader& r, Hyperparams& hp) {
  hp.chunks = r.u64();
  hp.heads = r.u64();
  hp.grid_h = r.u64();
  hp.grid_w = r.u64();
  hp.feature_dim = r.u64();
  hp.hidden_dim = r.u64();
  hp.embed_dim = r.u64();
  hp.lr_drop_epoch = r.u64();
  hp.epochs = r.u64();
  hp.batch_size = r.u64();
  hp.warmup_epochs = r.u64();
  hp.seed = r.u64();
  const std::uint64_t identities = r.u64();
  hp.lambda_div = r.f64();
  hp.tau = r.f64();
  hp.gamma = r.f64();
  hp.sigma = r.f64();
  hp.lr_initial = r.f64();
  hp.lr_dropped = r.f64();
  hp.sgd_momentum = r.f64();
  const std::uint32_t penalty = r.u32();
  const std::uint32_t loss = r.u32();
  const std::uint32_t spatial = r.u32();
  const std::uint32_t tmode = r.u32();
  const std::uint32_t tnorm = r.u32();
  const std::uint32_t enh = r.u32();
  if (penalty > 2 || loss > 1 || spatial > 1 || tmode > 2 || tnorm > 1 || enh > 1)
    throw Error(Errc::io_error, "checkpoint: invalid enum value");
  hp.penalty = static_cast<PenaltyKind>(penalty);
  hp.loss = static_cast<LossKind>(loss);
  hp.spatial_mode = static_cast<SpatialMode>(spatial);
  hp.temporal_mode = static_cast<TemporalMode>(tmode);
  hp.temporal_norm = static_cast<TemporalNorm>(tnorm);
  hp.enhancement = enh == 1;
  constexpr std::uint64_t kDimLimit = 1ULL << 20;
  if (hp.chunks == 0 || hp.heads == 0 || hp.grid_h == 0 || hp.grid_w == 0 ||
      hp.feature_dim == 0 || hp.hidden_dim == 0 || hp.embed_dim == 0 || identities < 2 ||
      hp.chunks > kDimLimit || hp.heads > kDimLimit || hp.grid_h * hp.grid_w > kDimLimit ||
      hp.feature_dim > kDimLimit || hp.hidden_dim > kDimLimit || hp.embed_dim > kDimLimit ||
      identities > kDimLimit)
    throw Error(Errc::io_error, "checkpoint: implausible dimensions");
  return identities;
}

}  // namespace detail

inline std::string encode_checkpoint(const Hyperparams& hp, const ModelParams& params,
                                     const OimState& state) {
  std::string out;
  out.append("DVAT");
  detail::put_u32(out, kCheckpointVersion);
  detail::put_hyperparams(out, hp, state.identity_count());

  std::vector<ParamRef> refs = param_refs(const_cast<ModelParams&>(params));
  refs.push_back({"oim.table", const_cast<double*>(state.table.data.data()), state.table.size()});
  detail::put_u32(out, static_cast<std::uint32_t>(refs.size()));
  std::uint64_t checksum = 0;
  for (const ParamRef& ref : refs) {
    detail::put_u32(out, static_cast<std::uint32_t>(ref.name.size()));
    out.append(ref.name);
    detail::put_u64(out, ref.size);
    for (std::size_t i = 0; i < ref.size; ++i) {
      const std::uint64_t bits = detail::f64_bits(ref.data[i]);
      checksum += bits;
      detail::put_u64(out, bits);
    }
  }
  detail::put_u64(out, checksum);
  return out;
}

inline void save_checkpoint(const std::string& path, const Hyperparams& hp,
                            const ModelParams& params, const OimState& state) {
  detail::write_binary_file(path, encode_checkpoint(hp, params, state));
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name) {
  detail::ByteReader r(bytes, name);
  if (r.bytes(4) != "DVAT") throw Error(Errc::io_error, name + ": bad magic");
  if (r.u32() != kCheckpointVersion)
    throw Error(Errc::io_error, name + ": unsupported format version");
  Checkpoint cp;
  const std::uint64_t identities = detail::get_hyperparams(r, cp.hp);

  // Rebuild the expected array layout, then fill it in declared order.
  Rng dummy(0);
  cp.params = zeros_like(init_params(cp.hp, dummy));
  cp.state = make_oim_state(identities, cp.hp.embed_dim, cp.hp.tau, cp.hp.gamma);
  std::vector<ParamRef> refs = param_refs(cp.params);
  refs.push_back({"oim.table", cp.state.table.data.data(), cp.state.table.size()});

  const std::uint32_t count = r.u32();
  if (count != refs.size()) throw Error(Errc::io_error, name + ": unexpected array count");
  std::uint64_t checksum = 0;
  for (ParamRef& ref : refs) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw Error(Errc::io_error, name + ": implausible name length");
    const std::string arr_name = r.bytes(name_len);
    if (arr_name != ref.name)
      throw Error(Errc::io_error, name + ": unexpected array '" + arr_name + "'");
    const std::uint64_t n = r.u64();
    if (n != ref.size) throw Error(Errc::io_error, name + ": size mismatch for " + arr_name);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bits = r.u64();
      checksum += bits;
      ref.data[i] = detail::bits_f64(bits);
    }
  }
  const std::uint64_t stored = r.u64();
  r.expect_end();
  if (stored != checksum) throw Error(Errc::checksum_mismatch, name + ": checksum mismatch");
  return cp;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_binary_file(path), path);
}

// ---------------------------------------------------------------------------
// Labels file: CSV lines `file,identity,camera`.

struct LabelEntry {
  std::string file;
  std::size_t identity = 0;
  std::size_t camera = 0;
};

inline void save_labels(const std::string& path, const std::vector<LabelEntry>& entries) {
  std::string out = "file,identity,camera\n";
  for (const LabelEntry& e : entries)
    out += e.file + "," + std::to_string(e.identity) + "," + std::to_string(e.camera) + "\n";
  detail::write_binary_file(path, out);
}

inline std::vector<LabelEntry> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  std::vector<LabelEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == "file,identity,camera") continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error(Errc::io_error, path + ": malformed label line '" + line + "'");
    LabelEntry e;
    e.file = line.substr(0, c1);
    try {
      e.identity = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
      e.camera = std::stoull(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw Error(Errc::io_error, path + ": malformed label line '" + line + "'");
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw Error(Errc::io_error, path + ": no label entries");
  return entries;
}

// ---------------------------------------------------------------------------
// Heatmap exports: CSV with one row of L weights per (frame, head), and
// plain (P2) PGM images, one per (frame, head), values round(s * 255).

inline std::string heatmap_csv(const std::vector<Mat>& fields) {
  std::string out;
  for (const Mat& s : fields) {
    for (std::size_t k = 0; k < s.rows; ++k) {
      for (std::size_t l = 0; l < s.cols; ++l) {
        if (l) out += ",";
        out += detail::format_double(s(k, l));
      }
      out += "\n";
    }
  }
  return out;
}

inline std::string temporal_csv(const Mat& weights) {
  std::string out;
  for (std::size_t n = 0; n < weights.rows; ++n) {
    for (std::size_t k = 0; k < weights.cols; ++k) {
      if (k) out += ",";
      out += detail::format_double(weights(n, k));
    }
    out += "\n";
  }
  return out;
}

inline std::string pgm_image(const double* s, std::size_t grid_h, std::size_t grid_w) {
  std::string out = "P2\n" + std::to_string(grid_w) + " " + std::to_string(grid_h) + "\n255\n";
  for (std::size_t r = 0; r < grid_h; ++r) {
    for (std::size_t c = 0; c < grid_w; ++c) {
      if (c) out += " ";
      long v = std::lround(s[r * grid_w + c] * 255.0);
      if (v < 0) v = 0;
      if (v > 255) v = 255;
      out += std::to_string(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dsta
