#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/model.hpp"
#include "dsta/synthetic.hpp"

namespace dsta {

// Training run settings: model hyperparameters plus the data source.
// When data_dir is empty the synthetic generator is used with the
// dimensions and seed shared from the hyperparameters.
struct RunConfig {
  Hyperparams hp;
  std::string data_dir;
  std::size_t identities = 8;
  std::size_t videos_per_identity = 4;
  std::size_t frames_per_video = 24;
  std::size_t parts = 6;
  double p_occ = 0.1;
  double noise = 0.05;
  double jitter = 0.05;
  double pos_jitter = 0.0;
  std::size_t distractors = 16;
  bool orthogonal_signatures = true;
  std::size_t holdout_per_camera = 1;

  SynthSpec synth_spec() const {
    SynthSpec s;
    s.identities = identities;
    s.videos_per_identity = videos_per_identity;
    s.frames_per_video = frames_per_video;
    s.parts = parts;
    s.grid_h = hp.grid_h;
    s.grid_w = hp.grid_w;
    s.feature_dim = hp.feature_dim;
    s.p_occ = p_occ;
    s.noise = noise;
    s.jitter = jitter;
    s.pos_jitter = pos_jitter;
    s.distractors = distractors;
    s.orthogonal_signatures = orthogonal_signatures;
    s.seed = Rng(hp.seed).derive(1).next_u64();
    return s;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// `key = value` lines; blank lines and full-line # comments ignored.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::config_error, "expected key = value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw Error(Errc::config_error, "missing key in '" + t + "'");
    out.emplace_back(key, value);
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    if (!value.empty() && value[0] == '-')
      throw Error(Errc::config_error, key + " must be nonnegative");
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(Errc::config_error, key + " expects an integer, got '" + value + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::config_error, key + " expects a number, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw Error(Errc::config_error, key + " expects true/false, got '" + value + "'");
}

inline void constraint(bool ok, const std::string& key, const char* what) {
  if (!ok) throw Error(Errc::config_error, key + ": " + what);
}

}  // namespace detail

inline PenaltyKind parse_penalty(const std::string& v) {
  if (v == "Q") return PenaltyKind::q;
  if (v == "Qprime") return PenaltyKind::qprime;
  if (v == "none") return PenaltyKind::none;
  throw Error(Errc::config_error, "penalty expects Q|Qprime|none, got '" + v + "'");
}

inline const char* penalty_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::q: return "Q";
    case PenaltyKind::qprime: return "Qprime";
    case PenaltyKind::none: return "none";
  }
  return "?";
}

inline const char* temporal_mode_name(TemporalMode m) {
  switch (m) {
    case TemporalMode::attention: return "attention";
    case TemporalMode::average: return "average";
    case TemporalMode::max: return "max";
  }
  return "?";
}

inline const char* temporal_norm_name(TemporalNorm n) {
  return n == TemporalNorm::softmax ? "softmax" : "linear";
}

inline const char* spatial_mode_name(SpatialMode m) {
  return m == SpatialMode::attention ? "attention" : "uniform";
}

inline const char* loss_name(LossKind k) { return k == LossKind::oim ? "oim" : "softmax"; }

inline RunConfig config_from_text(const std::string& text) {
  RunConfig c;
  Hyperparams& hp = c.hp;
  using detail::constraint;
  using detail::parse_bool;
  using detail::parse_count;
  using detail::parse_real;
  for (const auto& [key, value] : detail::parse_kv_text(text)) {
    if (key == "N") {
      hp.chunks = parse_count(key, value);
      constraint(hp.chunks >= 1, key, "must be >= 1");
    } else if (key == "K") {
      hp.heads = parse_count(key, value);
      constraint(hp.heads >= 1 && hp.heads <= 16, key, "must be in 1..16");
    } else if (key == "grid_h") {
      hp.grid_h = parse_count(key, value);
      constraint(hp.grid_h >= 1, key, "must be >= 1");
    } else if (key == "grid_w") {
      hp.grid_w = parse_count(key, value);
      constraint(hp.grid_w >= 1, key, "must be >= 1");
    } else if (key == "D") {
      hp.feature_dim = parse_count(key, value);
      constraint(hp.feature_dim >= 1, key, "must be >= 1");
    } else if (key == "d") {
      hp.hidden_dim = parse_count(key, value);
      constraint(hp.hidden_dim >= 1, key, "must be >= 1");
    } else if (key == "E") {
      hp.embed_dim = parse_count(key, value);
      constraint(hp.embed_dim >= 1, key, "must be >= 1");
    } else if (key == "lambda_div") {
      hp.lambda_div = parse_real(key, value);
      constraint(hp.lambda_div >= 0.0, key, "must be >= 0");
    } else if (key == "penalty") {
      hp.penalty = parse_penalty(value);
    } else if (key == "loss") {
      if (value == "oim") hp.loss = LossKind::oim;
      else if (value == "softmax") hp.loss = LossKind::softmax;
      else throw Error(Errc::config_error, "loss expects oim|softmax, got '" + value + "'");
    } else if (key == "tau") {
      hp.tau = parse_real(key, value);
      constraint(hp.tau > 0.0, key, "must be > 0");
    } else if (key == "gamma") {
      hp.gamma = parse_real(key, value);
      constraint(hp.gamma >= 0.0 && hp.gamma < 1.0, key, "must be in [0,1)");
    } else if (key == "spatial_mode") {
      if (value == "attention") hp.spatial_mode = SpatialMode::attention;
      else if (value == "uniform") hp.spatial_mode = SpatialMode::uniform;
      else
        throw Error(Errc::config_error,
                    "spatial_mode expects attention|uniform, got '" + value + "'");
    } else if (key == "temporal_mode") {
      if (value == "attention") hp.temporal_mode = TemporalMode::attention;
      else if (value == "average") hp.temporal_mode = TemporalMode::average;
      else if (value == "max") hp.temporal_mode = TemporalMode::max;
      else
        throw Error(Errc::config_error,
                    "temporal_mode expects attention|average|max, got '" + value + "'");
    } else if (key == "temporal_norm") {
      if (value == "softmax") hp.temporal_norm = TemporalNorm::softmax;
      else if (value == "linear") hp.temporal_norm = TemporalNorm::linear;
      else
        throw Error(Errc::config_error,
                    "temporal_norm expects softmax|linear, got '" + value + "'");
    } else if (key == "enhancement") {
      hp.enhancement = parse_bool(key, value);
    } else if (key == "sigma") {
      hp.sigma = parse_real(key, value);
      constraint(hp.sigma > 0.0, key, "must be > 0");
    } else if (key == "lr_initial") {
      hp.lr_initial = parse_real(key, value);
      constraint(hp.lr_initial > 0.0, key, "must be > 0");
    } else if (key == "lr_dropped") {
      hp.lr_dropped = parse_real(key, value);
      constraint(hp.lr_dropped > 0.0, key, "must be > 0");
    } else if (key == "lr_drop_epoch") {
      hp.lr_drop_epoch = parse_count(key, value);
    } else if (key == "momentum") {
      hp.sgd_momentum = parse_real(key, value);
      constraint(hp.sgd_momentum >= 0.0 && hp.sgd_momentum < 1.0, key, "must be in [0,1)");
    } else if (key == "epochs") {
      hp.epochs = parse_count(key, value);
    } else if (key == "batch_size") {
      hp.batch_size = parse_count(key, value);
      constraint(hp.batch_size >= 1, key, "must be >= 1");
    } else if (key == "warmup_epochs") {
      hp.warmup_epochs = parse_count(key, value);
    } else if (key == "seed") {
      hp.seed = parse_count(key, value);
    } else if (key == "data_dir") {
      c.data_dir = value;
    } else if (key == "identities") {
      c.identities = parse_count(key, value);
      constraint(c.identities >= 2, key, "must be >= 2");
    } else if (key == "videos_per_identity") {
      c.videos_per_identity = parse_count(key, value);
      constraint(c.videos_per_identity >= 1, key, "must be >= 1");
    } else if (key == "frames_per_video") {
      c.frames_per_video = parse_count(key, value);
      constraint(c.frames_per_video >= 1, key, "must be >= 1");
    } else if (key == "parts") {
      c.parts = parse_count(key, value);
      constraint(c.parts >= 1, key, "must be >= 1");
    } else if (key == "p_occ") {
      c.p_occ = parse_real(key, value);
      constraint(c.p_occ >= 0.0 && c.p_occ <= 1.0, key, "must be in [0,1]");
    } else if (key == "noise") {
      c.noise = parse_real(key, value);
      constraint(c.noise >= 0.0, key, "must be >= 0");
    } else if (key == "jitter") {
      c.jitter = parse_real(key, value);
      constraint(c.jitter >= 0.0, key, "must be >= 0");
    } else if (key == "pos_jitter") {
      c.pos_jitter = parse_real(key, value);
      constraint(c.pos_jitter >= 0.0 && c.pos_jitter <= 1.0, key, "must be in [0,1]");
    } else if (key == "distractors") {
      c.distractors = parse_count(key, value);
      constraint(c.distractors >= 1, key, "must be >= 1");
    } else if (key == "orthogonal_signatures") {
      c.orthogonal_signatures = parse_bool(key, value);
    } else if (key == "holdout_per_camera") {
      c.holdout_per_camera = parse_count(key, value);
      constraint(c.holdout_per_camera >= 1, key, "must be >= 1");
    } else {
      throw Error(Errc::config_error, "unknown key '" + key + "'");
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  return config_from_text(detail::read_text_file(path));
}

// Resolved configuration as `# key = value` lines, written at the top of
// every metrics log.
inline std::string echo_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  const Hyperparams& hp = c.hp;
  out << "# N = " << hp.chunks << "\n";
  out << "# K = " << hp.heads << "\n";
  out << "# grid_h = " << hp.grid_h << "\n";
  out << "# grid_w = " << hp.grid_w << "\n";
  out << "# D = " << hp.feature_dim << "\n";
  out << "# d = " << hp.hidden_dim << "\n";
  out << "# E = " << hp.embed_dim << "\n";
  out << "# lambda_div = " << hp.lambda_div << "\n";
  out << "# penalty = " << penalty_name(hp.penalty) << "\n";
  out << "# loss = " << loss_name(hp.loss) << "\n";
  out << "# tau = " << hp.tau << "\n";
  out << "# gamma = " << hp.gamma << "\n";
  out << "# spatial_mode = " << spatial_mode_name(hp.spatial_mode) << "\n";
  out << "# temporal_mode = " << temporal_mode_name(hp.temporal_mode) << "\n";
  out << "# temporal_norm = " << temporal_norm_name(hp.temporal_norm) << "\n";
  out << "# enhancement = " << (hp.enhancement ? "true" : "false") << "\n";
  out << "# sigma = " << hp.sigma << "\n";
  out << "# embedding_normalized = true\n";
  out << "# lr_initial = " << hp.lr_initial << "\n";
  out << "# lr_dropped = " << hp.lr_dropped << "\n";
  out << "# lr_drop_epoch = " << hp.effective_drop_epoch() << "\n";
  out << "# momentum = " << hp.sgd_momentum << "\n";
  out << "# epochs = " << hp.epochs << "\n";
  out << "# batch_size = " << hp.batch_size << "\n";
  out << "# warmup_epochs = " << hp.warmup_epochs << "\n";
  out << "# seed = " << hp.seed << "\n";
  out << "# data_dir = " << c.data_dir << "\n";
  out << "# identities = " << c.identities << "\n";
  out << "# videos_per_identity = " << c.videos_per_identity << "\n";
  out << "# frames_per_video = " << c.frames_per_video << "\n";
  out << "# parts = " << c.parts << "\n";
  out << "# p_occ = " << c.p_occ << "\n";
  out << "# noise = " << c.noise << "\n";
  out << "# jitter = " << c.jitter << "\n";
  out << "# pos_jitter = " << c.pos_jitter << "\n";
  out << "# distractors = " << c.distractors << "\n";
  out << "# orthogonal_signatures = " << (c.orthogonal_signatures ? "true" : "false") << "\n";
  out << "# holdout_per_camera = " << c.holdout_per_camera << "\n";
  return out.str();
}

// Spec file for the standalone dataset generator.
inline SynthSpec synth_spec_from_text(const std::string& text) {
  SynthSpec s;
  using detail::constraint;
  using detail::parse_bool;
  using detail::parse_count;
  using detail::parse_real;
  for (const auto& [key, value] : detail::parse_kv_text(text)) {
    if (key == "identities") s.identities = parse_count(key, value);
    else if (key == "videos_per_identity") s.videos_per_identity = parse_count(key, value);
    else if (key == "frames_per_video") s.frames_per_video = parse_count(key, value);
    else if (key == "parts") s.parts = parse_count(key, value);
    else if (key == "grid_h") s.grid_h = parse_count(key, value);
    else if (key == "grid_w") s.grid_w = parse_count(key, value);
    else if (key == "D") s.feature_dim = parse_count(key, value);
    else if (key == "p_occ") s.p_occ = parse_real(key, value);
    else if (key == "noise") s.noise = parse_real(key, value);
    else if (key == "jitter") s.jitter = parse_real(key, value);
    else if (key == "pos_jitter") s.pos_jitter = parse_real(key, value);
    else if (key == "distractors") s.distractors = parse_count(key, value);
    else if (key == "orthogonal_signatures") s.orthogonal_signatures = parse_bool(key, value);
    else if (key == "seed") s.seed = parse_count(key, value);
    else throw Error(Errc::config_error, "unknown key '" + key + "'");
  }
  try {
    validate(s);
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
  return s;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  return synth_spec_from_text(detail::read_text_file(path));
}

}  // namespace dsta
