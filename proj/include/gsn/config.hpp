#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/errors.hpp"

namespace gsn {

/// Model and training settings. Defaults are the full-scale ones; the bundled
/// desk-scale configs override most of them downward.
struct Hyperparams {
  double alpha = 0.25;     // squash floor
  int iterations = 3;      // graph sweeps per direction
  int hidden_dim = 300;    // d_h; utterance states are 2*d_h wide
  int embed_dim = 300;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int vocab_cap = 30000;
  int max_len = 30;
  int max_decode_len = 30;
  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 25;
  unsigned long seed = 1;
  bool speaker_flow = true;
  double clip_norm = 5.0;
  int beam_width = 5;
  int precision = 64;  // 32 or 64
};

/// Full tool configuration: hyperparameters plus file locations and split
/// ratios. Parsed from `key = value` lines; unknown keys are rejected.
struct Config {
  Hyperparams hp;
  std::string train_file, dev_file, test_file;
  std::string vocab_file;
  std::string word_vectors;
  std::string checkpoint_dir = "checkpoints";
  std::string checkpoint;
  double train_ratio = 0.90;
  double dev_ratio = 0.05;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("bad numeric value for " + key + ": " + value);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("bad boolean value for " + key + ": " + value);
}

}  // namespace detail

/// Apply one key=value setting. Throws ConfigError on unknown keys or
/// unparseable values.
inline void config_set(Config& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "alpha")
    cfg.hp.alpha = parse_number<double>(key, value);
  else if (key == "iterations")
    cfg.hp.iterations = parse_number<int>(key, value);
  else if (key == "hidden_dim")
    cfg.hp.hidden_dim = parse_number<int>(key, value);
  else if (key == "embed_dim")
    cfg.hp.embed_dim = parse_number<int>(key, value);
  else if (key == "encoder_layers")
    cfg.hp.encoder_layers = parse_number<int>(key, value);
  else if (key == "decoder_layers")
    cfg.hp.decoder_layers = parse_number<int>(key, value);
  else if (key == "vocab_cap")
    cfg.hp.vocab_cap = parse_number<int>(key, value);
  else if (key == "max_len")
    cfg.hp.max_len = parse_number<int>(key, value);
  else if (key == "max_decode_len")
    cfg.hp.max_decode_len = parse_number<int>(key, value);
  else if (key == "lr")
    cfg.hp.lr = parse_number<double>(key, value);
  else if (key == "batch_size")
    cfg.hp.batch_size = parse_number<int>(key, value);
  else if (key == "epochs")
    cfg.hp.epochs = parse_number<int>(key, value);
  else if (key == "seed")
    cfg.hp.seed = parse_number<unsigned long>(key, value);
  else if (key == "speaker_flow")
    cfg.hp.speaker_flow = parse_bool(key, value);
  else if (key == "clip_norm")
    cfg.hp.clip_norm = parse_number<double>(key, value);
  else if (key == "beam_width")
    cfg.hp.beam_width = parse_number<int>(key, value);
  else if (key == "precision")
    cfg.hp.precision = parse_number<int>(key, value);
  else if (key == "train_file")
    cfg.train_file = value;
  else if (key == "dev_file")
    cfg.dev_file = value;
  else if (key == "test_file")
    cfg.test_file = value;
  else if (key == "vocab_file")
    cfg.vocab_file = value;
  else if (key == "word_vectors")
    cfg.word_vectors = value;
  else if (key == "checkpoint_dir")
    cfg.checkpoint_dir = value;
  else if (key == "checkpoint")
    cfg.checkpoint = value;
  else if (key == "train_ratio")
    cfg.train_ratio = parse_number<double>(key, value);
  else if (key == "dev_ratio")
    cfg.dev_ratio = parse_number<double>(key, value);
  else
    throw ConfigError("unknown configuration key: " + key);
}

inline void config_validate(const Config& cfg) {
  const Hyperparams& h = cfg.hp;
  if (h.alpha <= 0.0 || h.alpha >= 1.0) throw ConfigError("alpha must lie in (0,1)");
  if (h.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (h.hidden_dim < 1 || h.embed_dim < 1) throw ConfigError("model dimensions must be positive");
  if (h.encoder_layers < 1 || h.decoder_layers < 1) throw ConfigError("layer counts must be positive");
  if (h.vocab_cap < 5) throw ConfigError("vocab_cap must be at least 5");
  if (h.max_len < 1 || h.max_decode_len < 1) throw ConfigError("length limits must be positive");
  if (h.lr < 0.0) throw ConfigError("lr must be nonnegative");
  if (h.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (h.epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (h.clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
  if (h.beam_width < 1) throw ConfigError("beam_width must be at least 1");
  if (h.precision != 32 && h.precision != 64) throw ConfigError("precision must be 32 or 64");
  if (cfg.train_ratio < 0 || cfg.dev_ratio < 0 || cfg.train_ratio + cfg.dev_ratio > 1.0)
    throw ConfigError("split ratios must be nonnegative and sum to at most 1");
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
inline Config parse_config(std::istream& in) {
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    config_set(cfg, key, value);
  }
  config_validate(cfg);
  return cfg;
}

inline Config read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config file: " + path);
  return parse_config(in);
}

inline std::string serialize_config(const Config& cfg) {
  std::ostringstream out;
  out.precision(17);
  const Hyperparams& h = cfg.hp;
  out << "alpha = " << h.alpha << '\n'
      << "iterations = " << h.iterations << '\n'
      << "hidden_dim = " << h.hidden_dim << '\n'
      << "embed_dim = " << h.embed_dim << '\n'
      << "encoder_layers = " << h.encoder_layers << '\n'
      << "decoder_layers = " << h.decoder_layers << '\n'
      << "vocab_cap = " << h.vocab_cap << '\n'
      << "max_len = " << h.max_len << '\n'
      << "max_decode_len = " << h.max_decode_len << '\n'
      << "lr = " << h.lr << '\n'
      << "batch_size = " << h.batch_size << '\n'
      << "epochs = " << h.epochs << '\n'
      << "seed = " << h.seed << '\n'
      << "speaker_flow = " << (h.speaker_flow ? "true" : "false") << '\n'
      << "clip_norm = " << h.clip_norm << '\n'
      << "beam_width = " << h.beam_width << '\n'
      << "precision = " << h.precision << '\n'
      << "train_file = " << cfg.train_file << '\n'
      << "dev_file = " << cfg.dev_file << '\n'
      << "test_file = " << cfg.test_file << '\n'
      << "vocab_file = " << cfg.vocab_file << '\n'
      << "word_vectors = " << cfg.word_vectors << '\n'
      << "checkpoint_dir = " << cfg.checkpoint_dir << '\n'
      << "checkpoint = " << cfg.checkpoint << '\n'
      << "train_ratio = " << cfg.train_ratio << '\n'
      << "dev_ratio = " << cfg.dev_ratio << '\n';
  return out.str();
}

}  // namespace gsn
