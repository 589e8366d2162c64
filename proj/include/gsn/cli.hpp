#pragma once

// Command implementations behind the gsn tool: corpus preparation, training,
// evaluation, and batch generation. Everything here throws; the executable
// maps exceptions to exit codes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/checkpoint.hpp"
#include "gsn/config.hpp"
#include "gsn/corpus.hpp"
#include "gsn/errors.hpp"
#include "gsn/metrics.hpp"
#include "gsn/model.hpp"
#include "gsn/trainer.hpp"

namespace gsn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Exit-code policy: configuration and flag problems are usage errors; bad or
/// missing inputs (files, sessions, vocabularies, checkpoints) are data
/// errors; violated numeric invariants are numerical errors, as is anything
/// unforeseen.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const IOError*>(&e) || dynamic_cast<const MalformedSession*>(&e) ||
      dynamic_cast<const EmptyCorpusError*>(&e) || dynamic_cast<const VocabError*>(&e) ||
      dynamic_cast<const EmptyAttendee*>(&e) || dynamic_cast<const EmptyTarget*>(&e) ||
      dynamic_cast<const CheckpointVersionError*>(&e) ||
      dynamic_cast<const CheckpointCorruptError*>(&e))
    return kExitData;
  return kExitNumerical;
}

namespace detail {

inline void require_readable(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " not set");
  std::ifstream in(path);
  if (!in) throw IOError("cannot open " + what + ": " + path);
}

inline std::vector<Session> load_encoded_split(const std::string& path, const Vocabulary& vocab,
                                               int max_len) {
  std::vector<Session> sessions = read_session_file(path);
  if (sessions.empty()) throw EmptyCorpusError("no sessions in " + path);
  for (Session& s : sessions) encode_session(s, vocab, max_len);
  return sessions;
}

}  // namespace detail

struct PrepareCounts {
  int raw = 0, accepted = 0;
  int train = 0, dev = 0, test = 0;
  int vocab = 0;
};

/// Parse a raw `speaker<TAB>text` log, keep the sessions that pass the size
/// and structure filters, split them with the seeded shuffle, and write the
/// canonical splits plus vocabulary and manifest into out_dir.
inline PrepareCounts cmd_prepare(const std::string& raw_log_path, const std::string& out_dir,
                                 const Config& cfg, std::ostream& out) {
  detail::require_readable(raw_log_path, "raw log");
  std::ifstream in(raw_log_path);
  const std::vector<Session> raw = parse_raw_log(in);

  std::vector<Session> accepted;
  for (const Session& s : raw)
    if (filter_session(s)) accepted.push_back(s);
  if (accepted.empty()) throw EmptyCorpusError("no sessions pass the filters: " + raw_log_path);

  std::mt19937_64 rng(cfg.hp.seed);
  const std::vector<int> labels =
      three_way_split(static_cast<int>(accepted.size()), cfg.train_ratio, cfg.dev_ratio, rng);
  std::vector<Session> splits[3];
  for (std::size_t i = 0; i < accepted.size(); ++i)
    splits[labels[i]].push_back(accepted[i]);

  const Vocabulary vocab = build_vocab(splits[0], cfg.hp.vocab_cap);

  std::filesystem::create_directories(out_dir);
  write_session_file(out_dir + "/train.txt", splits[0]);
  write_session_file(out_dir + "/dev.txt", splits[1]);
  write_session_file(out_dir + "/test.txt", splits[2]);
  write_vocab_file(out_dir + "/vocab.txt", vocab);

  PrepareCounts counts;
  counts.raw = static_cast<int>(raw.size());
  counts.accepted = static_cast<int>(accepted.size());
  counts.train = static_cast<int>(splits[0].size());
  counts.dev = static_cast<int>(splits[1].size());
  counts.test = static_cast<int>(splits[2].size());
  counts.vocab = vocab.size();

  const auto summary = [&](std::ostream& o) {
    o << "raw\t" << counts.raw << '\n'
      << "accepted\t" << counts.accepted << '\n'
      << "train\t" << counts.train << '\n'
      << "dev\t" << counts.dev << '\n'
      << "test\t" << counts.test << '\n'
      << "vocab\t" << counts.vocab << '\n';
  };

  std::ofstream manifest(out_dir + "/manifest.txt");
  if (!manifest) throw IOError("cannot write manifest: " + out_dir + "/manifest.txt");
  manifest << "seed\t" << cfg.hp.seed << '\n'
           << "train_ratio\t" << cfg.train_ratio << '\n'
           << "dev_ratio\t" << cfg.dev_ratio << '\n';
  summary(manifest);
  static const char* kSplitName[3] = {"train", "dev", "test"};
  for (std::size_t i = 0; i < accepted.size(); ++i)
    manifest << "session\t" << (i + 1) << '\t' << kSplitName[labels[i]] << '\n';

  summary(out);
  return counts;
}

template <typename T>
void cmd_train_t(const Config& cfg, std::ostream& out) {
  detail::require_readable(cfg.train_file, "train_file");
  detail::require_readable(cfg.dev_file, "dev_file");
  detail::require_readable(cfg.vocab_file, "vocab_file");
  if (!cfg.checkpoint.empty()) detail::require_readable(cfg.checkpoint, "checkpoint");

  const Vocabulary vocab = read_vocab_file(cfg.vocab_file);
  const auto train = detail::load_encoded_split(cfg.train_file, vocab, cfg.hp.max_len);
  const auto dev = detail::load_encoded_split(cfg.dev_file, vocab, cfg.hp.max_len);

  GsnModel<T> model(cfg.hp, vocab.size());
  TrainOptions opts;
  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
    opts.checkpoint_dir = cfg.checkpoint_dir;
  }
  opts.log = &out;
  Trainer<T> trainer(model, opts);
  if (!cfg.checkpoint.empty()) trainer.load_state(cfg.checkpoint);
  trainer.run(train, dev);
}

inline void cmd_train(const Config& cfg, std::ostream& out) {
  if (cfg.hp.precision == 32)
    cmd_train_t<float>(cfg, out);
  else
    cmd_train_t<double>(cfg, out);
}

namespace detail {

/// Load a checkpoint's parameters into a model built from the config.
template <typename T>
GsnModel<T> restore_model(const Config& cfg, const Vocabulary& vocab) {
  if (cfg.checkpoint.empty()) throw ConfigError("checkpoint not set");
  GsnModel<T> model(cfg.hp, vocab.size());
  load_registry_file(cfg.checkpoint, model.params());
  return model;
}

}  // namespace detail

/// Greedy-decode the test split and score it against the target responses.
template <typename T>
std::string cmd_eval_t(const Config& cfg) {
  detail::require_readable(cfg.test_file, "test_file");
  detail::require_readable(cfg.vocab_file, "vocab_file");
  const Vocabulary vocab = read_vocab_file(cfg.vocab_file);
  const auto test = detail::load_encoded_split(cfg.test_file, vocab, cfg.hp.max_len);
  GsnModel<T> model = detail::restore_model<T>(cfg, vocab);

  std::vector<EvalPair> pairs;
  pairs.reserve(test.size());
  for (const Session& s : test) {
    EvalPair p;
    p.hypothesis = detokenize(model.respond(s, build_graph(s), 1), vocab);
    p.reference = s.at(s.target).words;  // already clipped to max_len
    pairs.push_back(std::move(p));
  }

  if (cfg.word_vectors.empty()) return metrics_report(pairs, nullptr);
  const WordVectorTable table = read_word_vector_file(cfg.word_vectors);
  return metrics_report(pairs, &table);
}

inline std::string cmd_eval(const Config& cfg) {
  return cfg.hp.precision == 32 ? cmd_eval_t<float>(cfg) : cmd_eval_t<double>(cfg);
}

/// Decode one response per session in the file, beam width per config.
template <typename T>
std::vector<std::string> cmd_generate_t(const Config& cfg, const std::string& session_file) {
  detail::require_readable(session_file, "session file");
  detail::require_readable(cfg.vocab_file, "vocab_file");
  const Vocabulary vocab = read_vocab_file(cfg.vocab_file);
  const auto sessions = detail::load_encoded_split(session_file, vocab, cfg.hp.max_len);
  GsnModel<T> model = detail::restore_model<T>(cfg, vocab);

  std::vector<std::string> lines;
  lines.reserve(sessions.size());
  for (const Session& s : sessions) {
    const auto ids = model.respond(s, build_graph(s), cfg.hp.beam_width);
    const auto toks = detokenize(ids, vocab);
    std::string line;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) line += ' ';
      line += toks[i];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<std::string> cmd_generate(const Config& cfg, const std::string& session_file) {
  return cfg.hp.precision == 32 ? cmd_generate_t<float>(cfg, session_file)
                                : cmd_generate_t<double>(cfg, session_file);
}

}  // namespace gsn
