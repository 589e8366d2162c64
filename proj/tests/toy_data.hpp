#pragma once

// Small hand-built sessions and hyperparameter presets shared by the
// model-level tests. Token ids are written directly instead of going through
// a vocabulary so the fixtures stay independent of tokenization.

#include <string>
#include <tuple>
#include <vector>

#include "gsn/config.hpp"
#include "gsn/corpus.hpp"

namespace toy {

struct Line {
  std::string speaker;
  std::vector<int> tokens;
  int parent = 0;  // 0: no parent
};

inline gsn::Session make_session(const std::vector<Line>& lines) {
  gsn::Session s;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    gsn::Utterance u;
    u.index = static_cast<int>(i) + 1;
    u.speaker = lines[i].speaker;
    u.tokens = lines[i].tokens;
    if (lines[i].parent > 0) u.parent = lines[i].parent;
    s.utterances.push_back(std::move(u));
  }
  s.target = s.size();
  s.target_parent = lines.back().parent;
  return s;
}

/// Three context utterances plus a target; two speakers with one repeat, so
/// the same-speaker matrix is populated.
inline gsn::Session branched_session() {
  return make_session({{"ann", {4, 5}, 0},
                       {"bob", {6, 7, 8}, 1},
                       {"ann", {5, 9}, 2},
                       {"bob", {9, 4}, 3}});
}

/// Every speaker distinct: the same-speaker matrix is all zero.
inline gsn::Session distinct_speaker_session() {
  return make_session({{"ann", {4, 6}, 0},
                       {"bob", {7, 5}, 1},
                       {"cyd", {8, 9}, 2},
                       {"dee", {4, 9}, 3}});
}

/// Two-party back-and-forth where each turn answers the one before.
inline gsn::Session sequential_session() {
  return make_session({{"ann", {4, 5, 6}, 0},
                       {"bob", {7, 8}, 1},
                       {"ann", {9, 6}, 2},
                       {"bob", {5, 4}, 3}});
}

inline gsn::Hyperparams small_hyper(unsigned long seed = 1) {
  gsn::Hyperparams hp;
  hp.alpha = 0.25;
  hp.iterations = 1;
  hp.hidden_dim = 4;
  hp.embed_dim = 4;
  hp.encoder_layers = 1;
  hp.decoder_layers = 1;
  hp.max_len = 10;
  hp.max_decode_len = 8;
  hp.lr = 1e-2;
  hp.batch_size = 4;
  hp.epochs = 3;
  hp.seed = seed;
  hp.clip_norm = 5.0;
  hp.beam_width = 1;
  return hp;
}

inline constexpr int kToyVocab = 12;

}  // namespace toy
