#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tape.hpp"

namespace gsn {

/// GRU cell bound onto a tape. w_z/w_r map [x ; h] (width d_in + d_s) to d_s;
/// w_n maps [x ; r*h].
struct GruCellVars {
  Var w_z, b_z;
  Var w_r, b_r;
  Var w_n, b_n;
};

/// Decoder parameters: stacked GRU cells, the bilinear attention matrix, and
/// the two-stage readout producing vocabulary logits.
struct DecoderVars {
  std::vector<GruCellVars> layers;
  Var w_a;                 // [d_s, d_s]
  Var w_f, b_f, w_o, b_o;  // readout
};

template <typename T>
Var gru_step(Tape<T>& tape, const GruCellVars& cell, Var x, Var h) {
  Var pair = tape.concat({x, h});
  Var z = tape.sigmoid(tape.add(tape.matvec(cell.w_z, pair), cell.b_z));
  Var r = tape.sigmoid(tape.add(tape.matvec(cell.w_r, pair), cell.b_r));
  Var cand = tape.tanh(tape.add(tape.matvec(cell.w_n, tape.concat({x, tape.mul(r, h)})), cell.b_n));
  return tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, cand));
}

struct AttentionResult {
  Var weights;  // length n, positive, sums to 1
  Var context;  // width d_s
};

/// Bilinear attention of the decoder state over one utterance's word states.
template <typename T>
AttentionResult attention(Tape<T>& tape, Var h, const std::vector<Var>& word_states, Var w_a) {
  if (word_states.empty()) throw EmptyAttendee("attention over an empty utterance");
  std::vector<Var> scores;
  scores.reserve(word_states.size());
  for (Var s : word_states) scores.push_back(tape.dot(h, tape.matvec(w_a, s)));
  AttentionResult out;
  out.weights = tape.softmax(tape.stack(scores));
  out.context = tape.weighted_sum(word_states, out.weights);
  return out;
}

/// One decoder step: advance the GRU stack on the previous token's embedding,
/// attend over the parent utterance, and produce vocabulary logits.
/// hidden holds one state per layer and is updated in place.
template <typename T>
Var decode_step(Tape<T>& tape, const DecoderVars& dec, Var embed, int prev_token,
                std::vector<Var>& hidden, const std::vector<Var>& word_states) {
  const int vocab = tape.val(embed).dim(0);
  if (prev_token < 0 || prev_token >= vocab)
    throw VocabError("decoder fed token id " + std::to_string(prev_token));
  if (hidden.size() != dec.layers.size()) throw ShapeError("decoder: one hidden state per layer");

  Var x = tape.row(embed, prev_token);
  Var below = x;
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    hidden[l] = gru_step(tape, dec.layers[l], below, hidden[l]);
    below = hidden[l];
  }
  Var top = hidden.back();
  const AttentionResult att = attention(tape, top, word_states, dec.w_a);
  Var feat = tape.tanh(tape.add(tape.matvec(dec.w_f, tape.concat({top, att.context, x})), dec.b_f));
  return tape.add(tape.matvec(dec.w_o, feat), dec.b_o);
}

/// Mean negative log-likelihood of the target under teacher forcing. The
/// target carries neither <sos> nor <eos>; both are added here. sos/eos are
/// the reserved ids from the vocabulary.
template <typename T>
Var sequence_loss(Tape<T>& tape, const DecoderVars& dec, Var embed, Var h0,
                  const std::vector<Var>& word_states, const std::vector<int>& target, int sos,
                  int eos) {
  if (target.empty()) throw EmptyTarget("cannot score an empty response");
  std::vector<Var> hidden(dec.layers.size(), h0);
  std::vector<Var> nlls;
  int prev = sos;
  for (std::size_t k = 0; k <= target.size(); ++k) {
    const int gold = k < target.size() ? target[k] : eos;
    Var logits = decode_step(tape, dec, embed, prev, hidden, word_states);
    nlls.push_back(tape.neg(tape.pick(tape.log_softmax(logits), gold)));
    prev = gold;
  }
  Var total = tape.sum(tape.stack(nlls));
  return tape.scale(total, T(1) / T(nlls.size()));
}

struct DecodeRule {
  int max_len = 30;
  int beam_width = 1;  // 1 reproduces greedy decoding
  int sos = 1, eos = 2;
  std::vector<int> banned{0, 1, 3};  // ids never emitted: <pad>, <sos>, <unk>
};

namespace detail {

inline bool is_banned(const DecodeRule& rule, int id) {
  return std::find(rule.banned.begin(), rule.banned.end(), id) != rule.banned.end();
}

}  // namespace detail

/// Greedy decoding: argmax at each step, ties resolved to the lowest id.
template <typename T>
std::vector<int> generate_greedy(Tape<T>& tape, const DecoderVars& dec, Var embed, Var h0,
                                 const std::vector<Var>& word_states, const DecodeRule& rule) {
  std::vector<Var> hidden(dec.layers.size(), h0);
  std::vector<int> out;
  int prev = rule.sos;
  for (int k = 0; k < rule.max_len; ++k) {
    const Tensor<T>& logits = tape.val(decode_step(tape, dec, embed, prev, hidden, word_states));
    int best = -1;
    for (int id = 0; id < logits.dim(0); ++id) {
      if (detail::is_banned(rule, id)) continue;
      if (best < 0 || logits[id] > logits[best]) best = id;
    }
    if (best == rule.eos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

/// Beam search over length-normalized log-probability. Candidates expand in
/// ascending id order and sorting is stable, so equal scores favor lower ids
/// and width 1 reproduces greedy decoding exactly.
template <typename T>
std::vector<int> generate_beam(Tape<T>& tape, const DecoderVars& dec, Var embed, Var h0,
                               const std::vector<Var>& word_states, const DecodeRule& rule) {
  struct Entry {
    std::vector<int> tokens;
    std::vector<Var> hidden;
    double logp = 0.0;
    int prev;
    bool done = false;

    double normalized() const {
      const std::size_t len = tokens.size() + (done ? 1 : 0);  // count the <eos> step
      return len == 0 ? 0.0 : logp / static_cast<double>(len);
    }
  };

  if (rule.beam_width < 1) throw ConfigError("beam width must be at least 1");
  std::vector<Entry> beam{Entry{{}, std::vector<Var>(dec.layers.size(), h0), 0.0, rule.sos, false}};

  for (int k = 0; k < rule.max_len; ++k) {
    bool all_done = true;
    std::vector<Entry> pool;
    for (Entry& entry : beam) {
      if (entry.done) {
        pool.push_back(entry);
        continue;
      }
      all_done = false;
      std::vector<Var> hidden = entry.hidden;
      const Tensor<T>& lp =
          tape.val(tape.log_softmax(decode_step(tape, dec, embed, entry.prev, hidden, word_states)));
      for (int id = 0; id < lp.dim(0); ++id) {
        if (detail::is_banned(rule, id)) continue;
        Entry next = entry;
        next.hidden = hidden;
        next.logp += static_cast<double>(lp[id]);
        if (id == rule.eos) {
          next.done = true;
        } else {
          next.tokens.push_back(id);
          next.prev = id;
        }
        pool.push_back(std::move(next));
      }
    }
    if (all_done) break;
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Entry& a, const Entry& b) { return a.normalized() > b.normalized(); });
    if (static_cast<int>(pool.size()) > rule.beam_width) pool.resize(static_cast<std::size_t>(rule.beam_width));
    beam = std::move(pool);
  }

  const Entry* best = &beam.front();
  for (const Entry& e : beam)
    if (e.normalized() > best->normalized()) best = &e;
  return best->tokens;
}

template <typename T>
std::vector<int> generate(Tape<T>& tape, const DecoderVars& dec, Var embed, Var h0,
                          const std::vector<Var>& word_states, const DecodeRule& rule) {
  return rule.beam_width <= 1 ? generate_greedy(tape, dec, embed, h0, word_states, rule)
                              : generate_beam(tape, dec, embed, h0, word_states, rule);
}

// ---------------------------------------------------------------------------
// Parameter registration and binding

template <typename T>
void register_gru(ParamRegistry<T>& reg, const std::string& prefix, int d_in, int d_s,
                  std::mt19937_64& rng) {
  reg.add(prefix + ".w_z", xavier_uniform<T>(d_s, d_in + d_s, rng));
  reg.add(prefix + ".b_z", Tensor<T>(Shape{d_s}));
  reg.add(prefix + ".w_r", xavier_uniform<T>(d_s, d_in + d_s, rng));
  reg.add(prefix + ".b_r", Tensor<T>(Shape{d_s}));
  reg.add(prefix + ".w_n", xavier_uniform<T>(d_s, d_in + d_s, rng));
  reg.add(prefix + ".b_n", Tensor<T>(Shape{d_s}));
}

/// Registration order: GRU layers, attention, readout.
template <typename T>
void register_decoder(ParamRegistry<T>& reg, const std::string& prefix, int d_e, int d_s,
                      int layers, int vocab, std::mt19937_64& rng) {
  int in = d_e;
  for (int l = 0; l < layers; ++l) {
    register_gru(reg, prefix + ".l" + std::to_string(l), in, d_s, rng);
    in = d_s;
  }
  reg.add(prefix + ".attn.w_a", xavier_uniform<T>(d_s, d_s, rng));
  reg.add(prefix + ".read.w_f", xavier_uniform<T>(d_s, 2 * d_s + d_e, rng));
  reg.add(prefix + ".read.b_f", Tensor<T>(Shape{d_s}));
  reg.add(prefix + ".read.w_o", xavier_uniform<T>(vocab, d_s, rng));
  reg.add(prefix + ".read.b_o", Tensor<T>(Shape{vocab}));
}

template <typename T>
GruCellVars bind_gru(Tape<T>& tape, ParamRegistry<T>& reg, const std::string& prefix) {
  auto bind = [&](const std::string& name) {
    Param<T>& p = reg.at(name);
    return tape.leaf(&p.value, &p.grad);
  };
  return GruCellVars{bind(prefix + ".w_z"), bind(prefix + ".b_z"), bind(prefix + ".w_r"),
                     bind(prefix + ".b_r"), bind(prefix + ".w_n"), bind(prefix + ".b_n")};
}

template <typename T>
DecoderVars bind_decoder(Tape<T>& tape, ParamRegistry<T>& reg, const std::string& prefix,
                         int layers) {
  auto bind = [&](const std::string& name) {
    Param<T>& p = reg.at(name);
    return tape.leaf(&p.value, &p.grad);
  };
  DecoderVars dec;
  for (int l = 0; l < layers; ++l)
    dec.layers.push_back(bind_gru(tape, reg, prefix + ".l" + std::to_string(l)));
  dec.w_a = bind(prefix + ".attn.w_a");
  dec.w_f = bind(prefix + ".read.w_f");
  dec.b_f = bind(prefix + ".read.b_f");
  dec.w_o = bind(prefix + ".read.w_o");
  dec.b_o = bind(prefix + ".read.b_o");
  return dec;
}

}  // namespace gsn
