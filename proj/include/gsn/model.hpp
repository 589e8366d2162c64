#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsn/config.hpp"
#include "gsn/corpus.hpp"
#include "gsn/decoder.hpp"
#include "gsn/encoder.hpp"
#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tape.hpp"
#include "gsn/uge.hpp"

namespace gsn {

/// The complete response-generation model: shared word embeddings, word-level
/// bidirectional encoder, graph-structured utterance encoder, and the
/// attention GRU decoder. Parameter registration order is fixed by the
/// constructor and defines the checkpoint layout.
template <typename T>
class GsnModel {
 public:
  GsnModel(const Hyperparams& hp, int vocab_size) : hp_(hp), vocab_(vocab_size) {
    if (vocab_size < Vocabulary::kReserved + 1) throw ConfigError("vocabulary too small for a model");
    std::mt19937_64 rng(hp.seed);
    const int d_s = state_dim();
    reg_.add("embed", xavier_uniform<T>(vocab_size, hp.embed_dim, rng));
    register_bilstm<T>(reg_, "enc", hp.embed_dim, hp.hidden_dim, hp.encoder_layers, rng);
    register_gate<T>(reg_, "uge.reply", d_s, rng);
    // The speaker operator is registered even when speaker_flow is off so the
    // parameter layout and draw order do not depend on the flag.
    register_gate<T>(reg_, "uge.speaker", d_s, rng);
    register_decoder<T>(reg_, "dec", hp.embed_dim, d_s, hp.decoder_layers, vocab_size, rng);
  }

  ParamRegistry<T>& params() { return reg_; }
  const Hyperparams& hyper() const { return hp_; }
  int vocab_size() const { return vocab_; }
  int state_dim() const { return 2 * hp_.hidden_dim; }

  /// Everything the forward pass needs, bound onto one tape.
  struct Bound {
    Var embed;
    std::vector<BiLstmLayerVars> enc;
    GateVars reply_gate, speaker_gate;
    DecoderVars dec;
  };

  Bound bind(Tape<T>& tape) {
    Bound b;
    Param<T>& e = reg_.at("embed");
    b.embed = tape.leaf(&e.value, &e.grad);
    b.enc = bind_bilstm(tape, reg_, "enc", hp_.encoder_layers);
    b.reply_gate = bind_gate(tape, reg_, "uge.reply");
    b.speaker_gate = bind_gate(tape, reg_, "uge.speaker");
    b.dec = bind_decoder(tape, reg_, "dec", hp_.decoder_layers);
    return b;
  }

  /// Word-encode the context utterances (everything before the target), run
  /// the graph sweeps over them, and hand back what the decoder needs.
  struct Context {
    std::vector<Var> final_states;   // graph-encoded, one per context utterance
    std::vector<Var> parent_words;   // word states of the target's parent
    Var h0;                          // decoder start: the parent's final state
  };

  Context encode_context(Tape<T>& tape, const Bound& b, const Session& s,
                         const DialogueGraph& g) {
    const int m = s.size();
    if (m < 2) throw MalformedSession("session needs at least one context utterance");
    if (g.m != m) throw ShapeError("graph size does not match session");
    const int parent = s.target_parent;
    if (parent < 1 || parent >= m) throw MalformedSession("target has no resolvable parent");

    const int ctx = m - 1;
    StateMatrix initial;
    std::vector<Var> parent_words;
    for (int i = 1; i <= ctx; ++i) {
      const Utterance& u = s.at(i);
      if (u.tokens.empty()) throw MalformedSession("utterance lacks token ids; encode it first");
      EncodedUtterance enc = encode_utterance(tape, b.embed, b.enc, u.tokens, hp_.hidden_dim);
      if (i == parent) parent_words = enc.word_states;
      initial.diag.push_back(enc.summary);
    }

    FlowConfig fc;
    fc.alpha = hp_.alpha;
    fc.iterations = hp_.iterations;
    fc.speaker_flow = hp_.speaker_flow;
    const StateMatrix final_states = encode_graph(tape, std::move(initial), g.reply.leading(ctx),
                                                  g.speaker.leading(ctx), b.reply_gate,
                                                  b.speaker_gate, fc);

    Context out;
    out.final_states = read_diagonal(final_states);
    out.parent_words = std::move(parent_words);
    out.h0 = out.final_states[static_cast<std::size_t>(parent - 1)];
    return out;
  }

  /// Teacher-forced mean negative log-likelihood of the session's target.
  Var session_loss(Tape<T>& tape, const Session& s, const DialogueGraph& g) {
    Bound b = bind(tape);
    const Context ctx = encode_context(tape, b, s, g);
    const Utterance& target = s.at(s.target);
    if (target.tokens.empty()) throw MalformedSession("target lacks token ids; encode it first");
    return sequence_loss<T>(tape, b.dec, b.embed, ctx.h0, ctx.parent_words, target.tokens,
                            Vocabulary::kSos, Vocabulary::kEos);
  }

  /// Decode a response for the session's target slot.
  std::vector<int> respond(const Session& s, const DialogueGraph& g, int beam_width) {
    Tape<T> tape;
    Bound b = bind(tape);
    const Context ctx = encode_context(tape, b, s, g);
    DecodeRule rule;
    rule.max_len = hp_.max_decode_len;
    rule.beam_width = beam_width;
    rule.sos = Vocabulary::kSos;
    rule.eos = Vocabulary::kEos;
    rule.banned = {Vocabulary::kPad, Vocabulary::kSos, Vocabulary::kUnk};
    return generate(tape, b.dec, b.embed, ctx.h0, ctx.parent_words, rule);
  }

 private:
  Hyperparams hp_;
  int vocab_;
  ParamRegistry<T> reg_;
};

inline std::vector<std::string> detokenize(const std::vector<int>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(v.token(id));
  return out;
}

}  // namespace gsn
