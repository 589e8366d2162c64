#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tape.hpp"

namespace gsn {

/// One LSTM direction bound onto a tape. w_ih: [4*d_h, in], w_hh: [4*d_h, d_h],
/// b: [4*d_h]; gate block order i, f, g, o.
struct LstmCellVars {
  Var w_ih, w_hh, b;
};

struct BiLstmLayerVars {
  LstmCellVars fwd, bwd;
};

/// Per-utterance encoding: one state per token plus the utterance summary
/// (final forward state joined with final backward state), both of width
/// 2*d_h.
struct EncodedUtterance {
  std::vector<Var> word_states;
  Var summary;
};

template <typename T>
std::pair<Var, Var> lstm_step(Tape<T>& tape, const LstmCellVars& cell, Var x, Var h, Var c) {
  const int d_h = tape.val(h).dim(0);
  Var pre = tape.add(tape.add(tape.matvec(cell.w_ih, x), tape.matvec(cell.w_hh, h)), cell.b);
  Var i = tape.sigmoid(tape.slice(pre, 0, d_h));
  Var f = tape.sigmoid(tape.slice(pre, d_h, d_h));
  Var g = tape.tanh(tape.slice(pre, 2 * d_h, d_h));
  Var o = tape.sigmoid(tape.slice(pre, 3 * d_h, d_h));
  Var c_next = tape.add(tape.mul(f, c), tape.mul(i, g));
  Var h_next = tape.mul(o, tape.tanh(c_next));
  return {h_next, c_next};
}

namespace detail {

/// Run one direction over the inputs; returns hidden states aligned with the
/// input order (the reverse direction's caller flips the input first).
template <typename T>
std::vector<Var> lstm_sweep(Tape<T>& tape, const LstmCellVars& cell, const std::vector<Var>& xs,
                            int d_h) {
  Var h = tape.input(Tensor<T>(Shape{d_h}));
  Var c = tape.input(Tensor<T>(Shape{d_h}));
  std::vector<Var> states;
  states.reserve(xs.size());
  for (Var x : xs) {
    auto [h2, c2] = lstm_step(tape, cell, x, h, c);
    h = h2;
    c = c2;
    states.push_back(h);
  }
  return states;
}

}  // namespace detail

/// Stacked bidirectional LSTM over embedded tokens. Output per token is
/// [forward_t ; backward_t] from the top layer.
template <typename T>
std::vector<Var> bilstm(Tape<T>& tape, const std::vector<BiLstmLayerVars>& layers,
                        std::vector<Var> inputs, int d_h) {
  if (inputs.empty()) throw ShapeError("bilstm: empty input sequence");
  for (const BiLstmLayerVars& layer : layers) {
    const std::vector<Var> fwd = detail::lstm_sweep(tape, layer.fwd, inputs, d_h);
    std::vector<Var> flipped(inputs.rbegin(), inputs.rend());
    std::vector<Var> bwd = detail::lstm_sweep(tape, layer.bwd, flipped, d_h);
    std::reverse(bwd.begin(), bwd.end());  // align to input order
    std::vector<Var> joined;
    joined.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t)
      joined.push_back(tape.concat({fwd[t], bwd[t]}));
    inputs = std::move(joined);
  }
  return inputs;
}

/// Embed token ids and encode one utterance. The summary pairs the forward
/// direction's last state with the backward direction's last state (which
/// sits at t=1 in input order).
template <typename T>
EncodedUtterance encode_utterance(Tape<T>& tape, Var embed,
                                  const std::vector<BiLstmLayerVars>& layers,
                                  const std::vector<int>& tokens, int d_h) {
  if (tokens.empty()) throw ShapeError("encode_utterance: empty token sequence");
  const int vocab = tape.val(embed).dim(0);
  std::vector<Var> xs;
  xs.reserve(tokens.size());
  for (int id : tokens) {
    if (id < 0 || id >= vocab) throw VocabError("token id out of range: " + std::to_string(id));
    xs.push_back(tape.row(embed, id));
  }
  EncodedUtterance out;
  out.word_states = bilstm(tape, layers, std::move(xs), d_h);
  const std::size_t n = out.word_states.size();
  out.summary = tape.concat({tape.slice(out.word_states[n - 1], 0, d_h),
                             tape.slice(out.word_states[0], d_h, d_h)});
  return out;
}

// ---------------------------------------------------------------------------
// Parameter registration and binding

template <typename T>
void register_bilstm(ParamRegistry<T>& reg, const std::string& prefix, int input_dim, int d_h,
                     int layers, std::mt19937_64& rng) {
  int in = input_dim;
  for (int l = 0; l < layers; ++l) {
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string base = prefix + ".l" + std::to_string(l) + "." + dir;
      reg.add(base + ".w_ih", xavier_uniform<T>(4 * d_h, in, rng));
      reg.add(base + ".w_hh", xavier_uniform<T>(4 * d_h, d_h, rng));
      reg.add(base + ".b", Tensor<T>(Shape{4 * d_h}));
    }
    in = 2 * d_h;  // upper layers consume both directions
  }
}

template <typename T>
std::vector<BiLstmLayerVars> bind_bilstm(Tape<T>& tape, ParamRegistry<T>& reg,
                                         const std::string& prefix, int layers) {
  std::vector<BiLstmLayerVars> out;
  out.reserve(static_cast<std::size_t>(layers));
  auto bind = [&](const std::string& name) {
    Param<T>& p = reg.at(name);
    return tape.leaf(&p.value, &p.grad);
  };
  for (int l = 0; l < layers; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l) + ".";
    BiLstmLayerVars layer;
    layer.fwd = {bind(base + "fwd.w_ih"), bind(base + "fwd.w_hh"), bind(base + "fwd.b")};
    layer.bwd = {bind(base + "bwd.w_ih"), bind(base + "bwd.w_hh"), bind(base + "bwd.b")};
    out.push_back(layer);
  }
  return out;
}

}  // namespace gsn
