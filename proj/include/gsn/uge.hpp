#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsn/corpus.hpp"
#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tape.hpp"

namespace gsn {

/// One gated update operator bound onto a tape. Each matrix maps the joined
/// pair [predecessor ; current] (width 2*d_s) down to d_s.
struct GateVars {
  Var w_x, b_x;  // update gate
  Var w_r, b_r;  // reset gate
  Var w_h, b_h;  // candidate
};

struct FlowConfig {
  double alpha = 0.25;     // squash floor, must stay in (0,1)
  int iterations = 3;      // sweeps per direction
  bool speaker_flow = true;
};

enum class FlowDirection { forward, backward };

/// Node states indexed by utterance position; conceptually the diagonal of a
/// block matrix whose off-diagonal blocks are zero, so only the diagonal is
/// stored.
struct StateMatrix {
  std::vector<Var> diag;

  int nodes() const { return static_cast<int>(diag.size()); }
};

inline StateMatrix bsm(std::vector<Var> states) { return StateMatrix{std::move(states)}; }

inline const std::vector<Var>& read_diagonal(const StateMatrix& m) { return m.diag; }

/// Scalar squash coefficient (alpha + |v|) / (1 + |v|), in [alpha, 1).
template <typename T>
Var squash(Tape<T>& tape, Var delta, T alpha) {
  Var nrm = tape.l2norm(delta);
  return tape.div(tape.add_const(nrm, alpha), tape.add_const(nrm, T(1)));
}

/// Gated update: what a predecessor state contributes toward the current one.
template <typename T>
Var update_operator(Tape<T>& tape, const GateVars& g, Var s_pred, Var s_cur) {
  if (tape.val(s_pred).dim(0) != tape.val(s_cur).dim(0))
    throw ShapeError("update operator: state widths differ");
  Var pair = tape.concat({s_pred, s_cur});
  Var x = tape.sigmoid(tape.add(tape.matvec(g.w_x, pair), g.b_x));
  Var r = tape.sigmoid(tape.add(tape.matvec(g.w_r, pair), g.b_r));
  Var cand = tape.tanh(tape.add(tape.matvec(g.w_h, tape.concat({tape.mul(r, s_pred), s_cur})), g.b_h));
  return tape.add(tape.mul(tape.one_minus(x), s_pred), tape.mul(x, cand));
}

namespace detail {

template <typename T>
Var sum_vars(Tape<T>& tape, const std::vector<Var>& vs) {
  Var acc = vs.front();
  for (std::size_t k = 1; k < vs.size(); ++k) acc = tape.add(acc, vs[k]);
  return acc;
}

/// s + squash(d)*d, or s unchanged when there were no contributions.
template <typename T>
Var apply_update(Tape<T>& tape, Var s, const std::vector<Var>& contributions, T alpha) {
  if (contributions.empty()) return s;
  Var delta = sum_vars(tape, contributions);
  return tape.add(s, tape.scale_by(delta, squash(tape, delta, alpha)));
}

}  // namespace detail

/// One synchronous update of a single node: aggregate gated contributions
/// from its reply predecessors and (optionally) same-speaker predecessors,
/// each scaled by its squash coefficient. Predecessor sets come from the
/// stored edge direction for forward flow and the transposed one backward.
template <typename T>
Var node_step(Tape<T>& tape, int node, const StateMatrix& states, const BitMatrix& reply,
              const BitMatrix& speaker, FlowDirection dir, const GateVars& reply_gate,
              const GateVars& speaker_gate, const FlowConfig& cfg) {
  const int m = states.nodes();
  Var cur = states.diag[static_cast<std::size_t>(node)];
  auto edge_into = [&](const BitMatrix& mat, int from) {
    return dir == FlowDirection::forward ? mat.get(from, node) : mat.get(node, from);
  };
  std::vector<Var> from_reply, from_speaker;
  for (int p = 0; p < m; ++p)
    if (edge_into(reply, p))
      from_reply.push_back(update_operator(tape, reply_gate, states.diag[static_cast<std::size_t>(p)], cur));
  if (cfg.speaker_flow) {
    for (int p = 0; p < m; ++p)
      if (edge_into(speaker, p))
        from_speaker.push_back(
            update_operator(tape, speaker_gate, states.diag[static_cast<std::size_t>(p)], cur));
  }
  Var next = detail::apply_update(tape, cur, from_reply, T(cfg.alpha));
  return detail::apply_update(tape, next, from_speaker, T(cfg.alpha));
}

/// One synchronous sweep over every node, edge-major: walk the edge matrices
/// once and bucket gated contributions per receiving node, then combine.
/// Matches node_step run on all nodes against the iteration-start states.
template <typename T>
StateMatrix flow_iteration(Tape<T>& tape, const StateMatrix& states, const BitMatrix& reply,
                           const BitMatrix& speaker, FlowDirection dir, const GateVars& reply_gate,
                           const GateVars& speaker_gate, const FlowConfig& cfg) {
  const int m = states.nodes();
  if (reply.size() != m || speaker.size() != m)
    throw ShapeError("flow iteration: edge matrices do not match node count");

  std::vector<std::vector<Var>> reply_in(static_cast<std::size_t>(m));
  std::vector<std::vector<Var>> speaker_in(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      // Stored edge i->j carries information forward into j; the backward
      // sweep pushes it against the arrow into i.
      const int src = dir == FlowDirection::forward ? i : j;
      const int dst = dir == FlowDirection::forward ? j : i;
      if (reply.get(i, j))
        reply_in[static_cast<std::size_t>(dst)].push_back(update_operator(
            tape, reply_gate, states.diag[static_cast<std::size_t>(src)],
            states.diag[static_cast<std::size_t>(dst)]));
      if (cfg.speaker_flow && speaker.get(i, j))
        speaker_in[static_cast<std::size_t>(dst)].push_back(update_operator(
            tape, speaker_gate, states.diag[static_cast<std::size_t>(src)],
            states.diag[static_cast<std::size_t>(dst)]));
    }
  }

  StateMatrix next;
  next.diag.reserve(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    Var s = detail::apply_update(tape, states.diag[static_cast<std::size_t>(v)],
                                 reply_in[static_cast<std::size_t>(v)], T(cfg.alpha));
    next.diag.push_back(
        detail::apply_update(tape, s, speaker_in[static_cast<std::size_t>(v)], T(cfg.alpha)));
  }
  return next;
}

/// Full bi-directional schedule: N sweeps against the edges, then N along
/// them. Backward first, so late context reaches early nodes before the
/// forward sweeps spread it down the graph again.
template <typename T>
StateMatrix encode_graph(Tape<T>& tape, StateMatrix states, const BitMatrix& reply,
                         const BitMatrix& speaker, const GateVars& reply_gate,
                         const GateVars& speaker_gate, const FlowConfig& cfg) {
  if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw ConfigError("squash floor must lie in (0,1)");
  if (cfg.iterations < 1) throw ConfigError("iteration count must be at least 1");
  for (int l = 0; l < cfg.iterations; ++l)
    states = flow_iteration(tape, states, reply, speaker, FlowDirection::backward, reply_gate,
                            speaker_gate, cfg);
  for (int l = 0; l < cfg.iterations; ++l)
    states = flow_iteration(tape, states, reply, speaker, FlowDirection::forward, reply_gate,
                            speaker_gate, cfg);
  return states;
}

// ---------------------------------------------------------------------------
// Parameter registration and binding

template <typename T>
void register_gate(ParamRegistry<T>& reg, const std::string& prefix, int d_s,
                   std::mt19937_64& rng) {
  reg.add(prefix + ".w_x", xavier_uniform<T>(d_s, 2 * d_s, rng));
  reg.add(prefix + ".b_x", Tensor<T>(Shape{d_s}));
  reg.add(prefix + ".w_r", xavier_uniform<T>(d_s, 2 * d_s, rng));
  reg.add(prefix + ".b_r", Tensor<T>(Shape{d_s}));
  reg.add(prefix + ".w_h", xavier_uniform<T>(d_s, 2 * d_s, rng));
  reg.add(prefix + ".b_h", Tensor<T>(Shape{d_s}));
}

template <typename T>
GateVars bind_gate(Tape<T>& tape, ParamRegistry<T>& reg, const std::string& prefix) {
  auto bind = [&](const std::string& name) {
    Param<T>& p = reg.at(name);
    return tape.leaf(&p.value, &p.grad);
  };
  return GateVars{bind(prefix + ".w_x"), bind(prefix + ".b_x"), bind(prefix + ".w_r"),
                  bind(prefix + ".b_r"), bind(prefix + ".w_h"), bind(prefix + ".b_h")};
}

}  // namespace gsn
