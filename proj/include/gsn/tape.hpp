#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

/// Handle to a node on a Tape. Plain index; the owning tape is always passed
/// explicitly, so a Var is trivially copyable and cheap to stash in beams,
/// state matrices etc.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode computation tape. Records primitive operations as they
/// execute; backward() replays them in reverse, accumulating gradients
/// additively over fan-out. One tape per forward/backward pass, single owner.
///
/// Leaves come in two flavours: leaf() references an external parameter
/// tensor and accumulates its gradient into a sink, input() copies a value
/// onto the tape (still differentiable, gradient readable via grad()).
template <typename T>
class Tape {
 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  int size() const { return static_cast<int>(nodes_.size()); }

  void clear() {
    nodes_.clear();
    grads_.clear();
  }

  Var leaf(const Tensor<T>* value, Tensor<T>* grad_sink) {
    Node n;
    n.ext = value;
    n.sink = grad_sink;
    return push(std::move(n));
  }

  Var input(Tensor<T> value) {
    Node n;
    n.own = std::move(value);
    return push(std::move(n));
  }

  const Tensor<T>& val(Var v) const {
    const Node& n = nodes_[check(v)];
    return n.ext ? *n.ext : n.own;
  }

  /// Gradient of the last backward()'s loss w.r.t. this node. Zero tensor if
  /// the node did not influence the loss.
  const Tensor<T>& grad(Var v) const {
    if (grads_.empty()) throw Error("grad() before backward()");
    return grads_[check(v)];
  }

  T scalar(Var v) const {
    const Tensor<T>& t = val(v);
    if (t.size() != 1) throw ShapeError("scalar() on tensor of size != 1");
    return t[0];
  }

  // ---- elementwise ----

  Var add(Var a, Var b) { return zip(a, b, [](T x, T y) { return x + y; }, BackAdd{}); }
  Var sub(Var a, Var b) { return zip(a, b, [](T x, T y) { return x - y; }, BackSub{}); }
  Var mul(Var a, Var b) { return zip(a, b, [](T x, T y) { return x * y; }, BackMul{}); }
  Var div(Var a, Var b) { return zip(a, b, [](T x, T y) { return x / y; }, BackDiv{}); }

  Var neg(Var a) { return affine(a, T(-1), T(0)); }
  Var scale(Var a, T c) { return affine(a, c, T(0)); }
  Var add_const(Var a, T c) { return affine(a, T(1), c); }
  Var one_minus(Var a) { return affine(a, T(-1), T(1)); }

  Var sigmoid(Var a) {
    Tensor<T> out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const Tensor<T>& y = t.node_val(self);
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& da = t.grads_[pa];
      for (std::int64_t i = 0; i < y.size(); ++i) da[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var tanh(Var a) {
    Tensor<T> out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const Tensor<T>& y = t.node_val(self);
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& da = t.grads_[pa];
      for (std::int64_t i = 0; i < y.size(); ++i) da[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  }

  // ---- linear algebra ----

  /// W [r,c] times x [c] -> [r].
  Var matvec(Var w, Var x) {
    const Tensor<T>& W = val(w);
    const Tensor<T>& X = val(x);
    if (W.rank() != 2 || X.rank() != 1 || W.dim(1) != X.dim(0))
      throw ShapeError("matvec: " + shape_str(W.shape()) + " x " + shape_str(X.shape()));
    const int r = W.dim(0), c = W.dim(1);
    Tensor<T> out(Shape{r});
    for (int i = 0; i < r; ++i) {
      T acc = T(0);
      const T* wr = W.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) acc += wr[j] * X[j];
      out[i] = acc;
    }
    int pw = w.id, px = x.id;
    return make(std::move(out), [pw, px, r, c](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& W = t.node_val(pw);
      const Tensor<T>& X = t.node_val(px);
      Tensor<T>& dW = t.grads_[pw];
      Tensor<T>& dX = t.grads_[px];
      for (int i = 0; i < r; ++i) {
        const T gi = g[i];
        T* dwr = dW.data() + static_cast<std::size_t>(i) * c;
        const T* wr = W.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) {
          dwr[j] += gi * X[j];
          dX[j] += wr[j] * gi;
        }
      }
    });
  }

  Var dot(Var a, Var b) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& B = val(b);
    if (!A.same_shape(B)) throw ShapeError("dot: shape mismatch");
    Tensor<T> out(Shape{1});
    out[0] = A.dot(B);
    int pa = a.id, pb = b.id;
    return make(std::move(out), [pa, pb](Tape& t, int self) {
      const T g = t.grads_[self][0];
      t.grads_[pa].add_scaled(t.node_val(pb), g);
      t.grads_[pb].add_scaled(t.node_val(pa), g);
    });
  }

  Var l2norm(Var a) {
    const Tensor<T>& A = val(a);
    Tensor<T> out(Shape{1});
    out[0] = std::sqrt(A.sum_squares());
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const T nrm = t.node_val(self)[0];
      if (nrm <= T(0)) return;  // subgradient 0 at the origin
      const T g = t.grads_[self][0];
      t.grads_[pa].add_scaled(t.node_val(pa), g / nrm);
    });
  }

  Var sum(Var a) {
    const Tensor<T>& A = val(a);
    Tensor<T> out(Shape{1});
    T acc = T(0);
    for (std::int64_t i = 0; i < A.size(); ++i) acc += A[i];
    out[0] = acc;
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const T g = t.grads_[self][0];
      Tensor<T>& da = t.grads_[pa];
      for (std::int64_t i = 0; i < da.size(); ++i) da[i] += g;
    });
  }

  // ---- shape ops (1-D) ----

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    int total = 0;
    for (Var p : parts) {
      if (val(p).rank() != 1) throw ShapeError("concat: expects vectors");
      total += val(p).dim(0);
    }
    Tensor<T> out(Shape{total});
    int off = 0;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Var p : parts) {
      const Tensor<T>& v = val(p);
      std::copy(v.data(), v.data() + v.size(), out.data() + off);
      off += static_cast<int>(v.size());
      ids.push_back(p.id);
    }
    return make(std::move(out), [ids](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      int off = 0;
      for (int id : ids) {
        Tensor<T>& dp = t.grads_[id];
        for (std::int64_t i = 0; i < dp.size(); ++i) dp[i] += g[off + i];
        off += static_cast<int>(dp.size());
      }
    });
  }

  Var slice(Var a, int offset, int len) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 1 || offset < 0 || len <= 0 || offset + len > A.dim(0))
      throw ShapeError("slice: out of range");
    Tensor<T> out(Shape{len});
    std::copy(A.data() + offset, A.data() + offset + len, out.data());
    int pa = a.id;
    return make(std::move(out), [pa, offset, len](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& da = t.grads_[pa];
      for (int i = 0; i < len; ++i) da[offset + i] += g[i];
    });
  }

  /// Row i of a matrix as a vector (embedding lookup).
  Var row(Var m, int i) {
    const Tensor<T>& M = val(m);
    if (M.rank() != 2 || i < 0 || i >= M.dim(0)) throw ShapeError("row: index out of range");
    const int c = M.dim(1);
    Tensor<T> out(Shape{c});
    std::copy(M.data() + static_cast<std::size_t>(i) * c, M.data() + static_cast<std::size_t>(i + 1) * c,
              out.data());
    int pm = m.id;
    return make(std::move(out), [pm, i, c](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& dm = t.grads_[pm];
      T* dr = dm.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) dr[j] += g[j];
    });
  }

  Var pick(Var a, int i) { return slice(a, i, 1); }

  /// Gather scalar nodes into one vector.
  Var stack(const std::vector<Var>& scalars) {
    const int n = static_cast<int>(scalars.size());
    if (n == 0) throw ShapeError("stack: no inputs");
    Tensor<T> out(Shape{n});
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      if (val(scalars[j]).size() != 1) throw ShapeError("stack: expects scalars");
      out[j] = val(scalars[j])[0];
      ids[static_cast<std::size_t>(j)] = scalars[j].id;
    }
    return make(std::move(out), [ids](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      for (std::size_t j = 0; j < ids.size(); ++j) t.grads_[ids[j]][0] += g[static_cast<std::int64_t>(j)];
    });
  }

  /// Broadcast multiply by a scalar node.
  Var scale_by(Var a, Var s) {
    const Tensor<T>& A = val(a);
    if (val(s).size() != 1) throw ShapeError("scale_by: scale must be scalar");
    const T c = val(s)[0];
    Tensor<T> out = A;
    out.scale(c);
    int pa = a.id, ps = s.id;
    return make(std::move(out), [pa, ps](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& A = t.node_val(pa);
      const T c = t.node_val(ps)[0];
      t.grads_[pa].add_scaled(g, c);
      t.grads_[ps][0] += A.dot(g);
    });
  }

  /// Convex-ish combination: sum_j weights[j] * vecs[j].
  Var weighted_sum(const std::vector<Var>& vecs, Var weights) {
    const Tensor<T>& W = val(weights);
    if (W.rank() != 1 || W.dim(0) != static_cast<int>(vecs.size()))
      throw ShapeError("weighted_sum: weight count mismatch");
    if (vecs.empty()) throw ShapeError("weighted_sum: no vectors");
    Tensor<T> out(val(vecs[0]).shape());
    std::vector<int> ids(vecs.size());
    for (std::size_t j = 0; j < vecs.size(); ++j) {
      out.add_scaled(val(vecs[j]), W[static_cast<std::int64_t>(j)]);
      ids[j] = vecs[j].id;
    }
    int pw = weights.id;
    return make(std::move(out), [ids, pw](Tape& t, int self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& W = t.node_val(pw);
      Tensor<T>& dW = t.grads_[pw];
      for (std::size_t j = 0; j < ids.size(); ++j) {
        t.grads_[ids[j]].add_scaled(g, W[static_cast<std::int64_t>(j)]);
        dW[static_cast<std::int64_t>(j)] += t.node_val(ids[j]).dot(g);
      }
    });
  }

  // ---- normalizers ----

  Var softmax(Var a) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 1) throw ShapeError("softmax: expects a vector");
    Tensor<T> out = stable_softmax(A);
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const Tensor<T>& y = t.node_val(self);
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& da = t.grads_[pa];
      T gy = T(0);
      for (std::int64_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
      for (std::int64_t i = 0; i < y.size(); ++i) da[i] += y[i] * (g[i] - gy);
    });
  }

  Var log_softmax(Var a) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 1) throw ShapeError("log_softmax: expects a vector");
    T mx = A[0];
    for (std::int64_t i = 1; i < A.size(); ++i) mx = std::max(mx, A[i]);
    T lse = T(0);
    for (std::int64_t i = 0; i < A.size(); ++i) lse += std::exp(A[i] - mx);
    lse = mx + std::log(lse);
    Tensor<T> out(A.shape());
    for (std::int64_t i = 0; i < A.size(); ++i) out[i] = A[i] - lse;
    int pa = a.id;
    return make(std::move(out), [pa](Tape& t, int self) {
      const Tensor<T>& y = t.node_val(self);
      const Tensor<T>& g = t.grads_[self];
      Tensor<T>& da = t.grads_[pa];
      T gs = T(0);
      for (std::int64_t i = 0; i < y.size(); ++i) gs += g[i];
      for (std::int64_t i = 0; i < y.size(); ++i) da[i] += g[i] - std::exp(y[i]) * gs;
    });
  }

  // ---- backward ----

  /// Reverse pass from a scalar loss. Gradients of all leaves accumulate into
  /// their sinks; leaves that do not influence the loss receive zero.
  void backward(Var loss) {
    const int lid = check(loss);
    if (val(loss).size() != 1) throw ShapeError("backward: loss must be a scalar");
    grads_.assign(nodes_.size(), Tensor<T>());
    for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor<T>(node_val(static_cast<int>(i)).shape());
    grads_[static_cast<std::size_t>(lid)][0] = T(1);
    for (int id = lid; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.back) continue;
      if (check_finite_) grads_[static_cast<std::size_t>(id)].require_finite("backward");
      n.back(*this, id);
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (n.sink) {
        if (check_finite_) grads_[i].require_finite("leaf gradient");
        n.sink->add_scaled(grads_[i], T(1));
      }
    }
  }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* ext = nullptr;
    Tensor<T>* sink = nullptr;
    std::function<void(Tape&, int)> back;
  };

  struct BackAdd {
    void operator()(Tape& t, int self, int pa, int pb) const {
      const Tensor<T>& g = t.grads_[self];
      t.grads_[pa].add_scaled(g, T(1));
      t.grads_[pb].add_scaled(g, T(1));
    }
  };
  struct BackSub {
    void operator()(Tape& t, int self, int pa, int pb) const {
      const Tensor<T>& g = t.grads_[self];
      t.grads_[pa].add_scaled(g, T(1));
      t.grads_[pb].add_scaled(g, T(-1));
    }
  };
  struct BackMul {
    void operator()(Tape& t, int self, int pa, int pb) const {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& A = t.node_val(pa);
      const Tensor<T>& B = t.node_val(pb);
      Tensor<T>& da = t.grads_[pa];
      Tensor<T>& db = t.grads_[pb];
      for (std::int64_t i = 0; i < g.size(); ++i) {
        da[i] += g[i] * B[i];
        db[i] += g[i] * A[i];
      }
    }
  };
  struct BackDiv {
    void operator()(Tape& t, int self, int pa, int pb) const {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& A = t.node_val(pa);
      const Tensor<T>& B = t.node_val(pb);
      Tensor<T>& da = t.grads_[pa];
      Tensor<T>& db = t.grads_[pb];
      for (std::int64_t i = 0; i < g.size(); ++i) {
        da[i] += g[i] / B[i];
        db[i] -= g[i] * A[i] / (B[i] * B[i]);
      }
    }
  };

  const Tensor<T>& node_val(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ext ? *n.ext : n.own;
  }

  int check(Var v) const {
    if (v.id < 0 || v.id >= size()) throw Error("dangling Var");
    return v.id;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{size() - 1};
  }

  Var make(Tensor<T> value, std::function<void(Tape&, int)> back) {
    if (check_finite_) value.require_finite("forward op");
    Node n;
    n.own = std::move(value);
    n.back = std::move(back);
    return push(std::move(n));
  }

  template <typename FwdFn, typename BackFn>
  Var zip(Var a, Var b, FwdFn fwd, BackFn bk) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& B = val(b);
    if (!A.same_shape(B))
      throw ShapeError("elementwise op: shape mismatch " + shape_str(A.shape()) + " vs " +
                       shape_str(B.shape()));
    Tensor<T> out(A.shape());
    for (std::int64_t i = 0; i < A.size(); ++i) out[i] = fwd(A[i], B[i]);
    int pa = a.id, pb = b.id;
    return make(std::move(out), [bk, pa, pb](Tape& t, int self) { bk(t, self, pa, pb); });
  }

  // out = c*a + d elementwise.
  Var affine(Var a, T c, T d) {
    Tensor<T> out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = c * out[i] + d;
    int pa = a.id;
    return make(std::move(out), [pa, c](Tape& t, int self) {
      t.grads_[pa].add_scaled(t.grads_[self], c);
    });
  }

  static Tensor<T> stable_softmax(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    T mx = a[0];
    for (std::int64_t i = 1; i < a.size(); ++i) mx = std::max(mx, a[i]);
    T z = T(0);
    for (std::int64_t i = 0; i < a.size(); ++i) {
      out[i] = std::exp(a[i] - mx);
      z += out[i];
    }
    for (std::int64_t i = 0; i < a.size(); ++i) out[i] /= z;
    return out;
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  bool check_finite_;
};

}  // namespace gsn
