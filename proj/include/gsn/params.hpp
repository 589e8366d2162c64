#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named learnable tensors in fixed registration order. The order defines the
/// checkpoint layout and the optimizer/gradient-reduction order, so it must
/// be identical across runs with the same architecture. Entries are heap-held
/// so references returned by add() stay valid for the registry's lifetime.
template <typename T>
class ParamRegistry {
 public:
  Param<T>& add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(items_.size());
    auto holder = std::make_unique<Param<T>>(Param<T>{name, std::move(init), Tensor<T>()});
    holder->grad = Tensor<T>(holder->value.shape());
    items_.push_back(std::move(holder));
    return *items_.back();
  }

  int count() const { return static_cast<int>(items_.size()); }
  Param<T>& at(int i) { return *items_[static_cast<std::size_t>(i)]; }
  const Param<T>& at(int i) const { return *items_[static_cast<std::size_t>(i)]; }

  Param<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return *items_[static_cast<std::size_t>(it->second)];
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grads() {
    for (auto& p : items_) p->grad.fill(T(0));
  }

  std::int64_t total_size() const {
    std::int64_t n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
  }

  T grad_norm() const {
    T ss = T(0);
    for (const auto& p : items_) ss += p->grad.sum_squares();
    return std::sqrt(ss);
  }

  /// Global-norm gradient clipping; returns the pre-clip norm.
  T clip_grads(T max_norm) {
    const T nrm = grad_norm();
    if (nrm > max_norm && nrm > T(0)) {
      const T s = max_norm / nrm;
      for (auto& p : items_) p->grad.scale(s);
    }
    return nrm;
  }

  // Iteration dereferences the holders so callers see Param<T>& directly.
  class iterator {
   public:
    using inner = typename std::vector<std::unique_ptr<Param<T>>>::iterator;
    explicit iterator(inner it) : it_(it) {}
    Param<T>& operator*() const { return **it_; }
    Param<T>* operator->() const { return it_->get(); }
    iterator& operator++() { ++it_; return *this; }
    bool operator!=(const iterator& o) const { return it_ != o.it_; }

   private:
    inner it_;
  };

  class const_iterator {
   public:
    using inner = typename std::vector<std::unique_ptr<Param<T>>>::const_iterator;
    explicit const_iterator(inner it) : it_(it) {}
    const Param<T>& operator*() const { return **it_; }
    const Param<T>* operator->() const { return it_->get(); }
    const_iterator& operator++() { ++it_; return *this; }
    bool operator!=(const const_iterator& o) const { return it_ != o.it_; }

   private:
    inner it_;
  };

  iterator begin() { return iterator(items_.begin()); }
  iterator end() { return iterator(items_.end()); }
  const_iterator begin() const { return const_iterator(items_.begin()); }
  const_iterator end() const { return const_iterator(items_.end()); }

 private:
  std::vector<std::unique_ptr<Param<T>>> items_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace gsn
