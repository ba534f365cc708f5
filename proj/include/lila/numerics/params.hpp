#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lila/numerics/tape.hpp"
#include "lila/numerics/tensor.hpp"

namespace lila::num {

/// Named parameter tensors in insertion order.
template <class T>
class ParamSet {
 public:
  int add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.emplace_back(name, std::move(value));
    return index_[name];
  }

  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T>& operator[](int i) { return entries_.at(i).second; }
  const Tensor<T>& operator[](int i) const { return entries_.at(i).second; }
  Tensor<T>& at(const std::string& name) { return entries_[index(name)].second; }
  const Tensor<T>& at(const std::string& name) const { return entries_[index(name)].second; }
  const std::string& name(int i) const { return entries_.at(i).first; }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [n, t] : entries_) out.add(n, t.template cast<U>());
    return out;
  }

  bool operator==(const ParamSet& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::map<std::string, int> index_;
};

/// Parameters registered as leaves on one tape, indexed like the ParamSet.
template <class T>
struct BoundParams {
  std::vector<Var<T>> vars;
  const ParamSet<T>* params = nullptr;

  Var<T> operator[](int i) const { return vars.at(i); }
  Var<T> operator[](const std::string& name) const { return vars.at(params->index(name)); }
};

template <class T>
BoundParams<T> bind(Tape<T>& tape, const ParamSet<T>& params, bool requires_grad = true) {
  BoundParams<T> b;
  b.params = &params;
  b.vars.reserve(params.size());
  for (const auto& e : params) b.vars.push_back(tape.leaf(e.second, requires_grad));
  return b;
}

/// Gradients for every bound parameter after tape.backward().
template <class T>
std::vector<Tensor<T>> collect_grads(const Tape<T>& tape, const BoundParams<T>& bound) {
  std::vector<Tensor<T>> g;
  g.reserve(bound.vars.size());
  for (const auto& v : bound.vars) g.push_back(tape.grad(v));
  return g;
}

}  // namespace lila::num
