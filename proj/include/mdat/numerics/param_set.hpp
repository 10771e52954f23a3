#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdat/numerics/tensor.hpp"

namespace mdat::numerics {

/// Named learnable tensors in insertion order.
///
/// Iteration order is stable and drives serialization, optimizer state and
/// gradient-check traversal.
template <class Real>
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor<Real>>;

  void add(std::string name, Tensor<Real> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor<Real>& get(const std::string& name) const { return entries_[lookup(name)].second; }
  Tensor<Real>& get(const std::string& name) { return entries_[lookup(name)].second; }

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  /// Same names and shapes, every entry zero.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor<Real>(t.shape()));
    return out;
  }

  template <class Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<Other>());
    return out;
  }

  bool all_finite() const {
    for (const auto& [_, t] : entries_) {
      if (!t.all_finite()) return false;
    }
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mdat::numerics
