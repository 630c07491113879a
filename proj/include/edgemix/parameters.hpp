#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/matrix.hpp"

namespace edgemix {

/// One trainable tensor with its gradient accumulator and adaptive-moment state.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t updates = 0;  // optimizer steps that touched this tensor

  bool operator==(const Parameter&) const = default;
};

/// Named parameters in insertion order. Indices are stable; names are unique.
class ParameterStore {
 public:
  Parameter& add(std::string name, Matrix init) {
    if (index_.contains(name)) throw Error("ParameterStore: duplicate parameter " + name);
    Parameter p;
    p.name = name;
    p.grad = Matrix(init.rows(), init.cols());
    p.first_moment = Matrix(init.rows(), init.cols());
    p.second_moment = Matrix(init.rows(), init.cols());
    p.value = std::move(init);
    index_.emplace(std::move(name), params_.size());
    params_.push_back(std::move(p));
    return params_.back();
  }

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParameterStore: unknown parameter " + std::string(name));
    return it->second;
  }

  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  Parameter& operator[](std::string_view name) { return params_[index_of(name)]; }
  const Parameter& operator[](std::string_view name) const { return params_[index_of(name)]; }

  std::size_t size() const noexcept { return params_.size(); }
  std::vector<Parameter>& all() noexcept { return params_; }
  const std::vector<Parameter>& all() const noexcept { return params_; }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  std::uint64_t step_count() const noexcept { return steps_; }
  void set_step_count(std::uint64_t s) noexcept { steps_ = s; }
  void count_step() noexcept { ++steps_; }

  bool operator==(const ParameterStore& o) const {
    return steps_ == o.steps_ && params_ == o.params_;
  }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::uint64_t steps_ = 0;
};

}  // namespace edgemix
