#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/numerics/matrix.hpp"

namespace kamg {

/// Ordered collection of named matrices. Used for trainable parameters,
/// their gradients and optimizer moments; iteration order is insertion order.
class ParameterSet {
 public:
  Matrix& add(std::string name, Matrix value) {
    if (find(name) != npos) throw InputError("duplicate parameter name: " + name);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.back();
  }

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Matrix& value(std::size_t i) { return values_.at(i); }
  const Matrix& value(std::size_t i) const { return values_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool contains(std::string_view name) const { return find(name) != npos; }

  Matrix& at(std::string_view name) {
    const auto i = find(name);
    if (i == npos) throw InputError("unknown parameter: " + std::string(name));
    return values_[i];
  }
  const Matrix& at(std::string_view name) const {
    const auto i = find(name);
    if (i == npos) throw InputError("unknown parameter: " + std::string(name));
    return values_[i];
  }

  std::size_t total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet z;
    for (std::size_t i = 0; i < size(); ++i) z.add(names_[i], Matrix(values_[i].rows(), values_[i].cols()));
    return z;
  }

  /// True when names, order and shapes agree.
  bool same_layout(const ParameterSet& o) const {
    if (size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (names_[i] != o.names_[i] || !values_[i].same_shape(o.values_[i])) return false;
    }
    return true;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return npos;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

}  // namespace kamg
