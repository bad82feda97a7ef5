#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace etmpc {

/// Ordered subset of the constraint rows {0, ..., q-1} of a condensed QP.
/// Indices are zero-based throughout the library; row i is bit i of the A1 bit
/// vector.
class ActiveSet {
 public:
  ActiveSet() = default;

  /// Throws Error(invalid_argument) unless `indices` is strictly increasing and < q.
  ActiveSet(std::size_t q, std::vector<std::size_t> indices);

  static ActiveSet empty(std::size_t q) { return ActiveSet(q, {}); }

  std::size_t q() const noexcept { return q_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  bool contains(std::size_t row) const noexcept;

  /// Complement in {0, ..., q-1}, increasing.
  std::vector<std::size_t> inactive() const;

  /// "{0,5,17}"
  std::string to_string() const;

  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;

 private:
  std::size_t q_ = 0;
  std::vector<std::size_t> indices_;
};

}  // namespace etmpc
