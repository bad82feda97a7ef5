#include "etmpc/active_set.hpp"

#include <algorithm>
#include <sstream>

#include "etmpc/error.hpp"

namespace etmpc {

ActiveSet::ActiveSet(std::size_t q, std::vector<std::size_t> indices) : q_(q), indices_(std::move(indices)) {
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] >= q_) throw Error(Errc::invalid_argument, "active-set index out of range");
    if (i > 0 && indices_[i] <= indices_[i - 1])
      throw Error(Errc::invalid_argument, "active-set indices must be strictly increasing");
  }
}

bool ActiveSet::contains(std::size_t row) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), row);
}

std::vector<std::size_t> ActiveSet::inactive() const {
  std::vector<std::size_t> out;
  out.reserve(q_ - indices_.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < q_; ++i) {
    if (next < indices_.size() && indices_[next] == i) {
      ++next;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

std::string ActiveSet::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < indices_.size(); ++i) os << (i ? "," : "") << indices_[i];
  os << '}';
  return os.str();
}

}  // namespace etmpc
