#pragma once

// Cumulative-weight index: inclusive prefix sums over nonnegative weights.
// Drawing u ~ U[0, total) and returning the first slot whose prefix exceeds u
// selects slot l with probability w_l / total in O(log m) comparisons. A slot
// of weight zero shares its prefix with the slot before it, so it can never
// be the first prefix to exceed u.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "skm/compensated_sum.hpp"

namespace skm {

/// Non-owning view over one block of inclusive prefix sums.
class CumulativeView {
 public:
  CumulativeView() = default;
  explicit CumulativeView(std::span<const double> prefix) : prefix_(prefix) {}

  std::size_t size() const noexcept { return prefix_.size(); }
  /// Root weight: the sum of all leaf weights.
  double total() const noexcept { return prefix_.empty() ? 0.0 : prefix_.back(); }

  /// Leaf weight of slot l, recovered from adjacent prefixes.
  double weight(std::size_t l) const noexcept {
    return l == 0 ? prefix_[0] : prefix_[l] - prefix_[l - 1];
  }

  /// First slot whose inclusive prefix is strictly greater than u. Requires
  /// total() > 0; a u that rounds up to total() resolves to the last slot of
  /// positive weight.
  std::size_t find(double u) const noexcept {
    if (prefix_.size() <= kLinearScanMax) {
      // Prefixes are sorted, so the count of those <= u is the upper bound.
      std::size_t count = 0;
      for (double x : prefix_) count += x <= u ? 1 : 0;
      if (count < prefix_.size()) return count;
    }
    auto it = std::upper_bound(prefix_.begin(), prefix_.end(), u);
    if (it == prefix_.end()) {
      it = std::lower_bound(prefix_.begin(), prefix_.end(), prefix_.back());
    }
    return static_cast<std::size_t>(it - prefix_.begin());
  }

  std::span<const double> prefix() const noexcept { return prefix_; }

 private:
  static constexpr std::size_t kLinearScanMax = 32;
  std::span<const double> prefix_;
};

/// Writes compensated inclusive prefix sums of `weights` into `out`.
inline void build_prefix(std::span<const double> weights, std::span<double> out) noexcept {
  CompensatedSum acc;
  double previous = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    acc.add(weights[l]);
    // Zero weights repeat the previous prefix exactly; the max keeps the
    // sequence sorted if compensation ever rounds downward.
    previous = weights[l] == 0.0 ? previous : std::max(previous, acc.value());
    out[l] = previous;
  }
}

class CumulativeIndex {
 public:
  CumulativeIndex() = default;
  explicit CumulativeIndex(std::span<const double> weights) : prefix_(weights.size()) {
    build_prefix(weights, prefix_);
  }

  CumulativeView view() const noexcept { return CumulativeView(prefix_); }
  double total() const noexcept { return view().total(); }
  std::size_t size() const noexcept { return prefix_.size(); }
  std::size_t find(double u) const noexcept { return view().find(u); }

 private:
  std::vector<double> prefix_;
};

}  // namespace skm
