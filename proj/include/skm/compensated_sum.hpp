#pragma once

#include <cmath>
#include <span>

namespace skm {

/// Neumaier (improved Kahan) summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace skm
