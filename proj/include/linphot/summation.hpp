#pragma once

#include <cmath>

namespace linphot {

/// Neumaier-compensated accumulator.
template <class T = long double>
class CompensatedSum {
 public:
  constexpr CompensatedSum() = default;
  constexpr explicit CompensatedSum(T init) : sum_(init) {}

  constexpr void add(T x) noexcept {
    const T t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  constexpr CompensatedSum& operator+=(T x) noexcept {
    add(x);
    return *this;
  }

  // Merge a partial sum; merge order is the caller's responsibility.
  constexpr void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }

  constexpr T value() const noexcept { return sum_ + comp_; }

 private:
  T sum_{0};
  T comp_{0};
};

}  // namespace linphot
