#ifndef TAMED_TAMING_HPP
#define TAMED_TAMING_HPP

#include <cmath>
#include <string>

#include "tamed/errors.hpp"

namespace tamed {

// Taming function g_N: zero on [0, N], equal to r - N on [N + 1, inf), joined on (N, N + 1)
// by the quintic p(s) = 6 s^3 - 8 s^4 + 3 s^5, s = r - N. p matches value, slope and
// curvature at both ends, so g_N is C^2. p'(s) = s^2 (18 - 32 s + 15 s^2) has no real
// roots besides s = 0 and peaks at s = 3/5, where it equals 1.512.
class TamingSpec {
 public:
  static constexpr double derivative_cap = 1.512;

  explicit TamingSpec(double threshold = 1.0) : threshold_(threshold) {
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
      throw DomainError("taming threshold N must be a finite nonnegative number");
    }
  }

  double threshold() const noexcept { return threshold_; }

  double value(double r) const {
    check(r);
    const double s = r - threshold_;
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return s;
    return s * s * s * (6.0 + s * (-8.0 + 3.0 * s));
  }

  double derivative(double r) const {
    check(r);
    const double s = r - threshold_;
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * (18.0 + s * (-32.0 + 15.0 * s));
  }

  double second_derivative(double r) const {
    check(r);
    const double s = r - threshold_;
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return s * (36.0 + s * (-96.0 + 60.0 * s));
  }

  // Unchecked evaluation for the pointwise kernel, r = |u(x)|^2 >= 0 by construction.
  double operator()(double r) const noexcept {
    const double s = r - threshold_;
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return s;
    return s * s * s * (6.0 + s * (-8.0 + 3.0 * s));
  }

 private:
  static void check(double r) {
    if (!(r >= 0.0)) throw DomainError("taming function evaluated at negative r = " + std::to_string(r));
  }

  double threshold_;
};

}  // namespace tamed

#endif  // TAMED_TAMING_HPP
