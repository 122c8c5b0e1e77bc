#include "corpstat/spline.hpp"

#include <algorithm>
#include <cstddef>

#include "corpstat/errors.hpp"

namespace corpstat {

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> xs,
                                       std::span<const double> ys)
    : xs_(xs.begin(), xs.end()), ys_(ys.begin(), ys.end()), y2_(xs.size(), 0.0) {
  const std::size_t n = xs_.size();
  if (n != ys_.size()) {
    fail(ErrorCode::kInvalidArgument, "spline: x and y lengths differ");
  }
  if (n < 2) fail(ErrorCode::kInvalidArgument, "spline: need at least 2 knots");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(xs_[i] > xs_[i - 1])) {
      fail(ErrorCode::kInvalidArgument, "spline: knots must be strictly increasing");
    }
  }

  // Tridiagonal decomposition with natural boundary conditions
  // (y2[0] = y2[n-1] = 0).
  std::vector<double> u(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double sig = (xs_[i] - xs_[i - 1]) / (xs_[i + 1] - xs_[i - 1]);
    const double p = sig * y2_[i - 1] + 2.0;
    y2_[i] = (sig - 1.0) / p;
    const double slope_right = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
    const double slope_left = (ys_[i] - ys_[i - 1]) / (xs_[i] - xs_[i - 1]);
    u[i] = (6.0 * (slope_right - slope_left) / (xs_[i + 1] - xs_[i - 1]) -
            sig * u[i - 1]) /
           p;
  }
  y2_[n - 1] = 0.0;
  for (std::size_t k = n - 1; k-- > 0;) {
    y2_[k] = y2_[k] * y2_[k + 1] + u[k];
  }
  y2_[0] = 0.0;
}

double NaturalCubicSpline::operator()(double x) const {
  // Locate the bracketing interval [lo, lo + 1].
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
  hi = std::clamp<std::size_t>(hi, 1, xs_.size() - 1);
  const std::size_t lo = hi - 1;

  const double h = xs_[hi] - xs_[lo];
  const double a = (xs_[hi] - x) / h;
  const double b = (x - xs_[lo]) / h;
  return a * ys_[lo] + b * ys_[hi] +
         ((a * a * a - a) * y2_[lo] + (b * b * b - b) * y2_[hi]) * (h * h) / 6.0;
}

}  // namespace corpstat
