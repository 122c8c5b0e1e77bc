#pragma once

#include <span>
#include <vector>

namespace corpstat {

// Natural cubic spline (zero second derivative at both ends) through a set
// of knots with strictly increasing abscissae. Evaluation outside the knot
// range extrapolates the end polynomial.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys);

  double operator()(double x) const;

  // Second derivatives at the knots, as solved from the tridiagonal system.
  std::span<const double> second_derivatives() const { return y2_; }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> y2_;
};

}  // namespace corpstat
