#pragma once

#include <functional>
#include <vector>

namespace omegaflow {

// Adaptive Simpson with absolute tolerance tol over [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-11,
                        int max_depth = 48);

// Root of an increasing function g on [lo, hi] by bisection (g(lo) <= 0 <= g(hi)).
double bisect_increasing(const std::function<double(double)>& g, double lo, double hi, double tol = 1e-14,
                         int max_iter = 400);

// Fritsch-Carlson monotone cubic interpolant through (x_i, y_i), x strictly increasing.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  double y_min() const { return y_.front(); }
  double y_max() const { return y_.back(); }
  // Secant slope of the last interval.
  double end_slope() const;

 private:
  std::vector<double> x_, y_, d_;
};

}  // namespace omegaflow
