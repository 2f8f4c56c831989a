#include "omegaflow/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "omegaflow/common.hpp"

namespace omegaflow {

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  if (a > b) return -adaptive_simpson(f, b, a, tol, max_depth);
  // Split into a few panels first so narrow features are not skipped.
  const int panels = 8;
  double h = (b - a) / panels, s = 0.0;
  for (int k = 0; k < panels; ++k) {
    double lo = a + k * h, hi = k + 1 == panels ? b : a + (k + 1) * h;
    double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
    double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    s += simpson_rec(f, lo, hi, flo, fm, fhi, whole, tol / panels, max_depth);
  }
  return s;
}

double bisect_increasing(const std::function<double(double)>& g, double lo, double hi, double tol, int max_iter) {
  double glo = g(lo), ghi = g(hi);
  if (glo > 0.0 || ghi < 0.0) throw ComputationError("bisection: root is not bracketed");
  for (int it = 0; it < max_iter && hi - lo > tol * std::max(1.0, std::abs(lo)); ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) <= 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw InvalidArgument("monotone cubic: need at least two matching samples");
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(x_[i + 1] > x_[i])) throw InvalidArgument("monotone cubic: abscissae must increase");
    delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }
  d_.assign(n, 0.0);
  d_[0] = delta[0];
  d_[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) d_[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      d_[i] = d_[i + 1] = 0.0;
      continue;
    }
    double a = d_[i] / delta[i], b = d_[i + 1] / delta[i];
    double s = a * a + b * b;
    if (s > 9.0) {
      double t = 3.0 / std::sqrt(s);
      d_[i] = t * a * delta[i];
      d_[i + 1] = t * b * delta[i];
    }
  }
}

double MonotoneCubic::operator()(double t) const {
  if (t <= x_.front()) return y_.front();
  if (t >= x_.back()) return y_.back();
  std::size_t k = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  double h = x_[k + 1] - x_[k], s = (t - x_[k]) / h;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * y_[k] + h10 * h * d_[k] + h01 * y_[k + 1] + h11 * h * d_[k + 1];
}

double MonotoneCubic::end_slope() const {
  std::size_t n = x_.size();
  return (y_[n - 1] - y_[n - 2]) / (x_[n - 1] - x_[n - 2]);
}

}  // namespace omegaflow
