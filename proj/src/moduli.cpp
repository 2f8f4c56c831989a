#include "omegaflow/moduli.hpp"

#include <algorithm>
#include <cmath>

#include "omegaflow/json_util.hpp"
#include "omegaflow/quadrature.hpp"

namespace omegaflow {

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kJ = kLogJunction;
const double kB = 2.0 * (1.0 + kSqrt2) * kLogJunction;  // affine continuation slope

double log_lipschitz_omega(double x) {
  if (x <= 0.0) return 0.0;
  return x <= kJ ? -x * std::log(x) : std::sqrt(x * x + kB * x);
}

// Antiderivative of 1/omega for the log-Lipschitz modulus, zero at the junction.
double log_lipschitz_G(double x) {
  if (x <= kJ) return -std::log(-std::log(x)) + std::log(1.0 + kSqrt2);
  return 2.0 * std::log((std::sqrt(x) + std::sqrt(x + kB)) / (std::sqrt(kJ) * (2.0 + kSqrt2)));
}

double log_lipschitz_G_inverse(double g) {
  if (g <= 0.0) return std::exp(-(1.0 + kSqrt2) * std::exp(-g));
  double u = std::sqrt(kJ) * (2.0 + kSqrt2) * std::exp(0.5 * g);
  double r = (u * u - kB) / (2.0 * u);
  return r * r;
}

}  // namespace

double psi(double x) {
  if (x < 0.0) throw InvalidArgument("psi: negative argument");
  if (x == 0.0) return 0.0;
  if (x <= kJ) {
    double l = std::log(x);
    return x * l * l;
  }
  return x + kB;
}

struct PhiTable {
  MonotoneCubic omega;  // on log-spaced nodes in x
  std::vector<double> x, G;  // cumulative antiderivative of 1/omega at the nodes, G(1) = 0
  double slope_low = 1.0;    // omega(x) = slope_low x below the table
  bool capped = false;
  double kappa = 1.0;        // omega_tilde(x) = kappa x

  double eval(double t) const {
    if (t <= 0.0) return 0.0;
    if (t <= omega.x_min()) return slope_low * t;
    if (t >= omega.x_max()) {
      if (capped) return omega.y_max();
      return omega.y_max() + std::max(omega.end_slope(), 0.0) * (t - omega.x_max());
    }
    return omega(t);
  }

  double local_G(double a, double b) const {
    auto f = [&](double s) {
      double e = std::exp(s);
      return e / eval(e);
    };
    return adaptive_simpson(f, std::log(a), std::log(b), 1e-12);
  }

  double G_of(double t) const {
    if (t <= x.front()) return G.front() + std::log(t / x.front()) / slope_low;
    if (t >= x.back()) {
      double ymax = omega.y_max();
      if (capped || omega.end_slope() <= 0.0) return G.back() + (t - x.back()) / ymax;
      double s = omega.end_slope();
      return G.back() + std::log((ymax + s * (t - x.back())) / ymax) / s;
    }
    std::size_t k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
    return G[k] + local_G(x[k], t);
  }

  double G_inverse(double g) const {
    if (g <= G.front()) return x.front() * std::exp((g - G.front()) * slope_low);
    if (g >= G.back()) {
      double ymax = omega.y_max();
      if (capped || omega.end_slope() <= 0.0) return x.back() + (g - G.back()) * ymax;
      double s = omega.end_slope();
      return x.back() + ymax * (std::exp(s * (g - G.back())) - 1.0) / s;
    }
    std::size_t k = static_cast<std::size_t>(std::upper_bound(G.begin(), G.end(), g) - G.begin()) - 1;
    double lo = std::log(x[k]), hi = std::log(x[k + 1]);
    double u = bisect_increasing([&](double v) { return G[k] + local_G(x[k], std::exp(v)) - g; }, lo, hi, 1e-15);
    return std::exp(u);
  }
};

Modulus Modulus::lipschitz(double lambda) {
  if (!std::isfinite(lambda)) throw InvalidArgument("modulus: lambda must be finite");
  return Modulus(ModulusKind::lipschitz, lambda, 0.0);
}

Modulus Modulus::polynomial(double p, double lambda) {
  if (!std::isfinite(lambda)) throw InvalidArgument("modulus: lambda must be finite");
  if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("polynomial modulus: p must be nonnegative");
  return Modulus(ModulusKind::polynomial, lambda, p);
}

Modulus Modulus::log_lipschitz(double lambda) {
  if (!std::isfinite(lambda)) throw InvalidArgument("modulus: lambda must be finite");
  return Modulus(ModulusKind::log_lipschitz, lambda, 0.0);
}

Modulus Modulus::sqrt_psi(double lambda) {
  if (!std::isfinite(lambda)) throw InvalidArgument("modulus: lambda must be finite");
  return Modulus(ModulusKind::sqrt_psi, lambda, 0.0);
}

Modulus sqrt_psi_from_constant(double C) {
  if (!(C >= 0.0) || !std::isfinite(C)) throw InvalidArgument("sqrt_psi: constant must be nonnegative");
  return Modulus::sqrt_psi(-4.0 * C);
}

std::string Modulus::name() const {
  switch (kind_) {
    case ModulusKind::lipschitz: return "lipschitz";
    case ModulusKind::polynomial: return "polynomial";
    case ModulusKind::log_lipschitz: return "log_lipschitz";
    case ModulusKind::sqrt_psi: return "sqrt_psi";
    case ModulusKind::phi_derived: return "phi_derived";
  }
  return "unknown";
}

double Modulus::omega(double x) const {
  if (x < 0.0 || std::isnan(x)) throw InvalidArgument("omega: argument must be nonnegative");
  switch (kind_) {
    case ModulusKind::lipschitz: return x;
    case ModulusKind::polynomial: return x <= 1.0 ? std::pow(x, p_ + 1.0) : 1.0;
    case ModulusKind::log_lipschitz: return log_lipschitz_omega(x);
    case ModulusKind::sqrt_psi: return std::sqrt(x * psi(x));
    case ModulusKind::phi_derived: return table_->eval(x);
  }
  return 0.0;
}

double Modulus::omega_tilde(double x) const {
  if (x < 0.0 || std::isnan(x)) throw InvalidArgument("omega_tilde: argument must be nonnegative");
  switch (kind_) {
    case ModulusKind::lipschitz: return x;
    case ModulusKind::polynomial: return (p_ + 1.0) * x;
    case ModulusKind::log_lipschitz: return log_lipschitz_omega(x);
    case ModulusKind::sqrt_psi: return std::sqrt(x * psi(x));
    case ModulusKind::phi_derived: return table_->kappa * x;
  }
  return 0.0;
}

double Modulus::antiderivative(double x) const {
  if (!(x > 0.0)) throw InvalidArgument("antiderivative: argument must be positive");
  switch (kind_) {
    case ModulusKind::lipschitz: return std::log(x);
    case ModulusKind::polynomial:
      if (x > 1.0) return x - 1.0;
      return p_ == 0.0 ? std::log(x) : (1.0 - std::pow(x, -p_)) / p_;
    case ModulusKind::log_lipschitz:
    case ModulusKind::sqrt_psi: return log_lipschitz_G(x);
    case ModulusKind::phi_derived: return table_->G_of(x);
  }
  return 0.0;
}

double Modulus::antiderivative_inverse(double g) const {
  if (std::isnan(g)) throw InvalidArgument("antiderivative_inverse: NaN");
  switch (kind_) {
    case ModulusKind::lipschitz: return std::exp(g);
    case ModulusKind::polynomial:
      if (g > 0.0) return 1.0 + g;
      return p_ == 0.0 ? std::exp(g) : std::pow(1.0 - p_ * g, -1.0 / p_);
    case ModulusKind::log_lipschitz:
    case ModulusKind::sqrt_psi: return log_lipschitz_G_inverse(g);
    case ModulusKind::phi_derived: return table_->G_inverse(g);
  }
  return 0.0;
}

double Modulus::antiderivative_sup() const { return kInf; }

double Modulus::tilde_antiderivative(double x) const {
  if (!(x > 0.0)) throw InvalidArgument("antiderivative: argument must be positive");
  switch (kind_) {
    case ModulusKind::lipschitz: return std::log(x);
    case ModulusKind::polynomial: return std::log(x) / (p_ + 1.0);
    case ModulusKind::log_lipschitz:
    case ModulusKind::sqrt_psi: return log_lipschitz_G(x);
    case ModulusKind::phi_derived: return std::log(x) / table_->kappa;
  }
  return 0.0;
}

double Modulus::tilde_antiderivative_inverse(double g) const {
  switch (kind_) {
    case ModulusKind::lipschitz: return std::exp(g);
    case ModulusKind::polynomial: return std::exp(g * (p_ + 1.0));
    case ModulusKind::log_lipschitz:
    case ModulusKind::sqrt_psi: return log_lipschitz_G_inverse(g);
    case ModulusKind::phi_derived: return std::exp(g * table_->kappa);
  }
  return 0.0;
}

nlohmann::json Modulus::to_json() const {
  nlohmann::json j{{"kind", name()}, {"lambda", lambda_}};
  if (kind_ == ModulusKind::polynomial) j["p"] = p_;
  return j;
}

Modulus modulus_from_phi(const std::function<double(double)>& phi, double s_max, int sign) {
  if (!(s_max > 0.0)) throw InvalidArgument("modulus_from_phi: sample range must be positive");
  if (std::abs(phi(0.0)) > 1e-14) throw InvalidArgument("modulus_from_phi: phi(0) must vanish");
  bool pos = false, neg = false;
  for (int k = 1; k <= 512; ++k) {
    double v = phi(s_max * k / 512.0);
    if (!std::isfinite(v)) throw InvalidArgument("modulus_from_phi: non-finite phi sample");
    pos = pos || v > 0.0;
    neg = neg || v < 0.0;
  }
  if (pos && neg) throw InvalidArgument("modulus_from_phi: phi changes sign");
  if (!pos && !neg) throw InvalidArgument("modulus_from_phi: phi vanishes identically, omega would be zero");
  int s = pos ? 1 : -1;
  if (sign != 0 && sign != s) throw InvalidArgument("modulus_from_phi: requested sign disagrees with phi");
  const double lambda = s;

  auto tab = std::make_shared<PhiTable>();
  tab->capped = s > 0;
  const int N = 2048;
  const double xmin = 1e-12, xmax = tab->capped ? 1.0 : 1e3;
  std::vector<double> xs(N), ys(N);
  double acc = 0.0, prev_root = 0.0;
  for (int k = 0; k < N; ++k) {
    xs[k] = xmin * std::pow(xmax / xmin, static_cast<double>(k) / (N - 1));
    if (k == N - 1) xs[k] = xmax;
    double root = std::sqrt(xs[k]);
    acc += adaptive_simpson(phi, prev_root, root, 1e-15);
    prev_root = root;
    ys[k] = 2.0 / lambda * acc;
    if (!(ys[k] > 0.0)) throw InvalidArgument("modulus_from_phi: omega must be positive away from zero");
    if (k > 0) ys[k] = std::max(ys[k], ys[k - 1]);
  }
  tab->omega = MonotoneCubic(xs, ys);
  tab->slope_low = ys[0] / xs[0];
  if (s > 0) {
    tab->kappa = 2.0 * phi(1.0) / lambda;
  } else {
    double k = 0.0;
    for (int i = 1; i <= 4096; ++i) {
      double t = s_max * i / 4096.0;
      k = std::max(k, -phi(t) / t);
    }
    tab->kappa = k / std::abs(lambda);
  }
  for (int k = 0; k < N; ++k)
    if (ys[k] > tab->kappa * xs[k] * (1.0 + 1e-9))
      throw InvalidArgument("modulus_from_phi: samples are not superadditive (omega exceeds its Lipschitz bound)");
  tab->x = xs;
  tab->G.assign(N, 0.0);
  // Anchor G at the node closest to x = 1.
  std::size_t anchor = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), 1.0) - xs.begin());
  anchor = std::min<std::size_t>(anchor, N - 1);
  for (std::size_t k = anchor + 1; k < static_cast<std::size_t>(N); ++k) tab->G[k] = tab->G[k - 1] + tab->local_G(xs[k - 1], xs[k]);
  for (std::size_t k = anchor; k-- > 0;) tab->G[k] = tab->G[k + 1] - tab->local_G(xs[k], xs[k + 1]);

  Modulus m(ModulusKind::phi_derived, lambda, 0.0);
  m.table_ = std::move(tab);
  return m;
}

Modulus modulus_from_phi(const std::vector<double>& s, const std::vector<double>& phi, int sign) {
  if (s.size() < 2 || s.size() != phi.size()) throw InvalidArgument("modulus_from_phi: need matching samples");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw InvalidArgument("modulus_from_phi: sample points must increase");
  if (s.front() != 0.0) throw InvalidArgument("modulus_from_phi: samples must start at s = 0");
  auto interp = [s, phi](double t) {
    if (t <= s.front()) return phi.front();
    std::size_t k = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), t) - s.begin());
    if (k >= s.size()) k = s.size() - 1;
    double a = s[k - 1], b = s[k];
    return phi[k - 1] + (phi[k] - phi[k - 1]) * (t - a) / (b - a);
  };
  return modulus_from_phi(interp, s.back(), sign);
}

Modulus modulus_from_json(const nlohmann::json& j, const std::string& ptr) {
  using namespace jsonu;
  std::string kind = string(require(j, "kind", ptr), ptr + "/kind");
  only_keys(j, {"kind", "lambda", "p", "C", "phi", "sign", "b"}, ptr);
  try {
    if (kind == "sqrt_psi" && optional(j, "C")) return sqrt_psi_from_constant(number(j["C"], ptr + "/C"));
    if (kind == "phi_derived") {
      const auto& ph = require(j, "phi", ptr);
      int sign = optional(j, "sign") ? integer(j["sign"], ptr + "/sign") : 0;
      if (ph.is_string()) {
        std::string nm = ph.get<std::string>();
        double b = number_or(j, "b", 0.0, ptr);
        if (nm == "identity") return modulus_from_phi([](double t) { return t; }, 2.0, sign);
        if (nm == "power") return modulus_from_phi([b](double t) { return std::pow(t, b + 1.0); }, 2.0, sign);
        throw SchemaError(ptr + "/phi", "unknown phi profile '" + nm + "'");
      }
      return modulus_from_phi(numbers(require(ph, "s", ptr + "/phi"), ptr + "/phi/s"),
                              numbers(require(ph, "values", ptr + "/phi"), ptr + "/phi/values"), sign);
    }
    double lambda = number(require(j, "lambda", ptr), ptr + "/lambda");
    if (kind == "lipschitz") return Modulus::lipschitz(lambda);
    if (kind == "polynomial") return Modulus::polynomial(number(require(j, "p", ptr), ptr + "/p"), lambda);
    if (kind == "log_lipschitz") return Modulus::log_lipschitz(lambda);
    if (kind == "sqrt_psi") return Modulus::sqrt_psi(lambda);
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
  throw SchemaError(ptr + "/kind", "unknown modulus kind '" + kind + "'");
}

double flow_map(const Modulus& m, double t, double x) {
  if (x < 0.0 || !std::isfinite(x)) throw InvalidArgument("flow_map: x must be finite and nonnegative");
  if (!std::isfinite(t)) throw InvalidArgument("flow_map: t must be finite");
  if (x == 0.0 || t == 0.0 || m.lambda() == 0.0) return x;
  if (m.kind() == ModulusKind::lipschitz) return std::exp(m.lambda() * t) * x;
  double g = m.antiderivative(x) + m.lambda() * t;
  if (g >= m.antiderivative_sup())
    throw FlowWindowError("flow_map: t beyond the existence window", existence_window(m, x));
  return m.antiderivative_inverse(g);
}

double existence_window(const Modulus& m, double x) {
  if (m.lambda() <= 0.0 || x == 0.0) return kInf;
  double sup = m.antiderivative_sup();
  if (std::isinf(sup)) return kInf;
  return (sup - m.antiderivative(x)) / m.lambda();
}

double closed_form_window(const Modulus& m, double x) {
  double lam = m.lambda();
  if (lam <= 0.0 || x <= 0.0) return kInf;
  if (m.kind() == ModulusKind::polynomial && x <= 1.0) {
    if (m.p() == 0.0) return -std::log(x) / lam;
    return (std::pow(x, -m.p()) - 1.0) / (lam * m.p());
  }
  if ((m.kind() == ModulusKind::log_lipschitz || m.kind() == ModulusKind::sqrt_psi) && x <= kJ)
    return std::log(std::log(x) / (-1.0 - kSqrt2)) / lam;
  return kInf;
}

double flow_map_quadrature(const std::function<double(double)>& omega, double lambda, double t, double x) {
  if (x < 0.0) throw InvalidArgument("flow_map_quadrature: x must be nonnegative");
  if (x == 0.0 || t == 0.0 || lambda == 0.0) return x;
  double target = lambda * t;  // int_x^F dy/omega(y) in log variable
  auto phi = [&](double u) {
    auto f = [&](double s) {
      double e = std::exp(s);
      return e / omega(e);
    };
    return adaptive_simpson(f, std::log(x), u, 1e-11);
  };
  double u0 = std::log(x);
  double lo = u0, hi = u0, step = 0.5;
  if (target > 0.0) {
    while (phi(hi) < target) {
      lo = hi;
      hi += step;
      step *= 2.0;
      if (hi > 700.0) throw FlowWindowError("flow_map_quadrature: solution leaves every bracket", kInf);
    }
  } else {
    while (phi(lo) > target) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (lo < -700.0) return 0.0;
    }
  }
  double u = bisect_increasing([&](double v) { return phi(v) - target; }, lo, hi, 1e-15);
  return std::exp(u);
}

double comparison_flow(const Modulus& m, double s, double y) {
  if (y < 0.0 || !std::isfinite(y)) throw InvalidArgument("comparison_flow: y must be finite and nonnegative");
  if (y == 0.0 || s == 0.0) return y;
  return m.tilde_antiderivative_inverse(m.tilde_antiderivative(y) + s);
}

double tilde_flow_map(const Modulus& m, double t, double x) { return comparison_flow(m, -m.lambda_minus() * t, x); }

double euler_step(const Modulus& m, double tau, double x) {
  if (x < 0.0) return 0.0;
  return x + m.lambda() * tau * m.omega(x);
}

double euler_iterate(const Modulus& m, double tau, int n, double x) {
  for (int k = 0; k < n; ++k) x = euler_step(m, tau, x);
  return x;
}

double tilde_step(const Modulus& m, double tau, double x) {
  if (x < 0.0) return 0.0;
  return x - m.lambda_minus() * tau * m.omega_tilde(x);
}

double tilde_iterate(const Modulus& m, double tau, int n, double x) {
  for (int k = 0; k < n; ++k) x = tilde_step(m, tau, x);
  return x;
}

double euler_error_bound(const Modulus& m, double t, double x, int n) {
  if (n <= 0) throw InvalidArgument("euler_error_bound: step count must be positive");
  if (t < 0.0 || x < 0.0) throw InvalidArgument("euler_error_bound: t and x must be nonnegative");
  double lam = m.lambda();
  if (lam == 0.0) return 0.0;
  double s = std::abs(lam) * t;
  double anchor = lam > 0.0 ? m.omega(flow_map(m, t, x)) : m.omega(x);
  return comparison_flow(m, s, s * anchor / n);
}

double c_r(const Modulus& m, double r) {
  if (!(r >= 1.0)) throw InvalidArgument("c_r: r must be at least 1");
  switch (m.kind()) {
    case ModulusKind::lipschitz: return std::sqrt(r);
    case ModulusKind::polynomial: return (m.p() + 1.0) * std::sqrt(r);
    case ModulusKind::phi_derived: return m.omega_tilde(1.0) * std::sqrt(r);
    default: break;
  }
  double best = 0.0;
  const int N = 20000;
  const double lo = std::log(1e-16), hi = std::log(r);
  for (int k = 0; k <= N; ++k) {
    double x = k == N ? r : std::exp(lo + (hi - lo) * k / N);
    best = std::max(best, m.omega_tilde(x) / std::sqrt(x));
  }
  return 1.01 * best;
}

double osgood_integral(const Modulus& m, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("osgood_integral: eps must lie in (0, 1)");
  return m.tilde_antiderivative(1.0) - m.tilde_antiderivative(eps);
}

}  // namespace omegaflow
