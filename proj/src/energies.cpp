#include "omegaflow/energies.hpp"

#include <algorithm>
#include <numeric>

#include "omegaflow/json_util.hpp"

namespace omegaflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGapFloor = 1e-12;
constexpr double kFeasTol = 1e-9;

double unit_ball_volume(int d) { return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

Vec2 pt(double x) { return {x, 0.0}; }

bool is_sorted(const std::vector<double>& x) { return std::is_sorted(x.begin(), x.end()); }

std::vector<std::size_t> sort_order(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (!is_sorted(x)) std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  return idx;
}

bool fast_abs_kernel(const Kernel& k) { return k.kind() == KernelKind::newtonian && k.d() == 1; }

// (c/2) sum_{i<j} m_i m_j |x_i - x_j| for the kernel c|x|/2.
double abs_interaction(double c, const std::vector<double>& x, const std::vector<double>& m) {
  auto idx = sort_order(x);
  double mass = 0.0, moment = 0.0, acc = 0.0;
  for (auto k : idx) {
    acc += m[k] * (x[k] * mass - moment);
    mass += m[k];
    moment += m[k] * x[k];
  }
  return 0.5 * c * acc;
}

void abs_interaction_gradient(double c, const std::vector<double>& x, const std::vector<double>& m,
                              std::vector<double>& g) {
  auto idx = sort_order(x);
  double total = std::accumulate(m.begin(), m.end(), 0.0);
  double below = 0.0;
  std::size_t n = idx.size();
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    double tie = 0.0;
    while (b < n && x[idx[b]] == x[idx[a]]) tie += m[idx[b++]];
    double above = total - below - tie;
    for (std::size_t s = a; s < b; ++s) g[idx[s]] += 0.5 * c * m[idx[s]] * (below - above);
    below += tie;
    a = b;
  }
}

double pair_interaction(const Kernel& k, const std::vector<Vec2>& p, const std::vector<double>& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < p.size(); ++j) row += m[j] * k.value(p[i] - p[j]);
    acc += m[i] * row;
  }
  if (!k.singular()) {
    double self = 0.0;
    for (double w : m) self += w * w;
    acc += 0.5 * self * k.radial(0.0);
  }
  return acc;
}

void pair_gradient(const Kernel& k, const std::vector<Vec2>& p, const std::vector<double>& m,
                   std::vector<Vec2>& g) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      Vec2 d = k.gradient(p[i] - p[j]);
      double w = m[i] * m[j];
      g[i] = g[i] + w * d;
      g[j] = g[j] - w * d;
    }
}

std::vector<Vec2> lift(const std::vector<double>& x) {
  std::vector<Vec2> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = pt(x[i]);
  return p;
}

Vec2 point_from_json(const nlohmann::json& j, const std::string& ptr) {
  if (j.is_array()) {
    auto v = jsonu::numbers(j, ptr);
    if (v.empty() || v.size() > 2) throw SchemaError(ptr, "expected one or two coordinates");
    return {v[0], v.size() > 1 ? v[1] : 0.0};
  }
  return {jsonu::number(j, ptr), 0.0};
}

}  // namespace

// ---------------------------------------------------------------- Kernel

Kernel Kernel::newtonian(int d, double c) {
  if (d < 1) throw InvalidArgument("newtonian kernel: d must be positive");
  if (!(c > 0.0)) throw InvalidArgument("newtonian kernel: c must be positive");
  Kernel k;
  k.kind_ = KernelKind::newtonian;
  k.d_ = d;
  k.c_ = c;
  if (d == 1) {
    k.coef_ = 0.5 * c;
  } else if (d == 2) {
    k.coef_ = c / (2.0 * kPi);
  } else {
    k.coef_ = c / (d * (2.0 - d) * unit_ball_volume(d));
    k.expo_ = 2.0 - d;
  }
  return k;
}

Kernel Kernel::riesz(double alpha, int d, int sign, double c) {
  if (!(alpha >= 2.0 && alpha < d)) throw InvalidArgument("riesz kernel: need 2 <= alpha < d");
  if (sign != 1 && sign != -1) throw InvalidArgument("riesz kernel: sign must be +1 or -1");
  if (!(c > 0.0)) throw InvalidArgument("riesz kernel: c must be positive");
  Kernel k;
  k.kind_ = KernelKind::riesz;
  k.d_ = d;
  k.alpha_ = alpha;
  k.c_ = c;
  k.coef_ = sign * c;
  k.expo_ = alpha - d;
  return k;
}

Kernel Kernel::log(double c) {
  if (!std::isfinite(c) || c == 0.0) throw InvalidArgument("log kernel: c must be finite and nonzero");
  Kernel k;
  k.kind_ = KernelKind::log;
  k.d_ = 2;
  k.c_ = c;
  k.coef_ = c;
  return k;
}

Kernel Kernel::smooth(const std::string& profile, double c, double eps) {
  if (!std::isfinite(c)) throw InvalidArgument("smooth kernel: c must be finite");
  Kernel k;
  k.kind_ = KernelKind::smooth;
  k.profile_ = profile;
  k.c_ = c;
  k.eps_ = eps;
  if (profile == "regularized_log" || profile == "gaussian") {
    if (!(eps > 0.0)) throw InvalidArgument("smooth kernel: eps must be positive");
  } else if (profile != "quadratic") {
    throw InvalidArgument("smooth kernel: unknown profile '" + profile + "'");
  }
  return k;
}

Kernel Kernel::custom(std::function<double(double)> w, std::function<double(double)> dw, std::string name) {
  if (!w || !dw) throw InvalidArgument("custom kernel: both w and dw are required");
  Kernel k;
  k.kind_ = KernelKind::smooth;
  k.profile_ = "custom:" + name;
  k.w_ = std::move(w);
  k.dw_ = std::move(dw);
  return k;
}

bool Kernel::singular() const {
  switch (kind_) {
    case KernelKind::newtonian: return d_ >= 2;
    case KernelKind::riesz: return true;
    case KernelKind::log: return true;
    case KernelKind::smooth: return false;
  }
  return false;
}

bool Kernel::convex_1d() const {
  if (kind_ == KernelKind::newtonian) return d_ == 1;
  if (kind_ == KernelKind::smooth) return profile_ == "quadratic" && c_ >= 0.0;
  return false;
}

double Kernel::radial(double r) const {
  switch (kind_) {
    case KernelKind::newtonian:
      if (d_ == 1) return coef_ * r;
      if (d_ == 2) return coef_ * std::log(r);
      return r == 0.0 ? -kInf : coef_ * std::pow(r, expo_);
    case KernelKind::riesz: return r == 0.0 ? (coef_ > 0 ? kInf : -kInf) : coef_ * std::pow(r, expo_);
    case KernelKind::log: return coef_ * std::log(r);
    case KernelKind::smooth:
      if (w_) return w_(r);
      if (profile_ == "regularized_log") return 0.5 * c_ * std::log(r * r + eps_ * eps_);
      if (profile_ == "gaussian") return -c_ * std::exp(-r * r / (2.0 * eps_ * eps_));
      return 0.5 * c_ * r * r;
  }
  return 0.0;
}

double Kernel::radial_derivative(double r) const {
  switch (kind_) {
    case KernelKind::newtonian:
      if (d_ == 1) return coef_;
      if (d_ == 2) return coef_ / r;
      return coef_ * expo_ * std::pow(r, expo_ - 1.0);
    case KernelKind::riesz: return coef_ * expo_ * std::pow(r, expo_ - 1.0);
    case KernelKind::log: return coef_ / r;
    case KernelKind::smooth:
      if (dw_) return dw_(r);
      if (profile_ == "regularized_log") return c_ * r / (r * r + eps_ * eps_);
      if (profile_ == "gaussian") return c_ * r / (eps_ * eps_) * std::exp(-r * r / (2.0 * eps_ * eps_));
      return c_ * r;
  }
  return 0.0;
}

Vec2 Kernel::gradient(const Vec2& z) const {
  double r = std::sqrt(norm2(z));
  if (r == 0.0) {
    if (singular()) throw InvalidArgument("kernel gradient evaluated at the singularity");
    return {0.0, 0.0};
  }
  return (radial_derivative(r) / r) * z;
}

nlohmann::json Kernel::to_json() const {
  switch (kind_) {
    case KernelKind::newtonian: return {{"kind", "newtonian"}, {"d", d_}, {"c", c_}};
    case KernelKind::riesz:
      return {{"kind", "riesz"}, {"alpha", alpha_}, {"d", d_}, {"sign", coef_ > 0 ? 1 : -1}, {"c", c_}};
    case KernelKind::log: return {{"kind", "log"}, {"c", c_}};
    case KernelKind::smooth:
      if (w_) return {{"kind", "custom"}, {"name", profile_.substr(7)}};
      return {{"kind", "smooth"}, {"profile", profile_}, {"c", c_}, {"eps", eps_}};
  }
  return {};
}

Kernel kernel_from_json(const nlohmann::json& j, const std::string& ptr) {
  jsonu::only_keys(j, {"kind", "d", "c", "alpha", "sign", "profile", "eps", "name"}, ptr);
  auto kind = jsonu::string(jsonu::require(j, "kind", ptr), ptr + "/kind");
  try {
    if (kind == "newtonian") {
      int d = jsonu::integer(jsonu::require(j, "d", ptr), ptr + "/d");
      return Kernel::newtonian(d, jsonu::number_or(j, "c", 1.0, ptr));
    }
    if (kind == "riesz") {
      double alpha = jsonu::number(jsonu::require(j, "alpha", ptr), ptr + "/alpha");
      int d = jsonu::integer(jsonu::require(j, "d", ptr), ptr + "/d");
      int sign = 1;
      if (auto* s = jsonu::optional(j, "sign")) sign = jsonu::integer(*s, ptr + "/sign");
      return Kernel::riesz(alpha, d, sign, jsonu::number_or(j, "c", 1.0, ptr));
    }
    if (kind == "log") return Kernel::log(jsonu::number_or(j, "c", 1.0, ptr));
    if (kind == "smooth") {
      auto profile = jsonu::string(jsonu::require(j, "profile", ptr), ptr + "/profile");
      double dflt = profile == "regularized_log" ? 1.0 / (2.0 * kPi) : 1.0;
      return Kernel::smooth(profile, jsonu::number_or(j, "c", dflt, ptr), jsonu::number_or(j, "eps", 0.1, ptr));
    }
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
  throw SchemaError(ptr + "/kind", "unknown kernel kind '" + kind + "'");
}

// ---------------------------------------------------------------- Potential

Potential Potential::quadratic(double coef, Vec2 center) {
  Potential p;
  p.kind = Kind::quadratic;
  p.coef = coef;
  p.center = center;
  return p;
}

Potential Potential::power(double coef, double exponent) {
  if (!(exponent >= 1.0)) throw InvalidArgument("power potential: exponent must be at least 1");
  Potential p;
  p.kind = Kind::power;
  p.coef = coef;
  p.exponent = exponent;
  return p;
}

Potential Potential::linear(Vec2 slope) {
  Potential p;
  p.kind = Kind::linear;
  p.slope = slope;
  return p;
}

Potential Potential::convolution(const Kernel& k, AtomicMeasure source) {
  if (source.size() == 0) throw InvalidArgument("convolution potential: empty source");
  Potential p;
  p.kind = Kind::convolution;
  p.kernel = k;
  p.source = std::move(source);
  return p;
}

double Potential::time_factor(double t) const {
  return amplitude == 0.0 ? 1.0 : 1.0 + amplitude * std::sin(frequency * t);
}

double Potential::value(const Vec2& x, double t) const {
  double v = 0.0;
  switch (kind) {
    case Kind::quadratic: v = 0.5 * coef * norm2(x - center); break;
    case Kind::power: v = coef * std::pow(std::sqrt(norm2(x - center)), exponent) / exponent; break;
    case Kind::linear: v = dot(slope, x); break;
    case Kind::double_well: {
      double s = norm2(x) - 1.0;
      v = 0.25 * coef * s * s;
      break;
    }
    case Kind::convolution:
      for (std::size_t j = 0; j < source.size(); ++j)
        v += source.weights()[j] * kernel->value(x - source.points()[j]);
      break;
    case Kind::custom: v = custom_value(x); break;
  }
  return time_factor(t) * v;
}

Vec2 Potential::gradient(const Vec2& x, double t) const {
  Vec2 g{0.0, 0.0};
  switch (kind) {
    case Kind::quadratic: g = coef * (x - center); break;
    case Kind::power: {
      Vec2 d = x - center;
      double r = std::sqrt(norm2(d));
      if (r > 0.0) g = (coef * std::pow(r, exponent - 2.0)) * d;
      break;
    }
    case Kind::linear: g = slope; break;
    case Kind::double_well: g = (coef * (norm2(x) - 1.0)) * x; break;
    case Kind::convolution:
      for (std::size_t j = 0; j < source.size(); ++j)
        g = g + source.weights()[j] * kernel->gradient(x - source.points()[j]);
      break;
    case Kind::custom: g = custom_gradient(x); break;
  }
  return time_factor(t) * g;
}

bool Potential::convex() const {
  if (time_factor(0.0) < 0.0 || amplitude > 1.0) return false;
  switch (kind) {
    case Kind::quadratic: return coef >= 0.0;
    case Kind::power: return coef >= 0.0;
    case Kind::linear: return true;
    case Kind::double_well: return false;
    case Kind::convolution: return kernel->convex_1d();
    case Kind::custom: return false;
  }
  return false;
}

// ---------------------------------------------------------------- Internal

double Internal::density_value(double rho) const {
  if (kind == Kind::entropy) return rho > 0.0 ? coef * rho * std::log(rho) : 0.0;
  if (std::isinf(m)) return rho <= 1.0 + kFeasTol ? 0.0 : kInf;
  return coef * std::pow(rho, m) / (m - 1.0);
}

double Internal::pressure(double rho) const {
  if (kind == Kind::entropy) return coef * rho;
  if (std::isinf(m)) return 0.0;
  return coef * std::pow(rho, m);
}

// ---------------------------------------------------------------- Energy

Energy Energy::at_time(double t) const {
  Energy e = *this;
  e.time = t;
  return e;
}

bool Energy::convex_1d() const {
  if (potential && !potential->convex()) return false;
  if (kernel && !kernel->convex_1d()) return false;
  if (internal && internal->coef < 0.0) return false;
  return true;
}

double Energy::density_cap() const {
  double cap = kInf;
  if (constraint && std::isinf(constraint->p)) cap = constraint->cap;
  if (internal && internal->kind == Internal::Kind::power && std::isinf(internal->m)) cap = std::min(cap, 1.0);
  return cap;
}

double Energy::smooth_value_nodes(const std::vector<double>& x, const std::vector<double>& m,
                                  const std::vector<double>* cells) const {
  double v = 0.0;
  if (potential) {
    double pv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) pv += m[i] * potential->value(pt(x[i]), time);
    v += pv;
  }
  if (kernel) v += fast_abs_kernel(*kernel) ? abs_interaction(kernel->c(), x, m)
                                            : pair_interaction(*kernel, lift(x), m);
  if (internal) {
    if (!cells || cells->empty()) return kInf;
    double iv = 0.0;
    for (std::size_t j = 0; j < cells->size(); ++j) {
      double g = x[j + 1] - x[j], c = (*cells)[j];
      if (internal->kind == Internal::Kind::entropy) {
        g = std::max(g, kGapFloor);
      } else if (!(g > 0.0)) {
        return kInf;
      }
      iv += g * internal->density_value(c / g);
    }
    v += iv;
  }
  return v;
}

double Energy::value_nodes(const std::vector<double>& x, const std::vector<double>& m,
                           const std::vector<double>* cells) const {
  if (x.size() != m.size()) throw InvalidArgument("value_nodes: size mismatch");
  if (constraint) {
    if (constraint->p > 1.0) {
      if (!cells || cells->empty()) return kInf;
      double mx = 0.0, s = 0.0;
      for (std::size_t j = 0; j < cells->size(); ++j) {
        double g = x[j + 1] - x[j];
        if (!(g > 0.0)) return kInf;
        double rho = (*cells)[j] / g;
        mx = std::max(mx, rho);
        if (!std::isinf(constraint->p)) s += g * std::pow(rho, constraint->p);
      }
      double norm = std::isinf(constraint->p) ? mx : std::pow(s, 1.0 / constraint->p);
      if (norm > constraint->cap * (1.0 + kFeasTol)) return kInf;
    } else if (constraint->cap < 1.0 - kFeasTol) {
      return kInf;
    }
  }
  return smooth_value_nodes(x, m, cells);
}

void Energy::gradient_nodes(const std::vector<double>& x, const std::vector<double>& m,
                            const std::vector<double>* cells, std::vector<double>& g) const {
  std::size_t n = x.size();
  g.assign(n, 0.0);
  if (potential)
    for (std::size_t i = 0; i < n; ++i) g[i] += m[i] * potential->gradient(pt(x[i]), time)[0];
  if (kernel) {
    if (fast_abs_kernel(*kernel)) {
      abs_interaction_gradient(kernel->c(), x, m, g);
    } else {
      std::vector<Vec2> gp(n, Vec2{0.0, 0.0});
      pair_gradient(*kernel, lift(x), m, gp);
      for (std::size_t i = 0; i < n; ++i) g[i] += gp[i][0];
    }
  }
  if (internal) {
    if (!cells || cells->empty()) throw ComputationError("internal energy gradient needs a density view");
    double prev = 0.0;
    for (std::size_t j = 0; j <= cells->size(); ++j) {
      double p = 0.0;
      if (j < cells->size()) {
        double gap = x[j + 1] - x[j];
        if (internal->kind == Internal::Kind::entropy) gap = std::max(gap, kGapFloor);
        p = internal->pressure((*cells)[j] / gap);
      }
      g[j] += p - prev;
      prev = p;
    }
  }
}

double Energy::value_points(const std::vector<Vec2>& p, const std::vector<double>& m) const {
  if (internal) return kInf;
  if (constraint && (constraint->p > 1.0 || constraint->cap < 1.0 - kFeasTol)) return kInf;
  double v = 0.0;
  if (potential)
    for (std::size_t i = 0; i < p.size(); ++i) v += m[i] * potential->value(p[i], time);
  if (kernel) v += pair_interaction(*kernel, p, m);
  return v;
}

void Energy::gradient_points(const std::vector<Vec2>& p, const std::vector<double>& m,
                             std::vector<Vec2>& g) const {
  if (internal) throw ComputationError("internal energy gradient needs a density view");
  g.assign(p.size(), Vec2{0.0, 0.0});
  if (potential)
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = m[i] * potential->gradient(p[i], time);
  if (kernel) pair_gradient(*kernel, p, m, g);
}

double Energy::eval(const Measure& mu) const {
  if (auto* q = std::get_if<QuantileMeasure>(&mu)) return value_nodes(q->positions(), q->masses(), &q->cell_masses());
  if (auto* a = std::get_if<AtomicMeasure>(&mu)) {
    if (a->dim() == 1) return value_nodes(a->xs(), a->weights(), nullptr);
    return value_points(a->points(), a->weights());
  }
  const auto& g = std::get<GridDensity>(mu);
  if (constraint && lp_norm(mu, constraint->p) > constraint->cap * (1.0 + kFeasTol)) return kInf;
  std::vector<Vec2> c(g.size());
  std::vector<double> w(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    c[k] = g.cell_center(k);
    w[k] = g.values()[k] * g.cell_volume();
  }
  double v = 0.0;
  if (potential)
    for (std::size_t k = 0; k < g.size(); ++k) v += w[k] * potential->value(c[k], time);
  if (kernel) {
    if (g.dim() == 1 && fast_abs_kernel(*kernel)) {
      std::vector<double> x(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) x[k] = c[k][0];
      v += abs_interaction(kernel->c(), x, w);
    } else {
      v += pair_interaction(*kernel, c, w);
    }
  }
  if (internal) {
    double iv = 0.0;
    for (double rho : g.values()) iv += internal->density_value(rho);
    v += g.cell_volume() * iv;
  }
  return v;
}

// ---------------------------------------------------------------- JSON

namespace {

Potential potential_from_json(const nlohmann::json& j, const std::string& ptr) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "quadratic") return Potential::quadratic();
    if (s == "double_well") {
      Potential p;
      p.kind = Potential::Kind::double_well;
      return p;
    }
    throw SchemaError(ptr, "unknown potential '" + s + "'");
  }
  jsonu::only_keys(j, {"kind", "coef", "center", "exponent", "slope", "kernel", "source", "modulation"}, ptr);
  auto kind = jsonu::string(jsonu::require(j, "kind", ptr), ptr + "/kind");
  Potential p;
  try {
    if (kind == "quadratic") {
      Vec2 c{0.0, 0.0};
      if (auto* v = jsonu::optional(j, "center")) c = point_from_json(*v, ptr + "/center");
      p = Potential::quadratic(jsonu::number_or(j, "coef", 1.0, ptr), c);
    } else if (kind == "power") {
      p = Potential::power(jsonu::number_or(j, "coef", 1.0, ptr),
                           jsonu::number(jsonu::require(j, "exponent", ptr), ptr + "/exponent"));
    } else if (kind == "linear") {
      p = Potential::linear(point_from_json(jsonu::require(j, "slope", ptr), ptr + "/slope"));
    } else if (kind == "double_well") {
      p.kind = Potential::Kind::double_well;
      p.coef = jsonu::number_or(j, "coef", 1.0, ptr);
    } else if (kind == "convolution") {
      auto k = kernel_from_json(jsonu::require(j, "kernel", ptr), ptr + "/kernel");
      auto src = measure_from_json(jsonu::require(j, "source", ptr), ptr + "/source");
      p = Potential::convolution(k, to_atomic(src));
    } else {
      throw SchemaError(ptr + "/kind", "unknown potential kind '" + kind + "'");
    }
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
  if (auto* mod = jsonu::optional(j, "modulation")) {
    jsonu::only_keys(*mod, {"amplitude", "frequency"}, ptr + "/modulation");
    p.amplitude = jsonu::number(jsonu::require(*mod, "amplitude", ptr + "/modulation"),
                                ptr + "/modulation/amplitude");
    p.frequency = jsonu::number_or(*mod, "frequency", 1.0, ptr + "/modulation");
  }
  return p;
}

nlohmann::json potential_to_json(const Potential& p) {
  nlohmann::json j;
  switch (p.kind) {
    case Potential::Kind::quadratic:
      j = {{"kind", "quadratic"}, {"coef", p.coef}, {"center", {p.center[0], p.center[1]}}};
      break;
    case Potential::Kind::power: j = {{"kind", "power"}, {"coef", p.coef}, {"exponent", p.exponent}}; break;
    case Potential::Kind::linear: j = {{"kind", "linear"}, {"slope", {p.slope[0], p.slope[1]}}}; break;
    case Potential::Kind::double_well: j = {{"kind", "double_well"}, {"coef", p.coef}}; break;
    case Potential::Kind::convolution:
      j = {{"kind", "convolution"}, {"kernel", p.kernel->to_json()}, {"source", measure_to_json(p.source)}};
      break;
    case Potential::Kind::custom: j = {{"kind", "custom"}}; break;
  }
  if (p.amplitude != 0.0) j["modulation"] = {{"amplitude", p.amplitude}, {"frequency", p.frequency}};
  return j;
}

Internal internal_from_json(const nlohmann::json& j, const std::string& ptr) {
  Internal in;
  if (j.is_string()) {
    if (j.get<std::string>() != "entropy") throw SchemaError(ptr, "unknown internal energy");
    return in;
  }
  if (!j.is_object()) throw SchemaError(ptr, "expected an object or \"entropy\"");
  jsonu::only_keys(j, {"kind", "power", "m", "coef"}, ptr);
  if (auto* m = jsonu::optional(j, "power")) {
    in.kind = Internal::Kind::power;
    in.m = jsonu::number(*m, ptr + "/power");
  } else {
    auto kind = jsonu::string(jsonu::require(j, "kind", ptr), ptr + "/kind");
    if (kind == "power") {
      in.kind = Internal::Kind::power;
      in.m = jsonu::number(jsonu::require(j, "m", ptr), ptr + "/m");
    } else if (kind != "entropy") {
      throw SchemaError(ptr + "/kind", "unknown internal energy '" + kind + "'");
    }
  }
  if (in.kind == Internal::Kind::power && !(in.m > 1.0)) throw SchemaError(ptr, "power m must exceed 1");
  in.coef = jsonu::number_or(j, "coef", 1.0, ptr);
  return in;
}

}  // namespace

Energy energy_from_json(const nlohmann::json& j, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an energy object");
  static const std::vector<std::string> keys{"potential", "kernel", "internal", "constraint", "time"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw SchemaError(ptr + "/" + it.key(), "unknown energy key");
  Energy e;
  if (auto* v = jsonu::optional(j, "potential")) e.potential = potential_from_json(*v, ptr + "/potential");
  if (auto* v = jsonu::optional(j, "kernel")) e.kernel = kernel_from_json(*v, ptr + "/kernel");
  if (auto* v = jsonu::optional(j, "internal")) e.internal = internal_from_json(*v, ptr + "/internal");
  if (auto* v = jsonu::optional(j, "constraint")) {
    jsonu::only_keys(*v, {"p", "cap"}, ptr + "/constraint");
    Constraint c;
    c.p = jsonu::number(jsonu::require(*v, "p", ptr + "/constraint"), ptr + "/constraint/p");
    c.cap = jsonu::number(jsonu::require(*v, "cap", ptr + "/constraint"), ptr + "/constraint/cap");
    if (!(c.p >= 1.0)) throw SchemaError(ptr + "/constraint/p", "p must be at least 1");
    if (!(c.cap > 0.0)) throw SchemaError(ptr + "/constraint/cap", "cap must be positive");
    e.constraint = c;
  }
  if (auto* v = jsonu::optional(j, "time")) e.time = jsonu::number(*v, ptr + "/time");
  return e;
}

nlohmann::json Energy::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (potential) j["potential"] = potential_to_json(*potential);
  if (kernel) j["kernel"] = kernel->to_json();
  if (internal) {
    if (internal->kind == Internal::Kind::entropy)
      j["internal"] = {{"kind", "entropy"}, {"coef", internal->coef}};
    else
      j["internal"] = {{"kind", "power"}, {"m", jsonu::number_to_json(internal->m)}, {"coef", internal->coef}};
  }
  if (constraint) j["constraint"] = {{"p", jsonu::number_to_json(constraint->p)}, {"cap", constraint->cap}};
  if (time != 0.0) j["time"] = time;
  return j;
}

// ---------------------------------------------------------------- derived quantities

Vec2 kernel_gradient(const Kernel& k, const Measure& mu, const Vec2& x, bool exclude) {
  std::vector<Vec2> p;
  std::vector<double> w;
  if (auto* g = std::get_if<GridDensity>(&mu)) {
    for (std::size_t i = 0; i < g->size(); ++i) {
      p.push_back(g->cell_center(i));
      w.push_back(g->values()[i] * g->cell_volume());
    }
  } else {
    auto a = to_atomic(mu);
    p = a.points();
    w = a.weights();
  }
  Vec2 acc{0.0, 0.0};
  for (std::size_t j = 0; j < p.size(); ++j) {
    Vec2 z = x - p[j];
    if (k.singular() && norm2(z) == 0.0) {
      if (exclude) continue;
      throw InvalidArgument("kernel_gradient: evaluation at an atom of a singular kernel");
    }
    acc = acc + w[j] * k.gradient(z);
  }
  return acc;
}

double directional_derivative(const Energy& e, const Coupling& c, double alpha) {
  std::size_t n = c.size();
  if (n == 0) return 0.0;
  if (c.dim == 1) {
    std::vector<double> x(n), d(n), g;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = (1.0 - alpha) * c.from[i][0] + alpha * c.to[i][0];
      d[i] = c.to[i][0] - c.from[i][0];
    }
    std::vector<double> cells;
    const std::vector<double>* cp = nullptr;
    if (c.lagrangian) {
      cells.resize(n - 1);
      double s = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) s += cells[j] = 0.5 * (c.mass[j] + c.mass[j + 1]);
      for (double& v : cells) v /= s;
      cp = &cells;
    }
    if (!std::isfinite(e.value_nodes(x, c.mass, cp)))
      throw ComputationError("directional_derivative: infinite energy on the curve");
    e.gradient_nodes(x, c.mass, cp, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += g[i] * d[i];
    return acc;
  }
  std::vector<Vec2> p(n), g;
  for (std::size_t i = 0; i < n; ++i) p[i] = (1.0 - alpha) * c.from[i] + alpha * c.to[i];
  if (!std::isfinite(e.value_points(p, c.mass)))
    throw ComputationError("directional_derivative: infinite energy on the curve");
  e.gradient_points(p, c.mass, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += dot(g[i], c.to[i] - c.from[i]);
  return acc;
}

double directional_derivative(const Energy& e, const TransportPlan& p, double alpha) {
  return directional_derivative(e, coupling_from_plan(p), alpha);
}

double directional_derivative(const Energy& e, const GluedPlan& g, double alpha) {
  return directional_derivative(e, coupling_from_glued(g), alpha);
}

double above_tangent_slack(const Energy& e, const Coupling& c, const Modulus& m) {
  double e0 = e.eval(c.interpolant(0.0)), e1 = e.eval(c.interpolant(1.0));
  if (!std::isfinite(e0) || !std::isfinite(e1))
    throw ComputationError("above_tangent_slack: endpoint outside the energy domain");
  return e1 - e0 - directional_derivative(e, c, 0.0) - 0.5 * m.lambda() * m.omega(c.cost());
}

double metric_slope_estimate(const Energy& e, const Measure& mu, const std::vector<Measure>& samples,
                             const Modulus& m) {
  double e0 = e.eval(mu);
  if (!std::isfinite(e0)) throw ComputationError("metric_slope_estimate: infinite energy");
  double best = 0.0;
  for (const auto& nu : samples) {
    double en = e.eval(nu);
    if (!std::isfinite(en)) continue;
    double w = w2_distance(mu, nu);
    if (!(w > 0.0)) continue;
    best = std::max(best, (e0 - en) / w + 0.5 * m.lambda() * m.omega(w * w) / w);
  }
  return best;
}

}  // namespace omegaflow
