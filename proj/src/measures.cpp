#include "omegaflow/measures.hpp"

#include <algorithm>
#include <numeric>

#include "omegaflow/json_util.hpp"

namespace omegaflow {

namespace {

std::vector<double> normalized(std::vector<double> w, std::size_t n, const char* what) {
  if (w.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) throw InvalidArgument(std::string(what) + ": weight count does not match support");
  double s = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument(std::string(what) + ": negative or non-finite weight");
    s += v;
  }
  if (!(s > 0.0)) throw InvalidArgument(std::string(what) + ": total mass is zero");
  for (double& v : w) v /= s;
  return w;
}

}  // namespace

AtomicMeasure::AtomicMeasure(int dim, std::vector<Vec2> points, std::vector<double> weights) : dim_(dim) {
  if (dim != 1 && dim != 2) throw InvalidArgument("atomic measure: dimension must be 1 or 2");
  if (points.empty()) throw InvalidArgument("atomic measure: empty support");
  for (auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw InvalidArgument("atomic measure: non-finite coordinate");
    if (dim == 1) p[1] = 0.0;
  }
  weights = normalized(std::move(weights), points.size(), "atomic measure");
  if (dim == 1) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return points[a][0] < points[b][0]; });
    points_.reserve(idx.size());
    weights_.reserve(idx.size());
    for (auto i : idx) {
      points_.push_back(points[i]);
      weights_.push_back(weights[i]);
    }
  } else {
    points_ = std::move(points);
    weights_ = std::move(weights);
  }
}

std::vector<double> AtomicMeasure::xs() const {
  std::vector<double> out(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) out[i] = points_[i][0];
  return out;
}

Vec2 AtomicMeasure::mean() const {
  Vec2 m{0.0, 0.0};
  for (std::size_t i = 0; i < points_.size(); ++i) m = m + weights_[i] * points_[i];
  return m;
}

bool AtomicMeasure::has_coincident_atoms() const {
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if (points_[i] == points_[j] && weights_[i] > 0 && weights_[j] > 0) return true;
      if (dim_ == 1) break;  // sorted: only neighbours can coincide
    }
  return false;
}

AtomicMeasure make_atomic(std::vector<double> xs, std::vector<double> weights) {
  std::vector<Vec2> pts(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) pts[i] = {xs[i], 0.0};
  return AtomicMeasure(1, std::move(pts), std::move(weights));
}

AtomicMeasure make_atomic_2d(std::vector<Vec2> points, std::vector<double> weights) {
  return AtomicMeasure(2, std::move(points), std::move(weights));
}

QuantileMeasure::QuantileMeasure(std::vector<double> positions, std::vector<double> masses)
    : x_(std::move(positions)) {
  if (x_.empty()) throw InvalidArgument("quantile measure: no nodes");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!std::isfinite(x_[i])) throw InvalidArgument("quantile measure: non-finite position");
    if (i > 0 && x_[i] < x_[i - 1]) throw InvalidArgument("quantile measure: positions must be nondecreasing");
  }
  m_ = normalized(std::move(masses), x_.size(), "quantile measure");
  for (double v : m_)
    if (!(v > 0.0)) throw InvalidArgument("quantile measure: node masses must be positive");
  if (x_.size() > 1) {
    c_.resize(x_.size() - 1);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < x_.size(); ++j) s += c_[j] = 0.5 * (m_[j] + m_[j + 1]);
    for (double& c : c_) c /= s;
  }
}

std::vector<double> QuantileMeasure::q_nodes() const {
  std::vector<double> q(m_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    q[i] = acc + 0.5 * m_[i];
    acc += m_[i];
  }
  return q;
}

double QuantileMeasure::density(std::size_t j) const {
  double g = gap(j);
  return g > 0.0 ? c_[j] / g : kInf;
}

AtomicMeasure QuantileMeasure::atomic() const { return make_atomic(x_, m_); }

GridDensity::GridDensity(int dim, Vec2 origin, double spacing, int nx, int ny, std::vector<double> values,
                         bool normalize)
    : dim_(dim), origin_(origin), h_(spacing), nx_(nx), ny_(dim == 1 ? 1 : ny), values_(std::move(values)) {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid density: dimension must be 1 or 2");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("grid density: spacing must be positive");
  if (nx_ <= 0 || ny_ <= 0) throw InvalidArgument("grid density: empty grid");
  if (values_.size() != static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_))
    throw InvalidArgument("grid density: value count does not match grid shape");
  double s = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("grid density: negative or non-finite value");
    s += v;
  }
  s *= cell_volume();
  if (normalize) {
    if (!(s > 0.0)) throw InvalidArgument("grid density: total mass is zero");
    for (double& v : values_) v /= s;
  } else if (std::abs(s - 1.0) > 1e-10) {
    throw InvalidArgument("grid density: total mass " + std::to_string(s) + " is not one");
  }
}

Vec2 GridDensity::cell_center(std::size_t k) const {
  std::size_t ix = k % static_cast<std::size_t>(nx_);
  std::size_t iy = k / static_cast<std::size_t>(nx_);
  return {origin_[0] + (static_cast<double>(ix) + 0.5) * h_,
          dim_ == 1 ? 0.0 : origin_[1] + (static_cast<double>(iy) + 0.5) * h_};
}

AtomicMeasure GridDensity::atomic() const {
  std::vector<Vec2> pts;
  std::vector<double> w;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (values_[k] <= 0.0) continue;
    pts.push_back(cell_center(k));
    w.push_back(values_[k] * cell_volume());
  }
  return AtomicMeasure(dim_, std::move(pts), std::move(w));
}

GridDensity make_grid_1d(double origin, double spacing, std::vector<double> values, bool normalize) {
  int n = static_cast<int>(values.size());
  return GridDensity(1, {origin, 0.0}, spacing, n, 1, std::move(values), normalize);
}

GridDensity make_grid_2d(Vec2 origin, double spacing, int nx, int ny, std::vector<double> values, bool normalize) {
  return GridDensity(2, origin, spacing, nx, ny, std::move(values), normalize);
}

GridDensity grid_from_function(const std::function<double(double)>& f, double lo, double hi, int cells) {
  if (!(hi > lo) || cells <= 0) throw InvalidArgument("grid_from_function: bad interval");
  double h = (hi - lo) / cells;
  std::vector<double> v(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) v[static_cast<std::size_t>(i)] = f(lo + (i + 0.5) * h);
  return make_grid_1d(lo, h, std::move(v), true);
}

int dim_of(const Measure& mu) {
  return std::visit(
      [](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, QuantileMeasure>) return 1;
        else return m.dim();
      },
      mu);
}

AtomicMeasure to_atomic(const Measure& mu) {
  return std::visit([](const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AtomicMeasure>) return m;
    else return m.atomic();
  }, mu);
}

namespace {

// Generalized inverse of a piecewise-linear CDF given by breakpoints (t_k, F_k).
double inverse_cdf(const std::vector<double>& t, const std::vector<double>& F, double q) {
  auto it = std::lower_bound(F.begin(), F.end(), q);
  if (it == F.begin()) return t.front();
  if (it == F.end()) return t.back();
  std::size_t k = static_cast<std::size_t>(it - F.begin());
  double dF = F[k] - F[k - 1];
  if (dF <= 0.0) return t[k];
  return t[k - 1] + (t[k] - t[k - 1]) * (q - F[k - 1]) / dF;
}

}  // namespace

QuantileMeasure to_quantile(const Measure& mu, std::size_t n) {
  if (n == 0) throw InvalidArgument("to_quantile: need at least one node");
  if (dim_of(mu) != 1) throw InvalidArgument("to_quantile: measure must be one-dimensional");
  std::vector<double> x(n);
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);

  if (auto* a = std::get_if<AtomicMeasure>(&mu)) {
    double acc = 0.0;
    std::size_t k = 0;
    const auto& w = a->weights();
    for (std::size_t i = 0; i < n; ++i) {
      while (k + 1 < a->size() && acc + w[k] < q[i]) acc += w[k++];
      x[i] = a->points()[k][0];
    }
    return QuantileMeasure(std::move(x));
  }
  std::vector<double> t, F;
  if (auto* g = std::get_if<GridDensity>(&mu)) {
    t.push_back(g->origin()[0]);
    F.push_back(0.0);
    for (std::size_t k = 0; k < g->size(); ++k) {
      t.push_back(g->origin()[0] + static_cast<double>(k + 1) * g->spacing());
      F.push_back(F.back() + g->values()[k] * g->spacing());
    }
  } else {
    const auto& qm = std::get<QuantileMeasure>(mu);
    if (qm.size() == 1) return QuantileMeasure(std::vector<double>(n, qm.positions()[0]));
    t.push_back(qm.positions()[0]);
    F.push_back(0.0);
    for (std::size_t j = 0; j < qm.num_cells(); ++j) {
      t.push_back(qm.positions()[j + 1]);
      F.push_back(F.back() + qm.cell_mass(j));
    }
  }
  F.back() = 1.0;
  for (std::size_t i = 0; i < n; ++i) x[i] = inverse_cdf(t, F, q[i]);
  for (std::size_t i = 1; i < n; ++i) x[i] = std::max(x[i], x[i - 1]);
  return QuantileMeasure(std::move(x));
}

double second_moment(const Measure& mu) {
  if (auto* g = std::get_if<GridDensity>(&mu)) {
    double s = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) s += g->values()[k] * norm2(g->cell_center(k));
    return s * g->cell_volume();
  }
  AtomicMeasure a = to_atomic(mu);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.weights()[i] * norm2(a.points()[i]);
  return s;
}

double lp_norm(const Measure& mu, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("lp_norm: p must be at least 1");
  if (auto* g = std::get_if<GridDensity>(&mu)) {
    if (std::isinf(p)) return *std::max_element(g->values().begin(), g->values().end());
    double s = 0.0;
    for (double v : g->values()) s += std::pow(v, p);
    return std::pow(s * g->cell_volume(), 1.0 / p);
  }
  if (p == 1.0) return 1.0;
  QuantileMeasure q;
  if (auto* qm = std::get_if<QuantileMeasure>(&mu)) {
    q = *qm;
  } else {
    const auto& a = std::get<AtomicMeasure>(mu);
    if (a.dim() != 1) return kInf;
    q = QuantileMeasure(a.xs(), a.weights());
  }
  if (q.size() < 2) return kInf;
  double mx = 0.0, s = 0.0;
  for (std::size_t j = 0; j < q.num_cells(); ++j) {
    double g = q.gap(j);
    if (!(g > 0.0)) return kInf;
    double rho = q.cell_mass(j) / g;
    mx = std::max(mx, rho);
    if (!std::isinf(p)) s += g * std::pow(rho, p);
  }
  return std::isinf(p) ? mx : std::pow(s, 1.0 / p);
}

AtomicMeasure push_forward(const AtomicMeasure& mu, const std::function<double(double)>& map) {
  if (mu.dim() != 1) throw InvalidArgument("push_forward: scalar map needs a 1D measure");
  std::vector<double> x(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    x[i] = map(mu.points()[i][0]);
    if (!std::isfinite(x[i])) throw InvalidArgument("push_forward: map produced a non-finite value");
  }
  return make_atomic(std::move(x), mu.weights());
}

AtomicMeasure push_forward(const AtomicMeasure& mu, const std::function<Vec2(const Vec2&)>& map) {
  std::vector<Vec2> pts(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    pts[i] = map(mu.points()[i]);
    if (!std::isfinite(pts[i][0]) || !std::isfinite(pts[i][1]))
      throw InvalidArgument("push_forward: map produced a non-finite value");
  }
  return AtomicMeasure(mu.dim(), std::move(pts), mu.weights());
}

Measure measure_from_json(const nlohmann::json& j, const std::string& ptr) {
  using namespace jsonu;
  std::string kind = string(require(j, "kind", ptr), ptr + "/kind");
  try {
    if (kind == "atomic") {
      only_keys(j, {"kind", "dim", "points", "weights"}, ptr);
      int dim = optional(j, "dim") ? integer(j["dim"], ptr + "/dim") : 1;
      const auto& pts = require(j, "points", ptr);
      std::vector<double> w;
      if (auto* wj = optional(j, "weights")) w = numbers(*wj, ptr + "/weights");
      if (dim == 1) return make_atomic(numbers(pts, ptr + "/points"), w);
      if (dim != 2) throw SchemaError(ptr + "/dim", "dimension must be 1 or 2");
      if (!pts.is_array()) throw SchemaError(ptr + "/points", "expected an array of [x, y] pairs");
      std::vector<Vec2> p;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        auto xy = numbers(pts[i], ptr + "/points/" + std::to_string(i));
        if (xy.size() != 2) throw SchemaError(ptr + "/points/" + std::to_string(i), "expected [x, y]");
        p.push_back({xy[0], xy[1]});
      }
      return make_atomic_2d(std::move(p), w);
    }
    if (kind == "quantile") {
      only_keys(j, {"kind", "positions", "masses"}, ptr);
      std::vector<double> m;
      if (auto* mj = optional(j, "masses")) m = numbers(*mj, ptr + "/masses");
      return QuantileMeasure(numbers(require(j, "positions", ptr), ptr + "/positions"), m);
    }
    if (kind == "grid") {
      only_keys(j, {"kind", "dim", "origin", "spacing", "values", "shape", "normalize"}, ptr);
      int dim = optional(j, "dim") ? integer(j["dim"], ptr + "/dim") : 1;
      double h = number(require(j, "spacing", ptr), ptr + "/spacing");
      auto v = numbers(require(j, "values", ptr), ptr + "/values");
      bool norm = optional(j, "normalize") && j["normalize"].get<bool>();
      if (dim == 1) return make_grid_1d(number(require(j, "origin", ptr), ptr + "/origin"), h, std::move(v), norm);
      auto o = numbers(require(j, "origin", ptr), ptr + "/origin");
      auto shape = require(j, "shape", ptr);
      if (o.size() != 2 || !shape.is_array() || shape.size() != 2)
        throw SchemaError(ptr + "/shape", "2D grid needs origin [x, y] and shape [nx, ny]");
      return make_grid_2d({o[0], o[1]}, h, shape[0].get<int>(), shape[1].get<int>(), std::move(v), norm);
    }
  } catch (const InvalidArgument& e) {
    throw SchemaError(ptr, e.what());
  }
  throw SchemaError(ptr + "/kind", "unknown measure kind '" + kind + "'");
}

nlohmann::json measure_to_json(const Measure& mu) {
  nlohmann::json j;
  if (auto* a = std::get_if<AtomicMeasure>(&mu)) {
    j["kind"] = "atomic";
    j["dim"] = a->dim();
    if (a->dim() == 1) {
      j["points"] = a->xs();
    } else {
      j["points"] = nlohmann::json::array();
      for (auto& p : a->points()) j["points"].push_back({p[0], p[1]});
    }
    j["weights"] = a->weights();
  } else if (auto* q = std::get_if<QuantileMeasure>(&mu)) {
    j["kind"] = "quantile";
    j["positions"] = q->positions();
    j["masses"] = q->masses();
  } else {
    const auto& g = std::get<GridDensity>(mu);
    j["kind"] = "grid";
    j["dim"] = g.dim();
    j["spacing"] = g.spacing();
    j["values"] = g.values();
    if (g.dim() == 1) {
      j["origin"] = g.origin()[0];
    } else {
      j["origin"] = {g.origin()[0], g.origin()[1]};
      j["shape"] = {g.nx(), g.ny()};
    }
  }
  return j;
}

}  // namespace omegaflow
