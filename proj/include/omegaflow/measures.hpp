#pragma once

#include <functional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "omegaflow/common.hpp"

namespace omegaflow {

// Finite sum of weighted Diracs in dimension 1 or 2. Weights are normalized
// to sum to one; in 1D the atoms are kept sorted by position.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  AtomicMeasure(int dim, std::vector<Vec2> points, std::vector<double> weights);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double> xs() const;
  Vec2 mean() const;
  bool has_coincident_atoms() const;

 private:
  int dim_ = 1;
  std::vector<Vec2> points_;
  std::vector<double> weights_;
};

AtomicMeasure make_atomic(std::vector<double> xs, std::vector<double> weights = {});
AtomicMeasure make_atomic_2d(std::vector<Vec2> points, std::vector<double> weights = {});

// 1D measure stored through its quantile function: node positions x_i at
// levels q_i = sum_{k<i} m_k + m_i/2. The atomic view puts mass m_i at x_i.
// The density view spreads cell mass c_j, proportional to (m_j+m_{j+1})/2,
// uniformly over [x_j, x_{j+1}].
class QuantileMeasure {
 public:
  QuantileMeasure() = default;
  QuantileMeasure(std::vector<double> positions, std::vector<double> masses = {});

  std::size_t size() const { return x_.size(); }
  const std::vector<double>& positions() const { return x_; }
  const std::vector<double>& masses() const { return m_; }
  std::vector<double> q_nodes() const;

  std::size_t num_cells() const { return x_.size() - 1; }
  double gap(std::size_t j) const { return x_[j + 1] - x_[j]; }
  double cell_mass(std::size_t j) const { return c_[j]; }
  const std::vector<double>& cell_masses() const { return c_; }
  // c_j / gap_j; +inf on a zero gap.
  double density(std::size_t j) const;

  AtomicMeasure atomic() const;

 private:
  std::vector<double> x_, m_, c_;
};

// Piecewise-constant density on a uniform grid (1D: nx cells; 2D: nx*ny
// cells, row-major in x). Values integrate to one.
class GridDensity {
 public:
  GridDensity() = default;
  GridDensity(int dim, Vec2 origin, double spacing, int nx, int ny, std::vector<double> values,
              bool normalize = false);

  int dim() const { return dim_; }
  Vec2 origin() const { return origin_; }
  double spacing() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }
  Vec2 cell_center(std::size_t k) const;

  AtomicMeasure atomic() const;

 private:
  int dim_ = 1;
  Vec2 origin_{0.0, 0.0};
  double h_ = 1.0;
  int nx_ = 0, ny_ = 1;
  std::vector<double> values_;
};

GridDensity make_grid_1d(double origin, double spacing, std::vector<double> values,
                         bool normalize = false);
GridDensity make_grid_2d(Vec2 origin, double spacing, int nx, int ny, std::vector<double> values,
                         bool normalize = false);
GridDensity grid_from_function(const std::function<double(double)>& f, double lo, double hi,
                               int cells);

using Measure = std::variant<AtomicMeasure, QuantileMeasure, GridDensity>;

int dim_of(const Measure& mu);
AtomicMeasure to_atomic(const Measure& mu);
QuantileMeasure to_quantile(const Measure& mu, std::size_t n);
double second_moment(const Measure& mu);
// ||density||_p, p may be +inf. Returns +inf when mu carries no density and p > 1.
double lp_norm(const Measure& mu, double p);

AtomicMeasure push_forward(const AtomicMeasure& mu, const std::function<double(double)>& map);
AtomicMeasure push_forward(const AtomicMeasure& mu, const std::function<Vec2(const Vec2&)>& map);

Measure measure_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json measure_to_json(const Measure& mu);

}  // namespace omegaflow
