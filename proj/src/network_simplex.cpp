// Transportation-problem simplex on the bipartite spanning-tree basis.
#include <algorithm>
#include <cmath>
#include <deque>

#include "omegaflow/transport.hpp"

namespace omegaflow {

namespace {

struct Basic {
  std::size_t i, j;
  double flow;
};

class TreeSolver {
 public:
  TreeSolver(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c)
      : a_(a), b_(b), c_(c), n_(a.size()), m_(b.size()), adj_(n_ + m_), u_(n_), v_(m_) {
    double cmax = 0.0;
    for (double x : c_) cmax = std::max(cmax, std::abs(x));
    eps_ = 1e-14 * std::max(1.0, cmax);
    northwest_corner();
  }

  std::vector<PlanEntry> solve() {
    const std::size_t nm = n_ * m_;
    const std::size_t block = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(nm))));
    const std::size_t max_pivots = 64 * nm + 1000;
    std::size_t cursor = 0, degenerate_run = 0;
    bool bland = false;
    for (std::size_t pivot = 0;; ++pivot) {
      if (pivot > max_pivots) throw ComputationError("network simplex: pivot limit exceeded");
      potentials();
      std::size_t enter = nm;
      if (bland) {
        for (std::size_t k = 0; k < nm; ++k)
          if (reduced(k) < -eps_) {
            enter = k;
            break;
          }
      } else {
        double best = -eps_;
        std::size_t scanned = 0;
        while (scanned < nm) {
          std::size_t stop = std::min(nm, scanned + block);
          for (; scanned < stop; ++scanned) {
            std::size_t k = (cursor + scanned) % nm;
            double r = reduced(k);
            if (r < best) {
              best = r;
              enter = k;
            }
          }
          if (enter != nm) break;
        }
        if (enter != nm) cursor = (enter + 1) % nm;
      }
      if (enter == nm) break;
      bool degenerate = pivot_on(enter / m_, enter % m_, bland);
      degenerate_run = degenerate ? degenerate_run + 1 : 0;
      bland = degenerate_run > 32;
    }
    std::vector<PlanEntry> out;
    for (auto& e : basis_)
      if (e.flow > 0.0) out.push_back({e.i, e.j, e.flow});
    std::sort(out.begin(), out.end(), [](auto& x, auto& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
    return out;
  }

 private:
  double reduced(std::size_t k) const { return c_[k] - u_[k / m_] - v_[k % m_]; }

  void add_basic(std::size_t i, std::size_t j, double f) {
    basis_.push_back({i, j, f});
    adj_[i].push_back(basis_.size() - 1);
    adj_[n_ + j].push_back(basis_.size() - 1);
  }

  void northwest_corner() {
    std::size_t i = 0, j = 0;
    double ra = a_[0], rb = b_[0];
    for (;;) {
      double f = std::max(0.0, std::min(ra, rb));
      add_basic(i, j, f);
      ra -= f;
      rb -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (j == m_ - 1 || (i < n_ - 1 && ra < rb)) {
        ra = a_[++i];
      } else {
        rb = b_[++j];
      }
    }
  }

  std::size_t other(std::size_t cell, std::size_t node) const {
    const auto& e = basis_[cell];
    return node < n_ ? n_ + e.j : e.i;
  }

  void potentials() {
    std::vector<char> seen(n_ + m_, 0);
    std::deque<std::size_t> q{0};
    seen[0] = 1;
    u_[0] = 0.0;
    while (!q.empty()) {
      std::size_t node = q.front();
      q.pop_front();
      for (std::size_t cell : adj_[node]) {
        std::size_t nb = other(cell, node);
        if (seen[nb]) continue;
        seen[nb] = 1;
        const auto& e = basis_[cell];
        double cij = c_[e.i * m_ + e.j];
        if (nb >= n_) v_[e.j] = cij - u_[e.i];
        else u_[e.i] = cij - v_[e.j];
        q.push_back(nb);
      }
    }
  }

  // Returns true when the pivot was degenerate.
  bool pivot_on(std::size_t i, std::size_t j, bool bland) {
    // Tree path from column node back to row node i.
    std::vector<std::size_t> parent_cell(n_ + m_, SIZE_MAX);
    std::vector<char> seen(n_ + m_, 0);
    std::deque<std::size_t> q{i};
    seen[i] = 1;
    while (!q.empty()) {
      std::size_t node = q.front();
      q.pop_front();
      for (std::size_t cell : adj_[node]) {
        std::size_t nb = other(cell, node);
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent_cell[nb] = cell;
        q.push_back(nb);
      }
    }
    std::vector<std::size_t> path;
    for (std::size_t node = n_ + j; node != i;) {
      std::size_t cell = parent_cell[node];
      path.push_back(cell);
      node = other(cell, node);
    }
    double theta = kInf;
    for (std::size_t k = 0; k < path.size(); k += 2) theta = std::min(theta, basis_[path[k]].flow);
    std::size_t leave = SIZE_MAX;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const auto& e = basis_[path[k]];
      if (e.flow != theta) continue;
      if (leave == SIZE_MAX) {
        leave = path[k];
      } else if (bland) {
        const auto& l = basis_[leave];
        if (e.i * m_ + e.j < l.i * m_ + l.j) leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      auto& e = basis_[path[k]];
      if (k % 2 == 0) e.flow = path[k] == leave ? 0.0 : e.flow - theta;
      else e.flow += theta;
    }
    // Replace the leaving cell in place by the entering one.
    auto& L = basis_[leave];
    auto drop = [&](std::size_t node) {
      auto& v = adj_[node];
      v.erase(std::find(v.begin(), v.end(), leave));
    };
    drop(L.i);
    drop(n_ + L.j);
    L = {i, j, theta};
    adj_[i].push_back(leave);
    adj_[n_ + j].push_back(leave);
    return theta == 0.0;
  }

  const std::vector<double>& a_;
  const std::vector<double>& b_;
  const std::vector<double>& c_;
  std::size_t n_, m_;
  std::vector<Basic> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_, v_;
  double eps_;
};

}  // namespace

std::vector<PlanEntry> solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                                       const std::vector<double>& cost) {
  if (a.empty() || b.empty()) throw InvalidArgument("solve_transport: empty marginal");
  if (cost.size() != a.size() * b.size()) throw InvalidArgument("solve_transport: cost matrix has wrong size");
  double sa = 0.0, sb = 0.0;
  for (double x : a) sa += x;
  for (double x : b) sb += x;
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, sa))
    throw InvalidArgument("solve_transport: marginals carry different mass");
  TreeSolver solver(a, b, cost);
  return solver.solve();
}

}  // namespace omegaflow
