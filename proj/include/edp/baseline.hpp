#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/model.hpp"
#include "edp/predict.hpp"
#include "edp/sstp.hpp"

namespace edp {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Single-step matrix M over all g*g cells; M(a, b) = p(a -> b).
class DenseTransitionMatrix {
 public:
  explicit DenseTransitionMatrix(const SstpMatrix& sstp)
      : grid_(sstp.grid()), m_(DenseMatrix::Zero(sstp.cell_count(), sstp.cell_count())) {
    for (CellId a = 0; a < grid_.cell_count(); ++a) {
      for (auto d : kDirections) {
        if (const auto b = grid_.neighbor(a, d)) m_(a, *b) = sstp.toward(a, d);
      }
    }
  }

  const Grid& grid() const noexcept { return grid_; }
  int side() const noexcept { return grid_.side(); }
  int size() const noexcept { return grid_.cell_count(); }
  const DenseMatrix& matrix() const noexcept { return m_; }

 private:
  Grid grid_;
  DenseMatrix m_;
};

enum class PowerKernel {
  dense,   // full n x n product every step
  sparse,  // multiply by M's four nonzeros per column
};

struct PowerTrainResult {
  std::vector<double> totals;  // row-major n x n
  int multiplications = 0;
  double wall_ms = 0;
};

// totals(i, j) = sum over d in {0, 2, ..., max_detour} of (M^(l1(i,j) + d))(i, j),
// by repeated multiplication up to the longest stored length. `on_power`
// sees every power M^t for t >= 1.
inline PowerTrainResult matrix_power_train(
    const DenseTransitionMatrix& m, int max_detour, PowerKernel kernel = PowerKernel::dense,
    const std::function<void(int, const DenseMatrix&)>& on_power = {}) {
  check_max_detour(max_detour);
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  const int side = m.side();
  const int max_t = 2 * (side - 1) + max_detour;
  PowerTrainResult out;
  out.totals.assign(static_cast<std::size_t>(n) * n, 0.0);

  std::vector<int> l1(static_cast<std::size_t>(n) * n);
  for (CellId i = 0; i < n; ++i) {
    for (CellId j = 0; j < n; ++j) l1[static_cast<std::size_t>(i) * n + j] = l1_unchecked(i, j, side);
  }
  auto accumulate = [&](int t, const DenseMatrix& p) {
    for (CellId i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i) * n;
      for (CellId j = 0; j < n; ++j) {
        const int extra = t - l1[row + j];
        if (extra >= 0 && extra <= max_detour && extra % 2 == 0) out.totals[row + j] += p(i, j);
      }
    }
  };
  accumulate(0, DenseMatrix::Identity(n, n));

  // Column view of M for the sparse product.
  std::vector<std::array<std::pair<CellId, double>, 4>> cols(static_cast<std::size_t>(n));
  if (kernel == PowerKernel::sparse) {
    for (CellId j = 0; j < n; ++j) {
      for (auto d : kDirections) {
        const auto slot = index_of(d);
        if (const auto k = m.grid().neighbor(j, d)) {
          cols[j][slot] = {*k, m.matrix()(*k, j)};
        } else {
          cols[j][slot] = {-1, 0.0};
        }
      }
    }
  }

  DenseMatrix p = m.matrix();
  DenseMatrix next(n, n);
  for (int t = 1; t <= max_t; ++t) {
    if (t > 1) {
      if (kernel == PowerKernel::dense) {
        next.noalias() = p * m.matrix();
      } else {
        for (CellId i = 0; i < n; ++i) {
          const double* prow = p.data() + static_cast<std::size_t>(i) * n;
          double* nrow = next.data() + static_cast<std::size_t>(i) * n;
          for (CellId j = 0; j < n; ++j) {
            double acc = 0.0;
            for (const auto& [k, w] : cols[j]) {
              if (k >= 0) acc += prow[k] * w;
            }
            nrow[j] = acc;
          }
        }
      }
      p.swap(next);
      ++out.multiplications;
    }
    accumulate(t, p);
    if (on_power) on_power(t, p);
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Structural reachability

// Number of (i, j) pairs joined by some walk of exactly `steps` moves,
// assuming every in-grid neighbor move has positive probability.
inline std::uint64_t empirical_nonzero(const Grid& grid, int steps) {
  if (steps < 1) throw DomainError("steps must be >= 1");
  const int n = grid.cell_count();
  std::uint64_t total = 0;
  std::vector<std::uint8_t> cur(static_cast<std::size_t>(n)), nxt(static_cast<std::size_t>(n));
  for (CellId i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), 0);
    cur[i] = 1;
    for (int s = 0; s < steps; ++s) {
      std::fill(nxt.begin(), nxt.end(), 0);
      for (CellId k = 0; k < n; ++k) {
        if (!cur[k]) continue;
        for (auto d : kDirections) {
          if (const auto j = grid.neighbor(k, d)) nxt[*j] = 1;
        }
      }
      cur.swap(nxt);
    }
    for (auto v : cur) total += v;
  }
  return total;
}

// empirical_nonzero for every s in [1, max_steps], sharing the frontier.
inline std::vector<std::uint64_t> empirical_nonzero_series(const Grid& grid, int max_steps) {
  if (max_steps < 1) throw DomainError("max_steps must be >= 1");
  const int n = grid.cell_count();
  std::vector<std::uint64_t> out(static_cast<std::size_t>(max_steps) + 1, 0);
  std::vector<std::uint8_t> cur(static_cast<std::size_t>(n)), nxt(static_cast<std::size_t>(n));
  for (CellId i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), 0);
    cur[i] = 1;
    for (int s = 1; s <= max_steps; ++s) {
      std::fill(nxt.begin(), nxt.end(), 0);
      for (CellId k = 0; k < n; ++k) {
        if (!cur[k]) continue;
        for (auto d : kDirections) {
          if (const auto j = grid.neighbor(k, d)) nxt[*j] = 1;
        }
      }
      cur.swap(nxt);
      for (auto v : cur) out[s] += v;
    }
  }
  return out;
}

// Pairs at L1 distance exactly `steps`: the entries a shortest-route layer touches.
inline std::uint64_t empirical_ring_pairs(const Grid& grid, int steps) {
  const int n = grid.cell_count();
  std::uint64_t c = 0;
  for (CellId i = 0; i < n; ++i) {
    for (CellId j = 0; j < n; ++j) c += l1_unchecked(i, j, grid.side()) == steps;
  }
  return c;
}

struct Theorem1Row {
  int g = 0;
  int steps = 0;
  std::uint64_t nonzero = 0;
  double ratio = 0;
  bool holds = false;
};

struct Theorem1Report {
  std::vector<Theorem1Row> rows;
  std::vector<Theorem1Row> violations;
  bool holds() const noexcept { return violations.empty(); }
};

// nonzero(M^s) / n^2 <= 0.5 for every g in [g_lo, g_hi] and s in [1, 2g].
inline Theorem1Report verify_theorem_1(int g_lo, int g_hi) {
  if (g_lo < 2 || g_hi < g_lo) throw DomainError("grid range must satisfy 2 <= g_lo <= g_hi");
  Theorem1Report rep;
  for (int g = g_lo; g <= g_hi; ++g) {
    const Grid grid(g);
    const auto series = empirical_nonzero_series(grid, 2 * g);
    const double nn = static_cast<double>(grid.cell_count()) * grid.cell_count();
    for (int s = 1; s <= 2 * g; ++s) {
      Theorem1Row row{g, s, series[s], static_cast<double>(series[s]) / nn, false};
      row.holds = 2 * series[s] <= static_cast<std::uint64_t>(nn);
      rep.rows.push_back(row);
      if (!row.holds) rep.violations.push_back(row);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Analytic nonzero counts

inline int exact_sqrt(long long n) {
  if (n < 1) throw DomainError("n must be a positive perfect square");
  auto r = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  if (r * r != n) throw DomainError("n = " + std::to_string(n) + " is not a perfect square");
  return static_cast<int>(r);
}

inline int lambda(long long a) { return a % 2 == 0 ? 2 : 0; }

enum class ThetaForm {
  closed_form,   // the per-parity closed expressions
  defining_sum,  // the lambda-weighted sum they are derived from
};

namespace detail {

inline double theta_sum_below(int i, int m, int root) {
  double s = 0;
  for (int j = 0; j <= i - m; ++j) s += lambda(static_cast<long long>(i) + j + m) * (root - j);
  return s - lambda(static_cast<long long>(i) + m) * root / 2.0;
}

inline double theta_closed_below(int i, int m, int root) {
  if ((i - m) % 2 == 0) {
    return ((i - m) / 2.0 + 1.0) * ((m - i) / 2.0 + root) - root / 2.0;
  }
  return 0.25 * (i - m + 1) * (2.0 * root - i + m - 1) - root / 2.0;
}

}  // namespace detail

// Nonzeros on diagonal m of one block after i steps, as a sum over lambda.
inline double theta_defining_sum(int i, int m, long long n) {
  const int root = exact_sqrt(n);
  if (i < 0 || m < 0) throw DomainError("theta needs i >= 0 and m >= 0");
  if (i < root) return detail::theta_sum_below(i, m, root);
  return 0.5 * (lambda(i - 1) * detail::theta_sum_below(root, m, root) +
                lambda(i) * detail::theta_sum_below(root - 1, m, root));
}

// The same count through the closed forms: Case 1 (same parity), Case 2
// (different parity), and Case 3 (i >= sqrt(n), substitute sqrt(n) and
// sqrt(n) - 1).
inline double analytic_theta(int i, int m, long long n) {
  const int root = exact_sqrt(n);
  if (i < 0 || m < 0) throw DomainError("theta needs i >= 0 and m >= 0");
  if (i < root) return detail::theta_closed_below(i, m, root);
  return 0.5 * (lambda(i - 1) * detail::theta_closed_below(root, m, root) +
                lambda(i) * detail::theta_closed_below(root - 1, m, root));
}

inline double theta(int i, int m, long long n, ThetaForm form) {
  return form == ThetaForm::closed_form ? analytic_theta(i, m, n) : theta_defining_sum(i, m, n);
}

// Z_SMM(i) = sqrt(n) theta(i,0) + 2 sum_{m=1}^{t} (sqrt(n) - m) theta(i,m),
// t = i below sqrt(n) and sqrt(n) - 1 from there on.
inline double analytic_z_smm(int i, long long n, ThetaForm form = ThetaForm::defining_sum) {
  const int root = exact_sqrt(n);
  if (i < 1) throw DomainError("Z_SMM needs i >= 1");
  const int t = i < root ? i : root - 1;
  double z = root * theta(i, 0, n, form);
  for (int m = 1; m <= t; ++m) z += 2.0 * (root - m) * theta(i, m, n, form);
  return z;
}

inline double delta(int m, int root) {
  if (m == 0) return root;
  if (m < root) return 2.0 * (root - m);
  return 0.0;
}

// Z_ETP(i) = sqrt(n) delta(i) + 2 sum_{j=1}^{i} (sqrt(n) - j) delta(i - j),
// defined for i in [1, 2 sqrt(n)].
inline double analytic_z_etp(int i, long long n) {
  const int root = exact_sqrt(n);
  if (i < 1 || i > 2 * root) {
    throw DomainError("Z_ETP is defined for i in [1, " + std::to_string(2 * root) + "], got " +
                      std::to_string(i));
  }
  double z = root * delta(i, root);
  for (int j = 1; j <= i; ++j) z += 2.0 * (root - j) * delta(i - j, root);
  return z;
}

struct CensusRow {
  int g = 0;
  int steps = 0;
  std::uint64_t empirical = 0;
  std::uint64_t ring_pairs = 0;  // pairs at L1 distance exactly `steps`
  double z_smm = 0;
  double z_smm_closed = 0;
  std::optional<double> z_etp;
  double ratio = 0;
};

inline std::vector<CensusRow> nonzero_census(int g, int max_steps) {
  const Grid grid(g);
  const long long n = static_cast<long long>(g) * g;
  const auto series = empirical_nonzero_series(grid, max_steps);
  std::vector<CensusRow> rows;
  for (int s = 1; s <= max_steps; ++s) {
    CensusRow r;
    r.g = g;
    r.steps = s;
    r.empirical = series[s];
    r.ring_pairs = empirical_ring_pairs(grid, s);
    r.z_smm = analytic_z_smm(s, n, ThetaForm::defining_sum);
    r.z_smm_closed = analytic_z_smm(s, n, ThetaForm::closed_form);
    if (s <= 2 * g) r.z_etp = analytic_z_etp(s, n);
    r.ratio = static_cast<double>(series[s]) / static_cast<double>(n * n);
    rows.push_back(r);
  }
  return rows;
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0) || !(y[k] > 0)) throw DomainError("log-log slope needs positive values");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++n;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// First-order baseline

// Destinations of trips from s, scored by P(d|s) p(from -> d) / p(s -> d) with
// p taken from a matrix-power totals table.
inline std::vector<RankedCell> first_order_ranking(std::span<const double> totals, const Grid& grid,
                                                   const StartDestCounts& sd, CellId s, CellId from) {
  const auto n = static_cast<std::size_t>(grid.cell_count());
  if (totals.size() != n * n) throw DomainError("totals table has the wrong size");
  grid.check(s);
  grid.check(from);
  std::vector<RankedCell> r;
  const auto* dests = sd.destinations(s);
  if (!dests) return r;
  double sum = 0;
  for (const auto& [d, count] : *dests) {
    if (d == s) continue;
    const double p_sd = totals[static_cast<std::size_t>(s) * n + d];
    if (!(p_sd > 0)) continue;
    const double p_fd = from == d ? 1.0 : totals[static_cast<std::size_t>(from) * n + d];
    const double score = p_fd * sd.conditional(s, d) / p_sd;
    r.push_back({d, score});
    sum += score;
  }
  if (sum > 0) {
    for (auto& x : r) x.probability /= sum;
  }
  sort_ranking(r);
  return r;
}

}  // namespace edp
