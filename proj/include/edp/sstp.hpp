#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/trajectory.hpp"

namespace edp {

// Outgoing probabilities of one cell, indexed by Direction.
using NeighborRow = std::array<double, 4>;

inline constexpr double kRowSumTolerance = 1e-12;

// Single-step transition probabilities on the 4-adjacency lattice.
//
// Each cell stores one probability per direction; off-grid directions are
// always zero and the diagonal is implicitly zero. Rows of cells that were
// never left in the data are backfilled uniformly and flagged `smoothed`.
class SstpMatrix {
 public:
  SstpMatrix() = default;

  explicit SstpMatrix(Grid grid)
      : grid_(grid),
        rows_(static_cast<std::size_t>(grid.cell_count())),
        visit_counts_(rows_.size(), 0),
        pair_counts_(rows_.size(), std::array<std::uint64_t, 4>{}),
        smoothed_(rows_.size(), 1) {
    for (CellId c = 0; c < grid_.cell_count(); ++c) rows_[c] = uniform_row(c);
  }

  // Counts every consecutive pair of every path once.
  static SstpMatrix from_paths(std::span<const CellPath> paths, Grid grid) {
    SstpMatrix m(grid);
    for (const auto& p : paths) {
      for (std::size_t k = 0; k + 1 < p.cells.size(); ++k) {
        const CellId from = p.cells[k];
        const CellId to = p.cells[k + 1];
        grid.check(from);
        grid.check(to);
        const auto dir = grid.direction_to(from, to);
        if (!dir) {
          throw DomainError("path " + p.trip_id + " has non-adjacent transition " +
                            std::to_string(from) + "->" + std::to_string(to));
        }
        ++m.pair_counts_[from][index_of(*dir)];
        ++m.visit_counts_[from];
      }
    }
    for (CellId c = 0; c < grid.cell_count(); ++c) {
      if (m.visit_counts_[c] == 0) continue;
      const double total = static_cast<double>(m.visit_counts_[c]);
      for (int d = 0; d < 4; ++d) m.rows_[c][d] = m.pair_counts_[c][d] / total;
      m.smoothed_[c] = 0;
    }
    return m;
  }

  // Explicit rows, e.g. a synthetic ground truth. Rows are validated.
  static SstpMatrix from_rows(Grid grid, std::span<const NeighborRow> rows) {
    if (rows.size() != static_cast<std::size_t>(grid.cell_count())) {
      throw DomainError("row count does not match grid");
    }
    SstpMatrix m(grid);
    for (CellId c = 0; c < grid.cell_count(); ++c) m.set_row(c, rows[c]);
    return m;
  }

  const Grid& grid() const noexcept { return grid_; }
  int cell_count() const noexcept { return grid_.cell_count(); }

  const NeighborRow& row(CellId c) const { return rows_.at(static_cast<std::size_t>(c)); }
  double toward(CellId from, Direction d) const noexcept { return rows_[from][index_of(d)]; }

  // SSTP(from, to); zero unless the cells are 4-adjacent.
  double prob(CellId from, CellId to) const {
    grid_.check(from);
    grid_.check(to);
    const auto d = grid_.direction_to(from, to);
    return d ? rows_[from][index_of(*d)] : 0.0;
  }

  std::uint64_t visit_count(CellId c) const { return visit_counts_.at(c); }
  std::uint64_t pair_count(CellId from, Direction d) const {
    return pair_counts_.at(from)[index_of(d)];
  }
  bool smoothed(CellId c) const { return smoothed_.at(c) != 0; }

  // Replace the outgoing row of `c`. Must be supported on in-grid neighbors
  // and sum to one.
  void set_row(CellId c, const NeighborRow& row) {
    validate_row(c, row);
    rows_[c] = row;
    smoothed_[c] = 0;
  }

  void validate_row(CellId c, const NeighborRow& row) const {
    grid_.check(c);
    double sum = 0;
    for (auto d : kDirections) {
      const double p = row[index_of(d)];
      if (!(p >= 0.0) || p > 1.0 || !std::isfinite(p)) {
        throw DomainError("probability out of [0,1] in row of cell " + std::to_string(c));
      }
      if (!grid_.neighbor(c, d) && p != 0.0) {
        throw DomainError("nonzero probability toward off-grid neighbor of cell " +
                          std::to_string(c));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw DomainError("row of cell " + std::to_string(c) + " sums to " + std::to_string(sum));
    }
  }

  NeighborRow uniform_row(CellId c) const {
    NeighborRow r{};
    const double p = 1.0 / grid_.neighbor_count(c);
    for (auto d : kDirections) {
      if (grid_.neighbor(c, d)) r[index_of(d)] = p;
    }
    return r;
  }

  // Restore counts and flags, used by the model reader.
  void restore_counts(std::vector<std::uint64_t> visits,
                      std::vector<std::array<std::uint64_t, 4>> pairs,
                      std::vector<std::uint8_t> smoothed) {
    visit_counts_ = std::move(visits);
    pair_counts_ = std::move(pairs);
    smoothed_ = std::move(smoothed);
  }
  void restore_row(CellId c, const NeighborRow& row) { rows_.at(c) = row; }

  const std::vector<std::uint64_t>& visit_counts() const noexcept { return visit_counts_; }
  const std::vector<std::array<std::uint64_t, 4>>& pair_counts() const noexcept {
    return pair_counts_;
  }
  const std::vector<std::uint8_t>& smoothed_flags() const noexcept { return smoothed_; }

  friend bool operator==(const SstpMatrix&, const SstpMatrix&) = default;

 private:
  Grid grid_{};
  std::vector<NeighborRow> rows_;
  std::vector<std::uint64_t> visit_counts_;
  std::vector<std::array<std::uint64_t, 4>> pair_counts_;
  std::vector<std::uint8_t> smoothed_;
};

inline SstpMatrix build_sstp(std::span<const CellPath> paths, Grid grid) {
  return SstpMatrix::from_paths(paths, grid);
}

}  // namespace edp
