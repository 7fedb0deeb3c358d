#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/ingest.hpp"
#include "edp/model.hpp"
#include "edp/sstp.hpp"

namespace edp {

// New outgoing rows for cells whose traffic changed.
struct ChangeSet {
  std::uint64_t epoch = 0;
  std::map<CellId, NeighborRow> changed;

  bool contains(CellId c) const { return changed.count(c) != 0; }
};

inline void validate_changeset(const ChangeSet& cs, const SstpMatrix& sstp) {
  if (cs.changed.empty()) throw DomainError("change set is empty");
  for (const auto& [cell, row] : cs.changed) sstp.validate_row(cell, row);
}

// CSV rows `epoch,cell_id,neighbor_cell_id,probability`. Probabilities of a
// cell must add up to one (within 1e-9 for decimal text); rows are then
// rescaled to sum to one exactly.
inline ChangeSet parse_changeset(std::istream& in, const Grid& grid) {
  ChangeSet cs;
  bool have_epoch = false;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (first) {
      first = false;
      if (view.rfind("epoch", 0) == 0) continue;
    }
    const auto cols = detail::split_csv(view);
    std::uint64_t epoch = 0;
    CellId cell = 0, nb = 0;
    double p = 0;
    if (cols.size() != 4 || !detail::parse_number(cols[0], epoch) ||
        !detail::parse_number(cols[1], cell) || !detail::parse_number(cols[2], nb) ||
        !detail::parse_number(cols[3], p)) {
      throw FormatError("change set line " + std::to_string(line_no) + " is malformed");
    }
    if (have_epoch && epoch != cs.epoch) throw FormatError("change set mixes epochs");
    cs.epoch = epoch;
    have_epoch = true;
    if (!grid.valid(cell) || !grid.valid(nb)) {
      throw DomainError("change set line " + std::to_string(line_no) + ": cell outside grid");
    }
    const auto dir = grid.direction_to(cell, nb);
    if (!dir) {
      throw DomainError("change set line " + std::to_string(line_no) + ": cells " +
                        std::to_string(cell) + " and " + std::to_string(nb) + " are not adjacent");
    }
    cs.changed[cell][index_of(*dir)] = p;
  }
  for (auto& [cell, row] : cs.changed) {
    double sum = 0;
    for (double p : row) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DomainError("change set row for cell " + std::to_string(cell) + " sums to " +
                        std::to_string(sum));
    }
    for (double& p : row) p /= sum;
  }
  if (cs.changed.empty()) throw DomainError("change set is empty");
  return cs;
}

inline ChangeSet parse_changeset(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open change set '" + path + "'");
  return parse_changeset(in, grid);
}

// Changed cell closest to `origin` in L1; ties go to the smaller id.
inline CellId nearest_changed_cell(CellId origin, const ChangeSet& cs, const Grid& grid) {
  if (cs.changed.empty()) throw DomainError("change set is empty");
  CellId best = cs.changed.begin()->first;
  int best_l = l1_distance(origin, best, grid);
  for (const auto& [cell, row] : cs.changed) {
    const int l = l1_distance(origin, cell, grid);
    if (l < best_l) best = cell, best_l = l;
  }
  return best;
}

// Destinations whose transition probabilities from `origin` can change when
// the outgoing row of `otp` changes, one set per detour d = 0, 2, ...
struct TaaRegion {
  CellId origin = 0;
  CellId otp = 0;
  std::vector<std::vector<CellId>> by_detour;  // [d / 2], ascending ids

  const std::vector<CellId>& at_detour(int d) const { return by_detour.at(static_cast<std::size_t>(d / 2)); }
};

namespace detail {

// One ring of 4-neighbors around the marked cells.
inline void dilate(const Grid& grid, std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> next = mask;
  for (CellId c = 0; c < grid.cell_count(); ++c) {
    if (!mask[c]) continue;
    for (auto d : kDirections) {
      if (auto nb = grid.neighbor(c, d)) next[*nb] = 1;
    }
  }
  mask.swap(next);
}

inline std::vector<CellId> cells_of(const std::vector<std::uint8_t>& mask) {
  std::vector<CellId> out;
  for (CellId c = 0; c < static_cast<CellId>(mask.size()); ++c) {
    if (mask[c]) out.push_back(c);
  }
  return out;
}

inline void mark_span(const Grid& grid, const Span2D& s, std::vector<std::uint8_t>& mask) {
  for (int r = s.row_lo; r <= s.row_hi; ++r) {
    for (int c = s.col_lo; c <= s.col_hi; ++c) mask[r * grid.side() + c] = 1;
  }
}

}  // namespace detail

// The zero-detour area is the closed rectangle beyond the OTP; each further
// two steps of detour take in the border neighbors of the previous area.
inline TaaRegion find_taa(CellId origin, CellId otp, int max_detour, const Grid& grid) {
  check_max_detour(max_detour);
  if (origin == otp) throw DomainError("find_taa undefined for origin == otp");
  TaaRegion region{origin, otp, {}};
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.cell_count()), 0);
  detail::mark_span(grid, rect_beyond_span(origin, otp, grid), mask);
  for (int d = 0; d <= max_detour; d += 2) {
    if (d > 0) detail::dilate(grid, mask);
    region.by_detour.push_back(detail::cells_of(mask));
  }
  return region;
}

enum class UpdateMode { paper, exact };

inline const char* to_string(UpdateMode m) { return m == UpdateMode::paper ? "paper" : "exact"; }

struct UpdateStats {
  UpdateMode mode = UpdateMode::exact;
  std::size_t recomputed_entries = 0;
  // Exact mode only: entries recomputed beyond the union of TAAs.
  std::size_t expanded_entries = 0;
  std::size_t full_retrain_entries = 0;
  std::size_t origins_touched = 0;
  double wall_ms = 0;
};

namespace detail {

// Zero-detour areas of all changed cells as seen from `origin`, as a mask.
// Quadrants of the same orientation are merged with one dominance sweep.
inline void union_of_rects(CellId origin, const ChangeSet& cs, const Grid& grid,
                           std::vector<std::uint8_t>& mask) {
  const int g = grid.side();
  const Cell o = grid.decode(origin);
  // seeds[q]: corners of quadrants extending (down|up) x (right|left).
  std::array<std::vector<std::uint8_t>, 4> seeds;
  std::array<bool, 4> used{};
  for (auto& s : seeds) s.assign(static_cast<std::size_t>(g) * g, 0);
  for (const auto& [c, row] : cs.changed) {
    if (c == origin) continue;
    const Cell cc = grid.decode(c);
    if (cc.row != o.row && cc.col != o.col) {
      const int q = (cc.row > o.row ? 0 : 2) + (cc.col > o.col ? 0 : 1);
      seeds[q][c] = 1;
      used[q] = true;
    } else {
      mark_span(grid, rect_beyond_span(origin, c, grid), mask);
    }
  }
  for (int q = 0; q < 4; ++q) {
    if (!used[q]) continue;
    const bool down = q < 2;
    const bool right = q % 2 == 0;
    auto& s = seeds[q];
    // Propagate marks along the quadrant's row and column directions.
    for (int step = 0; step < g; ++step) {
      const int r = down ? step : g - 1 - step;
      for (int k = 0; k < g; ++k) {
        const int c = right ? k : g - 1 - k;
        const int id = r * g + c;
        const int prev_r = down ? r - 1 : r + 1;
        const int prev_c = right ? c - 1 : c + 1;
        if (prev_r >= 0 && prev_r < g && s[prev_r * g + c]) s[id] = 1;
        if (prev_c >= 0 && prev_c < g && s[r * g + prev_c]) s[id] = 1;
      }
    }
    for (std::size_t k = 0; k < s.size(); ++k) mask[k] |= s[k];
  }
}

}  // namespace detail

// Replace the changed SSTP rows and refresh the affected TPD entries.
//
// paper: per origin, only the TAA of the nearest changed cell is recomputed,
//        in increasing path length, reading everything else as stored.
// exact: per origin, the union of TAAs of every changed cell is recomputed,
//        and any entry fed by a recomputed entry or a changed row is pulled
//        in as well, so the result equals a full retrain.
inline UpdateStats apply_update(TransitionModel& model, SstpMatrix& sstp, const ChangeSet& cs,
                                UpdateMode mode) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(model.grid() == sstp.grid())) throw DomainError("model and SSTP grids differ");
  validate_changeset(cs, sstp);
  if (cs.epoch < model.epoch()) {
    throw DomainError("change set epoch " + std::to_string(cs.epoch) + " is older than model epoch " +
                      std::to_string(model.epoch()));
  }

  for (const auto& [cell, row] : cs.changed) sstp.set_row(cell, row);
  const Grid& grid = model.grid();
  const int n = grid.cell_count();
  const int layers = model.layer_count();
  const TransitionKernel kernel(sstp);

  UpdateStats stats;
  stats.mode = mode;
  stats.full_retrain_entries = model.entry_count();

  std::vector<int> dist;
  std::vector<CellId> order;
  // region[layer * n + j]
  std::vector<std::uint8_t> region(static_cast<std::size_t>(layers) * n);
  std::vector<std::uint8_t> dirty(static_cast<std::size_t>(layers) * n);
  std::vector<std::uint8_t> base(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> total_dirty(static_cast<std::size_t>(n));

  for (CellId origin = 0; origin < n; ++origin) {
    kernel.distance_order(origin, dist, order);
    std::fill(region.begin(), region.end(), 0);
    std::fill(dirty.begin(), dirty.end(), 0);
    std::fill(total_dirty.begin(), total_dirty.end(), 0);

    const bool origin_changed = cs.contains(origin);
    if (mode == UpdateMode::paper) {
      const CellId otp = nearest_changed_cell(origin, cs, grid);
      if (otp == origin) {
        std::fill(region.begin(), region.end(), 1);
      } else {
        const TaaRegion taa = find_taa(origin, otp, model.max_detour(), grid);
        for (int layer = 0; layer < layers; ++layer) {
          for (CellId j : taa.by_detour[layer]) region[static_cast<std::size_t>(layer) * n + j] = 1;
        }
      }
    } else if (origin_changed) {
      std::fill(region.begin(), region.end(), 1);
    } else {
      std::fill(base.begin(), base.end(), 0);
      detail::union_of_rects(origin, cs, grid, base);
      for (int layer = 0; layer < layers; ++layer) {
        if (layer > 0) detail::dilate(grid, base);
        std::copy(base.begin(), base.end(), region.begin() + static_cast<std::ptrdiff_t>(layer) * n);
      }
    }

    // Entries that read an edge leaving a changed cell.
    std::vector<std::uint8_t>& pending = dirty;  // reused as "must recompute"
    if (mode == UpdateMode::exact) {
      for (const auto& [c, row] : cs.changed) {
        for (int d = 0; d < 4; ++d) {
          const CellId j = kernel.neighbor(c, d);
          if (j < 0) continue;
          const int first = dist[c] < dist[j] ? 0 : 1;
          for (int layer = first; layer < layers; ++layer) pending[static_cast<std::size_t>(layer) * n + j] = 1;
        }
      }
    }

    auto get = [&](int layer, CellId k) { return model.layer_value(layer, origin, k); };
    std::size_t touched = 0;
    for (int layer = 0; layer < layers; ++layer) {
      const auto off = static_cast<std::size_t>(layer) * n;
      for (CellId j : order) {
        const bool in_region = region[off + j] != 0;
        if (!in_region && !pending[off + j]) continue;
        if (layer == 0 && j == origin) continue;  // always exactly 1
        model.layer_value(layer, origin, j) = kernel.evaluate(origin, j, layer, dist.data(), get);
        ++touched;
        if (!in_region) ++stats.expanded_entries;
        total_dirty[j] = 1;
        if (mode == UpdateMode::exact) {
          // Dependents: farther neighbors in this layer, closer ones in the next.
          for (int d = 0; d < 4; ++d) {
            const CellId k = kernel.neighbor(j, d);
            if (k < 0) continue;
            if (dist[k] > dist[j]) {
              pending[off + k] = 1;
            } else if (layer + 1 < layers) {
              pending[off + n + k] = 1;
            }
          }
        }
      }
    }
    if (touched > 0) {
      ++stats.origins_touched;
      stats.recomputed_entries += touched;
      for (CellId j = 0; j < n; ++j) {
        if (total_dirty[j]) model.recompute_total(origin, j);
      }
    }
  }
  model.set_epoch(std::max(model.epoch(), cs.epoch));
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

}  // namespace edp
