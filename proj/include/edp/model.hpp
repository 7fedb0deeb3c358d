#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/sstp.hpp"
#include "edp/trajectory.hpp"

namespace edp {

inline constexpr int kDefaultMaxDetour = 8;

inline void check_max_detour(int max_detour) {
  if (max_detour < 0 || max_detour % 2 != 0) {
    throw DomainError("max_detour must be even and >= 0, got " + std::to_string(max_detour));
  }
}

// |T_{s,d}| and |T_s| from the first and last cell of each training trip.
class StartDestCounts {
 public:
  StartDestCounts() = default;

  static StartDestCounts from_paths(std::span<const CellPath> paths) {
    StartDestCounts c;
    for (const auto& p : paths) {
      if (!p.cells.empty()) c.add(p.start(), p.end());
    }
    return c;
  }

  void add(CellId s, CellId d, std::uint64_t n = 1) {
    counts_[s][d] += n;
    origin_totals_[s] += n;
  }

  std::uint64_t trips_from(CellId s) const {
    auto it = origin_totals_.find(s);
    return it == origin_totals_.end() ? 0 : it->second;
  }

  std::uint64_t count(CellId s, CellId d) const {
    auto it = counts_.find(s);
    if (it == counts_.end()) return 0;
    auto jt = it->second.find(d);
    return jt == it->second.end() ? 0 : jt->second;
  }

  // P(d|s) = |T_{s,d}| / |T_s|, zero for unseen origins.
  double conditional(CellId s, CellId d) const {
    const auto total = trips_from(s);
    return total == 0 ? 0.0 : static_cast<double>(count(s, d)) / static_cast<double>(total);
  }

  // Destinations observed from s, ascending by cell id.
  const std::map<CellId, std::uint64_t>* destinations(CellId s) const {
    auto it = counts_.find(s);
    return it == counts_.end() ? nullptr : &it->second;
  }

  const std::map<CellId, std::map<CellId, std::uint64_t>>& all() const noexcept { return counts_; }

  std::size_t pair_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [s, m] : counts_) n += m.size();
    return n;
  }

  friend bool operator==(const StartDestCounts&, const StartDestCounts&) = default;

 private:
  std::map<CellId, std::map<CellId, std::uint64_t>> counts_;
  std::map<CellId, std::uint64_t> origin_totals_;
};

// Precomputed neighbor ids and incoming single-step probabilities, shared by
// training and incremental update so both evaluate the recursion with the
// same operands in the same order.
class TransitionKernel {
 public:
  explicit TransitionKernel(const SstpMatrix& sstp)
      : side_(sstp.grid().side()), n_(sstp.cell_count()),
        neighbor_(static_cast<std::size_t>(n_) * 4, -1),
        incoming_(static_cast<std::size_t>(n_) * 4, 0.0) {
    refresh(sstp);
  }

  void refresh(const SstpMatrix& sstp) {
    const Grid& grid = sstp.grid();
    for (CellId j = 0; j < n_; ++j) {
      for (auto d : kDirections) {
        const auto slot = static_cast<std::size_t>(j) * 4 + index_of(d);
        if (const auto k = grid.neighbor(j, d)) {
          neighbor_[slot] = *k;
          incoming_[slot] = sstp.toward(*k, opposite(d));
        } else {
          neighbor_[slot] = -1;
          incoming_[slot] = 0.0;
        }
      }
    }
  }

  int side() const noexcept { return side_; }
  int cell_count() const noexcept { return n_; }
  CellId neighbor(CellId j, int d) const noexcept { return neighbor_[static_cast<std::size_t>(j) * 4 + d]; }

  // L1 distances from `origin` and the cells sorted by (distance, id).
  void distance_order(CellId origin, std::vector<int>& dist, std::vector<CellId>& order) const {
    dist.resize(static_cast<std::size_t>(n_));
    order.resize(static_cast<std::size_t>(n_));
    const int max_l = 2 * (side_ - 1);
    std::vector<int> bucket(static_cast<std::size_t>(max_l) + 2, 0);
    for (CellId j = 0; j < n_; ++j) {
      dist[j] = l1_unchecked(origin, j, side_);
      ++bucket[dist[j] + 1];
    }
    for (int l = 1; l <= max_l + 1; ++l) bucket[l] += bucket[l - 1];
    for (CellId j = 0; j < n_; ++j) order[bucket[dist[j]]++] = j;
  }

  // TPD of (origin, j) at detour layer `layer` (total length l1 + 2*layer).
  // Closer neighbors contribute from the same layer, farther neighbors from
  // the previous layer; together that is the sum over all four neighbors of
  // the walk probability one step shorter.
  template <typename Get>
  double evaluate(CellId origin, CellId j, int layer, const int* dist, Get&& get) const {
    if (layer == 0 && j == origin) return 1.0;
    const int lj = dist[j];
    const auto base = static_cast<std::size_t>(j) * 4;
    double acc = 0.0;
    for (int d = 0; d < 4; ++d) {
      const CellId k = neighbor_[base + d];
      if (k < 0) continue;
      if (dist[k] < lj) {
        acc += get(layer, k) * incoming_[base + d];
      } else if (layer > 0) {
        acc += get(layer - 1, k) * incoming_[base + d];
      }
    }
    return acc;
  }

 private:
  int side_;
  int n_;
  std::vector<CellId> neighbor_;
  std::vector<double> incoming_;
};

// Trained total transition probabilities.
//
// Stores TPD(i, j, l1(i,j) + d) for d in {0, 2, ..., max_detour} as dense
// layers indexed [layer][origin][dest], plus p(i->j), the sum over layers.
// Lengths of the wrong parity are never stored; they are zero by the
// checkerboard argument.
class TransitionModel {
 public:
  TransitionModel() = default;

  TransitionModel(Grid grid, int max_detour) : grid_(grid), max_detour_(max_detour) {
    check_max_detour(max_detour);
    const auto nn = static_cast<std::size_t>(grid.cell_count()) * grid.cell_count();
    tpd_.assign(nn * static_cast<std::size_t>(layer_count()), 0.0);
    totals_.assign(nn, 0.0);
  }

  const Grid& grid() const noexcept { return grid_; }
  int cell_count() const noexcept { return grid_.cell_count(); }
  int max_detour() const noexcept { return max_detour_; }
  int layer_count() const noexcept { return max_detour_ / 2 + 1; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  void set_epoch(std::uint64_t e) noexcept { epoch_ = e; }

  std::size_t entry_count() const noexcept { return tpd_.size(); }

  std::size_t index(int layer, CellId origin, CellId dest) const noexcept {
    const auto n = static_cast<std::size_t>(cell_count());
    return (static_cast<std::size_t>(layer) * n + static_cast<std::size_t>(origin)) * n +
           static_cast<std::size_t>(dest);
  }

  double layer_value(int layer, CellId origin, CellId dest) const {
    return tpd_[index(layer, origin, dest)];
  }
  double& layer_value(int layer, CellId origin, CellId dest) { return tpd_[index(layer, origin, dest)]; }

  // True when TPD(i, j, t) is kept, i.e. t = l1 + d with d an even stored detour.
  bool stored(CellId i, CellId j, int t) const {
    const int l = l1_distance(i, j, grid_);
    return t >= l && (t - l) % 2 == 0 && t - l <= max_detour_;
  }

  // TPD(i, j, t); zero for lengths that are not stored.
  double tpd(CellId i, CellId j, int t) const {
    if (!stored(i, j, t)) return 0.0;
    return layer_value((t - l1_distance(i, j, grid_)) / 2, i, j);
  }

  // ETP(i, j, l1(i,j)), the detour-free layer.
  double etp(CellId i, CellId j) const {
    grid_.check(i);
    grid_.check(j);
    return layer_value(0, i, j);
  }

  // p(i->j).
  double total(CellId i, CellId j) const {
    grid_.check(i);
    grid_.check(j);
    return totals_[static_cast<std::size_t>(i) * cell_count() + j];
  }
  double& total_ref(CellId i, CellId j) { return totals_[static_cast<std::size_t>(i) * cell_count() + j]; }

  void recompute_total(CellId i, CellId j) {
    double s = 0.0;
    for (int layer = 0; layer < layer_count(); ++layer) s += layer_value(layer, i, j);
    total_ref(i, j) = s;
  }

  std::span<const double> layers() const noexcept { return tpd_; }
  std::span<double> layers() noexcept { return tpd_; }
  std::span<const double> totals() const noexcept { return totals_; }
  std::span<double> totals() noexcept { return totals_; }

  const StartDestCounts& start_dest() const noexcept { return start_dest_; }
  void set_start_dest(StartDestCounts c) { start_dest_ = std::move(c); }

  friend bool operator==(const TransitionModel&, const TransitionModel&) = default;

 private:
  Grid grid_{};
  int max_detour_ = 0;
  std::uint64_t epoch_ = 0;
  std::vector<double> tpd_;
  std::vector<double> totals_;
  StartDestCounts start_dest_;
};

// ETP(origin, j, l1) for every j, through the relative-adjacent-pair
// recursion: reaching j along a shortest route means arriving from one of
// the one or two RAP cells.
inline std::vector<double> compute_etp(const SstpMatrix& sstp, CellId origin) {
  const Grid& grid = sstp.grid();
  grid.check(origin);
  TransitionKernel kernel(sstp);
  std::vector<int> dist;
  std::vector<CellId> order;
  kernel.distance_order(origin, dist, order);
  std::vector<double> etp(static_cast<std::size_t>(grid.cell_count()), 0.0);
  etp[origin] = 1.0;
  for (CellId j : order) {
    if (j == origin) continue;
    double acc = 0.0;
    for (CellId a : relative_adjacent_pair(origin, j, grid)) acc += etp[a] * sstp.prob(a, j);
    etp[j] = acc;
  }
  return etp;
}

// All stored TPD layers of one origin; result[layer][j] is
// TPD(origin, j, l1 + 2*layer).
inline std::vector<std::vector<double>> compute_tpd_layers(const SstpMatrix& sstp, CellId origin,
                                                           int max_detour) {
  check_max_detour(max_detour);
  sstp.grid().check(origin);
  const int layers = max_detour / 2 + 1;
  const auto n = static_cast<std::size_t>(sstp.cell_count());
  TransitionKernel kernel(sstp);
  std::vector<int> dist;
  std::vector<CellId> order;
  kernel.distance_order(origin, dist, order);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(layers), std::vector<double>(n, 0.0));
  auto get = [&](int layer, CellId k) { return out[layer][k]; };
  for (int layer = 0; layer < layers; ++layer) {
    for (CellId j : order) out[layer][j] = kernel.evaluate(origin, j, layer, dist.data(), get);
  }
  return out;
}

namespace detail {

inline void train_origin(const TransitionKernel& kernel, TransitionModel& model, CellId origin,
                         std::vector<int>& dist, std::vector<CellId>& order) {
  kernel.distance_order(origin, dist, order);
  auto get = [&](int layer, CellId k) { return model.layer_value(layer, origin, k); };
  for (int layer = 0; layer < model.layer_count(); ++layer) {
    for (CellId j : order) {
      model.layer_value(layer, origin, j) = kernel.evaluate(origin, j, layer, dist.data(), get);
    }
  }
  for (CellId j = 0; j < model.cell_count(); ++j) model.recompute_total(origin, j);
}

}  // namespace detail

// Shortest routes first, then detour layers two steps at a time, summing
// every layer into p(i->j).
inline TransitionModel train_initial(const SstpMatrix& sstp, StartDestCounts start_dest,
                                     int max_detour = kDefaultMaxDetour) {
  TransitionModel model(sstp.grid(), max_detour);
  model.set_start_dest(std::move(start_dest));
  const TransitionKernel kernel(sstp);
  std::vector<int> dist;
  std::vector<CellId> order;
  for (CellId origin = 0; origin < sstp.cell_count(); ++origin) {
    detail::train_origin(kernel, model, origin, dist, order);
  }
  return model;
}

}  // namespace edp
