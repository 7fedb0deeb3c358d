#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/sstp.hpp"
#include "edp/trajectory.hpp"

namespace edp {

// ---------------------------------------------------------------------------
// Trajectory CSV: trip_id,seq,timestamp,lat,lon

struct ParseReport {
  std::vector<RawTrajectory> trajectories;
  std::size_t rows = 0;             // data rows seen, header excluded
  std::size_t malformed_rows = 0;
  std::size_t dropped_points = 0;   // outside the bounding box
  std::size_t dropped_trips = 0;    // fewer than 2 points left, or time going backwards
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

}  // namespace detail

// Groups rows by trip_id (first-appearance order) and sorts points by seq.
// Points outside `bbox_filter` are dropped.
inline ParseReport parse_trajectories(std::istream& in,
                                      const std::optional<GridMap>& bbox_filter = std::nullopt) {
  ParseReport report;
  std::string line;
  bool header_seen = false;

  struct Row {
    std::int64_t seq;
    GpsPoint point;
  };
  std::map<std::string, std::size_t> index;
  std::vector<std::pair<std::string, std::vector<Row>>> groups;

  while (std::getline(in, line)) {
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (view.rfind("trip_id", 0) == 0) continue;
    }
    ++report.rows;
    const auto cols = detail::split_csv(view);
    Row row{};
    if (cols.size() != 5 || detail::trim(cols[0]).empty() ||
        !detail::parse_number(cols[1], row.seq) ||
        !detail::parse_number(cols[2], row.point.timestamp) ||
        !detail::parse_number(cols[3], row.point.lat) ||
        !detail::parse_number(cols[4], row.point.lon) || !std::isfinite(row.point.lat) ||
        !std::isfinite(row.point.lon)) {
      ++report.malformed_rows;
      continue;
    }
    if (bbox_filter && !bbox_filter->contains(row.point.lat, row.point.lon)) {
      ++report.dropped_points;
      continue;
    }
    std::string id(detail::trim(cols[0]));
    auto [it, inserted] = index.try_emplace(id, groups.size());
    if (inserted) groups.emplace_back(id, std::vector<Row>{});
    groups[it->second].second.push_back(row);
  }

  if (report.rows > 0 && 2 * report.malformed_rows > report.rows) {
    throw FormatError("trajectory CSV: " + std::to_string(report.malformed_rows) + " of " +
                      std::to_string(report.rows) + " rows malformed");
  }

  for (auto& [id, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.seq < b.seq; });
    RawTrajectory t{id, {}};
    t.points.reserve(rows.size());
    bool monotone = true;
    for (const auto& r : rows) {
      if (!t.points.empty() && r.point.timestamp < t.points.back().timestamp) monotone = false;
      t.points.push_back(r.point);
    }
    if (t.points.size() < 2 || !monotone) {
      ++report.dropped_trips;
      continue;
    }
    report.trajectories.push_back(std::move(t));
  }
  return report;
}

inline ParseReport parse_trajectories(const std::string& path,
                                      const std::optional<GridMap>& bbox_filter = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file '" + path + "'");
  return parse_trajectories(in, bbox_filter);
}

// Smallest box holding every point, padded slightly so max-edge points land
// inside the grid.
inline BoundingBox bounding_box_of(std::span<const RawTrajectory> trips) {
  BoundingBox b{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
                std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  for (const auto& t : trips) {
    for (const auto& p : t.points) {
      b.lat_min = std::min(b.lat_min, p.lat);
      b.lat_max = std::max(b.lat_max, p.lat);
      b.lon_min = std::min(b.lon_min, p.lon);
      b.lon_max = std::max(b.lon_max, p.lon);
    }
  }
  if (b.lat_min > b.lat_max) throw DomainError("no points to bound");
  const double pad_lat = std::max(1e-6, 1e-6 * (b.lat_max - b.lat_min));
  const double pad_lon = std::max(1e-6, 1e-6 * (b.lon_max - b.lon_min));
  return {b.lat_min - pad_lat, b.lat_max + pad_lat, b.lon_min - pad_lon, b.lon_max + pad_lon};
}

// ---------------------------------------------------------------------------
// Discretization

// Appends the cells strictly after `from` up to and including `to`, moving
// vertically first and then horizontally.
inline void append_staircase(CellId from, CellId to, const Grid& grid, std::vector<CellId>& out) {
  Cell cur = grid.decode(from);
  const Cell dst = grid.decode(to);
  while (cur.row != dst.row) {
    cur.row += cur.row < dst.row ? 1 : -1;
    out.push_back(grid.encode(cur));
  }
  while (cur.col != dst.col) {
    cur.col += cur.col < dst.col ? 1 : -1;
    out.push_back(grid.encode(cur));
  }
}

enum class SingleCellPolicy { reject, allow };

// Maps points to cells, collapses repeats and bridges gaps so the result is a
// 4-adjacent walk. trip_km is measured on the raw points.
inline CellPath discretize(const RawTrajectory& t, const GridMap& map,
                           SingleCellPolicy policy = SingleCellPolicy::reject) {
  CellPath out{t.trip_id, {}, 0.0};
  const Grid& grid = map.grid();
  for (std::size_t k = 0; k < t.points.size(); ++k) {
    const auto& p = t.points[k];
    const CellId c = map.cell_of(p.lat, p.lon);
    if (k > 0) {
      const auto& q = t.points[k - 1];
      out.trip_km += haversine_km(q.lat, q.lon, p.lat, p.lon);
    }
    if (out.cells.empty()) {
      out.cells.push_back(c);
    } else if (out.cells.back() != c) {
      append_staircase(out.cells.back(), c, grid, out.cells);
    }
  }
  if (out.cells.empty() || (out.cells.size() < 2 && policy == SingleCellPolicy::reject)) {
    throw DegenerateTripError("trip '" + t.trip_id + "' covers fewer than two distinct cells");
  }
  return out;
}

// Cell centers of a path, one point per cell.
inline RawTrajectory centers_of(const CellPath& path, const GridMap& map,
                                std::int64_t t0 = 1'600'000'000, std::int64_t dt = 60) {
  RawTrajectory t{path.trip_id, {}};
  t.points.reserve(path.cells.size());
  for (std::size_t k = 0; k < path.cells.size(); ++k) {
    const LatLon c = map.center(path.cells[k]);
    t.points.push_back({t0 + dt * static_cast<std::int64_t>(k), c.lat, c.lon});
  }
  return t;
}

struct DiscretizeReport {
  std::vector<CellPath> paths;
  std::size_t degenerate = 0;
};

inline DiscretizeReport discretize_all(std::span<const RawTrajectory> trips, const GridMap& map) {
  DiscretizeReport r;
  r.paths.reserve(trips.size());
  for (const auto& t : trips) {
    try {
      r.paths.push_back(discretize(t, map));
    } catch (const DegenerateTripError&) {
      ++r.degenerate;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Trip distance histogram

// Equal-width bins [i*w, (i+1)*w) over total trip distance.
class TripDistanceHistogram {
 public:
  TripDistanceHistogram() = default;

  TripDistanceHistogram(double bin_width_km, std::span<const double> distances_km)
      : bin_width_(bin_width_km) {
    if (!(bin_width_km > 0)) throw DomainError("bin width must be positive");
    if (distances_km.empty()) throw DomainError("histogram needs at least one trip");
    for (double d : distances_km) {
      if (!(d >= 0) || !std::isfinite(d)) throw DomainError("trip distance must be finite and >= 0");
      const auto bin = static_cast<std::size_t>(std::floor(d / bin_width_));
      if (bin >= counts_.size()) counts_.resize(bin + 1, 0);
      ++counts_[bin];
      ++total_;
    }
  }

  double bin_width_km() const noexcept { return bin_width_; }
  std::size_t bin_count() const noexcept { return counts_.size(); }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t count(std::size_t bin) const { return counts_.at(bin); }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  double boundary(std::size_t i) const noexcept { return bin_width_ * static_cast<double>(i); }

  // Sum of d_i P(d_i <= D < d_{i+1}) with d_i the left bin boundary.
  double expectation() const noexcept {
    double s = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) s += boundary(i) * static_cast<double>(counts_[i]);
    return total_ == 0 ? 0.0 : s / static_cast<double>(total_);
  }

 private:
  double bin_width_ = 1.0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline TripDistanceHistogram build_histogram(std::span<const CellPath> paths, double bin_width_km = 1.0) {
  std::vector<double> d;
  d.reserve(paths.size());
  for (const auto& p : paths) d.push_back(p.trip_km);
  return TripDistanceHistogram(bin_width_km, d);
}

// ---------------------------------------------------------------------------
// Synthetic worlds

// Random row-stochastic SSTP with every in-grid direction strictly positive.
inline SstpMatrix random_sstp(const Grid& grid, std::uint64_t seed, double min_weight = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(min_weight, 1.0);
  std::vector<NeighborRow> rows(static_cast<std::size_t>(grid.cell_count()));
  for (CellId c = 0; c < grid.cell_count(); ++c) {
    NeighborRow r{};
    double sum = 0;
    for (auto d : kDirections) {
      if (grid.neighbor(c, d)) {
        r[index_of(d)] = w(rng);
        sum += r[index_of(d)];
      }
    }
    for (double& p : r) p /= sum;
    rows[c] = r;
  }
  return SstpMatrix::from_rows(grid, rows);
}

struct SyntheticConfig {
  int g = 10;
  int n_trips = 1000;
  std::uint64_t seed = 42;
  // Probability that a trip gets one out-and-back spur (2 extra steps).
  double detour_rate = 0.0;
  // 0 picks max(2, g / 4).
  int attractors = 0;
  // Chance of ending the trip after each step before an attractor is hit.
  double stop_hazard = 0.05;
  // Distance charged per step.
  double cell_km = 1.0;
};

struct SyntheticWorld {
  Grid grid;
  std::vector<CellId> attractors;
  SstpMatrix truth;  // exactly the matrix the walks were sampled from
  std::vector<CellPath> trips;
};

// Walks that follow a flow field toward the nearest attractor.
//
// Every non-attractor cell only moves along directions that shorten the L1
// distance to its nearest attractor, so every walk is a shortest lattice path
// and each visit samples the cell's row independently of how it got there.
// Spurs are inserted after the walk and are not drawn from `truth`.
inline SyntheticWorld generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_trips < 1) throw DomainError("n_trips must be >= 1");
  if (cfg.detour_rate < 0 || cfg.detour_rate > 1) throw DomainError("detour_rate must be in [0,1]");
  if (cfg.stop_hazard < 0 || cfg.stop_hazard >= 1) throw DomainError("stop_hazard must be in [0,1)");
  const Grid grid(cfg.g);
  const int n = grid.cell_count();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int n_attr = cfg.attractors > 0 ? cfg.attractors : std::max(2, cfg.g / 4);
  n_attr = std::min(n_attr, n - 1);
  std::vector<CellId> pool(static_cast<std::size_t>(n));
  for (CellId c = 0; c < n; ++c) pool[c] = c;
  std::vector<CellId> attractors;
  for (int k = 0; k < n_attr; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t idx = pick(rng);
    attractors.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  std::vector<std::uint8_t> is_attractor(static_cast<std::size_t>(n), 0);
  for (CellId a : attractors) is_attractor[a] = 1;

  std::vector<NeighborRow> rows(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> weight(0.25, 1.0);
  for (CellId c = 0; c < n; ++c) {
    NeighborRow r{};
    if (is_attractor[c]) {
      const double p = 1.0 / grid.neighbor_count(c);
      for (auto d : kDirections) {
        if (grid.neighbor(c, d)) r[index_of(d)] = p;
      }
    } else {
      CellId target = attractors.front();
      int best = l1_unchecked(c, target, cfg.g);
      for (CellId a : attractors) {
        const int l = l1_unchecked(c, a, cfg.g);
        if (l < best) best = l, target = a;
      }
      double sum = 0;
      for (auto d : kDirections) {
        const auto nb = grid.neighbor(c, d);
        if (nb && l1_unchecked(*nb, target, cfg.g) < best) {
          r[index_of(d)] = weight(rng);
          sum += r[index_of(d)];
        }
      }
      for (double& p : r) p /= sum;
    }
    rows[c] = r;
  }
  SyntheticWorld world{grid, attractors, SstpMatrix::from_rows(grid, rows), {}};

  std::uniform_int_distribution<std::size_t> pick_start(0, pool.size() - 1);
  world.trips.reserve(static_cast<std::size_t>(cfg.n_trips));
  for (int t = 0; t < cfg.n_trips; ++t) {
    CellPath path{"syn-" + std::to_string(t), {}, 0.0};
    CellId cur = pool[pick_start(rng)];
    path.cells.push_back(cur);
    while (!is_attractor[cur]) {
      const auto& row = world.truth.row(cur);
      double u = unit(rng);
      Direction chosen = Direction::up;
      bool found = false;
      for (auto d : kDirections) {
        const double p = row[index_of(d)];
        if (p <= 0) continue;
        chosen = d;
        found = true;
        if (u < p) break;
        u -= p;
      }
      if (!found) break;
      cur = *grid.neighbor(cur, chosen);
      path.cells.push_back(cur);
      if (unit(rng) < cfg.stop_hazard) break;
    }
    if (cfg.detour_rate > 0 && unit(rng) < cfg.detour_rate) {
      // Out-and-back spur at a random position, avoiding the path's own
      // neighbors when possible.
      std::uniform_int_distribution<std::size_t> pos(0, path.cells.size() - 1);
      const std::size_t k = pos(rng);
      const CellId x = path.cells[k];
      std::vector<CellId> options;
      for (auto d : kDirections) {
        const auto nb = grid.neighbor(x, d);
        if (!nb) continue;
        const bool prev = k > 0 && path.cells[k - 1] == *nb;
        const bool next = k + 1 < path.cells.size() && path.cells[k + 1] == *nb;
        if (!prev && !next) options.push_back(*nb);
      }
      if (options.empty()) {
        for (auto d : kDirections) {
          if (auto nb = grid.neighbor(x, d)) options.push_back(*nb);
        }
      }
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      const CellId y = options[pick(rng)];
      const auto at = path.cells.begin() + static_cast<std::ptrdiff_t>(k + 1);
      path.cells.insert(at, {y, x});
    }
    path.trip_km = cfg.cell_km * static_cast<double>(path.transitions());
    world.trips.push_back(std::move(path));
  }
  return world;
}

inline SyntheticWorld generate_synthetic(int g, int n_trips, std::uint64_t seed, double detour_rate) {
  SyntheticConfig cfg;
  cfg.g = g;
  cfg.n_trips = n_trips;
  cfg.seed = seed;
  cfg.detour_rate = detour_rate;
  return generate_synthetic(cfg);
}

// Box near San Francisco whose cells measure about cell_km on each side.
inline BoundingBox synthetic_box(int g, double cell_km = 1.0) {
  constexpr double lat0 = 37.70, lon0 = -122.52;
  const double km_per_deg_lat = kEarthRadiusKm * std::numbers::pi / 180.0;
  const double dlat = g * cell_km / km_per_deg_lat;
  const double mid = (lat0 + dlat / 2) * std::numbers::pi / 180.0;
  const double dlon = g * cell_km / (km_per_deg_lat * std::cos(mid));
  return {lat0, lat0 + dlat, lon0, lon0 + dlon};
}

// Writes paths as trajectory CSV, one point per cell at the cell center.
inline void write_trajectory_csv(std::ostream& out, std::span<const CellPath> paths,
                                 const GridMap& map) {
  out << "trip_id,seq,timestamp,lat,lon\n";
  out << std::setprecision(10) << std::fixed;
  for (const auto& p : paths) {
    const RawTrajectory t = centers_of(p, map);
    for (std::size_t k = 0; k < t.points.size(); ++k) {
      out << t.trip_id << ',' << k << ',' << t.points[k].timestamp << ',' << t.points[k].lat << ','
          << t.points[k].lon << '\n';
    }
  }
}

}  // namespace edp
