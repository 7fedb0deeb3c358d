#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "edp/errors.hpp"

namespace edp {

// Row-major cell index: id = row * g + col, row 0 at the top (north).
using CellId = std::int32_t;

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Neighbor directions. The numeric order is also the summation order used by
// every transition recursion, so keep it stable.
enum class Direction : std::uint8_t { up = 0, down = 1, left = 2, right = 3 };

inline constexpr std::array<Direction, 4> kDirections = {
    Direction::up, Direction::down, Direction::left, Direction::right};

constexpr Direction opposite(Direction d) noexcept {
  switch (d) {
    case Direction::up: return Direction::down;
    case Direction::down: return Direction::up;
    case Direction::left: return Direction::right;
    case Direction::right: return Direction::left;
  }
  return d;
}

constexpr int index_of(Direction d) noexcept { return static_cast<int>(d); }

// Square lattice of g x g cells. Pure geometry, no coordinates.
class Grid {
 public:
  Grid() = default;
  explicit Grid(int side) : side_(side) {
    if (side < 2) throw DomainError("grid side must be >= 2, got " + std::to_string(side));
  }

  int side() const noexcept { return side_; }
  int cell_count() const noexcept { return side_ * side_; }

  bool valid(CellId id) const noexcept { return id >= 0 && id < cell_count(); }

  void check(CellId id) const {
    if (!valid(id)) {
      throw DomainError("cell id " + std::to_string(id) + " outside grid of side " +
                        std::to_string(side_));
    }
  }

  Cell decode(CellId id) const {
    check(id);
    return {id / side_, id % side_};
  }

  CellId encode(Cell c) const {
    if (c.row < 0 || c.row >= side_ || c.col < 0 || c.col >= side_) {
      throw DomainError("cell (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                        ") outside grid");
    }
    return c.row * side_ + c.col;
  }

  // Neighbor of `id` in direction `d`, or nullopt at the border.
  std::optional<CellId> neighbor(CellId id, Direction d) const noexcept {
    const int row = id / side_;
    const int col = id % side_;
    switch (d) {
      case Direction::up:
        if (row > 0) return id - side_;
        break;
      case Direction::down:
        if (row + 1 < side_) return id + side_;
        break;
      case Direction::left:
        if (col > 0) return id - 1;
        break;
      case Direction::right:
        if (col + 1 < side_) return id + 1;
        break;
    }
    return std::nullopt;
  }

  int neighbor_count(CellId id) const noexcept {
    int n = 0;
    for (auto d : kDirections) n += neighbor(id, d).has_value() ? 1 : 0;
    return n;
  }

  bool adjacent(CellId a, CellId b) const noexcept {
    if (!valid(a) || !valid(b)) return false;
    const int dr = std::abs(a / side_ - b / side_);
    const int dc = std::abs(a % side_ - b % side_);
    return dr + dc == 1;
  }

  // Direction from a to its 4-neighbor b.
  std::optional<Direction> direction_to(CellId a, CellId b) const noexcept {
    for (auto d : kDirections) {
      if (neighbor(a, d) == b) return d;
    }
    return std::nullopt;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int side_ = 2;
};

inline int l1_distance(CellId a, CellId b, const Grid& grid) {
  const Cell ca = grid.decode(a);
  const Cell cb = grid.decode(b);
  return std::abs(ca.row - cb.row) + std::abs(ca.col - cb.col);
}

// Unchecked variant for inner loops where ids are known to be valid.
inline int l1_unchecked(CellId a, CellId b, int side) noexcept {
  return std::abs(a / side - b / side) + std::abs(a % side - b % side);
}

// True iff a walk of exactly `steps` moves on the 4-adjacency lattice (no
// self-loops) can go from a to b. Distance must be covered and the leftover
// must be even, since every move flips the checkerboard color.
inline bool parity_reachable(CellId a, CellId b, int steps, const Grid& grid) {
  if (steps < 0) throw DomainError("steps must be non-negative");
  const int l = l1_distance(a, b, grid);
  if (steps < l || (steps - l) % 2 != 0) return false;
  // A zero-length remainder is always fine; a positive even remainder needs
  // a neighbor to bounce off, which every cell has when g >= 2.
  return true;
}

// One or two cells, stored inline.
struct CellSet2 {
  std::array<CellId, 2> cells{};
  int size = 0;

  const CellId* begin() const noexcept { return cells.data(); }
  const CellId* end() const noexcept { return cells.data() + size; }
  bool contains(CellId c) const noexcept { return std::find(begin(), end(), c) != end(); }
};

// The neighbors of j that lie on a shortest route from i. Vertical neighbor
// first, then horizontal. Same row or column gives a single cell.
inline CellSet2 relative_adjacent_pair(CellId i, CellId j, const Grid& grid) {
  if (i == j) throw DomainError("relative adjacent pair undefined for i == j");
  const Cell ci = grid.decode(i);
  const Cell cj = grid.decode(j);
  CellSet2 out;
  if (ci.row != cj.row) {
    const int step = ci.row < cj.row ? -1 : 1;
    out.cells[out.size++] = grid.encode({cj.row + step, cj.col});
  }
  if (ci.col != cj.col) {
    const int step = ci.col < cj.col ? -1 : 1;
    out.cells[out.size++] = grid.encode({cj.row, cj.col + step});
  }
  return out;
}

// Inclusive row/column span.
struct Span2D {
  int row_lo = 0, row_hi = 0, col_lo = 0, col_hi = 0;
};

// Closed region beyond j as seen from i. Distinct row and column gives the
// quadrant diagonal from i. Shared row or column gives the 1-D ray from j
// away from i.
inline Span2D rect_beyond_span(CellId i, CellId j, const Grid& grid) {
  if (i == j) throw DomainError("rect_beyond undefined for i == j");
  const Cell ci = grid.decode(i);
  const Cell cj = grid.decode(j);
  const int last = grid.side() - 1;
  Span2D s{cj.row, cj.row, cj.col, cj.col};
  if (ci.row < cj.row) s.row_hi = last;
  if (ci.row > cj.row) s.row_lo = 0;
  if (ci.col < cj.col) s.col_hi = last;
  if (ci.col > cj.col) s.col_lo = 0;
  return s;
}

// Cells of rect_beyond_span in ascending id order.
inline std::vector<CellId> rect_beyond(CellId i, CellId j, const Grid& grid) {
  const Span2D s = rect_beyond_span(i, j, grid);
  std::vector<CellId> out;
  out.reserve(static_cast<std::size_t>((s.row_hi - s.row_lo + 1) * (s.col_hi - s.col_lo + 1)));
  for (int r = s.row_lo; r <= s.row_hi; ++r) {
    for (int c = s.col_lo; c <= s.col_hi; ++c) out.push_back(r * grid.side() + c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geography

inline constexpr double kEarthRadiusKm = 6371.0088;

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) noexcept {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  const double dlat = (lat2 - lat1) * kDeg;
  const double dlon = (lon2 - lon1) * kDeg;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

struct BoundingBox {
  double lat_min = 0, lat_max = 0, lon_min = 0, lon_max = 0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct LatLon {
  double lat = 0;
  double lon = 0;
};

// Geographic bounding box split into g x g cells.
class GridMap {
 public:
  GridMap() = default;
  GridMap(BoundingBox box, int g) : box_(box), grid_(g) {
    if (!(box.lat_min < box.lat_max) || !(box.lon_min < box.lon_max)) {
      throw DomainError("bounding box must satisfy lat_min < lat_max and lon_min < lon_max");
    }
    const double mid_lat = 0.5 * (box.lat_min + box.lat_max);
    cell_width_km_ = haversine_km(mid_lat, box.lon_min, mid_lat, box.lon_max) / g;
    cell_height_km_ = haversine_km(box.lat_min, box.lon_min, box.lat_max, box.lon_min) / g;
  }

  const BoundingBox& box() const noexcept { return box_; }
  const Grid& grid() const noexcept { return grid_; }
  int side() const noexcept { return grid_.side(); }
  double cell_width_km() const noexcept { return cell_width_km_; }
  double cell_height_km() const noexcept { return cell_height_km_; }
  double cell_pitch_km() const noexcept { return 0.5 * (cell_width_km_ + cell_height_km_); }

  bool contains(double lat, double lon) const noexcept {
    return lat >= box_.lat_min && lat <= box_.lat_max && lon >= box_.lon_min &&
           lon <= box_.lon_max;
  }

  CellId cell_of(double lat, double lon) const {
    if (!contains(lat, lon)) throw DomainError("point outside bounding box");
    const int g = grid_.side();
    const double fr = (box_.lat_max - lat) / (box_.lat_max - box_.lat_min);
    const double fc = (lon - box_.lon_min) / (box_.lon_max - box_.lon_min);
    const int row = std::clamp(static_cast<int>(std::floor(fr * g)), 0, g - 1);
    const int col = std::clamp(static_cast<int>(std::floor(fc * g)), 0, g - 1);
    return row * g + col;
  }

  LatLon center(CellId id) const {
    const Cell c = grid_.decode(id);
    const int g = grid_.side();
    const double lat = box_.lat_max - (c.row + 0.5) * (box_.lat_max - box_.lat_min) / g;
    const double lon = box_.lon_min + (c.col + 0.5) * (box_.lon_max - box_.lon_min) / g;
    return {lat, lon};
  }

  double center_distance_km(CellId a, CellId b) const {
    const LatLon pa = center(a);
    const LatLon pb = center(b);
    return haversine_km(pa.lat, pa.lon, pb.lat, pb.lon);
  }

 private:
  BoundingBox box_{};
  Grid grid_{};
  double cell_width_km_ = 0;
  double cell_height_km_ = 0;
};

}  // namespace edp
