#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edp/grid.hpp"

namespace edp {

struct GpsPoint {
  std::int64_t timestamp = 0;  // unix seconds
  double lat = 0;
  double lon = 0;
};

struct RawTrajectory {
  std::string trip_id;
  std::vector<GpsPoint> points;
};

// A trip as a sequence of 4-adjacent grid cells, no consecutive repeats.
struct CellPath {
  std::string trip_id;
  std::vector<CellId> cells;
  double trip_km = 0;

  CellId start() const { return cells.front(); }
  CellId end() const { return cells.back(); }
  std::size_t transitions() const { return cells.empty() ? 0 : cells.size() - 1; }
};

}  // namespace edp
