#include <gtest/gtest.h>

#include <sstream>

#include "edp/ingest.hpp"
#include "edp/sstp.hpp"

using namespace edp;

namespace {

const BoundingBox kBox{37.0, 38.0, -123.0, -122.0};

RawTrajectory trip_through(const GridMap& m, std::initializer_list<CellId> cells) {
  RawTrajectory t{"t", {}};
  std::int64_t ts = 0;
  for (CellId c : cells) {
    const auto p = m.center(c);
    t.points.push_back({ts, p.lat, p.lon});
    ts += 30;
  }
  return t;
}

}  // namespace

TEST(ParseTrajectories, MinimalFile) {
  std::istringstream in("trip_id,seq,timestamp,lat,lon\nA,0,100,37.5,-122.5\nA,1,160,37.6,-122.4\n");
  const auto r = parse_trajectories(in);
  ASSERT_EQ(r.trajectories.size(), 1u);
  EXPECT_EQ(r.trajectories[0].trip_id, "A");
  EXPECT_EQ(r.trajectories[0].points.size(), 2u);
  EXPECT_EQ(r.malformed_rows, 0u);
}

TEST(ParseTrajectories, DropsPointsOutsideBox) {
  const GridMap m(kBox, 10);
  std::istringstream in(
      "trip_id,seq,timestamp,lat,lon\n"
      "A,0,100,37.5,-122.5\nA,1,160,37.6,-122.4\nA,2,220,39.0,-122.4\nA,3,280,37.7,-122.3\n");
  const auto r = parse_trajectories(in, m);
  EXPECT_EQ(r.dropped_points, 1u);
  ASSERT_EQ(r.trajectories.size(), 1u);
  EXPECT_EQ(r.trajectories[0].points.size(), 3u);
}

TEST(ParseTrajectories, SortsBySeq) {
  std::istringstream in(
      "trip_id,seq,timestamp,lat,lon\nA,2,300,37.3,-122.5\nA,0,100,37.1,-122.5\nA,1,200,37.2,-122.5\n");
  const auto r = parse_trajectories(in);
  ASSERT_EQ(r.trajectories.size(), 1u);
  const auto& p = r.trajectories[0].points;
  EXPECT_EQ(p[0].timestamp, 100);
  EXPECT_EQ(p[1].timestamp, 200);
  EXPECT_EQ(p[2].timestamp, 300);
}

TEST(ParseTrajectories, CountsMalformedRowsAndFailsAboveHalf) {
  std::istringstream ok(
      "trip_id,seq,timestamp,lat,lon\nA,0,100,37.5,-122.5\nA,1,160,37.6,-122.4\nA,x,1,2,3\n");
  EXPECT_EQ(parse_trajectories(ok).malformed_rows, 1u);
  std::istringstream bad("trip_id,seq,timestamp,lat,lon\nA,0,100,37.5,-122.5\nA,x,1,2,3\nA,1,2\n");
  EXPECT_THROW(parse_trajectories(bad), FormatError);
}

TEST(ParseTrajectories, DropsShortAndBackwardsTrips) {
  std::istringstream in(
      "trip_id,seq,timestamp,lat,lon\n"
      "A,0,100,37.5,-122.5\n"
      "B,0,100,37.5,-122.5\nB,1,50,37.6,-122.5\n"
      "C,0,100,37.5,-122.5\nC,1,100,37.6,-122.5\n");
  const auto r = parse_trajectories(in);
  EXPECT_EQ(r.dropped_trips, 2u);
  ASSERT_EQ(r.trajectories.size(), 1u);
  EXPECT_EQ(r.trajectories[0].trip_id, "C");
}

TEST(ParseTrajectories, MissingFileIsIoError) {
  EXPECT_THROW(parse_trajectories(std::string("/nonexistent/trips.csv")), IoError);
}

TEST(Discretize, SingleCellTripIsDegenerate) {
  const GridMap m(kBox, 10);
  EXPECT_THROW(discretize(trip_through(m, {7, 7, 7}), m), DegenerateTripError);
  EXPECT_EQ(discretize(trip_through(m, {7, 7}), m, SingleCellPolicy::allow).cells,
            (std::vector<CellId>{7}));
}

TEST(Discretize, CollapsesDuplicates) {
  const GridMap m(kBox, 10);
  EXPECT_EQ(discretize(trip_through(m, {5, 5, 6, 6, 7}), m).cells, (std::vector<CellId>{5, 6, 7}));
}

TEST(Discretize, BridgesVerticalFirst) {
  const GridMap m(kBox, 10);
  const auto p = discretize(trip_through(m, {0, 11}), m);
  EXPECT_EQ(p.cells, (std::vector<CellId>{0, 10, 11}));
  EXPECT_EQ(p.transitions(), 2u);
  const auto q = discretize(trip_through(m, {99, 0}), m);
  EXPECT_EQ(q.transitions(), 18u);
  for (std::size_t k = 0; k + 1 < q.cells.size(); ++k) EXPECT_TRUE(m.grid().adjacent(q.cells[k], q.cells[k + 1]));
}

TEST(Discretize, TripKmFromRawPoints) {
  const GridMap m(kBox, 10);
  const auto t = trip_through(m, {0, 1, 2});
  const auto p = discretize(t, m);
  const double expected = haversine_km(t.points[0].lat, t.points[0].lon, t.points[1].lat, t.points[1].lon) +
                          haversine_km(t.points[1].lat, t.points[1].lon, t.points[2].lat, t.points[2].lon);
  EXPECT_DOUBLE_EQ(p.trip_km, expected);
}

TEST(Discretize, IdempotentOnCellCenters) {
  const GridMap m(kBox, 12);
  const auto world = generate_synthetic(12, 50, 3, 0.5);
  for (const auto& p : world.trips) {
    const auto again = discretize(centers_of(p, m), m);
    EXPECT_EQ(again.cells, p.cells);
    const auto twice = discretize(centers_of(again, m), m);
    EXPECT_EQ(twice.cells, again.cells);
  }
}

TEST(Histogram, Examples) {
  const std::vector<double> a{1.5, 2.5};
  const TripDistanceHistogram h(1.0, a);
  EXPECT_EQ(h.count(1), 1u);
  EXPECT_EQ(h.count(2), 1u);
  EXPECT_EQ(h.total(), 2u);
  EXPECT_DOUBLE_EQ(h.expectation(), 1.5);

  const std::vector<double> b{0.2};
  EXPECT_DOUBLE_EQ(TripDistanceHistogram(1.0, b).expectation(), 0.0);

  const std::vector<double> c{5.0, 5.0, 5.0};
  EXPECT_DOUBLE_EQ(TripDistanceHistogram(1.0, c).expectation(), 5.0);

  EXPECT_THROW(TripDistanceHistogram(1.0, std::vector<double>{}), DomainError);
  EXPECT_THROW(TripDistanceHistogram(0.0, a), DomainError);
}

TEST(Histogram, PointMassUsesLeftBoundary) {
  for (double x : {0.3, 1.0, 2.7, 9.99}) {
    for (double w : {0.5, 1.0, 2.0}) {
      const std::vector<double> d{x, x};
      EXPECT_DOUBLE_EQ(TripDistanceHistogram(w, d).expectation(), w * std::floor(x / w));
    }
  }
}

TEST(Synthetic, Deterministic) {
  const auto a = generate_synthetic(5, 10, 42, 0.3);
  const auto b = generate_synthetic(5, 10, 42, 0.3);
  const GridMap m(synthetic_box(5), 5);
  std::ostringstream sa, sb;
  write_trajectory_csv(sa, a.trips, m);
  write_trajectory_csv(sb, b.trips, m);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_TRUE(a.truth == b.truth);
  EXPECT_NE(sa.str(), [] {
    std::ostringstream s;
    const auto c = generate_synthetic(5, 10, 43, 0.3);
    write_trajectory_csv(s, c.trips, GridMap(synthetic_box(5), 5));
    return s.str();
  }());
}

TEST(Synthetic, TripLengthsWithoutAndWithDetours) {
  const auto plain = generate_synthetic(10, 500, 1, 0.0);
  for (const auto& p : plain.trips) {
    EXPECT_EQ(static_cast<int>(p.transitions()), l1_distance(p.start(), p.end(), plain.grid));
  }
  const auto spur = generate_synthetic(10, 500, 1, 1.0);
  for (const auto& p : spur.trips) {
    EXPECT_EQ(static_cast<int>(p.transitions()), l1_distance(p.start(), p.end(), spur.grid) + 2);
    for (std::size_t k = 0; k + 1 < p.cells.size(); ++k) EXPECT_TRUE(spur.grid.adjacent(p.cells[k], p.cells[k + 1]));
  }
}

TEST(Synthetic, EmpiricalSstpConvergesToTruth) {
  const auto w = generate_synthetic(8, 100000, 5, 0.0);
  const SstpMatrix emp = build_sstp(w.trips, w.grid);
  double worst = 0;
  for (CellId c = 0; c < w.grid.cell_count(); ++c) {
    if (emp.visit_count(c) == 0) continue;
    for (int d = 0; d < 4; ++d) worst = std::max(worst, std::abs(emp.row(c)[d] - w.truth.row(c)[d]));
  }
  EXPECT_LE(worst, 0.05);
}

TEST(Synthetic, CsvRoundTripThroughParser) {
  const auto w = generate_synthetic(6, 40, 9, 0.2);
  const GridMap m(synthetic_box(6), 6);
  std::stringstream s;
  write_trajectory_csv(s, w.trips, m);
  const auto r = parse_trajectories(s, m);
  EXPECT_EQ(r.malformed_rows, 0u);
  EXPECT_EQ(r.dropped_points, 0u);
  const auto d = discretize_all(r.trajectories, m);
  ASSERT_EQ(d.paths.size(), w.trips.size());
  for (std::size_t k = 0; k < d.paths.size(); ++k) EXPECT_EQ(d.paths[k].cells, w.trips[k].cells);
}

TEST(Synthetic, SidecarBoxHasRequestedCellSize) {
  const GridMap m(synthetic_box(40, 0.5), 40);
  EXPECT_NEAR(m.cell_width_km(), 0.5, 0.01);
  EXPECT_NEAR(m.cell_height_km(), 0.5, 0.01);
}
