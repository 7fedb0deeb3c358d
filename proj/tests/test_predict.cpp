#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "edp/baseline.hpp"
#include "edp/evaluate.hpp"
#include "edp/ingest.hpp"
#include "edp/predict.hpp"

using namespace edp;

namespace {

TripDistanceHistogram hist_of(std::vector<double> d, double w = 1.0) { return TripDistanceHistogram(w, d); }

struct World {
  SyntheticWorld w;
  TransitionModel model;
  TripDistanceHistogram hist;
  HistoryIndex index;
};

World make_world(int g, int trips, std::uint64_t seed, double detour_rate, int max_detour) {
  auto w = generate_synthetic(g, trips, seed, detour_rate);
  const SstpMatrix s = build_sstp(w.trips, w.grid);
  auto model = train_initial(s, StartDestCounts::from_paths(w.trips), max_detour);
  auto hist = build_histogram(w.trips);
  HistoryIndex index(w.trips);
  return {std::move(w), std::move(model), std::move(hist), std::move(index)};
}

}  // namespace

TEST(EstimateTotalDistance, ZeroConditioningIsUnconditional) {
  const auto h = hist_of({1.5, 2.5, 7.2, 3.3, 0.4});
  const auto e = estimate_total_distance(h, 0.0);
  EXPECT_DOUBLE_EQ(e.km, h.expectation());
  EXPECT_FALSE(e.extrapolated);
}

TEST(EstimateTotalDistance, Examples) {
  EXPECT_DOUBLE_EQ(estimate_total_distance(hist_of({2.5, 7.5}), 5.0).km, 7.0);
  EXPECT_DOUBLE_EQ(estimate_total_distance(hist_of({5.0}), 4.0).km, 5.0);
  const auto beyond = estimate_total_distance(hist_of({2.5, 7.5}), 9.0);
  EXPECT_TRUE(beyond.extrapolated);
  EXPECT_DOUBLE_EQ(beyond.km, 9.0);
  EXPECT_THROW(estimate_total_distance(hist_of({1.0}), -1.0), DomainError);
  EXPECT_THROW(estimate_total_distance(TripDistanceHistogram{}, 1.0), DomainError);
}

TEST(EstimateTotalDistance, PartialBinKeepsSurvivingFraction) {
  // Bin [2,3) is half passed at d_t = 2.5: weight 0.5 against bin [4,5).
  const auto e = estimate_total_distance(hist_of({2.1, 4.2}), 2.5);
  EXPECT_NEAR(e.km, (2.0 * 0.5 + 4.0 * 1.0) / 1.5, 1e-15);
}

TEST(EstimateTotalDistance, NonDecreasingInDistanceTraveled) {
  std::mt19937_64 rng(1);
  std::gamma_distribution<double> d(2.0, 3.0);
  std::vector<double> trips;
  for (int k = 0; k < 500; ++k) trips.push_back(d(rng));
  const auto h = hist_of(trips, 0.5);
  double prev = 0;
  for (double t = 0; t < 40; t += 0.13) {
    const double e = estimate_total_distance(h, t).km;
    EXPECT_GE(e, prev - 1e-12) << t;
    prev = e;
  }
}

TEST(PredictedLength, Examples) {
  const double expected = 10.0 * std::log(0.5) / std::log(0.004);
  EXPECT_NEAR(predicted_length(10, 5, 0.004), expected, 1e-9);
  EXPECT_NEAR(predicted_length(10, 5), 1.2553691692674559, 1e-12);
  EXPECT_DOUBLE_EQ(predicted_length(7.5, 7.5), 0.0);
  EXPECT_EQ(kDefaultAlpha, 0.004);
}

TEST(PredictedLength, Errors) {
  EXPECT_THROW(predicted_length(10, 0), DomainError);
  EXPECT_THROW(predicted_length(10, 5, 0.0), DomainError);
  EXPECT_THROW(predicted_length(10, 5, 1.0), DomainError);
  EXPECT_THROW(predicted_length(0, 5), DomainError);
}

TEST(PredictedLength, ClampedAndMonotone) {
  // Never beyond the remaining distance, never negative.
  EXPECT_DOUBLE_EQ(predicted_length(10, 0.001, 0.5), 10 - 0.001);
  EXPECT_DOUBLE_EQ(predicted_length(10, 12), 0.0);
  double prev = predicted_length(10, 9.99);
  for (double dt = 9.9; dt > 5; dt -= 0.1) {
    const double v = predicted_length(10, dt);
    EXPECT_GE(v, prev);
    prev = v;
  }
  // A larger decay factor gives a longer budget inside the clamp.
  EXPECT_LT(predicted_length(10, 8, 0.001), predicted_length(10, 8, 0.004));
  EXPECT_LT(predicted_length(10, 8, 0.004), predicted_length(10, 8, 0.1));
}

TEST(InferFutureLocation, Examples) {
  const HistoryIndex h({CellPath{"h", {0, 1, 2, 3, 4}, 4.0}});
  const std::vector<CellId> partial{0, 1, 2};
  EXPECT_EQ(infer_future_location(partial, 0.0, h).cell, 2);
  const auto fl = infer_future_location(partial, 2.0, h, 10, 1.0);
  EXPECT_EQ(fl.cell, 4);
  EXPECT_EQ(fl.extension_steps, 2);
  EXPECT_TRUE(fl.matched);
  // Runs out of continuation.
  EXPECT_EQ(infer_future_location(partial, 50.0, h, 10, 1.0).cell, 4);

  const HistoryIndex empty;
  const auto none = infer_future_location(partial, 3.0, empty);
  EXPECT_EQ(none.cell, 2);
  EXPECT_FALSE(none.matched);
  EXPECT_THROW(infer_future_location(std::vector<CellId>{}, 1.0, h), DomainError);
  EXPECT_THROW(infer_future_location(partial, 1.0, h, 0), DomainError);
}

TEST(InferFutureLocation, LongestSuffixWinsOverFrequency) {
  const HistoryIndex h({CellPath{"a", {5, 6, 7, 8}, 3}, CellPath{"b", {1, 6, 7, 12}, 3},
                        CellPath{"c", {2, 6, 7, 12}, 3}, CellPath{"d", {3, 6, 7, 12}, 3}});
  const std::vector<CellId> partial{5, 6, 7};
  EXPECT_EQ(infer_future_location(partial, 1.0, h, 1, 1.0).cell, 8);
  // With every match kept the majority continuation wins.
  EXPECT_EQ(infer_future_location(partial, 1.0, h, 10, 1.0).cell, 12);
}

TEST(PredictDestination, SingleDestinationGetsProbabilityOne) {
  const Grid g(4);
  const std::vector<CellPath> trips{{"a", {0, 1, 2, 6}, 3}, {"b", {0, 4, 5, 6}, 3}, {"c", {0, 1, 5, 6}, 3}};
  const SstpMatrix s = build_sstp(trips, g);
  const auto model = train_initial(s, StartDestCounts::from_paths(trips), 2);
  const auto hist = build_histogram(trips);
  const HistoryIndex index(trips);
  const Query q{"q", {0, 1}, 1.0, 3};
  const auto r = predict_destination(model, q, hist, index);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].cell, 6);
  EXPECT_DOUBLE_EQ(r.ranked[0].probability, 1.0);
}

TEST(PredictDestination, ColdStartCarriesFallback) {
  const Grid g(4);
  const std::vector<CellPath> trips{{"a", {0, 1, 2}, 2}};
  const SstpMatrix s = build_sstp(trips, g);
  const auto model = train_initial(s, StartDestCounts::from_paths(trips), 2);
  const auto hist = build_histogram(trips);
  const HistoryIndex index(trips);
  const Query q{"q", {9, 10}, 1.0, 3};
  try {
    predict_destination(model, q, hist, index);
    FAIL() << "expected cold start";
  } catch (const ColdStartError& e) {
    ASSERT_FALSE(e.fallback().empty());
    EXPECT_LE(e.fallback().size(), 3u);
    const auto& f = e.fallback();
    for (std::size_t k = 1; k < f.size(); ++k) {
      // Descending up to the near-tie rule, which orders by cell id.
      EXPECT_GE(f[k - 1].probability, f[k].probability * (1 - 1e-9));
      if (std::abs(f[k - 1].probability - f[k].probability) <= 1e-9 * f[k].probability) {
        EXPECT_LT(f[k - 1].cell, f[k].cell);
      }
    }
  }
}

TEST(PredictDestination, MatchesStraightLineOracle) {
  const World W = make_world(5, 2000, 11, 0.2, 8);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, W.w.trips.size() - 1);
  int checked = 0;
  while (checked < 100) {
    const auto& trip = W.w.trips[pick(rng)];
    if (trip.transitions() < 2) continue;
    const std::size_t keep = 1 + rng() % (trip.transitions() - 1);
    Query q{"q", {trip.cells.begin(), trip.cells.begin() + static_cast<std::ptrdiff_t>(keep + 1)},
            static_cast<double>(keep), 5};
    const auto r = predict_destination(W.model, q, W.hist, W.index);
    const CellId s = q.partial.front(), lp = r.future_location;
    // Direct table lookups of the posterior.
    std::vector<RankedCell> oracle;
    double sum = 0;
    for (CellId d = 0; d < 25; ++d) {
      if (d == s) continue;
      const double cond = W.model.start_dest().conditional(s, d);
      const double psd = W.model.total(s, d);
      if (cond <= 0 || psd <= 0) continue;
      const double pld = d == lp ? 1.0 : W.model.total(lp, d);
      oracle.push_back({d, pld * cond / psd});
      sum += oracle.back().probability;
    }
    ASSERT_EQ(oracle.size(), r.candidates);
    for (const auto& got : r.ranked) {
      const auto it = std::find_if(oracle.begin(), oracle.end(), [&](const RankedCell& x) { return x.cell == got.cell; });
      ASSERT_NE(it, oracle.end());
      EXPECT_NEAR(got.probability, it->probability / sum, 1e-12);
    }
    for (std::size_t k = 1; k < r.ranked.size(); ++k) EXPECT_GE(r.ranked[k - 1].probability, r.ranked[k].probability);
    ++checked;
  }
}

TEST(PredictDestination, PosteriorSumsToOneBeforeTruncation) {
  const World W = make_world(6, 1500, 4, 0.1, 4);
  for (std::size_t t = 0; t < 200; ++t) {
    const auto& trip = W.w.trips[t];
    if (trip.transitions() < 2) continue;
    Query q{"q", {trip.cells.begin(), trip.cells.begin() + 2}, 1.0, 1000};
    const auto r = predict_destination(W.model, q, W.hist, W.index);
    EXPECT_EQ(r.ranked.size(), r.candidates);
    double sum = 0;
    for (const auto& x : r.ranked) {
      EXPECT_GE(x.probability, 0.0);
      EXPECT_LE(x.probability, 1.0);
      sum += x.probability;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(PredictDestination, ForcedCurrentCellIsFirstOrderBaseline) {
  for (int g = 3; g <= 6; ++g) {
    const World W = make_world(g, 800, 30 + g, 0.0, 0);
    const auto smm = matrix_power_train(DenseTransitionMatrix(build_sstp(W.w.trips, W.w.grid)), 0);
    PredictOptions opt;
    opt.use_current = true;
    for (const auto& trip : W.w.trips) {
      if (trip.transitions() < 2) continue;
      Query q{"q", {trip.cells.begin(), trip.cells.end() - 1}, 1.0, 3};
      const auto r = predict_destination(W.model, q, W.hist, W.index, opt);
      EXPECT_EQ(r.future_location, q.partial.back());
      const auto base = first_order_ranking(smm.totals, W.w.grid, W.model.start_dest(), q.partial.front(),
                                            q.partial.back());
      ASSERT_FALSE(base.empty());
      ASSERT_EQ(r.ranked.front().cell, base.front().cell) << "g=" << g;
    }
  }
}

TEST(PredictDestination, NoMatchFallsBackToCurrentCell) {
  const World W = make_world(5, 300, 2, 0.0, 2);
  const HistoryIndex empty;
  const auto& trip = W.w.trips.front();
  Query q{"q", {trip.cells.front(), trip.cells[1]}, 1.0, 3};
  const auto r = predict_destination(W.model, q, W.hist, empty);
  EXPECT_TRUE(r.no_match);
  EXPECT_EQ(r.future_location, q.partial.back());
  PredictOptions opt;
  opt.use_current = true;
  const auto b = predict_destination(W.model, q, W.hist, W.index, opt);
  ASSERT_EQ(r.ranked.size(), b.ranked.size());
  for (std::size_t k = 0; k < r.ranked.size(); ++k) {
    EXPECT_EQ(r.ranked[k].cell, b.ranked[k].cell);
    EXPECT_DOUBLE_EQ(r.ranked[k].probability, b.ranked[k].probability);
  }
}

TEST(PredictDestination, RejectsInvalidQueries) {
  const World W = make_world(4, 100, 1, 0.0, 2);
  EXPECT_THROW(predict_destination(W.model, Query{"q", {}, 1.0, 3}, W.hist, W.index), DomainError);
  EXPECT_THROW(predict_destination(W.model, Query{"q", {1, 2}, -1.0, 3}, W.hist, W.index), DomainError);
  EXPECT_THROW(predict_destination(W.model, Query{"q", {1, 2}, 1.0, 0}, W.hist, W.index), DomainError);
  EXPECT_THROW(predict_destination(W.model, Query{"q", {1, 99}, 1.0, 3}, W.hist, W.index), DomainError);
}

TEST(SortRanking, NearTiesByCellId) {
  std::vector<RankedCell> r{{9, 0.3}, {4, 0.3 + 1e-13}, {2, 0.1}, {7, 0.6}};
  sort_ranking(r);
  EXPECT_EQ(r[0].cell, 7);
  EXPECT_EQ(r[1].cell, 4);
  EXPECT_EQ(r[2].cell, 9);
  EXPECT_EQ(r[3].cell, 2);
}

TEST(DeviationMetrics, Examples) {
  const GridMap m(synthetic_box(10), 10);
  PredictionResult exact;
  exact.ranked = {{33, 1.0}};
  const std::vector<PredictionResult> one{exact};
  const std::vector<CellId> truth{33};
  EXPECT_DOUBLE_EQ(deviation_metrics(one, truth, m).mean_km, 0.0);

  PredictionResult three;
  three.ranked = {{34, 0.5}, {35, 0.3}, {36, 0.2}};
  const std::vector<PredictionResult> r3{three};
  EXPECT_DOUBLE_EQ(deviation_metrics(r3, truth, m, DistanceMode::l1_proxy).mean_km, 2.0);

  PredictionResult far;
  far.ranked = {{37, 1.0}};
  const std::vector<PredictionResult> two{exact, far};
  const std::vector<CellId> truths{33, 33};
  EXPECT_DOUBLE_EQ(deviation_metrics(two, truths, m, DistanceMode::l1_proxy, 1).mean_km, 2.0);

  EXPECT_NEAR(deviation_metrics(r3, truth, m).mean_km,
              (m.center_distance_km(34, 33) + m.center_distance_km(35, 33) + m.center_distance_km(36, 33)) / 3, 1e-12);
  EXPECT_THROW(deviation_metrics(std::vector<PredictionResult>{}, std::vector<CellId>{}, m), DomainError);
  EXPECT_THROW(deviation_metrics(one, truths, m), DomainError);
}

TEST(EvalQueries, TruncationProtocol) {
  const std::vector<CellPath> held{{"a", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 20.0}, {"b", {0, 1}, 1.0}};
  const std::vector<CellPath> train{{"a2", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 20.0}};
  const auto q = make_eval_queries(held, 0.3, train, 3);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].query.partial, (std::vector<CellId>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(q[0].query.d_t_km, 6.0);
  EXPECT_EQ(q[0].truth, 10);
  EXPECT_TRUE(q[0].exact_match);
  EXPECT_EQ(make_eval_queries(held, 0.7, {}, 3)[0].query.partial.size(), 8u);
  EXPECT_THROW(make_eval_queries(held, 1.0, train, 3), DomainError);
}
