#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/ingest.hpp"
#include "edp/model.hpp"
#include "edp/predict.hpp"
#include "edp/trajectory.hpp"

namespace edp {

struct EvalQuery {
  Query query;
  CellId truth = 0;
  bool exact_match = false;  // the whole cell sequence also occurs in training
};

// Truncates each held-out trip after floor(fraction * transitions) moves
// (at least one, at most all but one). Trips with fewer than two moves
// carry no prefix to predict from and are skipped.
inline std::vector<EvalQuery> make_eval_queries(std::span<const CellPath> held_out, double fraction,
                                                std::span<const CellPath> training, int top_k) {
  if (!(fraction > 0 && fraction < 1)) throw DomainError("completion fraction must lie in (0, 1)");
  std::set<std::vector<CellId>> seen;
  for (const auto& p : training) seen.insert(p.cells);
  std::vector<EvalQuery> out;
  for (const auto& p : held_out) {
    const std::size_t moves = p.transitions();
    if (moves < 2) continue;
    auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(moves)));
    keep = std::clamp<std::size_t>(keep, 1, moves - 1);
    EvalQuery q;
    q.query.id = p.trip_id;
    q.query.partial.assign(p.cells.begin(), p.cells.begin() + static_cast<std::ptrdiff_t>(keep + 1));
    q.query.d_t_km = p.trip_km * static_cast<double>(keep) / static_cast<double>(moves);
    q.query.top_k = top_k;
    q.truth = p.end();
    q.exact_match = seen.count(p.cells) != 0;
    out.push_back(std::move(q));
  }
  return out;
}

struct EngineRun {
  std::vector<PredictionResult> results;
  std::vector<CellId> truths;
  std::vector<bool> exact_match;
  std::size_t cold_starts = 0;
};

// Predicts every query; cold starts are scored with their fallback ranking.
inline EngineRun run_queries(const TransitionModel& model, std::span<const EvalQuery> queries,
                             const TripDistanceHistogram& hist, const HistoryIndex& history,
                             const PredictOptions& opt) {
  EngineRun run;
  run.results.reserve(queries.size());
  for (const auto& q : queries) {
    try {
      run.results.push_back(predict_destination(model, q.query, hist, history, opt));
    } catch (const ColdStartError& e) {
      PredictionResult r;
      r.query_id = q.query.id;
      r.ranked = e.fallback();
      r.future_location = e.future_location();
      ++run.cold_starts;
      if (r.ranked.empty()) continue;
      run.results.push_back(std::move(r));
    }
    run.truths.push_back(q.truth);
    run.exact_match.push_back(q.exact_match);
  }
  return run;
}

struct BucketDeviation {
  std::size_t queries = 0;
  double mean_km = 0;
};

// Mean deviation over queries whose exact_match flag equals `exact`.
inline BucketDeviation bucket_deviation(const EngineRun& run, bool exact, const GridMap& map,
                                        DistanceMode mode, int top_n) {
  std::vector<PredictionResult> r;
  std::vector<CellId> t;
  for (std::size_t k = 0; k < run.results.size(); ++k) {
    if (run.exact_match[k] != exact) continue;
    r.push_back(run.results[k]);
    t.push_back(run.truths[k]);
  }
  if (r.empty()) return {};
  const auto rep = deviation_metrics(r, t, map, mode, top_n);
  return {rep.queries, rep.mean_km};
}

}  // namespace edp
