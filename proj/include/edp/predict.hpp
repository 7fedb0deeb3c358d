#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/ingest.hpp"
#include "edp/model.hpp"
#include "edp/trajectory.hpp"

namespace edp {

inline constexpr double kDefaultAlpha = 0.004;
inline constexpr int kDefaultKnn = 10;

// ---------------------------------------------------------------------------
// Trip length

struct DistanceEstimate {
  double km = 0;
  bool extrapolated = false;  // nothing in the histogram reaches d_t
};

// E(D | d_t): expectation over the bins not yet passed, renormalized by the
// surviving mass. Bins ending at or before d_t drop out; the bin holding d_t
// keeps the fraction of its width still ahead (uniform within the bin).
inline DistanceEstimate estimate_total_distance(const TripDistanceHistogram& h, double d_t) {
  if (h.total() == 0) throw DomainError("empty trip-distance histogram");
  if (!(d_t >= 0) || !std::isfinite(d_t)) throw DomainError("d_t must be finite and >= 0");
  double mass = 0;
  double weighted = 0;
  const double w = h.bin_width_km();
  for (std::size_t i = 0; i < h.bin_count(); ++i) {
    const double lo = h.boundary(i);
    const double hi = h.boundary(i + 1);
    if (hi <= d_t) continue;
    const double keep = lo >= d_t ? 1.0 : (hi - d_t) / w;
    const double m = keep * static_cast<double>(h.count(i));
    mass += m;
    weighted += lo * m;
  }
  if (mass <= 0) return {d_t, true};
  return {weighted / mass, false};
}

// D_p = E log_alpha(d_t / E), clamped to [0, E - d_t].
inline double predicted_length(double e_total, double d_t, double alpha = kDefaultAlpha) {
  if (!(alpha > 0 && alpha < 1)) throw DomainError("decay factor must lie in (0, 1)");
  if (!(d_t > 0)) throw DomainError("predicted_length needs d_t > 0");
  if (!(e_total > 0)) throw DomainError("predicted_length needs E(D|d_t) > 0");
  const double raw = e_total * std::log(d_t / e_total) / std::log(alpha);
  return std::clamp(raw, 0.0, std::max(0.0, e_total - d_t));
}

// ---------------------------------------------------------------------------
// Most probable future location

// Occurrences of each cell in historical paths, limited to positions that
// have a successor.
class HistoryIndex {
 public:
  HistoryIndex() = default;
  explicit HistoryIndex(std::vector<CellPath> paths) : paths_(std::move(paths)) {
    for (std::uint32_t p = 0; p < paths_.size(); ++p) {
      const auto& cells = paths_[p].cells;
      for (std::uint32_t k = 0; k + 1 < cells.size(); ++k) occurrences_[cells[k]].push_back({p, k});
    }
  }

  struct Occurrence {
    std::uint32_t path;
    std::uint32_t pos;
  };

  const std::vector<CellPath>& paths() const noexcept { return paths_; }

  std::span<const Occurrence> occurrences(CellId c) const {
    auto it = occurrences_.find(c);
    if (it == occurrences_.end()) return {};
    return it->second;
  }

 private:
  std::vector<CellPath> paths_;
  std::unordered_map<CellId, std::vector<Occurrence>> occurrences_;
};

struct FutureLocation {
  CellId cell = 0;
  int extension_steps = 0;
  double extension_km = 0;
  bool matched = false;  // false: no history continues from c
};

// Retrieve the k historical positions whose preceding cells agree longest
// with the end of `partial`, then follow the majority next cell until the
// extension covers `budget_km` or the matches run out.
inline FutureLocation infer_future_location(std::span<const CellId> partial, double budget_km,
                                            const HistoryIndex& history, int k = kDefaultKnn,
                                            double step_km = 1.0) {
  if (partial.empty()) throw DomainError("partial trajectory is empty");
  if (k < 1) throw DomainError("k must be >= 1");
  if (!(step_km > 0)) throw DomainError("step_km must be positive");
  const CellId current = partial.back();
  FutureLocation out{current, 0, 0.0, false};
  const auto occ = history.occurrences(current);
  if (occ.empty()) return out;
  out.matched = true;
  if (!(budget_km > 0)) return out;

  struct Candidate {
    std::uint32_t path;
    std::uint32_t pos;
    std::size_t suffix;
    CellId next;
  };
  std::vector<Candidate> cands;
  cands.reserve(occ.size());
  std::unordered_map<CellId, std::size_t> next_freq;
  for (const auto& o : occ) {
    const auto& cells = history.paths()[o.path].cells;
    std::size_t m = 1;
    while (m < partial.size() && m <= o.pos && cells[o.pos - m] == partial[partial.size() - 1 - m]) ++m;
    const CellId next = cells[o.pos + 1];
    cands.push_back({o.path, o.pos, m, next});
    ++next_freq[next];
  }
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.suffix != b.suffix) return a.suffix > b.suffix;
    const auto fa = next_freq[a.next], fb = next_freq[b.next];
    if (fa != fb) return fa > fb;
    if (a.next != b.next) return a.next < b.next;
    if (a.path != b.path) return a.path < b.path;
    return a.pos < b.pos;
  });
  if (cands.size() > static_cast<std::size_t>(k)) cands.resize(static_cast<std::size_t>(k));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> active;
  active.reserve(cands.size());
  for (const auto& c : cands) active.emplace_back(c.path, c.pos);

  std::unordered_map<CellId, std::size_t> votes;
  while (out.extension_km < budget_km) {
    votes.clear();
    for (const auto& [p, pos] : active) {
      const auto& cells = history.paths()[p].cells;
      if (pos + 1 < cells.size()) ++votes[cells[pos + 1]];
    }
    if (votes.empty()) break;
    CellId best = 0;
    std::size_t best_votes = 0;
    for (const auto& [cell, v] : votes) {
      if (v > best_votes || (v == best_votes && cell < best)) best = cell, best_votes = v;
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> next;
    for (const auto& [p, pos] : active) {
      const auto& cells = history.paths()[p].cells;
      if (pos + 1 < cells.size() && cells[pos + 1] == best) next.emplace_back(p, pos + 1);
    }
    active.swap(next);
    out.cell = best;
    ++out.extension_steps;
    out.extension_km += step_km;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Destination ranking

struct RankedCell {
  CellId cell = 0;
  double probability = 0;
};

// Descending probability; scores within a relative 1e-9 of each other count
// as tied and fall back to ascending cell id, so rounding noise between two
// equal routes cannot reorder them.
inline void sort_ranking(std::vector<RankedCell>& r) {
  std::sort(r.begin(), r.end(), [](const RankedCell& a, const RankedCell& b) {
    const double scale = std::max(std::abs(a.probability), std::abs(b.probability));
    if (std::abs(a.probability - b.probability) > 1e-9 * scale) return a.probability > b.probability;
    return a.cell < b.cell;
  });
}

struct Query {
  std::string id;
  std::vector<CellId> partial;  // T_p, first cell s, last cell c
  double d_t_km = 0;
  int top_k = 3;
};

struct PredictionResult {
  std::string query_id;
  std::vector<RankedCell> ranked;  // at most top_k
  std::size_t candidates = 0;
  CellId future_location = 0;
  double predicted_length_km = 0;
  DistanceEstimate estimated_total{};
  bool no_match = false;
};

// No destination is both observed from s and reachable from s.
class ColdStartError : public std::runtime_error {
 public:
  ColdStartError(std::string what, std::vector<RankedCell> fallback, CellId future_location)
      : std::runtime_error(std::move(what)),
        fallback_(std::move(fallback)),
        future_location_(future_location) {}

  // Destinations ranked by p(L_p -> d) alone.
  const std::vector<RankedCell>& fallback() const noexcept { return fallback_; }
  CellId future_location() const noexcept { return future_location_; }

 private:
  std::vector<RankedCell> fallback_;
  CellId future_location_;
};

struct PredictOptions {
  double alpha = kDefaultAlpha;
  int knn = kDefaultKnn;
  double step_km = 1.0;        // km per cell when turning D_p into steps
  bool use_current = false;    // force L_p = c (first-order baseline)
};

// p(a -> d) as used for scoring; a trip "from d to d" counts as certain.
inline double scoring_total(const TransitionModel& model, CellId a, CellId d) {
  return a == d ? 1.0 : model.total(a, d);
}

// P_d proportional to p(L_p -> d) P(d|s) / p(s -> d) over destinations seen
// from s, excluding s itself.
inline std::vector<RankedCell> score_destinations(const TransitionModel& model, CellId s,
                                                  CellId from) {
  std::vector<RankedCell> scores;
  const auto* dests = model.start_dest().destinations(s);
  if (!dests) return scores;
  for (const auto& [d, count] : *dests) {
    if (d == s) continue;
    const double p_sd = model.total(s, d);
    if (!(p_sd > 0)) continue;
    const double cond = model.start_dest().conditional(s, d);
    scores.push_back({d, scoring_total(model, from, d) * cond / p_sd});
  }
  return scores;
}

inline std::vector<RankedCell> fallback_ranking(const TransitionModel& model, CellId from, int top_k) {
  std::vector<RankedCell> r;
  double sum = 0;
  for (CellId d = 0; d < model.cell_count(); ++d) {
    const double p = scoring_total(model, from, d);
    if (p > 0) r.push_back({d, p}), sum += p;
  }
  for (auto& x : r) x.probability /= sum;
  sort_ranking(r);
  if (r.size() > static_cast<std::size_t>(top_k)) r.resize(static_cast<std::size_t>(top_k));
  return r;
}

inline PredictionResult predict_destination(const TransitionModel& model, const Query& q,
                                            const TripDistanceHistogram& hist,
                                            const HistoryIndex& history,
                                            const PredictOptions& opt = {}) {
  if (q.partial.empty()) throw DomainError("query has an empty partial trajectory");
  if (!(q.d_t_km >= 0)) throw DomainError("query distance traveled must be >= 0");
  if (q.top_k < 1) throw DomainError("top_k must be >= 1");
  for (CellId c : q.partial) model.grid().check(c);

  PredictionResult res;
  res.query_id = q.id;
  const CellId s = q.partial.front();
  const CellId c = q.partial.back();
  res.estimated_total = estimate_total_distance(hist, q.d_t_km);
  // No distance traveled means no evidence of progress: no extension.
  res.predicted_length_km = q.d_t_km > 0 && res.estimated_total.km > 0
                                ? predicted_length(res.estimated_total.km, q.d_t_km, opt.alpha)
                                : 0.0;
  if (opt.use_current) {
    res.future_location = c;
  } else {
    const FutureLocation fl =
        infer_future_location(q.partial, res.predicted_length_km, history, opt.knn, opt.step_km);
    res.future_location = fl.cell;
    res.no_match = !fl.matched;
  }

  auto scores = score_destinations(model, s, res.future_location);
  double sum = 0;
  for (const auto& x : scores) sum += x.probability;
  if (scores.empty() || !(sum > 0)) {
    throw ColdStartError("no candidate destination for start cell " + std::to_string(s),
                         fallback_ranking(model, res.future_location, q.top_k), res.future_location);
  }
  for (auto& x : scores) x.probability /= sum;
  sort_ranking(scores);
  res.candidates = scores.size();
  if (scores.size() > static_cast<std::size_t>(q.top_k)) scores.resize(static_cast<std::size_t>(q.top_k));
  res.ranked = std::move(scores);
  return res;
}

// ---------------------------------------------------------------------------
// Accuracy

enum class DistanceMode {
  great_circle,  // km between cell centers
  l1_proxy,      // one cell = one km, L1 metric
};

struct DeviationReport {
  double mean_km = 0;
  std::size_t queries = 0;
  std::vector<double> per_query_km;
};

// Mean over queries of the mean distance between each of the top `top_n`
// predicted cells and the true destination.
inline DeviationReport deviation_metrics(std::span<const PredictionResult> results,
                                         std::span<const CellId> truths, const GridMap& map,
                                         DistanceMode mode = DistanceMode::great_circle,
                                         int top_n = 3) {
  if (results.size() != truths.size()) throw DomainError("results and truths differ in length");
  if (results.empty()) throw DomainError("no results to evaluate");
  if (top_n < 1) throw DomainError("top_n must be >= 1");
  DeviationReport rep;
  rep.queries = results.size();
  double sum = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& ranked = results[q].ranked;
    const std::size_t k = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_n));
    if (k == 0) throw DomainError("result " + results[q].query_id + " has no ranked destinations");
    double dev = 0;
    for (std::size_t r = 0; r < k; ++r) {
      dev += mode == DistanceMode::l1_proxy
                 ? static_cast<double>(l1_distance(ranked[r].cell, truths[q], map.grid()))
                 : map.center_distance_km(ranked[r].cell, truths[q]);
    }
    dev /= static_cast<double>(k);
    rep.per_query_km.push_back(dev);
    sum += dev;
  }
  rep.mean_km = sum / static_cast<double>(results.size());
  return rep;
}

}  // namespace edp
