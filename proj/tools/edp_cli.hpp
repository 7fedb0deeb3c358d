#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edp/edp.hpp"

namespace edp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

namespace detail {

// Advisory lock on `<path>.lock`, shared for readers and exclusive for writers.
class FileLock {
 public:
  FileLock(const std::string& path, bool exclusive) {
    const std::string lock = path + ".lock";
    fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) return;  // read-only directory: run unlocked
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = edp::detail::trim(item);
    if (v.empty()) continue;
    T x{};
    if (!edp::detail::parse_number(v, x)) throw DomainError(std::string("bad value in ") + what + ": '" + item + "'");
    out.push_back(x);
  }
  if (out.empty()) throw DomainError(std::string(what) + " is empty");
  return out;
}

inline BoundingBox parse_bbox(const std::string& s) {
  const auto v = parse_list<double>(s, "--bbox");
  if (v.size() != 4) throw DomainError("--bbox needs lat_min,lat_max,lon_min,lon_max");
  return {v[0], v[1], v[2], v[3]};
}

inline std::string bbox_string(const BoundingBox& b) {
  std::ostringstream o;
  o << std::setprecision(12) << b.lat_min << ',' << b.lat_max << ',' << b.lon_min << ',' << b.lon_max;
  return o.str();
}

// Output target: a file when a path is given, `fallback` otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw IoError("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& get() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

// key=value lines; '#' starts a comment.
inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto view = edp::detail::trim(line);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("config line " + std::to_string(lineno) + " is not key=value");
    }
    std::string key(edp::detail::trim(view.substr(0, eq)));
    std::string value(edp::detail::trim(view.substr(eq + 1)));
    for (auto& ch : key) {
      if (ch == '_') ch = '-';
    }
    kv[key] = value;
  }
  return kv;
}

inline bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

struct Training {
  GridMap map;
  std::vector<CellPath> paths;
  ParseReport report;
  std::size_t degenerate = 0;
};

inline Training load_paths(const std::string& csv, const GridMap& map) {
  Training t{map, {}, parse_trajectories(csv, map), 0};
  auto d = discretize_all(t.report.trajectories, map);
  t.paths = std::move(d.paths);
  t.degenerate = d.degenerate;
  return t;
}

inline nlohmann::json ranking_json(const std::vector<RankedCell>& ranked) {
  auto arr = nlohmann::json::array();
  for (const auto& r : ranked) arr.push_back({{"cell", r.cell}, {"probability", r.probability}});
  return arr;
}

}  // namespace detail

struct Options {
  std::string config;

  // train
  std::string input;
  std::string out;
  int grid = 0;
  int max_detour = kDefaultMaxDetour;
  std::string bbox;

  // update
  std::string model;
  std::string changes;
  std::string mode = "exact";

  // predict / eval
  std::string history;
  std::string queries;
  std::string test;
  int top = 3;
  double alpha = kDefaultAlpha;
  int knn = kDefaultKnn;
  double bin_width = 1.0;
  bool use_current = false;
  std::string completion = "0.3,0.7";
  bool match_buckets = false;
  bool alpha_sweep = false;
  std::string alphas = "0.001,0.002,0.004,0.008,0.016,0.032,0.1,0.5";
  bool compare_baseline = false;
  std::string distance = "great-circle";

  // bench / census / gen
  std::string grids = "10,20,30,40,50";
  std::string kernel = "dense";
  std::uint64_t seed = 42;
  int steps = 0;
  bool analytic = false;
  int trips = 1000;
  double detour_rate = 0.0;
  int attractors = 0;
  double cell_km = 1.0;
};

inline int cmd_train(const Options& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  check_max_detour(o.max_detour);
  BoundingBox box{};
  std::optional<GridMap> filter;
  if (!o.bbox.empty()) {
    box = detail::parse_bbox(o.bbox);
    filter.emplace(box, o.grid);
  }
  ParseReport report = parse_trajectories(o.input, filter);
  if (o.bbox.empty()) box = bounding_box_of(report.trajectories);
  const GridMap map(box, o.grid);
  auto d = discretize_all(report.trajectories, map);
  if (d.paths.empty()) throw DomainError("no usable trips in '" + o.input + "'");
  const double parse_ms = detail::elapsed_ms(t0);

  const auto t1 = std::chrono::steady_clock::now();
  ModelFile file;
  file.box = box;
  file.sstp = build_sstp(d.paths, map.grid());
  file.model = train_initial(file.sstp, StartDestCounts::from_paths(d.paths), o.max_detour);
  const double train_ms = detail::elapsed_ms(t1);

  {
    detail::FileLock lock(o.out, true);
    save_model(o.out, file);
  }
  out << "trained g=" << o.grid << " max_detour=" << o.max_detour << " trips=" << d.paths.size()
      << " skipped_trips=" << (report.dropped_trips + d.degenerate)
      << " malformed_rows=" << report.malformed_rows << " entries=" << file.model.entry_count()
      << " pairs=" << file.model.start_dest().pair_count() << " parse_ms=" << std::fixed
      << std::setprecision(1) << parse_ms << " train_ms=" << train_ms << '\n';
  out << "bbox=" << detail::bbox_string(box) << '\n';
  return kExitOk;
}

inline int cmd_update(const Options& o, std::ostream& out) {
  UpdateMode mode;
  if (o.mode == "exact") {
    mode = UpdateMode::exact;
  } else if (o.mode == "paper") {
    mode = UpdateMode::paper;
  } else {
    throw DomainError("--mode must be paper or exact");
  }
  const std::string target = o.out.empty() ? o.model : o.out;
  detail::FileLock lock(o.model, true);
  ModelFile file = load_model(o.model);
  const ChangeSet cs = parse_changeset(o.changes, file.model.grid());
  const UpdateStats s = apply_update(file.model, file.sstp, cs, mode);
  if (target != o.model) {
    detail::FileLock out_lock(target, true);
    save_model(target, file);
  } else {
    save_model(target, file);
  }
  out << "update mode=" << to_string(s.mode) << " changed_cells=" << cs.changed.size()
      << " epoch=" << file.model.epoch() << " recomputed_entries=" << s.recomputed_entries
      << " expanded_entries=" << s.expanded_entries << " full_retrain_entries=" << s.full_retrain_entries
      << " origins_touched=" << s.origins_touched << " wall_ms=" << std::fixed << std::setprecision(1)
      << s.wall_ms << '\n';
  return kExitOk;
}

struct Loaded {
  ModelFile file;
  GridMap map;
  detail::Training history;
  TripDistanceHistogram hist;
  HistoryIndex index;
};

inline Loaded load_for_queries(const Options& o) {
  ModelFile file;
  {
    detail::FileLock lock(o.model, false);
    file = load_model(o.model);
  }
  const GridMap map(file.box, file.model.grid().side());
  auto history = detail::load_paths(o.history, map);
  if (history.paths.empty()) throw DomainError("history '" + o.history + "' has no usable trips");
  auto hist = build_histogram(history.paths, o.bin_width);
  HistoryIndex index(history.paths);
  return {std::move(file), map, std::move(history), std::move(hist), std::move(index)};
}

inline DistanceMode distance_mode(const std::string& s) {
  if (s == "great-circle") return DistanceMode::great_circle;
  if (s == "l1") return DistanceMode::l1_proxy;
  throw DomainError("--distance must be great-circle or l1");
}

inline PredictOptions predict_options(const Options& o, const GridMap& map, bool use_current) {
  if (!(o.alpha > 0 && o.alpha < 1)) throw DomainError("--alpha must lie in (0, 1)");
  if (o.knn < 1) throw DomainError("--knn must be >= 1");
  PredictOptions p;
  p.alpha = o.alpha;
  p.knn = o.knn;
  p.step_km = distance_mode(o.distance) == DistanceMode::l1_proxy ? 1.0 : map.cell_pitch_km();
  p.use_current = use_current;
  return p;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  if (o.top < 1) throw DomainError("--top must be >= 1");
  const Loaded L = load_for_queries(o);
  const PredictOptions opt = predict_options(o, L.map, o.use_current);
  const ParseReport qr = parse_trajectories(o.queries, L.map);
  detail::Sink sink(o.out, out);
  for (const auto& raw : qr.trajectories) {
    const CellPath p = discretize(raw, L.map, SingleCellPolicy::allow);
    Query q{raw.trip_id, p.cells, p.trip_km, o.top};
    nlohmann::json j;
    j["query_id"] = q.id;
    j["start"] = p.start();
    j["current"] = p.end();
    j["d_t_km"] = q.d_t_km;
    try {
      const PredictionResult r = predict_destination(L.file.model, q, L.hist, L.index, opt);
      j["future_location"] = r.future_location;
      j["predicted_length_km"] = r.predicted_length_km;
      j["estimated_total_km"] = r.estimated_total.km;
      j["extrapolated"] = r.estimated_total.extrapolated;
      j["no_match"] = r.no_match;
      j["candidates"] = r.candidates;
      j["cold_start"] = false;
      j["ranked"] = detail::ranking_json(r.ranked);
    } catch (const ColdStartError& e) {
      j["future_location"] = e.future_location();
      j["cold_start"] = true;
      j["ranked"] = detail::ranking_json(e.fallback());
    }
    sink.get() << j.dump() << '\n';
  }
  sink.finish();
  return kExitOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  if (o.top < 1) throw DomainError("--top must be >= 1");
  const Loaded L = load_for_queries(o);
  const auto test = detail::load_paths(o.test, L.map);
  const auto fractions = detail::parse_list<double>(o.completion, "--completion");
  const DistanceMode mode = distance_mode(o.distance);
  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << "section,completion,bucket,alpha,engine,queries,cold_starts,deviation_km\n";
  os << std::setprecision(6) << std::fixed;

  auto report = [&](const char* section, double f, const char* bucket, double alpha, const char* engine,
                    std::size_t queries, std::size_t cold, double dev) {
    os << section << ',' << f << ',' << bucket << ',' << alpha << ',' << engine << ',' << queries << ','
       << cold << ',' << dev << '\n';
  };

  std::vector<std::pair<const char*, bool>> engines = {{"edp", false}};
  if (o.compare_baseline) engines.push_back({"baseline_c", true});

  for (double f : fractions) {
    const auto queries = make_eval_queries(test.paths, f, L.history.paths, o.top);
    if (queries.empty()) throw DomainError("no held-out trip is long enough to truncate");
    for (const auto& [engine, use_c] : engines) {
      const auto run = run_queries(L.file.model, queries, L.hist, L.index, predict_options(o, L.map, use_c));
      if (run.results.empty()) throw DomainError("no query produced a ranking");
      const auto dev = deviation_metrics(run.results, run.truths, L.map, mode, o.top);
      report("completion", f, "all", o.alpha, engine, dev.queries, run.cold_starts, dev.mean_km);
      if (o.match_buckets) {
        for (const auto& [name, exact] : {std::pair{"exact", true}, std::pair{"novel", false}}) {
          const auto b = bucket_deviation(run, exact, L.map, mode, o.top);
          report("match_ratio", f, name, o.alpha, engine, b.queries, 0, b.queries ? b.mean_km : 0.0);
        }
      }
    }
    if (o.alpha_sweep) {
      for (double a : detail::parse_list<double>(o.alphas, "--alphas")) {
        Options oa = o;
        oa.alpha = a;
        const auto run = run_queries(L.file.model, queries, L.hist, L.index, predict_options(oa, L.map, false));
        const auto dev = deviation_metrics(run.results, run.truths, L.map, mode, o.top);
        report("alpha_sweep", f, "all", a, "edp", dev.queries, run.cold_starts, dev.mean_km);
      }
    }
  }
  sink.finish();
  return kExitOk;
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  check_max_detour(o.max_detour);
  PowerKernel kernel;
  if (o.kernel == "dense") {
    kernel = PowerKernel::dense;
  } else if (o.kernel == "sparse") {
    kernel = PowerKernel::sparse;
  } else {
    throw DomainError("--kernel must be dense or sparse");
  }
  const auto grids = detail::parse_list<int>(o.grids, "--grids");
  for (int g : grids) {
    if (g < 2) throw DomainError("grid side must be >= 2");
  }
  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << "g,edp_ms,smm_ms,speedup\n";
  double prev = 0;
  bool monotone = true;
  for (int g : grids) {
    const SstpMatrix sstp = random_sstp(Grid(g), o.seed + static_cast<std::uint64_t>(g));
    const auto t0 = std::chrono::steady_clock::now();
    const TransitionModel m = train_initial(sstp, {}, o.max_detour);
    const double edp_ms = detail::elapsed_ms(t0);
    const auto smm = matrix_power_train(DenseTransitionMatrix(sstp), o.max_detour, kernel);
    const double speedup = smm.wall_ms / std::max(edp_ms, 1e-6);
    if (speedup < prev) monotone = false;
    prev = speedup;
    os << g << ',' << std::fixed << std::setprecision(3) << edp_ms << ',' << smm.wall_ms << ','
       << std::setprecision(2) << speedup << '\n';
    os.flush();
  }
  sink.finish();
  err << "speedup non-decreasing in g: " << (monotone ? "yes" : "no") << '\n';
  return kExitOk;
}

inline int cmd_census(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.grid < 2) throw DomainError("grid side must be >= 2");
  const int steps = o.steps > 0 ? o.steps : 2 * o.grid;
  const auto rows = nonzero_census(o.grid, steps);
  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << (o.analytic ? "g,s,empirical,z_smm,z_etp,ratio\n" : "g,s,empirical,ratio\n");
  std::size_t above = 0;
  for (const auto& r : rows) {
    os << r.g << ',' << r.steps << ',' << r.empirical << ',';
    if (o.analytic) {
      os << std::setprecision(10) << r.z_smm << ',';
      if (r.z_etp) os << *r.z_etp;
      os << ',';
    }
    os << std::setprecision(6) << std::fixed << r.ratio << std::defaultfloat << '\n';
    above += 2 * r.empirical > static_cast<std::uint64_t>(o.grid) * o.grid * o.grid * o.grid;
  }
  sink.finish();
  err << "steps with nonzero ratio above 0.5: " << above << " of " << rows.size() << '\n';
  return kExitOk;
}

inline int cmd_gen(const Options& o, std::ostream& out) {
  if (o.grid < 2) throw DomainError("grid side must be >= 2");
  if (o.out.empty()) throw DomainError("gen needs --out");
  SyntheticConfig cfg;
  cfg.g = o.grid;
  cfg.n_trips = o.trips;
  cfg.seed = o.seed;
  cfg.detour_rate = o.detour_rate;
  cfg.attractors = o.attractors;
  cfg.cell_km = o.cell_km;
  const SyntheticWorld w = generate_synthetic(cfg);
  const BoundingBox box = synthetic_box(o.grid, o.cell_km);
  const GridMap map(box, o.grid);
  {
    std::ofstream csv(o.out, std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + o.out + "' for writing");
    write_trajectory_csv(csv, w.trips, map);
    if (!csv) throw IoError("write to '" + o.out + "' failed");
  }
  {
    std::ofstream side(o.out + ".sstp", std::ios::binary | std::ios::trunc);
    if (!side) throw IoError("cannot open '" + o.out + ".sstp' for writing");
    save_sstp_sidecar(side, w.truth);
  }
  {
    std::ofstream cfgf(o.out + ".cfg", std::ios::trunc);
    if (!cfgf) throw IoError("cannot open '" + o.out + ".cfg' for writing");
    cfgf << "grid=" << o.grid << "\nbbox=" << detail::bbox_string(box) << '\n';
  }
  out << "generated trips=" << w.trips.size() << " g=" << o.grid << " attractors=" << w.attractors.size()
      << " seed=" << o.seed << " csv=" << o.out << " sidecar=" << o.out << ".sstp config=" << o.out
      << ".cfg\n";
  return kExitOk;
}

// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Options o;
  CLI::App app{"Destination prediction on grid trajectories", "edp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto add_config = [&](CLI::App* s) { s->add_option("--config", o.config, "key=value file with defaults"); };
  auto add_grid = [&](CLI::App* s, bool required) {
    auto* opt = s->add_option("--grid", o.grid, "cells per side (g >= 2)")->check(CLI::Range(2, 4096));
    if (required) opt->required();
  };
  auto add_query_opts = [&](CLI::App* s) {
    s->add_option("--model", o.model, "model file")->required();
    s->add_option("--history", o.history, "training trajectory CSV")->required();
    s->add_option("--top", o.top, "destinations per query");
    s->add_option("--alpha", o.alpha, "decay factor, 0 < alpha < 1");
    s->add_option("--knn", o.knn, "historical matches kept for continuation");
    s->add_option("--bin-width", o.bin_width, "trip-distance histogram bin width (km)");
    s->add_option("--distance", o.distance, "great-circle or l1");
    s->add_option("--out", o.out, "output file (default stdout)");
  };

  auto* train = app.add_subcommand("train", "train a model from trajectory CSV");
  add_config(train);
  train->add_option("--input", o.input, "trajectory CSV")->required();
  add_grid(train, true);
  train->add_option("--max-detour", o.max_detour, "largest detour, even");
  train->add_option("--bbox", o.bbox, "lat_min,lat_max,lon_min,lon_max (default: from data)");
  train->add_option("--out", o.out, "model file")->required();

  auto* update = app.add_subcommand("update", "apply an SSTP change set to a model");
  add_config(update);
  update->add_option("--model", o.model, "model file")->required();
  update->add_option("--changes", o.changes, "change set CSV")->required();
  update->add_option("--mode", o.mode, "paper or exact");
  update->add_option("--out", o.out, "output model (default: in place)");

  auto* predict = app.add_subcommand("predict", "rank destinations for partial trips");
  add_config(predict);
  add_query_opts(predict);
  predict->add_option("--queries", o.queries, "partial trajectory CSV")->required();
  predict->add_flag("--use-current", o.use_current, "skip future-location inference");

  auto* eval = app.add_subcommand("eval", "deviation of truncated held-out trips");
  add_config(eval);
  add_query_opts(eval);
  eval->add_option("--test", o.test, "held-out trajectory CSV")->required();
  eval->add_option("--completion", o.completion, "completion fractions, comma separated");
  eval->add_flag("--match-ratio-buckets", o.match_buckets, "split by exact-recurrence vs novel trips");
  eval->add_flag("--alpha-sweep", o.alpha_sweep, "deviation for each value of --alphas");
  eval->add_option("--alphas", o.alphas, "decay factors for the sweep");
  eval->add_flag("--baseline", o.compare_baseline, "also rank from the current cell");

  auto* bench = app.add_subcommand("bench", "training time against matrix power");
  add_config(bench);
  bench->add_option("--grids", o.grids, "grid sides, comma separated");
  bench->add_option("--max-detour", o.max_detour, "largest detour, even");
  bench->add_option("--kernel", o.kernel, "dense or sparse matrix product");
  bench->add_option("--seed", o.seed, "SSTP seed");
  bench->add_option("--out", o.out, "CSV file (default stdout)");

  auto* census = app.add_subcommand("census", "nonzero entries of M^s");
  add_config(census);
  add_grid(census, true);
  census->add_option("--steps", o.steps, "largest s (default 2g)");
  census->add_flag("--analytic", o.analytic, "add Z_SMM and Z_ETP columns");
  census->add_option("--out", o.out, "CSV file (default stdout)");

  auto* gen = app.add_subcommand("gen", "write a synthetic trajectory CSV and its true SSTP");
  add_config(gen);
  add_grid(gen, true);
  gen->add_option("--trips", o.trips, "number of trips")->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "random seed");
  gen->add_option("--detour-rate", o.detour_rate, "probability of a spur per trip")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--attractors", o.attractors, "destination attractors (0: g/4, at least 2)");
  gen->add_option("--cell-km", o.cell_km, "cell size in km");
  gen->add_option("--out", o.out, "CSV path")->required();

  try {
    // Config values go in front of the command line so explicit flags win.
    std::string config_path;
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--config" && k + 1 < args.size()) config_path = args[k + 1];
      if (args[k].rfind("--config=", 0) == 0) config_path = args[k].substr(9);
    }
    if (!config_path.empty() && !args.empty()) {
      CLI::App* sub = nullptr;
      for (auto* s : app.get_subcommands({})) {
        if (s->get_name() == args.front()) sub = s;
      }
      std::vector<std::string> injected;
      if (sub) {
        for (const auto& [key, value] : detail::read_config(config_path)) {
          const std::string flag = "--" + key;
          if (!sub->get_option_no_throw(flag) || detail::given_on_command_line(args, flag)) continue;
          injected.push_back(flag + "=" + value);
        }
      }
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
    std::vector<const char*> cargv{argv[0]};
    for (const auto& a : args) cargv.push_back(a.c_str());
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*update) return cmd_update(o, out);
    if (*predict) return cmd_predict(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*bench) return cmd_bench(o, out, err);
    if (*census) return cmd_census(o, out, err);
    if (*gen) return cmd_gen(o, out);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace edp::cli
