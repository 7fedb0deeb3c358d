#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "edp_cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "edp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = edp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir() {
    const char* env = std::getenv("EDP_TMP");
    return fs::path(env ? env : fs::temp_directory_path().string()) / "edp_cli_test";
  }

  // One shared world: training split, held-out split and queries.
  static void SetUpTestSuite() {
    fs::remove_all(dir());
    fs::create_directories(dir());
    ASSERT_EQ(run({"gen", "--grid", "8", "--trips", "600", "--seed", "3", "--detour-rate", "0.2", "--out",
                   path("train.csv")})
                  .code,
              0);
    ASSERT_EQ(run({"gen", "--grid", "8", "--trips", "80", "--seed", "4", "--detour-rate", "0.2", "--out",
                   path("test.csv")})
                  .code,
              0);
    ASSERT_EQ(run({"train", "--config", path("train.csv.cfg"), "--input", path("train.csv"), "--max-detour",
                   "4", "--out", path("m.edp")})
                  .code,
              0);
    std::ofstream q(dir() / "queries.csv");
    const std::string csv = slurp(dir() / "test.csv");
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    q << line << '\n';
    int kept = 0;
    while (std::getline(lines, line) && kept < 40) {
      const auto comma = line.find(',');
      const auto seq = std::stoi(line.substr(comma + 1));
      if (seq < 3) q << line << '\n', ++kept;
    }
  }

  static std::string path(const std::string& name) { return (dir() / name).string(); }
};

}  // namespace

TEST_F(Cli, GenWritesCsvSidecarAndConfig) {
  EXPECT_TRUE(fs::exists(path("train.csv.sstp")));
  const std::string cfg = slurp(dir() / "train.csv.cfg");
  EXPECT_NE(cfg.find("grid=8"), std::string::npos);
  EXPECT_NE(cfg.find("bbox="), std::string::npos);
  EXPECT_EQ(slurp(dir() / "train.csv").rfind("trip_id,seq,timestamp,lat,lon", 0), 0u);
}

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(run({"gen", "--grid", "5", "--trips", "30", "--seed", "9", "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(run({"gen", "--grid", "5", "--trips", "30", "--seed", "9", "--out", path("b.csv")}).code, 0);
  EXPECT_EQ(slurp(dir() / "a.csv"), slurp(dir() / "b.csv"));
  EXPECT_EQ(slurp(dir() / "a.csv.sstp"), slurp(dir() / "b.csv.sstp"));
}

TEST_F(Cli, TrainIsDeterministic) {
  const auto r = run({"train", "--config", path("train.csv.cfg"), "--input", path("train.csv"), "--max-detour",
                      "4", "--out", path("m2.edp")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trained g=8"), std::string::npos);
  EXPECT_NE(r.out.find("bbox="), std::string::npos);
  EXPECT_EQ(slurp(dir() / "m.edp"), slurp(dir() / "m2.edp"));
}

TEST_F(Cli, ConfigLosesToExplicitFlag) {
  const auto r = run({"train", "--config", path("train.csv.cfg"), "--grid", "6", "--input", path("train.csv"),
                      "--max-detour", "0", "--out", path("m6.edp")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trained g=6"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"nosuch"}).code, 2);
  EXPECT_EQ(run({"train", "--grid", "1", "--input", path("train.csv"), "--out", path("x.edp")}).code, 2);
  EXPECT_EQ(run({"train", "--grid", "8", "--input", path("train.csv"), "--max-detour", "3", "--out",
                 path("x.edp")})
                .code,
            2);
  EXPECT_EQ(run({"census", "--grid", "4", "--bogus"}).code, 2);
  EXPECT_EQ(run({"bench", "--grids", "4", "--kernel", "magic"}).code, 2);
}

TEST_F(Cli, IoErrors) {
  EXPECT_EQ(run({"train", "--grid", "8", "--input", path("missing.csv"), "--out", path("x.edp")}).code, 3);
  const auto r = run({"predict", "--model", path("missing.edp"), "--history", path("train.csv"), "--queries",
                      path("queries.csv")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  std::ofstream(dir() / "junk.edp") << "not a model";
  EXPECT_EQ(run({"predict", "--model", path("junk.edp"), "--history", path("train.csv"), "--queries",
                 path("queries.csv")})
                .code,
            3);
  EXPECT_EQ(run({"census", "--grid", "4", "--config", path("missing.cfg")}).code, 3);
}

TEST_F(Cli, UpdateAndEpochRegression) {
  fs::copy_file(dir() / "m.edp", dir() / "u.edp", fs::copy_options::overwrite_existing);
  std::ofstream(dir() / "c2.csv") << "epoch,cell_id,neighbor_cell_id,probability\n2,9,1,0.5\n2,9,17,0.5\n";
  std::ofstream(dir() / "c1.csv") << "epoch,cell_id,neighbor_cell_id,probability\n1,9,8,1.0\n";
  const auto a = run({"update", "--model", path("u.edp"), "--changes", path("c2.csv"), "--mode", "exact"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("update mode=exact"), std::string::npos);
  EXPECT_NE(a.out.find("epoch=2"), std::string::npos);
  EXPECT_EQ(run({"update", "--model", path("u.edp"), "--changes", path("c1.csv")}).code, 2);
  EXPECT_EQ(run({"update", "--model", path("u.edp"), "--changes", path("c2.csv"), "--mode", "fast"}).code, 2);

  const auto p = run({"update", "--model", path("m.edp"), "--changes", path("c2.csv"), "--mode", "paper",
                      "--out", path("p.edp")});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("update mode=paper"), std::string::npos);
  EXPECT_TRUE(edp::load_model(path("p.edp")).model.epoch() == 2);
}

TEST_F(Cli, PredictEmitsOneJsonLinePerQuery) {
  const auto r = run({"predict", "--model", path("m.edp"), "--history", path("train.csv"), "--queries",
                      path("queries.csv"), "--top", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.contains("query_id"));
    ASSERT_TRUE(j["ranked"].is_array());
    EXPECT_LE(j["ranked"].size(), 2u);
    ++n;
  }
  EXPECT_GT(n, 0);
}

TEST_F(Cli, EvalSections) {
  const auto r = run({"eval", "--model", path("m.edp"), "--history", path("train.csv"), "--test", path("test.csv"),
                      "--completion", "0.5", "--match-ratio-buckets", "--alpha-sweep", "--alphas", "0.004,0.1",
                      "--baseline"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("section,completion,bucket,alpha,engine,queries,cold_starts,deviation_km\n", 0), 0u);
  EXPECT_NE(r.out.find("completion,0.500000,all,0.004000,edp,"), std::string::npos);
  EXPECT_NE(r.out.find(",baseline_c,"), std::string::npos);
  EXPECT_NE(r.out.find("match_ratio,0.500000,exact"), std::string::npos);
  EXPECT_NE(r.out.find("match_ratio,0.500000,novel"), std::string::npos);
  EXPECT_NE(r.out.find("alpha_sweep,0.500000,all,0.100000,edp"), std::string::npos);
  EXPECT_EQ(run({"eval", "--model", path("m.edp"), "--history", path("train.csv"), "--test", path("test.csv"),
                 "--completion", "1.5"})
                .code,
            2);
}

TEST_F(Cli, BenchAndCensus) {
  const auto b = run({"bench", "--grids", "4,6", "--max-detour", "2"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(b.out.rfind("g,edp_ms,smm_ms,speedup\n4,", 0), 0u);
  EXPECT_NE(b.out.find("\n6,"), std::string::npos);
  EXPECT_NE(b.err.find("non-decreasing"), std::string::npos);

  const auto c = run({"census", "--grid", "3", "--analytic"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(c.out.rfind("g,s,empirical,z_smm,z_etp,ratio\n3,1,24,", 0), 0u);
  EXPECT_NE(c.out.find("3,4,41,"), std::string::npos);
  EXPECT_NE(c.err.find("above 0.5"), std::string::npos);
  const auto plain = run({"census", "--grid", "2", "--out", path("census.csv")});
  ASSERT_EQ(plain.code, 0);
  EXPECT_EQ(slurp(dir() / "census.csv").rfind("g,s,empirical,ratio\n2,1,8,0.500000\n", 0), 0u);
}
