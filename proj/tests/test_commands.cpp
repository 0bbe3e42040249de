#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace scrm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("scrm_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SCRM_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<oracle::IdPair> tsv_edges(const std::string& path, int order) {
  std::set<oracle::IdPair> out;
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string kind, a, b, freq, w, o;
    std::getline(f, kind, '\t');
    std::getline(f, a, '\t');
    std::getline(f, b, '\t');
    std::getline(f, freq, '\t');
    std::getline(f, w, '\t');
    std::getline(f, o, '\t');
    if (order == 0 || std::stoi(o) == order) out.insert(oracle::id_pair(a, b));
  }
  return out;
}

std::set<oracle::IdPair> pairs(std::initializer_list<std::pair<int, int>> l) {
  std::set<oracle::IdPair> out;
  for (auto [a, b] : l) out.insert(oracle::id_pair("v" + std::to_string(a), "v" + std::to_string(b)));
  return out;
}

// Small synthetic corpus shared by the train/evaluate tests.
const std::string kSmallSynth =
    " --n-items 40 --n-sub-clusters 8 --n-comp-pairs 12 --n-sessions 300";
const std::string kSmallTrain =
    " --min-item-support 1 --n-valid 30 --n-test 30 --epochs 2 --d0 8 --d1 8 --batch-size 50";

}  // namespace

TEST(Cli, BuildGraphsOnFig2Fixture) {
  TempDir d("fig2");
  const std::string args = "build-graphs --events-in " + std::string(SCRM_SAMPLES_DIR) +
                           "/fig2_events.csv --min-item-support 1 --graphs-out " + d.path.string();
  ASSERT_EQ(run_cli(args), 0);
  EXPECT_EQ(tsv_edges(d / "substitutable.tsv", 0), pairs({{1, 2}, {2, 3}, {4, 5}, {5, 6}}));
  EXPECT_EQ(tsv_edges(d / "complementary.tsv", 1), pairs({{3, 4}, {6, 2}}));
  EXPECT_EQ(tsv_edges(d / "complementary.tsv", 2), pairs({{2, 4}, {3, 5}, {2, 5}, {1, 6}, {3, 6}}));
  const auto stats = nlohmann::json::parse(slurp(d / "stats.json"));
  EXPECT_EQ(stats.at("complementary").at("num_edges"), 7);

  const std::string first = slurp(d / "complementary.tsv") + slurp(d / "stats.json");
  ASSERT_EQ(run_cli(args), 0);
  EXPECT_EQ(slurp(d / "complementary.tsv") + slurp(d / "stats.json"), first);
}

TEST(Cli, InputErrorsExitWithTwo) {
  TempDir d("errors");
  { std::ofstream(d / "empty.csv") << "session_id,timestamp,item_id,behavior\n"; }
  EXPECT_EQ(run_cli("build-graphs --events-in " + (d / "empty.csv") + " --graphs-out " + d.path.string()), 2);
  EXPECT_EQ(run_cli("build-graphs --events-in " + (d / "missing.csv")), 2);
  { std::ofstream(d / "bad.csv") << "s,1,a,view\n"; }
  EXPECT_EQ(run_cli("build-graphs --events-in " + (d / "bad.csv")), 2);
  EXPECT_EQ(run_cli("train --lr abc"), 2);
  EXPECT_EQ(run_cli("train --ablate sub_only,comp_only"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help >/dev/null"), 0);
  { std::ofstream(d / "bad.cfg") << "nonsense line\n"; }
  EXPECT_EQ(run_cli("train --config " + (d / "bad.cfg")), 2);
}

TEST(Cli, SynthWritesCorpusAndTruth) {
  TempDir d("synth");
  ASSERT_EQ(run_cli("synth --events-in " + (d / "ev.csv") + kSmallSynth), 0);
  const std::string first = slurp(d / "ev.csv");
  EXPECT_EQ(first.rfind("session_id,timestamp,item_id,behavior\n", 0), 0u);
  EXPECT_EQ(slurp(d / "planted_complementary.tsv").substr(0, 13), "item_i\titem_j");
  ASSERT_EQ(run_cli("synth --events-in " + (d / "ev2.csv") + kSmallSynth), 0);
  EXPECT_EQ(slurp(d / "ev2.csv"), first);
}

TEST(Cli, TrainEvaluateAndConfigRoundTrip) {
  TempDir d("train");
  ASSERT_EQ(run_cli("synth --events-in " + (d / "ev.csv") + kSmallSynth), 0);
  const std::string common = " --events-in " + (d / "ev.csv") + kSmallTrain;
  ASSERT_EQ(run_cli("train" + common + " --checkpoint " + (d / "m.ckpt") + " --save-config " + (d / "run.cfg")), 0);
  const auto log = slurp(d / "m.ckpt.log.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  EXPECT_TRUE(nlohmann::json::parse(log.substr(0, log.find('\n'))).contains("valid_MRR@10"));

  ASSERT_EQ(run_cli("evaluate" + common + " --checkpoint " + (d / "m.ckpt") + " --report-out " + (d / "r1.json") +
                    " --with-baselines"),
            0);
  ASSERT_EQ(run_cli("evaluate" + common + " --checkpoint " + (d / "m.ckpt") + " --report-out " + (d / "r2.json") +
                    " --with-baselines"),
            0);
  EXPECT_EQ(slurp(d / "r1.json"), slurp(d / "r2.json"));
  const auto r = nlohmann::json::parse(slurp(d / "r1.json"));
  for (const char* k : {"5", "10", "20"})
    for (const char* m : {"hr", "mrr", "ndcg"}) {
      EXPECT_TRUE(r.at(k).contains(m));
      EXPECT_TRUE(r.at("pop").at(k).contains(m));
      EXPECT_TRUE(r.at("itemknn").at(k).contains(m));
    }
  EXPECT_EQ(r.at("model"), "scrm");
  EXPECT_EQ(r.at("dataset"), "ev");

  // Reloading the saved config reproduces the checkpoint bytes.
  ASSERT_EQ(run_cli("train --config " + (d / "run.cfg") + " --checkpoint " + (d / "m2.ckpt")), 0);
  EXPECT_EQ(slurp(d / "m2.ckpt"), slurp(d / "m.ckpt"));
  EXPECT_EQ(slurp(d / "m.ckpt.config"), slurp(d / "run.cfg"));

  // A checkpoint trained on different data is rejected.
  ASSERT_EQ(run_cli("synth --events-in " + (d / "other.csv") + kSmallSynth + " --seed 4"), 0);
  EXPECT_EQ(run_cli("evaluate --events-in " + (d / "other.csv") + kSmallTrain + " --checkpoint " + (d / "m.ckpt") +
                    " --report-out " + (d / "r3.json")),
            2);
}

TEST(Cli, AblateWritesReportAndTable) {
  TempDir d("ablate");
  ASSERT_EQ(run_cli("synth --events-in " + (d / "ev.csv") + kSmallSynth), 0);
  ASSERT_EQ(run_cli("ablate --events-in " + (d / "ev.csv") + kSmallTrain + " --epochs 1 --variants full,sub_only,wgat2" +
                    " --seeds 1,2 --report-out " + (d / "ab.json")),
            0);
  const auto j = nlohmann::json::parse(slurp(d / "ab.json"));
  ASSERT_EQ(j.at("variants").size(), 3u);
  EXPECT_EQ(j.at("variants")[1].at("label"), "SCRM-C");
  EXPECT_EQ(j.at("variants")[2].at("per_seed_mrr@10").size(), 2u);
  EXPECT_EQ(j.at("seeds"), nlohmann::json({1, 2}));
  const auto csv = slurp(d / "ab.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(run_cli("ablate --events-in " + (d / "ev.csv") + " --variants nope"), 2);
}

TEST(Variants, LabelsAndFlags) {
  EXPECT_EQ(default_ablation_names().size(), 8u);
  EXPECT_TRUE(find_variant("comp_only").flags.comp_only);
  EXPECT_EQ(find_variant("comp_only").label, "SCRM-S");
  EXPECT_EQ(find_variant("sub_only").label, "SCRM-C");
  EXPECT_EQ(find_variant("no_denoise").label, "SCRM-DL");
  EXPECT_EQ(find_variant("wgat3").flags.wgat_layers, 3u);
  try {
    find_variant("bogus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadConfig);
  }
}
