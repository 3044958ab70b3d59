#include <gtest/gtest.h>

#include <fstream>

#include "cli/commands.hpp"
#include "failopt/net.hpp"
#include "failopt/opt/failopt.hpp"
#include "cli/run_config.hpp"
#include "support.hpp"

namespace failopt::cli {
namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "failopt");
  return run(args);
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Cli, OptimizeWritesRunDirectory) {
  test::TempDir dir;
  const auto out = dir / "run";
  const auto before = net::call_count();
  ASSERT_EQ(cli({"optimize", "--scenario", "S1", "--out", out.string(), "--set", "failopt.step_max=2"}), 0);
  EXPECT_EQ(net::call_count(), before);
  for (const char* f : {"config.json", "final_list.json", "steps.jsonl", "checkpoint.json",
                        "transcripts/generation.jsonl", "logs/failopt.log"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  EXPECT_FALSE(std::filesystem::exists(out / "error.json"));
  EXPECT_TRUE(opt::load_final_list(out / "final_list.json").contains("Avoid formulaic closing phrases."));
  const auto cfg = test::read_json(out / "config.json");
  EXPECT_EQ(cfg.at("failopt").at("step_max"), 2);
  EXPECT_EQ(cfg.at("backend").at("scenario"), "S1");
}

TEST(Cli, MissingDataExitsWithDataError) {
  test::TempDir dir;
  const auto out = dir / "run";
  const auto missing = (dir / "absent.jsonl").string();
  EXPECT_EQ(cli({"eval", "--data", missing, "--out", out.string()}), 3);
  const auto err = test::read_json(out / "error.json").at("error");
  EXPECT_EQ(err.at("category"), "data");
  EXPECT_EQ(err.at("exit_code"), 3);
  EXPECT_NE(err.at("message").get<std::string>().find(missing), std::string::npos);
}

TEST(Cli, BadConfigExitsWithConfigError) {
  test::TempDir dir;
  write(dir / "unknown.json", R"({"failopt": {"beam_size": 3}})");
  write(dir / "broken.json", "{not json");
  const auto out = (dir / "run").string();
  EXPECT_EQ(cli({"optimize", "--config", (dir / "unknown.json").string(), "--out", out}), 2);
  EXPECT_NE(test::read_json(dir / "run" / "error.json").dump().find("beam_size"), std::string::npos);
  EXPECT_EQ(cli({"optimize", "--config", (dir / "broken.json").string(), "--out", out}), 2);
  EXPECT_EQ(cli({"optimize", "--set", "failopt.k=0", "--out", out}), 2);
  EXPECT_EQ(cli({"optimize", "--backend", "http", "--out", out}), 2);
  EXPECT_EQ(cli({"frobnicate"}), 2);
}

TEST(Cli, EvalGridHasOneRowPerDetectorAttackTask) {
  test::TempDir dir;
  write(dir / "cfg.json", R"({"eval": {"detectors": [{"kind": "linear"},
                                                   {"kind": "perplexity", "params": {"lm": "unigram"}}]},
                              "failopt": {"step_max": 2}})");
  const auto out = dir / "run";
  ASSERT_EQ(cli({"eval", "--config", (dir / "cfg.json").string(), "--out", out.string(), "--scenario", "S1"}), 0);
  const auto csv = test::read_text(out / "results" / "grid.csv");
  EXPECT_EQ(lines(csv), 1u + 2u * 3u);
  EXPECT_TRUE(std::filesystem::exists(out / "results" / "grid.txt"));
  for (const char* attack : {",N/A,", ",PARA,", ",FAILOpt,"}) EXPECT_NE(csv.find(attack), std::string::npos);
}

TEST(Cli, ConfigSnapshotReproducesResults) {
  test::TempDir dir;
  const auto a = dir / "a";
  const auto b = dir / "b";
  ASSERT_EQ(cli({"eval", "--scenario", "S3", "--seed", "21", "--out", a.string(), "--set", "failopt.step_max=2"}), 0);
  ASSERT_EQ(cli({"eval", "--config", (a / "config.json").string(), "--out", b.string()}), 0);
  EXPECT_EQ(test::read_text(a / "results" / "grid.csv"), test::read_text(b / "results" / "grid.csv"));
  auto ja = test::read_json(a / "config.json");
  auto jb = test::read_json(b / "config.json");
  ja["paths"].erase("out");
  jb["paths"].erase("out");
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(ja.at("failopt").at("seed"), 21);
}

TEST(Cli, ResumeCompletesInterruptedRun) {
  test::TempDir dir;
  const auto out = dir / "run";
  ASSERT_EQ(cli({"optimize", "--scenario", "S1", "--out", out.string()}), 0);
  const auto first = test::read_text(out / "final_list.json");
  ASSERT_EQ(cli({"optimize", "--resume", out.string()}), 0);
  EXPECT_EQ(test::read_text(out / "final_list.json"), first);
  EXPECT_EQ(cli({"optimize", "--resume", (dir / "nowhere").string()}), 3);
}

TEST(Cli, ProbeWritesResult) {
  test::TempDir dir;
  const auto out = dir / "run";
  ASSERT_EQ(cli({"probe", "--scenario", "S1", "--criterion-text", "Avoid formulaic closing phrases.", "--out",
                 out.string(), "--set", "probe.n_questions=20"}),
            0);
  const auto j = test::read_json(out / "results" / "probe.json");
  EXPECT_EQ(j.at("win_ratio"), 1.0);
}

TEST(Cli, ErrorJsonShape) {
  const auto j = error_json(Errc::Io, "cannot open x");
  EXPECT_EQ(j.at("error").at("exit_code"), 3);
  EXPECT_EQ(j.at("error").at("code"), "IoError");
  EXPECT_EQ(exit_code(ErrorCategory::Config), 2);
  EXPECT_EQ(exit_code(ErrorCategory::Backend), 4);
  EXPECT_EQ(exit_code(ErrorCategory::Internal), 1);
}

TEST(Cli, OverrideParsing) {
  EXPECT_EQ(parse_override("failopt.k=3"), (std::pair<std::string, nlohmann::json>{"/failopt/k", 3}));
  EXPECT_EQ(parse_override("backend.model=gpt").second, "gpt");
  EXPECT_THROW(parse_override("novalue"), Error);
}

}  // namespace
}  // namespace failopt::cli
