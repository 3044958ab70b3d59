// Runs the end-to-end attack over five seeds per scenario and writes the
// observations and acceptance thresholds to goldens/<scenario>.json.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "failopt/llm/mock.hpp"
#include "failopt/testbed/testbed.hpp"

namespace {

using failopt::llm::MockScenario;
namespace fs = std::filesystem;

nlohmann::json observe(const MockScenario& base, std::uint64_t seed, std::size_t k) {
  auto scenario = base;
  scenario.seed = seed;
  failopt::testbed::E2EConfig cfg;
  cfg.failopt.seed = seed;
  cfg.failopt.k = k;
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = failopt::testbed::run_e2e_attack(scenario, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {{"seed", seed},
          {"k", k},
          {"base_auroc", out.base_report.auroc},
          {"attacked_auroc", out.attacked_report.auroc},
          {"para_auroc", out.para_report.auroc},
          {"asr", out.attacked_report.asr.value_or(0.0)},
          {"final_list", out.failopt.final_list.items()},
          {"final_rate", out.failopt.final_rate},
          {"baseline_rate", out.failopt.baseline_rate},
          {"network_calls", out.network_calls},
          {"seconds", secs}};
}

nlohmann::json thresholds(const std::string& id) {
  if (id == "S0") return {{"max_auroc_gap", 0.1}, {"max_rate_gap", 0.1}, {"base_auroc_band", {0.4, 0.6}}};
  if (id == "S1") {
    return {{"min_base_auroc", 0.95}, {"max_attacked_auroc", 0.6}, {"min_asr", 0.6}, {"max_final_rate", 0.2},
            {"min_baseline_rate", 0.9}, {"max_seconds", 60.0}};
  }
  return {{"min_final_list_size", 2}, {"max_median_final_rate", 0.4}};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: failopt_pilot <scenario_dir> <golden_dir> [scenario...]\n";
    return 2;
  }
  const fs::path scenario_dir = argv[1];
  const fs::path golden_dir = argv[2];
  std::vector<std::string> ids{"S0", "S1", "S3"};
  if (argc > 3) ids.assign(argv + 3, argv + argc);
  fs::create_directories(golden_dir);
  for (const auto& id : ids) {
    const auto scenario = failopt::llm::load_scenario(scenario_dir / (id + ".json"));
    nlohmann::json runs = nlohmann::json::array();
    nlohmann::json k1 = nlohmann::json::array();
    for (std::uint64_t seed = 17; seed < 22; ++seed) {
      runs.push_back(observe(scenario, seed, 2));
      if (id == "S3") k1.push_back(observe(scenario, seed, 1));
      std::cerr << id << " seed " << seed << " done\n";
    }
    nlohmann::json golden = {{"scenario", id}, {"pinned_seed", 17}, {"thresholds", thresholds(id)}, {"pilot", runs}};
    if (!k1.empty()) golden["pilot_k1"] = k1;
    std::ofstream(golden_dir / (id + ".json")) << golden.dump(2) << '\n';
  }
  return 0;
}
