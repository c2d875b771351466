// Command-line front end: data generation, filtering, cold-start training,
// group-relative policy optimization, view selection, and evaluation.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scenerl/pipeline.hpp"

namespace {

constexpr const char* kEndpointEnv = "SCENERL_ORACLE_ENDPOINT";

struct GlobalArgs {
  std::string configPath;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outDir;
};

scenerl::RunConfig resolve_config(const GlobalArgs& args) {
  scenerl::RunConfig cfg;
  if (!args.configPath.empty()) cfg = scenerl::load_config(args.configPath);
  if (args.seed) cfg.seed = *args.seed;
  if (args.outDir) cfg.outDir = *args.outDir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-scene policy training pipeline"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--config", global.configPath, "JSON config file");
  auto* seedOpt = app.add_option("--seed", "Master seed override");
  auto* outOpt = app.add_option("--out", "Output directory override");

  std::string oracleMode;
  std::string endpoint;

  auto* genData = app.add_subcommand("gen-data", "Generate scenes and CoT records");
  auto* filter = app.add_subcommand("filter", "Run the rule-based CoT filter");
  filter->add_option("--oracle", oracleMode, "Consistency oracle: echo|remote");
  filter->add_option("--endpoint", endpoint, "Remote oracle endpoint URL");
  auto* trainSft = app.add_subcommand("train-sft", "Cold-start supervised training");
  auto* trainRl = app.add_subcommand("train-rl", "Policy optimization from the cold start");
  auto* selectViews = app.add_subcommand("select-views", "Rank and select scene views");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenes");
  std::string checkpointPath;
  eval->add_option("--checkpoint", checkpointPath,
                   "Checkpoint path (default: the RL checkpoint)");

  // let --config/--seed/--out appear after the subcommand as well
  for (auto* sub : {genData, filter, trainSft, trainRl, selectViews, eval})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (!seedOpt->empty()) global.seed = seedOpt->as<std::uint64_t>();
  if (!outOpt->empty()) global.outDir = outOpt->as<std::string>();

  try {
    scenerl::RunConfig cfg = resolve_config(global);

    if (genData->parsed()) {
      const auto report = scenerl::cmd_gen_data(cfg);
      std::cout << "scenes=" << report.scenes << " records=" << report.records
                << " corrupted=" << report.corrupted << "\n";
      return 0;
    }
    if (filter->parsed()) {
      if (!oracleMode.empty()) cfg.oracle.mode = oracleMode;
      if (const char* env = std::getenv(kEndpointEnv); env && *env)
        if (cfg.oracle.endpoint.empty()) cfg.oracle.endpoint = env;
      if (!endpoint.empty()) cfg.oracle.endpoint = endpoint;  // flag wins
      const auto report = scenerl::cmd_filter(cfg);
      std::cout << "total=" << report.filter.total
                << " accepted=" << report.filter.accepted
                << " rejected=" << report.filter.rejected
                << " oracleFailures=" << report.filter.oracleFailures
                << " malformed=" << report.malformedInput << "\n";
      return report.filter.oracleFailures > 0 ? 1 : 0;
    }
    if (trainSft->parsed()) {
      const auto report = scenerl::cmd_train_sft(cfg);
      std::cout << "examples=" << report.examples
                << " finalLoss=" << report.epochLoss.back() << "\n";
      return 0;
    }
    if (trainRl->parsed()) {
      const auto report = scenerl::cmd_train_rl(cfg);
      std::cout << "epochs=" << report.epochMeanReward.size()
                << " finalMeanReward=" << report.epochMeanReward.back()
                << "\n";
      return 0;
    }
    if (selectViews->parsed()) {
      scenerl::cmd_select_views(cfg);
      std::cout << "views written to " << scenerl::views_path(cfg) << "\n";
      return 0;
    }
    if (eval->parsed()) {
      if (checkpointPath.empty())
        checkpointPath = scenerl::rl_checkpoint_path(cfg);
      const auto metrics = scenerl::cmd_eval(cfg, checkpointPath);
      std::cout << "exactMatch=" << metrics.answerExactMatchRate
                << " meanIoU=" << metrics.meanIoU
                << " meanReward=" << metrics.meanReward << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
