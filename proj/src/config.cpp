#include "scenerl/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "scenerl/rng.hpp"

namespace scenerl {

nlohmann::json config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"seed", cfg.seed},
      {"outDir", cfg.outDir},
      {"nScenes", cfg.nScenes},
      {"nObjects", cfg.nObjects},
      {"questionsPerScene", cfg.questionsPerScene},
      {"corruptionFraction", cfg.corruptionFraction},
      {"scenePlacement", cfg.scenePlacement},
      {"embeddingDim", cfg.embeddingDim},
      {"viewStrategy", cfg.viewStrategy},
      {"kViews", cfg.kViews},
      {"horizontalViews", cfg.horizontalViews},
      {"elevatedViews", cfg.elevatedViews},
      {"bottomViews", cfg.bottomViews},
      {"fusion",
       {{"mode", cfg.fusion.mode},
        {"wText", cfg.fusion.wText},
        {"wCoverage", cfg.fusion.wCoverage},
        {"mu", cfg.fusion.mu},
        {"lambda", cfg.fusion.lambda},
        {"margin", cfg.fusion.margin},
        {"steps", cfg.fusion.steps},
        {"stepSize", cfg.fusion.stepSize}}},
      {"rewards",
       {{"wFormat", cfg.rewardWeights.wFormat},
        {"wPerception", cfg.rewardWeights.wPerception},
        {"wSimilarity", cfg.rewardWeights.wSimilarity},
        {"enableFormat", cfg.rewardWeights.enableFormat},
        {"enablePerception", cfg.rewardWeights.enablePerception},
        {"enableSimilarity", cfg.rewardWeights.enableSimilarity}}},
      {"scoreUnparsed", cfg.scoreUnparsed},
      {"rlRenderCorruption", cfg.rlRenderCorruption},
      {"perceptionDilation", cfg.perceptionDilation},
      {"perceptionNoise", cfg.perceptionNoise},
      {"grpo",
       {{"groupSize", cfg.grpo.groupSize},
        {"clip", cfg.grpo.clip},
        {"klCoeff", cfg.grpo.klCoeff},
        {"stdEpsilon", cfg.grpo.stdEpsilon},
        {"innerEpochs", cfg.grpo.innerEpochs},
        {"stepSize", cfg.grpo.stepSize}}},
      {"rlEpochs", cfg.rlEpochs},
      {"sftEpochs", cfg.sftEpochs},
      {"sftStepSize", cfg.sftStepSize},
      {"filter",
       {{"minThinkWords", cfg.filter.minThinkWords},
        {"minAnswerWords", cfg.filter.minAnswerWords},
        {"minSteps", cfg.filter.minSteps},
        {"simThreshold", cfg.filter.simThreshold},
        {"stepCues", cfg.filter.stepCues},
        {"canonicalizeSimilarity", cfg.filter.canonicalizeSimilarity}}},
      {"oracle",
       {{"mode", cfg.oracle.mode},
        {"endpoint", cfg.oracle.endpoint},
        {"timeoutSec", cfg.oracle.timeoutSec},
        {"maxAttempts", cfg.oracle.maxAttempts},
        {"backoffBaseSec", cfg.oracle.backoffBaseSec}}},
      {"evalScenes", cfg.evalScenes}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.outDir = j.value("outDir", cfg.outDir);
  cfg.nScenes = j.value("nScenes", cfg.nScenes);
  cfg.nObjects = j.value("nObjects", cfg.nObjects);
  cfg.questionsPerScene = j.value("questionsPerScene", cfg.questionsPerScene);
  cfg.corruptionFraction = j.value("corruptionFraction", cfg.corruptionFraction);
  cfg.scenePlacement = j.value("scenePlacement", cfg.scenePlacement);
  cfg.embeddingDim = j.value("embeddingDim", cfg.embeddingDim);
  cfg.viewStrategy = j.value("viewStrategy", cfg.viewStrategy);
  cfg.kViews = j.value("kViews", cfg.kViews);
  cfg.horizontalViews = j.value("horizontalViews", cfg.horizontalViews);
  cfg.elevatedViews = j.value("elevatedViews", cfg.elevatedViews);
  cfg.bottomViews = j.value("bottomViews", cfg.bottomViews);
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    cfg.fusion.mode = f.value("mode", cfg.fusion.mode);
    cfg.fusion.wText = f.value("wText", cfg.fusion.wText);
    cfg.fusion.wCoverage = f.value("wCoverage", cfg.fusion.wCoverage);
    cfg.fusion.mu = f.value("mu", cfg.fusion.mu);
    cfg.fusion.lambda = f.value("lambda", cfg.fusion.lambda);
    cfg.fusion.margin = f.value("margin", cfg.fusion.margin);
    cfg.fusion.steps = f.value("steps", cfg.fusion.steps);
    cfg.fusion.stepSize = f.value("stepSize", cfg.fusion.stepSize);
  }
  if (j.contains("rewards")) {
    const auto& r = j.at("rewards");
    cfg.rewardWeights.wFormat = r.value("wFormat", cfg.rewardWeights.wFormat);
    cfg.rewardWeights.wPerception =
        r.value("wPerception", cfg.rewardWeights.wPerception);
    cfg.rewardWeights.wSimilarity =
        r.value("wSimilarity", cfg.rewardWeights.wSimilarity);
    cfg.rewardWeights.enableFormat =
        r.value("enableFormat", cfg.rewardWeights.enableFormat);
    cfg.rewardWeights.enablePerception =
        r.value("enablePerception", cfg.rewardWeights.enablePerception);
    cfg.rewardWeights.enableSimilarity =
        r.value("enableSimilarity", cfg.rewardWeights.enableSimilarity);
  }
  cfg.scoreUnparsed = j.value("scoreUnparsed", cfg.scoreUnparsed);
  cfg.rlRenderCorruption = j.value("rlRenderCorruption", cfg.rlRenderCorruption);
  cfg.perceptionDilation = j.value("perceptionDilation", cfg.perceptionDilation);
  cfg.perceptionNoise = j.value("perceptionNoise", cfg.perceptionNoise);
  if (j.contains("grpo")) {
    const auto& g = j.at("grpo");
    cfg.grpo.groupSize = g.value("groupSize", cfg.grpo.groupSize);
    cfg.grpo.clip = g.value("clip", cfg.grpo.clip);
    cfg.grpo.klCoeff = g.value("klCoeff", cfg.grpo.klCoeff);
    cfg.grpo.stdEpsilon = g.value("stdEpsilon", cfg.grpo.stdEpsilon);
    cfg.grpo.innerEpochs = g.value("innerEpochs", cfg.grpo.innerEpochs);
    cfg.grpo.stepSize = g.value("stepSize", cfg.grpo.stepSize);
  }
  cfg.rlEpochs = j.value("rlEpochs", cfg.rlEpochs);
  cfg.sftEpochs = j.value("sftEpochs", cfg.sftEpochs);
  cfg.sftStepSize = j.value("sftStepSize", cfg.sftStepSize);
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    cfg.filter.minThinkWords = f.value("minThinkWords", cfg.filter.minThinkWords);
    cfg.filter.minAnswerWords =
        f.value("minAnswerWords", cfg.filter.minAnswerWords);
    cfg.filter.minSteps = f.value("minSteps", cfg.filter.minSteps);
    cfg.filter.simThreshold = f.value("simThreshold", cfg.filter.simThreshold);
    cfg.filter.stepCues = f.value("stepCues", cfg.filter.stepCues);
    cfg.filter.canonicalizeSimilarity =
        f.value("canonicalizeSimilarity", cfg.filter.canonicalizeSimilarity);
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    cfg.oracle.mode = o.value("mode", cfg.oracle.mode);
    cfg.oracle.endpoint = o.value("endpoint", cfg.oracle.endpoint);
    cfg.oracle.timeoutSec = o.value("timeoutSec", cfg.oracle.timeoutSec);
    cfg.oracle.maxAttempts = o.value("maxAttempts", cfg.oracle.maxAttempts);
    cfg.oracle.backoffBaseSec =
        o.value("backoffBaseSec", cfg.oracle.backoffBaseSec);
  }
  cfg.evalScenes = j.value("evalScenes", cfg.evalScenes);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << config_to_json(cfg).dump(2) << "\n";
}

nlohmann::json config_canonical_json(const RunConfig& cfg) {
  nlohmann::json j = config_to_json(cfg);
  j.erase("outDir");
  j["oracle"].erase("endpoint");
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string canonical = config_canonical_json(cfg).dump();
  const std::uint64_t h = fnv1a64(canonical);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace scenerl
