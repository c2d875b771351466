#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "scenerl/cot_filter.hpp"
#include "scenerl/grpo.hpp"
#include "scenerl/rewards.hpp"

namespace scenerl {

struct OracleConfig {
  std::string mode = "echo";  // echo | remote
  std::string endpoint;       // http://host:port
  double timeoutSec = 30.0;
  int maxAttempts = 3;
  double backoffBaseSec = 1.0;  // waits double per retry: 1s, 2s, 4s, ...
};

struct FusionConfig {
  std::string mode = "learned";  // learned | fixed
  double wText = 0.3;
  double wCoverage = 0.5;  // fixed mode only; joint weight = 1 - coverage
  double mu = 0.3;
  double lambda = 0.1;
  double margin = 0.1;
  int steps = 400;
  double stepSize = 0.05;
};

// Desk-scale defaults chosen so the whole pipeline runs in seconds.
// Full-size training of this kind typically runs 2 epochs at batch 12 with a
// cosine 1e-5 -> 1e-6 schedule; those settings are documented here for
// reference, not used as defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string outDir = "out";

  // data generation
  int nScenes = 50;
  int nObjects = 8;
  int questionsPerScene = 4;
  double corruptionFraction = 0.2;
  std::string scenePlacement = "uniform";  // uniform | perimeter_low
  int embeddingDim = 64;

  // view selection
  std::string viewStrategy = "learned";  // all | horizontal | bottom | learned
  int kViews = 6;
  int horizontalViews = 10;
  int elevatedViews = 9;
  int bottomViews = 9;
  FusionConfig fusion;

  // rewards
  RewardWeights rewardWeights;
  bool scoreUnparsed = false;
  double rlRenderCorruption = 0.1;
  // The rollout's predicted box is the anchor box dilated by a half-width
  // (and optionally shifted by a deterministic per-(scene, anchor) offset),
  // standing in for a coarse box regressor; keeps the overlap reward graded
  // between non-overlapping objects.
  double perceptionDilation = 1.5;
  double perceptionNoise = 0.0;

  // optimization
  GrpoConfig grpo;
  int rlEpochs = 3;
  int sftEpochs = 40;
  double sftStepSize = 0.5;

  // filtering
  FilterConfig filter;
  OracleConfig oracle;

  // evaluation
  int evalScenes = 20;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// config_to_json minus pure-location fields (outDir, oracle endpoint), so
// hashes and embedded echoes do not change when artifacts move.
nlohmann::json config_canonical_json(const RunConfig& cfg);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// FNV-1a over the canonical JSON dump, as a fixed-width hex string.
std::string config_hash(const RunConfig& cfg);

}  // namespace scenerl
