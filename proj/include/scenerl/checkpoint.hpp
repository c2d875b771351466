#pragma once

#include <optional>
#include <string>

#include "scenerl/grpo.hpp"
#include "scenerl/view_select.hpp"

namespace scenerl {

struct PolicyCheckpoint {
  int formatVersion = 1;
  std::string configHash;
  CategoricalPolicy policy;
  std::optional<FusionWeights> fusion;  // present when fusion was trained
};

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path);
PolicyCheckpoint load_checkpoint(const std::string& path);

}  // namespace scenerl
