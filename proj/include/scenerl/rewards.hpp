#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "scenerl/aabb.hpp"
#include "scenerl/embedding.hpp"

namespace scenerl {

/// Inner contents of the <think>/<answer> tag pair, tags excluded.
struct StructuredResponse {
  std::string think;
  std::string answer;
};

// Accepts exactly <think>...</think><answer>...</answer> with non-empty
// bodies, nothing but whitespace around or between the tag pairs, and no
// nested <think> inside the think body. Tag names are case-sensitive.
std::optional<StructuredResponse> parse_structured(std::string_view raw);

// 1 iff parse_structured succeeds.
int reward_format(std::string_view raw);

inline double reward_perception(const Aabb3& predicted, const Aabb3& truth) {
  return iou(predicted, truth);
}

// Raw cosine between text-channel embeddings of the two answers; unclamped.
double reward_similarity(std::string_view predictedAnswer,
                         std::string_view truthAnswer,
                         const EmbeddingProvider& provider);

struct RewardWeights {
  double wFormat = 1.0;
  double wPerception = 1.0;
  double wSimilarity = 1.0;
  bool enableFormat = true;
  bool enablePerception = true;
  bool enableSimilarity = true;

  bool valid() const {
    return wFormat >= 0.0 && wPerception >= 0.0 && wSimilarity >= 0.0 &&
           (enableFormat || enablePerception || enableSimilarity);
  }
};

struct RewardBreakdown {
  int format = 0;
  double perception = 0.0;
  double similarity = 0.0;
  double total = 0.0;
};

// Weighted sum over the enabled components.
double combine_rewards(int format, double perception, double similarity,
                       const RewardWeights& w);

inline RewardBreakdown make_breakdown(int format, double perception,
                                      double similarity,
                                      const RewardWeights& w) {
  return RewardBreakdown{format, perception, similarity,
                         combine_rewards(format, perception, similarity, w)};
}

}  // namespace scenerl
