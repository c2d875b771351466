#pragma once

#include <Eigen/Dense>

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scenerl/embedding.hpp"

namespace scenerl {

struct ViewCandidate {
  std::string id;
  Eigen::Vector3d cameraPosition{Eigen::Vector3d::Zero()};
  Eigen::Vector3d lookAt{Eigen::Vector3d::Zero()};
  Eigen::VectorXd point3dEmbedding;
  Eigen::VectorXd renderedJointEmbedding;
};

struct SceneQueryContext {
  Eigen::VectorXd textEmbedding;
  Eigen::VectorXd jointTextEmbedding;
  std::vector<Eigen::VectorXd> imageEmbeddings;
};

struct ScoreTriple {
  double sText3d = 0.0;
  double sImage3d = 0.0;
  double sJoint = 0.0;
};

/// Learnable fusion weights. The text weight is free; the coverage and joint
/// weights are a logistic split of one parameter so they sum to 1 exactly at
/// every point of training.
struct FusionWeights {
  double wText = 0.3;
  double preConstraint = 0.0;  // coverageWeight = sigmoid(preConstraint)
  double mu = 0.3;
  double lambda = 0.1;

  double coverageWeight() const { return 1.0 / (1.0 + std::exp(-preConstraint)); }
  double jointWeight() const { return 1.0 - coverageWeight(); }
};

// Text->view, image-set->view (mean), and joint-space similarities.
ScoreTriple score_view(const ViewCandidate& v, const SceneQueryContext& ctx);

inline double fuse(const ScoreTriple& s, const FusionWeights& w) {
  return w.wText * s.sText3d + w.coverageWeight() * s.sImage3d +
         w.jointWeight() * s.sJoint;
}

// Candidates ranked by fused utility, descending; ties broken by id.
// Returns min(k, |candidates|) entries. Throws on an empty candidate list.
std::vector<std::pair<std::string, double>> select_top_k(
    const std::vector<ViewCandidate>& candidates, const SceneQueryContext& ctx,
    const FusionWeights& w, int k);

inline double weight_reg_loss(const FusionWeights& w) {
  const double d = w.wText - w.mu;
  return w.lambda * d * d;
}

/// One supervision item: candidates scored against a query, with the ids the
/// selection should rank above the rest.
struct RankingItem {
  std::vector<ViewCandidate> candidates;
  SceneQueryContext ctx;
  std::vector<std::string> preferredIds;
};

struct FusionTrainOptions {
  double margin = 0.1;
  FusionWeights init{};
};

// SGD on a pairwise hinge ranking loss plus the L2 pull of wText toward mu.
// Each step draws one item and descends its loss; the coverage/joint split
// stays parameterized, never projected. Throws when no item has both a
// preferred and a non-preferred candidate.
FusionWeights train_fusion_weights(const std::vector<RankingItem>& dataset,
                                   int steps, double stepSize,
                                   std::mt19937_64& rng,
                                   const FusionTrainOptions& opts = {});

}  // namespace scenerl
