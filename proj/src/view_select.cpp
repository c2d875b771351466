#include "scenerl/view_select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "scenerl/rng.hpp"

namespace scenerl {

ScoreTriple score_view(const ViewCandidate& v, const SceneQueryContext& ctx) {
  if (ctx.imageEmbeddings.empty())
    throw std::invalid_argument("score_view: scene image set is empty");
  ScoreTriple s;
  s.sText3d = cosine(ctx.textEmbedding, v.point3dEmbedding);
  double acc = 0.0;
  for (const Eigen::VectorXd& img : ctx.imageEmbeddings)
    acc += cosine(img, v.point3dEmbedding);
  s.sImage3d = acc / static_cast<double>(ctx.imageEmbeddings.size());
  s.sJoint = cosine(ctx.jointTextEmbedding, v.renderedJointEmbedding);
  return s;
}

std::vector<std::pair<std::string, double>> select_top_k(
    const std::vector<ViewCandidate>& candidates, const SceneQueryContext& ctx,
    const FusionWeights& w, int k) {
  if (candidates.empty())
    throw std::invalid_argument("select_top_k: no candidates");
  if (k < 1) throw std::invalid_argument("select_top_k: k must be >= 1");

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(candidates.size());
  for (const ViewCandidate& v : candidates)
    scored.emplace_back(v.id, fuse(score_view(v, ctx), w));

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return scored;
}

namespace {

struct ItemScores {
  std::vector<ScoreTriple> preferred;
  std::vector<ScoreTriple> other;
};

ItemScores split_item(const RankingItem& item) {
  std::unordered_set<std::string> pref(item.preferredIds.begin(),
                                       item.preferredIds.end());
  ItemScores out;
  for (const ViewCandidate& v : item.candidates) {
    ScoreTriple s = score_view(v, item.ctx);
    if (pref.count(v.id))
      out.preferred.push_back(s);
    else
      out.other.push_back(s);
  }
  return out;
}

}  // namespace

FusionWeights train_fusion_weights(const std::vector<RankingItem>& dataset,
                                   int steps, double stepSize,
                                   std::mt19937_64& rng,
                                   const FusionTrainOptions& opts) {
  std::vector<ItemScores> items;
  items.reserve(dataset.size());
  for (const RankingItem& it : dataset) items.push_back(split_item(it));

  bool rankable = false;
  for (const ItemScores& it : items)
    if (!it.preferred.empty() && !it.other.empty()) rankable = true;
  if (!rankable)
    throw std::invalid_argument(
        "train_fusion_weights: dataset has no rankable preferred/other pair");

  FusionWeights w = opts.init;
  for (int step = 0; step < steps; ++step) {
    const ItemScores& it = items[uniform_index(rng, items.size())];

    double gText = 2.0 * w.lambda * (w.wText - w.mu);
    double gPre = 0.0;
    const double cov = w.coverageWeight();
    const double dCov = cov * (1.0 - cov);  // d(coverage)/d(preConstraint)
    for (const ScoreTriple& p : it.preferred) {
      for (const ScoreTriple& o : it.other) {
        const double gap = fuse(p, w) - fuse(o, w);
        if (gap >= opts.margin) continue;
        // hinge active: loss = margin - gap
        gText -= p.sText3d - o.sText3d;
        gPre -= dCov * ((p.sImage3d - o.sImage3d) - (p.sJoint - o.sJoint));
      }
    }
    w.wText -= stepSize * gText;
    w.preConstraint -= stepSize * gPre;
  }
  return w;
}

}  // namespace scenerl
