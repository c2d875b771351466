#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "scenerl/rng.hpp"
#include "scenerl/view_select.hpp"

using namespace scenerl;

namespace {

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd v(4);
  v << a, b, c, d;
  return v;
}

// Scalar dot/norm oracle, independent of the Eigen path.
double ref_cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  double dot = 0, nu = 0, nv = 0;
  for (int i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return 0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

ViewCandidate make_candidate(std::string id, Eigen::VectorXd p3,
                             Eigen::VectorXd joint) {
  ViewCandidate v;
  v.id = std::move(id);
  v.point3dEmbedding = std::move(p3);
  v.renderedJointEmbedding = std::move(joint);
  return v;
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = uniform01(rng) * 2.0 - 1.0;
  return v.normalized();
}

FusionWeights weights_with_coverage(double wText, double coverage) {
  FusionWeights w;
  w.wText = wText;
  w.preConstraint = std::log(coverage / (1.0 - coverage));
  return w;
}

}  // namespace

TEST_CASE("score_view trivial identities") {
  SceneQueryContext ctx;
  ctx.textEmbedding = vec4(1, 0, 0, 0);
  ctx.jointTextEmbedding = vec4(0, 1, 0, 0);
  ctx.imageEmbeddings = {vec4(0, 0, 1, 0)};

  ViewCandidate v = make_candidate("a", ctx.textEmbedding, vec4(0, 0, 0, 1));
  CHECK(score_view(v, ctx).sText3d == doctest::Approx(1.0));

  // opposite image embeddings cancel
  SceneQueryContext sym = ctx;
  sym.imageEmbeddings = {vec4(1, 1, 0, 0), vec4(-1, -1, 0, 0)};
  CHECK(score_view(v, sym).sImage3d == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score_view matches the scalar fixture oracle") {
  SceneQueryContext ctx;
  ctx.textEmbedding = vec4(1, 2, 0, -1);
  ctx.jointTextEmbedding = vec4(1, 1, 1, 1);
  ctx.imageEmbeddings = {vec4(1, 0, 0, 0), vec4(0, 1, 0, 0)};

  const ViewCandidate v =
      make_candidate("fix", vec4(0.5, -1, 2, 0), vec4(2, 0, -1, 1));
  const ScoreTriple s = score_view(v, ctx);

  CHECK(s.sText3d ==
        doctest::Approx(ref_cosine(ctx.textEmbedding, v.point3dEmbedding))
            .epsilon(1e-12));
  const double refImage =
      0.5 * (ref_cosine(ctx.imageEmbeddings[0], v.point3dEmbedding) +
             ref_cosine(ctx.imageEmbeddings[1], v.point3dEmbedding));
  CHECK(s.sImage3d == doctest::Approx(refImage).epsilon(1e-12));
  CHECK(s.sJoint == doctest::Approx(ref_cosine(ctx.jointTextEmbedding,
                                               v.renderedJointEmbedding))
                        .epsilon(1e-12));
}

TEST_CASE("score_view rejects an empty image set") {
  SceneQueryContext ctx;
  ctx.textEmbedding = vec4(1, 0, 0, 0);
  ctx.jointTextEmbedding = vec4(1, 0, 0, 0);
  const ViewCandidate v = make_candidate("a", vec4(1, 0, 0, 0), vec4(1, 0, 0, 0));
  CHECK_THROWS_AS(score_view(v, ctx), std::invalid_argument);
}

TEST_CASE("fuse frozen example and linearity") {
  const FusionWeights w = weights_with_coverage(0.3, 0.5);
  CHECK(w.coverageWeight() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.jointWeight() == doctest::Approx(0.5).epsilon(1e-12));

  const ScoreTriple s{0.5, 0.8, 0.2};
  CHECK(fuse(s, w) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(fuse(ScoreTriple{0, 0, 0}, w) == 0.0);
  CHECK(fuse(ScoreTriple{1.0, 1.6, 0.4}, w) ==
        doctest::Approx(2.0 * 0.65).epsilon(1e-12));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreTriple s1{uniform01(rng), uniform01(rng), uniform01(rng)};
    const ScoreTriple s2{uniform01(rng), uniform01(rng), uniform01(rng)};
    const double alpha = uniform_range(rng, -2.0, 2.0);
    const double beta = uniform_range(rng, -2.0, 2.0);
    const ScoreTriple mix{alpha * s1.sText3d + beta * s2.sText3d,
                          alpha * s1.sImage3d + beta * s2.sImage3d,
                          alpha * s1.sJoint + beta * s2.sJoint};
    CHECK(fuse(mix, w) ==
          doctest::Approx(alpha * fuse(s1, w) + beta * fuse(s2, w))
              .epsilon(1e-12));
  }
}

TEST_CASE("coverage and joint weights sum to one exactly") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    FusionWeights w;
    w.preConstraint = uniform_range(rng, -20.0, 20.0);
    CHECK(w.coverageWeight() + w.jointWeight() == 1.0);
    CHECK(w.coverageWeight() > 0.0);
    CHECK(w.coverageWeight() < 1.0);
  }
}

TEST_CASE("select_top_k ordering, ties, and bounds") {
  std::mt19937_64 rng(11);
  SceneQueryContext ctx;
  ctx.textEmbedding = random_unit(rng, 16);
  ctx.jointTextEmbedding = random_unit(rng, 16);
  ctx.imageEmbeddings = {ctx.textEmbedding};

  std::vector<ViewCandidate> candidates;
  // the aligned candidate: every embedding equals the context's
  candidates.push_back(
      make_candidate("zz-perfect", ctx.textEmbedding, ctx.jointTextEmbedding));
  for (int i = 0; i < 9; ++i)
    candidates.push_back(make_candidate("r" + std::to_string(i),
                                        random_unit(rng, 16),
                                        random_unit(rng, 16)));

  const FusionWeights w = weights_with_coverage(0.3, 0.5);
  const auto top = select_top_k(candidates, ctx, w, 6);
  REQUIRE(top.size() == 6);
  CHECK(top[0].first == "zz-perfect");
  for (std::size_t i = 1; i < top.size(); ++i)
    CHECK(top[i - 1].second >= top[i].second);

  // fewer candidates than k
  const std::vector<ViewCandidate> one{candidates[1]};
  CHECK(select_top_k(one, ctx, w, 6).size() == 1);

  // identical utilities order by id
  std::vector<ViewCandidate> tied{
      make_candidate("b", ctx.textEmbedding, ctx.jointTextEmbedding),
      make_candidate("a", ctx.textEmbedding, ctx.jointTextEmbedding)};
  const auto tiedTop = select_top_k(tied, ctx, w, 2);
  CHECK(tiedTop[0].first == "a");
  CHECK(tiedTop[1].first == "b");

  CHECK_THROWS_AS(select_top_k({}, ctx, w, 3), std::invalid_argument);
  CHECK_THROWS_AS(select_top_k(one, ctx, w, 0), std::invalid_argument);
}

TEST_CASE("select_top_k order is invariant under positive scaling") {
  std::mt19937_64 rng(13);
  SceneQueryContext ctx;
  ctx.textEmbedding = random_unit(rng, 8);
  ctx.jointTextEmbedding = random_unit(rng, 8);
  ctx.imageEmbeddings = {random_unit(rng, 8), random_unit(rng, 8)};

  std::vector<ViewCandidate> base;
  for (int i = 0; i < 8; ++i)
    base.push_back(make_candidate("v" + std::to_string(i), random_unit(rng, 8),
                                  random_unit(rng, 8)));
  std::vector<ViewCandidate> scaled = base;
  for (ViewCandidate& v : scaled) {
    v.point3dEmbedding *= 37.5;
    v.renderedJointEmbedding *= 0.004;
  }

  const FusionWeights w = weights_with_coverage(0.4, 0.6);
  const auto order_of = [&](const std::vector<ViewCandidate>& cs) {
    std::vector<std::string> ids;
    for (const auto& [id, score] : select_top_k(cs, ctx, w, 8))
      ids.push_back(id);
    return ids;
  };
  CHECK(order_of(base) == order_of(scaled));
}

TEST_CASE("weight_reg_loss") {
  FusionWeights w;
  w.wText = 0.3;
  w.mu = 0.3;
  w.lambda = 1.0;
  CHECK(weight_reg_loss(w) == 0.0);
  w.wText = 0.5;
  CHECK(weight_reg_loss(w) == doctest::Approx(0.04).epsilon(1e-12));
  w.lambda = 0.0;
  CHECK(weight_reg_loss(w) == 0.0);
}

namespace {

// Preferred views win on the joint score only; the rest win on text+coverage.
std::vector<RankingItem> joint_favoring_dataset() {
  SceneQueryContext ctx;
  ctx.textEmbedding = vec4(1, 0, 0, 0);
  ctx.jointTextEmbedding = vec4(0, 0, 1, 0);
  ctx.imageEmbeddings = {vec4(1, 0, 0, 0)};

  RankingItem item;
  item.ctx = ctx;
  item.candidates = {
      make_candidate("pref", vec4(0, 1, 0, 0), vec4(0, 0, 1, 0)),
      make_candidate("conf", vec4(1, 0, 0, 0), vec4(0, 0, 0, 1)),
  };
  item.preferredIds = {"pref"};
  return {item};
}

}  // namespace

TEST_CASE("train_fusion_weights: zero steps returns the initial weights") {
  const auto dataset = joint_favoring_dataset();
  std::mt19937_64 rng(17);
  FusionTrainOptions opts;
  opts.init.wText = 0.42;
  opts.init.preConstraint = -0.3;
  const FusionWeights w = train_fusion_weights(dataset, 0, 0.05, rng, opts);
  CHECK(w.wText == 0.42);
  CHECK(w.preConstraint == -0.3);
}

TEST_CASE("train_fusion_weights shifts mass onto the joint score") {
  const auto dataset = joint_favoring_dataset();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    FusionTrainOptions opts;
    const double before = opts.init.jointWeight();
    const FusionWeights w =
        train_fusion_weights(dataset, 300, 0.02, rng, opts);
    CHECK(w.jointWeight() > before);
    CHECK(w.coverageWeight() + w.jointWeight() == 1.0);
  }
}

TEST_CASE("train_fusion_weights: a huge regularizer pins wText to mu") {
  const auto dataset = joint_favoring_dataset();
  std::mt19937_64 rng(23);
  FusionTrainOptions opts;
  opts.init.wText = 0.8;
  opts.init.lambda = 1e3;
  opts.init.mu = 0.3;
  const FusionWeights w = train_fusion_weights(dataset, 1000, 1e-4, rng, opts);
  CHECK(std::abs(w.wText - 0.3) < 0.01);
}

TEST_CASE("train_fusion_weights rejects an unrankable dataset") {
  RankingItem item;
  item.ctx.textEmbedding = vec4(1, 0, 0, 0);
  item.ctx.jointTextEmbedding = vec4(1, 0, 0, 0);
  item.ctx.imageEmbeddings = {vec4(1, 0, 0, 0)};
  item.candidates = {make_candidate("only", vec4(1, 0, 0, 0), vec4(1, 0, 0, 0))};
  item.preferredIds = {"only"};  // nothing to rank against
  std::mt19937_64 rng(29);
  CHECK_THROWS_AS(train_fusion_weights({item}, 10, 0.05, rng),
                  std::invalid_argument);
}
