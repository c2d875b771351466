#pragma once

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace scenerl {

/// Feature encoding of one (visual state, question) pair.
struct Context {
  Eigen::VectorXd features;
};

/// Candidate responses for one context: answer text plus the index of the
/// scene object whose box the response grounds to.
struct ActionSpace {
  struct Action {
    std::string answer;
    int anchorObjectIndex = 0;
  };
  std::vector<Action> actions;
};

/// Softmax-linear policy over a fixed action set: p = softmax(theta^T x).
struct CategoricalPolicy {
  Eigen::MatrixXd theta;  // featureDim x numActions

  int featureDim() const { return static_cast<int>(theta.rows()); }
  int numActions() const { return static_cast<int>(theta.cols()); }

  Eigen::VectorXd logits(const Context& ctx) const {
    return theta.transpose() * ctx.features;
  }
  Eigen::VectorXd log_probs(const Context& ctx) const;
  Eigen::VectorXd probs(const Context& ctx) const;

  static CategoricalPolicy zeros(int featureDim, int numActions) {
    return CategoricalPolicy{Eigen::MatrixXd::Zero(featureDim, numActions)};
  }
};

/// One sampled group: N responses with their sampling-time log-probs,
/// rewards, and normalized advantages.
struct Group {
  std::vector<int> responses;
  Eigen::VectorXd oldLogProbs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd advantages;

  int size() const { return static_cast<int>(responses.size()); }
};

struct GrpoConfig {
  int groupSize = 8;
  double clip = 0.2;
  double klCoeff = 0.02;
  double stdEpsilon = 1e-8;
  int innerEpochs = 1;
  double stepSize = 0.1;
};

// N i.i.d. draws (with replacement) from the policy's categorical
// distribution; records log-probs under the sampling policy. N >= 2.
Group sample_group(const CategoricalPolicy& policy, const Context& ctx, int n,
                   std::mt19937_64& rng);

// (r - mean) / population std; the all-zero vector when std < stdEpsilon.
Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& rewards,
                                     double stdEpsilon = 1e-8);

// Sum p_i ln(p_i/q_i) with 0 ln 0 := 0 and q floored at 1e-12.
double kl_categorical(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Clipped surrogate with exact KL penalty over the categorical support:
//   (1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
//   - beta KL(pi_theta(.|ctx) || pi_ref(.|ctx)).
// Importance ratios use the group's stored sampling-time log-probs when
// present, otherwise thetaOld.
double grpo_objective(const CategoricalPolicy& theta,
                      const CategoricalPolicy& thetaOld,
                      const CategoricalPolicy& thetaRef, const Context& ctx,
                      const Group& group, const GrpoConfig& cfg);

// Analytic gradient of grpo_objective with respect to theta.
Eigen::MatrixXd grpo_objective_gradient(const CategoricalPolicy& theta,
                                        const CategoricalPolicy& thetaOld,
                                        const CategoricalPolicy& thetaRef,
                                        const Context& ctx, const Group& group,
                                        const GrpoConfig& cfg);

// cfg.innerEpochs steps of gradient ascent on the objective; thetaOld and
// thetaRef are read-only. Throws on a non-finite gradient.
CategoricalPolicy grpo_update(const CategoricalPolicy& theta,
                              const CategoricalPolicy& thetaOld,
                              const CategoricalPolicy& thetaRef,
                              const Context& ctx, const Group& group,
                              const GrpoConfig& cfg);

}  // namespace scenerl
