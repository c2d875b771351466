#include "scenerl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scenerl/rng.hpp"

namespace scenerl {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  return z.array() - lse;
}

// Per-sample derivative of min(rho A, clip(rho) A) w.r.t. rho.
double surrogate_slope(double rho, double adv, double clip) {
  if (adv > 0.0) return rho <= 1.0 + clip ? adv : 0.0;
  if (adv < 0.0) return rho >= 1.0 - clip ? adv : 0.0;
  return 0.0;
}

}  // namespace

Eigen::VectorXd CategoricalPolicy::log_probs(const Context& ctx) const {
  return log_softmax(logits(ctx));
}

Eigen::VectorXd CategoricalPolicy::probs(const Context& ctx) const {
  return log_probs(ctx).array().exp();
}

Group sample_group(const CategoricalPolicy& policy, const Context& ctx, int n,
                   std::mt19937_64& rng) {
  if (n < 2)
    throw std::invalid_argument(
        "sample_group: need at least 2 responses for advantage normalization");
  const Eigen::VectorXd logp = policy.log_probs(ctx);
  const Eigen::VectorXd p = logp.array().exp();

  Group g;
  g.responses.resize(n);
  g.oldLogProbs.resize(n);
  const int actions = static_cast<int>(p.size());
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int pick = actions - 1;
    for (int a = 0; a < actions; ++a) {
      acc += p[a];
      if (u < acc) {
        pick = a;
        break;
      }
    }
    g.responses[i] = pick;
    g.oldLogProbs[i] = logp[pick];
  }
  return g;
}

Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& rewards,
                                     double stdEpsilon) {
  const int n = static_cast<int>(rewards.size());
  if (n < 2)
    throw std::invalid_argument("normalize_advantages: need length >= 2");
  Eigen::VectorXd centered = rewards.array() - rewards.mean();
  // Second centering pass keeps mean(A) at machine precision even when the
  // spread is many orders below the magnitudes.
  centered.array() -= centered.mean();
  const double sigma = std::sqrt(centered.squaredNorm() / n);
  if (sigma < stdEpsilon) return Eigen::VectorXd::Zero(n);
  return centered / sigma;
}

double kl_categorical(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kl_categorical: length mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double qi = std::max(q[i], kProbFloor);
    kl += p[i] * std::log(p[i] / qi);
  }
  return kl;
}

double grpo_objective(const CategoricalPolicy& theta,
                      const CategoricalPolicy& thetaOld,
                      const CategoricalPolicy& thetaRef, const Context& ctx,
                      const Group& group, const GrpoConfig& cfg) {
  const int n = group.size();
  if (n == 0) throw std::invalid_argument("grpo_objective: empty group");
  if (group.advantages.size() != n)
    throw std::invalid_argument("grpo_objective: advantages not filled");

  const Eigen::VectorXd logp = theta.log_probs(ctx);
  const bool haveStored = group.oldLogProbs.size() == n;
  const Eigen::VectorXd oldLogp =
      haveStored ? group.oldLogProbs : Eigen::VectorXd();
  const Eigen::VectorXd oldFromPolicy =
      haveStored ? Eigen::VectorXd() : thetaOld.log_probs(ctx);

  double surrogate = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = group.responses[i];
    const double lpOld = haveStored ? oldLogp[i] : oldFromPolicy[a];
    const double rho = std::exp(logp[a] - lpOld);
    const double adv = group.advantages[i];
    const double clipped = std::clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
    surrogate += std::min(rho * adv, clipped * adv);
  }
  surrogate /= n;

  // KL evaluated once per context over the full support.
  const double kl =
      kl_categorical(theta.probs(ctx), thetaRef.probs(ctx));
  return surrogate - cfg.klCoeff * kl;
}

Eigen::MatrixXd grpo_objective_gradient(const CategoricalPolicy& theta,
                                        const CategoricalPolicy& thetaOld,
                                        const CategoricalPolicy& thetaRef,
                                        const Context& ctx, const Group& group,
                                        const GrpoConfig& cfg) {
  const int n = group.size();
  if (n == 0) throw std::invalid_argument("grpo_objective_gradient: empty group");
  if (group.advantages.size() != n)
    throw std::invalid_argument("grpo_objective_gradient: advantages not filled");

  const Eigen::VectorXd logp = theta.log_probs(ctx);
  const Eigen::VectorXd p = logp.array().exp();
  const int actions = theta.numActions();

  const bool haveStored = group.oldLogProbs.size() == n;
  const Eigen::VectorXd oldFromPolicy =
      haveStored ? Eigen::VectorXd() : thetaOld.log_probs(ctx);

  // d(objective)/d(logits), assembled per sample then through softmax.
  Eigen::VectorXd dLogits = Eigen::VectorXd::Zero(actions);
  for (int i = 0; i < n; ++i) {
    const int a = group.responses[i];
    const double lpOld = haveStored ? group.oldLogProbs[i] : oldFromPolicy[a];
    const double rho = std::exp(logp[a] - lpOld);
    const double slope = surrogate_slope(rho, group.advantages[i], cfg.clip);
    if (slope == 0.0) continue;
    // d rho / d z_k = rho (delta_{k,a} - p_k)
    const double scale = slope * rho / n;
    dLogits -= scale * p;
    dLogits[a] += scale;
  }

  if (cfg.klCoeff != 0.0) {
    const Eigen::VectorXd q = thetaRef.probs(ctx);
    double kl = 0.0;
    Eigen::VectorXd logRatio(actions);
    for (int k = 0; k < actions; ++k) {
      const double qk = std::max(q[k], kProbFloor);
      logRatio[k] = std::log(std::max(p[k], kProbFloor)) - std::log(qk);
      if (p[k] > 0.0) kl += p[k] * logRatio[k];
    }
    // d KL / d z_k = p_k (log(p_k/q_k) - KL)
    dLogits -= cfg.klCoeff * (p.array() * (logRatio.array() - kl)).matrix();
  }

  return ctx.features * dLogits.transpose();
}

CategoricalPolicy grpo_update(const CategoricalPolicy& theta,
                              const CategoricalPolicy& thetaOld,
                              const CategoricalPolicy& thetaRef,
                              const Context& ctx, const Group& group,
                              const GrpoConfig& cfg) {
  CategoricalPolicy current = theta;
  for (int e = 0; e < cfg.innerEpochs; ++e) {
    const Eigen::MatrixXd g =
        grpo_objective_gradient(current, thetaOld, thetaRef, ctx, group, cfg);
    if (!g.allFinite())
      throw std::runtime_error("grpo_update: non-finite gradient, aborting");
    current.theta += cfg.stepSize * g;
  }
  return current;
}

}  // namespace scenerl
