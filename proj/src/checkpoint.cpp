#include "scenerl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace scenerl {

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path) {
  nlohmann::json theta = nlohmann::json::array();
  for (int r = 0; r < ckpt.policy.featureDim(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < ckpt.policy.numActions(); ++c)
      row.push_back(ckpt.policy.theta(r, c));
    theta.push_back(std::move(row));
  }
  nlohmann::json j{{"formatVersion", ckpt.formatVersion},
                   {"configHash", ckpt.configHash},
                   {"featureDim", ckpt.policy.featureDim()},
                   {"numActions", ckpt.policy.numActions()},
                   {"theta", std::move(theta)}};
  if (ckpt.fusion) {
    j["fusion"] = {{"wText", ckpt.fusion->wText},
                   {"preConstraint", ckpt.fusion->preConstraint},
                   {"mu", ckpt.fusion->mu},
                   {"lambda", ckpt.fusion->lambda}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;

  PolicyCheckpoint ckpt;
  ckpt.formatVersion = j.at("formatVersion").get<int>();
  if (ckpt.formatVersion != 1)
    throw std::runtime_error("unsupported checkpoint version");
  ckpt.configHash = j.at("configHash").get<std::string>();
  const int f = j.at("featureDim").get<int>();
  const int a = j.at("numActions").get<int>();
  ckpt.policy.theta.resize(f, a);
  const auto& theta = j.at("theta");
  if (static_cast<int>(theta.size()) != f)
    throw std::runtime_error("checkpoint theta shape mismatch");
  for (int r = 0; r < f; ++r) {
    const auto& row = theta[r];
    if (static_cast<int>(row.size()) != a)
      throw std::runtime_error("checkpoint theta shape mismatch");
    for (int c = 0; c < a; ++c) ckpt.policy.theta(r, c) = row[c].get<double>();
  }
  if (j.contains("fusion")) {
    FusionWeights w;
    w.wText = j["fusion"].at("wText").get<double>();
    w.preConstraint = j["fusion"].at("preConstraint").get<double>();
    w.mu = j["fusion"].value("mu", w.mu);
    w.lambda = j["fusion"].value("lambda", w.lambda);
    ckpt.fusion = w;
  }
  return ckpt;
}

}  // namespace scenerl
