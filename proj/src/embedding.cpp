#include "scenerl/embedding.hpp"

#include <cctype>
#include <stdexcept>

#include "scenerl/rng.hpp"

namespace scenerl {

std::string_view channel_tag(Channel c) {
  switch (c) {
    case Channel::Text: return "text";
    case Channel::Image: return "image";
    case Channel::Point3d: return "point3d";
    case Channel::JointText: return "joint_text";
    case Channel::JointImage: return "joint_image";
  }
  return "text";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

EmbeddingProvider::EmbeddingProvider(int dim) : dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("embedding dim must be positive");
}

Eigen::VectorXd EmbeddingProvider::embed(
    Channel channel, const std::vector<std::string>& tokens) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  const std::string_view tag = channel_tag(channel);
  for (const std::string& raw : tokens) {
    std::string tok;
    tok.reserve(raw.size());
    for (char ch : raw)
      tok.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    std::uint64_t h = fnv1a64(tag);
    h = fnv1a64(tok, h);
    const int idx = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[idx] += sign;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv);
}

}  // namespace scenerl
