#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace scenerl {

// Encoder channels. Each channel hashes tokens under its own tag so the same
// token lands on different coordinates per channel.
enum class Channel { Text, Image, Point3d, JointText, JointImage };

std::string_view channel_tag(Channel c);

// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic hashed bag-of-words embedder. Same channel + same tokens
/// gives a bit-identical vector on every platform.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(int dim = 64);

  int dim() const { return dim_; }

  // Signed feature hashing: index = fnv1a64(tag || token) mod dim, sign from
  // bit 63, accumulated and L2-normalized. Empty input yields the zero vector.
  Eigen::VectorXd embed(Channel channel,
                        const std::vector<std::string>& tokens) const;

  Eigen::VectorXd embed_text(Channel channel, std::string_view text) const {
    return embed(channel, tokenize(text));
  }

 private:
  int dim_;
};

// u.v / (|u||v|); 0 when either norm is 0. Throws on dimension mismatch.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

}  // namespace scenerl
