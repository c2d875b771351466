#include "scenerl/rewards.hpp"

#include <regex>
#include <stdexcept>

namespace scenerl {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// [\s\S] so bodies may span lines; ECMAScript '.' would stop at newlines.
const std::regex kStructured(
    R"(^<think>([\s\S]+?)</think>\s*<answer>([\s\S]+?)</answer>$)");

}  // namespace

std::optional<StructuredResponse> parse_structured(std::string_view raw) {
  const std::string_view trimmed = trim(raw);
  std::cmatch m;
  if (!std::regex_match(trimmed.begin(), trimmed.end(), m, kStructured))
    return std::nullopt;
  StructuredResponse out{m[1].str(), m[2].str()};
  if (out.think.find("<think>") != std::string::npos) return std::nullopt;
  return out;
}

int reward_format(std::string_view raw) {
  return parse_structured(raw) ? 1 : 0;
}

double reward_similarity(std::string_view predictedAnswer,
                         std::string_view truthAnswer,
                         const EmbeddingProvider& provider) {
  const Eigen::VectorXd u =
      provider.embed(Channel::Text, tokenize(predictedAnswer));
  const Eigen::VectorXd v =
      provider.embed(Channel::Text, tokenize(truthAnswer));
  return cosine(u, v);
}

double combine_rewards(int format, double perception, double similarity,
                       const RewardWeights& w) {
  if (!w.valid()) throw std::invalid_argument("invalid reward weights");
  double total = 0.0;
  if (w.enableFormat) total += w.wFormat * static_cast<double>(format);
  if (w.enablePerception) total += w.wPerception * perception;
  if (w.enableSimilarity) total += w.wSimilarity * similarity;
  return total;
}

}  // namespace scenerl
