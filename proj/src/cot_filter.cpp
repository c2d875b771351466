#include "scenerl/cot_filter.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "scenerl/embedding.hpp"
#include "scenerl/rewards.hpp"

namespace scenerl {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kStop{
      "the",   "a",     "an",    "and",  "or",    "but",   "if",    "then",
      "is",    "are",   "was",   "were", "be",    "been",  "being", "have",
      "has",   "had",   "do",    "does", "did",   "will",  "would", "can",
      "could", "shall", "should","may",  "might", "must",  "of",    "in",
      "on",    "at",    "by",    "to",   "for",   "with",  "from",  "this",
      "that",  "these", "those", "it",   "its",   "as",    "not",   "there",
      "here",  "what",  "which", "who",  "where", "when",  "why",   "how"};
  return kStop;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string_view trim_view(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view filter_rule_name(FilterRule r) {
  switch (r) {
    case FilterRule::None: return "none";
    case FilterRule::Format: return "format";
    case FilterRule::ThinkLength: return "thinkLength";
    case FilterRule::AnswerLength: return "answerLength";
    case FilterRule::StepCount: return "stepCount";
    case FilterRule::TargetMention: return "targetMention";
    case FilterRule::Consistency: return "consistency";
    case FilterRule::OracleFailure: return "oracleFailure";
  }
  return "none";
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (m == 0) return n;
  if (n == 0) return m;

  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

std::string canonicalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pendingSpace = false;
  for (char ch : s) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      pendingSpace = !out.empty();
      continue;
    }
    if (pendingSpace) {
      out.push_back(' ');
      pendingSpace = false;
    }
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

double normalized_similarity(std::string_view aHat, std::string_view a,
                             bool canonicalize) {
  std::string ca = canonicalize ? canonicalize_text(aHat) : std::string(aHat);
  std::string cb = canonicalize ? canonicalize_text(a) : std::string(a);
  const std::size_t maxLen = std::max(ca.size(), cb.size());
  if (maxLen == 0) return 1.0;
  const std::size_t d = levenshtein(ca, cb);
  return 1.0 - static_cast<double>(d) / static_cast<double>(maxLen);
}

int count_words(std::string_view s) {
  int count = 0;
  bool inWord = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      inWord = false;
    } else if (!inWord) {
      inWord = true;
      ++count;
    }
  }
  return count;
}

int count_reasoning_steps(std::string_view think,
                          const std::vector<std::string>& cues) {
  if (cues.empty()) return 0;
  std::string pattern;
  for (const std::string& cue : cues) {
    if (!pattern.empty()) pattern += "|";
    pattern += "\\b(?:" + cue + ")\\b";
  }
  const std::regex re(pattern, std::regex::icase);
  auto begin = std::cregex_iterator(think.data(), think.data() + think.size(), re);
  return static_cast<int>(std::distance(begin, std::cregex_iterator()));
}

bool final_step_mentions_target(std::string_view think,
                                std::string_view question) {
  std::unordered_set<std::string> questionWords;
  for (const std::string& tok : tokenize(question))
    if (tok.size() >= 3 && !stopwords().count(tok)) questionWords.insert(tok);
  if (questionWords.empty()) return false;

  std::istringstream lines{std::string(think)};
  std::string line;
  while (std::getline(lines, line)) {
    std::string_view t = trim_view(line);
    const std::string low = lower(t.substr(0, 10));
    if (low.rfind("conclusion", 0) != 0) continue;
    for (const std::string& tok : tokenize(t)) {
      if (tok.size() >= 3 && !stopwords().count(tok) && questionWords.count(tok))
        return true;
    }
  }
  return false;
}

FilterVerdict filter_example(const CoTExample& ex, const OracleAnswerer& oracle,
                             const FilterConfig& cfg) {
  FilterVerdict v;

  const std::string raw =
      "<think>" + ex.think + "</think><answer>" + ex.answer + "</answer>";
  if (!parse_structured(raw)) {
    v.failedRule = FilterRule::Format;
    return v;
  }
  if (count_words(ex.think) < cfg.minThinkWords) {
    v.failedRule = FilterRule::ThinkLength;
    return v;
  }
  if (count_words(ex.answer) < cfg.minAnswerWords) {
    v.failedRule = FilterRule::AnswerLength;
    return v;
  }
  if (count_reasoning_steps(ex.think, cfg.stepCues) < cfg.minSteps) {
    v.failedRule = FilterRule::StepCount;
    return v;
  }
  if (!final_step_mentions_target(ex.think, ex.question)) {
    v.failedRule = FilterRule::TargetMention;
    return v;
  }

  const std::optional<std::string> predicted = oracle(ex.think, ex.question);
  if (!predicted) {
    v.failedRule = FilterRule::OracleFailure;
    return v;
  }
  const double sim =
      normalized_similarity(*predicted, ex.answer, cfg.canonicalizeSimilarity);
  v.similarityScore = sim;
  if (sim < cfg.simThreshold) {
    v.failedRule = FilterRule::Consistency;
    return v;
  }

  v.accepted = true;
  v.failedRule = FilterRule::None;
  return v;
}

FilterResult filter_dataset(const std::vector<CoTExample>& input,
                            const OracleAnswerer& oracle,
                            const FilterConfig& cfg) {
  FilterResult out;
  out.verdicts.reserve(input.size());
  for (const CoTExample& ex : input) {
    FilterVerdict v = filter_example(ex, oracle, cfg);
    out.report.total += 1;
    if (v.accepted) {
      out.report.accepted += 1;
      out.accepted.push_back(ex);
    } else if (v.failedRule == FilterRule::OracleFailure) {
      out.report.oracleFailures += 1;
      out.quarantined.push_back(ex);
    } else {
      out.report.rejected += 1;
      out.report.perRule[std::string(filter_rule_name(v.failedRule))] += 1;
    }
    out.verdicts.push_back(std::move(v));
  }
  return out;
}

}  // namespace scenerl
