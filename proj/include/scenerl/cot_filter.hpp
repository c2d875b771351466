#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scenerl {

/// One raw chain-of-thought record.
struct CoTExample {
  std::string sceneId;
  std::string question;
  std::string think;
  std::string answer;
};

struct FilterConfig {
  int minThinkWords = 30;
  int minAnswerWords = 20;
  int minSteps = 3;
  double simThreshold = 0.8;
  // Regex fragments matched case-insensitively on word boundaries.
  std::vector<std::string> stepCues{"step\\s+[0-9]+", "first", "next", "last"};
  // Lowercase + collapse whitespace before the edit-distance ratio.
  bool canonicalizeSimilarity = true;
};

enum class FilterRule {
  None,
  Format,
  ThinkLength,
  AnswerLength,
  StepCount,
  TargetMention,
  Consistency,
  OracleFailure,
};

std::string_view filter_rule_name(FilterRule r);

struct FilterVerdict {
  bool accepted = false;
  FilterRule failedRule = FilterRule::None;
  std::optional<double> similarityScore;
};

// Answers from the reasoning text alone; nullopt signals an oracle failure
// (remote error), which is never treated as an accept.
using OracleAnswerer = std::function<std::optional<std::string>(
    const std::string& think, const std::string& question)>;

std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - lev(a^,a)/max(|a^|,|a|) over characters, after canonicalization;
// two empty strings compare as 1.
double normalized_similarity(std::string_view aHat, std::string_view a,
                             bool canonicalize = true);

std::string canonicalize_text(std::string_view s);

int count_words(std::string_view s);

// Number of cue hits ("Step n", "First", "Next", "Last" by default),
// case-insensitive, on word boundaries.
int count_reasoning_steps(std::string_view think,
                          const std::vector<std::string>& cues = {
                              "step\\s+[0-9]+", "first", "next", "last"});

// True iff some line starting with "Conclusion" (optional colon) shares a
// content word (length >= 3, not a stopword) with the question.
bool final_step_mentions_target(std::string_view think,
                                std::string_view question);

// Rules in order: format, think length, answer length, step count, target
// mention, answer consistency. First failure wins; the oracle runs only when
// every earlier rule passed.
FilterVerdict filter_example(const CoTExample& ex, const OracleAnswerer& oracle,
                             const FilterConfig& cfg);

struct FilterReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t oracleFailures = 0;
  std::map<std::string, std::size_t> perRule;  // rule name -> rejections
};

struct FilterResult {
  std::vector<CoTExample> accepted;
  std::vector<FilterVerdict> verdicts;  // aligned with the input order
  std::vector<CoTExample> quarantined;  // oracle failures, for retry
  FilterReport report;
};

// Order-preserving pass over the corpus.
FilterResult filter_dataset(const std::vector<CoTExample>& input,
                            const OracleAnswerer& oracle,
                            const FilterConfig& cfg);

}  // namespace scenerl
