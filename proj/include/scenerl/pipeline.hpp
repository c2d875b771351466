#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "scenerl/checkpoint.hpp"
#include "scenerl/config.hpp"
#include "scenerl/cot_filter.hpp"
#include "scenerl/scene_sim.hpp"

namespace scenerl {

// Artifact locations under cfg.outDir.
std::string manifest_path(const RunConfig& cfg);
std::string scenes_dir(const RunConfig& cfg);
std::string raw_cot_path(const RunConfig& cfg);
std::string filtered_cot_path(const RunConfig& cfg);
std::string quarantine_path(const RunConfig& cfg);
std::string filter_report_path(const RunConfig& cfg);
std::string sft_checkpoint_path(const RunConfig& cfg);
std::string rl_checkpoint_path(const RunConfig& cfg);
std::string rl_log_path(const RunConfig& cfg);
std::string views_path(const RunConfig& cfg);
std::string metrics_path(const RunConfig& cfg);

std::vector<CoTExample> read_cot_jsonl(const std::string& path,
                                       std::size_t* malformed = nullptr);
void write_cot_jsonl(const std::string& path,
                     const std::vector<CoTExample>& records);

// Reads the final answer from the Conclusion line of the reasoning text.
OracleAnswerer make_echo_oracle();
OracleAnswerer make_remote_oracle(const OracleConfig& cfg);

struct GenDataReport {
  int scenes = 0;
  int records = 0;
  int corrupted = 0;
};

struct CmdFilterReport {
  FilterReport filter;
  std::size_t malformedInput = 0;
};

struct SftReport {
  int examples = 0;
  std::vector<double> epochLoss;  // mean cross-entropy per epoch
};

struct RlReport {
  std::vector<double> epochMeanReward;
  std::vector<double> epochMeanKl;
};

struct MetricsReport {
  double answerExactMatchRate = 0.0;
  double meanIoU = 0.0;
  double meanReward = 0.0;
  std::map<std::string, std::size_t> perRuleFilterCounts;
  std::uint64_t seed = 0;
  std::string configHash;
};

// Synthetic scenes + questions + tagged CoT records, with a configurable
// fraction of planted rule violations.
GenDataReport cmd_gen_data(const RunConfig& cfg);

// Rule-based filtering pass; writes accepted records, a report, and a
// quarantine file for oracle failures.
CmdFilterReport cmd_filter(const RunConfig& cfg);

// Cross-entropy training toward the ground-truth action; writes the
// cold-start checkpoint.
SftReport cmd_train_sft(const RunConfig& cfg);

// Group-sampled policy optimization from the cold-start checkpoint, with the
// cold-start policy frozen as the divergence reference.
RlReport cmd_train_rl(const RunConfig& cfg);

// Per scene/question view ranking under the configured strategy.
void cmd_select_views(const RunConfig& cfg);

// Held-out evaluation of a checkpoint; writes metrics JSON.
MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpointPath);

}  // namespace scenerl
