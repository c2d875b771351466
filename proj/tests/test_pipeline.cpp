#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "scenerl/oracle_client.hpp"
#include "scenerl/pipeline.hpp"
#include "scenerl/rng.hpp"

#include <httplib.h>  // after Eigen; their symbols clash the other way round

using namespace scenerl;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scenerl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const std::string& outDir, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.outDir = outDir;
  cfg.nScenes = 8;
  cfg.nObjects = 6;
  cfg.questionsPerScene = 3;
  cfg.corruptionFraction = 0.0;
  cfg.viewStrategy = "horizontal";
  cfg.sftEpochs = 20;
  cfg.rlEpochs = 1;
  cfg.evalScenes = 5;
  return cfg;
}

// In-process reasoning service with the same contract as the remote oracle.
struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  explicit StubServer(int status = 200, bool omitAnswerField = false) {
    server.Post("/answer", [this, status, omitAnswerField](
                               const httplib::Request& req,
                               httplib::Response& res) {
      ++hits;
      if (status != 200) {
        res.status = status;
        return;
      }
      const auto j = nlohmann::json::parse(req.body, nullptr, false);
      REQUIRE(!j.is_discarded());
      REQUIRE(j.contains("think"));
      REQUIRE(j.contains("question"));
      if (omitAnswerField) {
        res.set_content(R"({"unexpected":"shape"})", "application/json");
        return;
      }
      const auto echoed = make_echo_oracle()(j["think"].get<std::string>(),
                                             j["question"].get<std::string>());
      res.set_content(nlohmann::json{{"answer", *echoed}}.dump(),
                      "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    thread.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port);
  }
};

OracleConfig fast_oracle(const std::string& endpoint, int attempts = 3) {
  OracleConfig cfg;
  cfg.mode = "remote";
  cfg.endpoint = endpoint;
  cfg.timeoutSec = 2.0;
  cfg.maxAttempts = attempts;
  cfg.backoffBaseSec = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("config JSON round-trip and hashing") {
  RunConfig cfg = small_config("x");
  cfg.rewardWeights.enableSimilarity = false;
  cfg.filter.simThreshold = 0.75;
  const RunConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(config_hash(back) == config_hash(cfg));

  RunConfig changed = cfg;
  changed.seed += 1;
  CHECK(config_hash(changed) != config_hash(cfg));

  const std::string dir = fresh_dir("config");
  save_config(cfg, dir + "/config.json");
  const RunConfig loaded = load_config(dir + "/config.json");
  CHECK(config_to_json(loaded) == config_to_json(cfg));

  // partial configs inherit defaults
  std::ofstream(dir + "/partial.json") << R"({"seed": 9, "nScenes": 3})";
  const RunConfig partial = load_config(dir + "/partial.json");
  CHECK(partial.seed == 9);
  CHECK(partial.nScenes == 3);
  CHECK(partial.grpo.klCoeff == 0.02);
  CHECK(partial.kViews == 6);
}

TEST_CASE("gen-data writes scenes and round-tripping records") {
  RunConfig cfg = small_config(fresh_dir("gendata"));
  const GenDataReport report = cmd_gen_data(cfg);
  CHECK(report.scenes == cfg.nScenes);
  CHECK(report.corrupted == 0);
  CHECK(report.records > 0);

  int sceneFiles = 0;
  for (const auto& e : fs::directory_iterator(scenes_dir(cfg)))
    if (e.path().extension() == ".json") ++sceneFiles;
  CHECK(sceneFiles == cfg.nScenes);

  std::size_t malformed = 99;
  const auto records = read_cot_jsonl(raw_cot_path(cfg), &malformed);
  CHECK(malformed == 0);
  CHECK(static_cast<int>(records.size()) == report.records);

  // write-then-read preserves every field
  const std::string copy = cfg.outDir + "/copy.jsonl";
  write_cot_jsonl(copy, records);
  CHECK(slurp(copy) == slurp(raw_cot_path(cfg)));
}

TEST_CASE("gen-data is byte-deterministic") {
  RunConfig a = small_config(fresh_dir("det_a"), 33);
  RunConfig b = small_config(fresh_dir("det_b"), 33);
  cmd_gen_data(a);
  cmd_gen_data(b);
  CHECK(slurp(raw_cot_path(a)) == slurp(raw_cot_path(b)));
  CHECK(slurp(scenes_dir(a) + "/scene_00000.json") ==
        slurp(scenes_dir(b) + "/scene_00000.json"));
}

TEST_CASE("clean corpus passes the filter in full") {
  RunConfig cfg = small_config(fresh_dir("cleanfilter"));
  const GenDataReport gen = cmd_gen_data(cfg);
  const CmdFilterReport report = cmd_filter(cfg);
  CHECK(report.filter.total == static_cast<std::size_t>(gen.records));
  CHECK(report.filter.accepted == report.filter.total);
  CHECK(report.filter.rejected == 0);
  CHECK(report.malformedInput == 0);
  CHECK(fs::exists(filter_report_path(cfg)));
  CHECK(!fs::exists(quarantine_path(cfg)));
}

TEST_CASE("planted corruption is rejected with binomial counts") {
  RunConfig cfg = small_config(fresh_dir("corrupt"), 5);
  cfg.nScenes = 50;
  cfg.questionsPerScene = 5;
  cfg.corruptionFraction = 0.4;
  const GenDataReport gen = cmd_gen_data(cfg);
  REQUIRE(gen.records >= 200);

  // corruption count is binomial around 0.4
  const double p = static_cast<double>(gen.corrupted) / gen.records;
  const double sigma = std::sqrt(0.4 * 0.6 / gen.records);
  CHECK(std::abs(p - 0.4) <= 3.0 * sigma);

  // every planted fault is caught, nothing clean is rejected
  const CmdFilterReport report = cmd_filter(cfg);
  CHECK(report.filter.rejected == static_cast<std::size_t>(gen.corrupted));
  CHECK(report.filter.accepted ==
        static_cast<std::size_t>(gen.records - gen.corrupted));
  // all six rule classes appear in a corpus this size
  CHECK(report.filter.perRule.size() >= 5);
}

TEST_CASE("malformed JSONL lines are counted and skipped") {
  RunConfig cfg = small_config(fresh_dir("malformed"));
  cmd_gen_data(cfg);
  {
    std::ofstream out(raw_cot_path(cfg), std::ios::app);
    out << "this is not json\n";
    out << R"({"scene_id":"x","question":"q"})" << "\n";  // missing fields
  }
  const CmdFilterReport report = cmd_filter(cfg);
  CHECK(report.malformedInput == 2);
}

TEST_CASE("remote oracle matches the local echo oracle") {
  RunConfig echoCfg = small_config(fresh_dir("remote_echo"), 7);
  echoCfg.nScenes = 5;
  cmd_gen_data(echoCfg);
  const CmdFilterReport local = cmd_filter(echoCfg);

  StubServer stub;
  RunConfig remoteCfg = echoCfg;
  remoteCfg.outDir = fresh_dir("remote_remote");
  cmd_gen_data(remoteCfg);
  remoteCfg.oracle = fast_oracle(stub.endpoint());
  const CmdFilterReport remote = cmd_filter(remoteCfg);

  CHECK(remote.filter.accepted == local.filter.accepted);
  CHECK(remote.filter.rejected == local.filter.rejected);
  CHECK(remote.filter.oracleFailures == 0);
  CHECK(slurp(filtered_cot_path(remoteCfg)) == slurp(filtered_cot_path(echoCfg)));
}

TEST_CASE("unreachable remote oracle quarantines and reports") {
  RunConfig cfg = small_config(fresh_dir("unreachable"), 3);
  cfg.nScenes = 3;
  cfg.questionsPerScene = 1;
  cmd_gen_data(cfg);
  cfg.oracle = fast_oracle("http://127.0.0.1:9", /*attempts=*/2);
  cfg.oracle.timeoutSec = 0.3;
  const CmdFilterReport report = cmd_filter(cfg);
  CHECK(report.filter.oracleFailures == report.filter.total);
  CHECK(report.filter.accepted == 0);
  CHECK(fs::exists(quarantine_path(cfg)));
  const auto quarantined = read_cot_jsonl(quarantine_path(cfg));
  CHECK(quarantined.size() == report.filter.total);
}

TEST_CASE("oracle client retries on 500 and stops on malformed bodies") {
  {
    StubServer failing(500);
    const auto result =
        oracle_client_answer(fast_oracle(failing.endpoint()), "t", "q");
    CHECK(!result.has_value());
    CHECK(failing.hits == 3);  // exhausted all attempts
  }
  {
    StubServer schemaless(200, /*omitAnswerField=*/true);
    const auto result =
        oracle_client_answer(fast_oracle(schemaless.endpoint()), "t", "q");
    CHECK(!result.has_value());
    CHECK(schemaless.hits == 1);  // malformed body is not retried
  }
  {
    StubServer ok;
    const auto result = oracle_client_answer(
        fast_oracle(ok.endpoint()),
        "Step 1: x.\nConclusion: the lamp is green.", "q");
    REQUIRE(result.has_value());
    CHECK(*result == "the lamp is green.");
    CHECK(ok.hits == 1);
  }
}

TEST_CASE("sft memorizes a single example") {
  RunConfig cfg = small_config(fresh_dir("sft_memorize"), 11);
  cfg.nScenes = 1;
  cfg.questionsPerScene = 1;
  cfg.sftEpochs = 400;
  cfg.sftStepSize = 0.5;
  cmd_gen_data(cfg);
  cmd_filter(cfg);
  const SftReport report = cmd_train_sft(cfg);
  REQUIRE(report.examples == 1);
  // cross-entropy below 0.01 nats means p(target) > 0.99
  CHECK(report.epochLoss.back() < 0.01);
}

TEST_CASE("sft loss curve is non-increasing in the 5-seed median") {
  std::vector<std::vector<double>> curves;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = small_config(fresh_dir("sft_curve_" + std::to_string(seed)),
                                 seed);
    cfg.nScenes = 10;
    cfg.questionsPerScene = 5;
    cfg.sftEpochs = 30;
    cfg.sftStepSize = 0.2;
    cmd_gen_data(cfg);
    cmd_filter(cfg);
    curves.push_back(cmd_train_sft(cfg).epochLoss);
  }
  for (std::size_t e = 1; e < curves[0].size(); ++e) {
    std::vector<double> prev, cur;
    for (const auto& c : curves) {
      prev.push_back(c[e - 1]);
      cur.push_back(c[e]);
    }
    std::sort(prev.begin(), prev.end());
    std::sort(cur.begin(), cur.end());
    CHECK(cur[2] <= prev[2] + 1e-9);  // medians
  }
}

TEST_CASE("rl mean group reward trends upward in the 5-seed median") {
  std::vector<std::vector<double>> curves;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = small_config(fresh_dir("rl_trend_" + std::to_string(seed)),
                                 seed);
    cfg.nScenes = 12;
    cfg.questionsPerScene = 4;
    cfg.sftEpochs = 2;
    cfg.sftStepSize = 0.1;
    cfg.rlEpochs = 6;
    cfg.grpo.stepSize = 0.25;
    cfg.rlRenderCorruption = 0.05;
    cmd_gen_data(cfg);
    cmd_filter(cfg);
    cmd_train_sft(cfg);
    curves.push_back(cmd_train_rl(cfg).epochMeanReward);
  }
  auto median_at = [&](std::size_t e) {
    std::vector<double> v;
    for (const auto& c : curves) v.push_back(c[e]);
    std::sort(v.begin(), v.end());
    return v[2];
  };
  for (std::size_t e = 1; e < curves[0].size(); ++e)
    CHECK(median_at(e) >= median_at(e - 1) - 0.02);  // monotone within noise
  CHECK(median_at(curves[0].size() - 1) > median_at(0));
}

TEST_CASE("rl with constant rewards leaves the policy untouched") {
  RunConfig cfg = small_config(fresh_dir("rl_degenerate"), 13);
  cfg.rewardWeights.enablePerception = false;
  cfg.rewardWeights.enableSimilarity = false;  // format only
  cfg.rlRenderCorruption = 0.0;                // every render is well-formed
  cmd_gen_data(cfg);
  cmd_filter(cfg);
  cmd_train_sft(cfg);
  cmd_train_rl(cfg);
  const PolicyCheckpoint sft = load_checkpoint(sft_checkpoint_path(cfg));
  const PolicyCheckpoint rl = load_checkpoint(rl_checkpoint_path(cfg));
  CHECK(sft.policy.theta == rl.policy.theta);
}

TEST_CASE("checkpoint reload reproduces identical metrics") {
  RunConfig cfg = small_config(fresh_dir("ckpt_reload"), 17);
  cmd_gen_data(cfg);
  cmd_filter(cfg);
  cmd_train_sft(cfg);
  cmd_train_rl(cfg);

  const MetricsReport m1 = cmd_eval(cfg, rl_checkpoint_path(cfg));
  const std::string metricsBytes = slurp(metrics_path(cfg));
  const MetricsReport m2 = cmd_eval(cfg, rl_checkpoint_path(cfg));
  CHECK(m1.answerExactMatchRate == m2.answerExactMatchRate);
  CHECK(m1.meanIoU == m2.meanIoU);
  CHECK(m1.meanReward == m2.meanReward);
  CHECK(slurp(metrics_path(cfg)) == metricsBytes);

  // loading and re-saving is lossless
  const PolicyCheckpoint ckpt = load_checkpoint(rl_checkpoint_path(cfg));
  save_checkpoint(ckpt, cfg.outDir + "/resaved.json");
  const PolicyCheckpoint again = load_checkpoint(cfg.outDir + "/resaved.json");
  CHECK(again.policy.theta == ckpt.policy.theta);
  CHECK(slurp(cfg.outDir + "/resaved.json") ==
        slurp(rl_checkpoint_path(cfg)));
}

TEST_CASE("eval rejects checkpoints from another config") {
  RunConfig cfg = small_config(fresh_dir("ckpt_mismatch"), 19);
  cmd_gen_data(cfg);
  cmd_filter(cfg);
  cmd_train_sft(cfg);
  RunConfig other = cfg;
  other.seed = 999;
  CHECK_THROWS_AS(cmd_eval(other, sft_checkpoint_path(cfg)),
                  std::runtime_error);
}

TEST_CASE("uniform policy hits the 1/A anchor baseline") {
  RunConfig cfg = small_config(fresh_dir("uniform_eval"), 23);
  cfg.nObjects = 8;
  cfg.evalScenes = 30;
  cfg.questionsPerScene = 4;

  PolicyCheckpoint uniform;
  uniform.configHash = config_hash(cfg);
  uniform.policy =
      CategoricalPolicy::zeros(2 * cfg.nObjects + 1, 2 * cfg.nObjects);
  fs::create_directories(cfg.outDir);
  const std::string path = cfg.outDir + "/uniform.json";
  save_checkpoint(uniform, path);

  const MetricsReport metrics = cmd_eval(cfg, path);
  // metrics are exact expectations: anchor mass on the target is 1/A, and
  // at least the full-phrase target action answers exactly
  CHECK(metrics.meanIoU ==
        doctest::Approx(1.0 / cfg.nObjects).epsilon(1e-9));
  CHECK(metrics.answerExactMatchRate >= 0.5 / cfg.nObjects - 1e-9);
  CHECK(metrics.answerExactMatchRate <= metrics.meanIoU + 1.0 / cfg.nObjects);
}

TEST_CASE("a saturated slot policy is a perfect scorer") {
  RunConfig cfg = small_config(fresh_dir("perfect_eval"), 29);
  cfg.nObjects = 4;
  cfg.embeddingDim = 256;
  cfg.evalScenes = 5;
  cfg.questionsPerScene = 3;
  cfg.viewStrategy = "all";  // nothing hidden from the policy

  PolicyCheckpoint perfect;
  perfect.configHash = config_hash(cfg);
  perfect.policy =
      CategoricalPolicy::zeros(2 * cfg.nObjects + 1, 2 * cfg.nObjects);
  // saturate the full-phrase columns; fragment twins stay at logit zero
  for (int j = 0; j < cfg.nObjects; ++j) {
    perfect.policy.theta(j, j) = 200.0;                 // identity block
    perfect.policy.theta(cfg.nObjects + j, j) = 200.0;  // relational block
  }
  fs::create_directories(cfg.outDir);
  const std::string path = cfg.outDir + "/perfect.json";
  save_checkpoint(perfect, path);

  const MetricsReport metrics = cmd_eval(cfg, path);
  CHECK(metrics.answerExactMatchRate == 1.0);
  CHECK(metrics.meanIoU == 1.0);
}

TEST_CASE("select-views emits deterministic rankings per strategy") {
  RunConfig cfg = small_config(fresh_dir("views"), 31);
  cfg.nScenes = 3;
  cmd_gen_data(cfg);

  cfg.viewStrategy = "learned";
  cfg.fusion.mode = "fixed";
  cmd_select_views(cfg);
  const std::string learned = slurp(views_path(cfg));
  cmd_select_views(cfg);
  CHECK(slurp(views_path(cfg)) == learned);

  // k larger than the pool returns the whole pool
  cfg.kViews = 999;
  cmd_select_views(cfg);
  std::ifstream in(views_path(cfg));
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto j = nlohmann::json::parse(line);
  CHECK(j["views"].size() ==
        static_cast<std::size_t>(cfg.horizontalViews + cfg.elevatedViews +
                                 cfg.bottomViews));

  cfg.kViews = 6;
  cfg.viewStrategy = "bottom";
  cmd_select_views(cfg);
  std::ifstream in2(views_path(cfg));
  REQUIRE(std::getline(in2, line));
  const auto j2 = nlohmann::json::parse(line);
  REQUIRE(j2["views"].size() == 6);
  for (const auto& v : j2["views"])
    CHECK(v["id"].get<std::string>()[0] == 'b');
}

TEST_CASE("full small pipeline is byte-deterministic end to end") {
  auto run = [](const std::string& dir) {
    RunConfig cfg = small_config(dir, 37);
    cfg.corruptionFraction = 0.2;
    cfg.viewStrategy = "learned";
    cmd_gen_data(cfg);
    cmd_filter(cfg);
    cmd_train_sft(cfg);
    cmd_train_rl(cfg);
    cmd_eval(cfg, rl_checkpoint_path(cfg));
    return cfg;
  };
  const RunConfig a = run(fresh_dir("e2e_a"));
  const RunConfig b = run(fresh_dir("e2e_b"));
  CHECK(slurp(raw_cot_path(a)) == slurp(raw_cot_path(b)));
  CHECK(slurp(filtered_cot_path(a)) == slurp(filtered_cot_path(b)));
  CHECK(slurp(filter_report_path(a)) == slurp(filter_report_path(b)));
  CHECK(slurp(sft_checkpoint_path(a)) == slurp(sft_checkpoint_path(b)));
  CHECK(slurp(rl_checkpoint_path(a)) == slurp(rl_checkpoint_path(b)));
  CHECK(slurp(rl_log_path(a)) == slurp(rl_log_path(b)));
  CHECK(slurp(metrics_path(a)) == slurp(metrics_path(b)));
}
