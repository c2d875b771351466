#include "scenerl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scenerl/oracle_client.hpp"
#include "scenerl/rng.hpp"

namespace fs = std::filesystem;

namespace scenerl {

std::string manifest_path(const RunConfig& cfg) {
  return cfg.outDir + "/manifest.json";
}
std::string scenes_dir(const RunConfig& cfg) { return cfg.outDir + "/scenes"; }
std::string raw_cot_path(const RunConfig& cfg) {
  return cfg.outDir + "/cot_raw.jsonl";
}
std::string filtered_cot_path(const RunConfig& cfg) {
  return cfg.outDir + "/cot_filtered.jsonl";
}
std::string quarantine_path(const RunConfig& cfg) {
  return cfg.outDir + "/cot_quarantine.jsonl";
}
std::string filter_report_path(const RunConfig& cfg) {
  return cfg.outDir + "/filter_report.json";
}
std::string sft_checkpoint_path(const RunConfig& cfg) {
  return cfg.outDir + "/checkpoint_sft.json";
}
std::string rl_checkpoint_path(const RunConfig& cfg) {
  return cfg.outDir + "/checkpoint_rl.json";
}
std::string rl_log_path(const RunConfig& cfg) {
  return cfg.outDir + "/rl_log.jsonl";
}
std::string views_path(const RunConfig& cfg) {
  return cfg.outDir + "/views.jsonl";
}
std::string metrics_path(const RunConfig& cfg) {
  return cfg.outDir + "/metrics.json";
}

std::vector<CoTExample> read_cot_jsonl(const std::string& path,
                                       std::size_t* malformed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<CoTExample> out;
  std::size_t bad = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json j =
        nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("scene_id") ||
        !j.contains("question") || !j.contains("think") ||
        !j.contains("answer")) {
      ++bad;
      continue;
    }
    out.push_back(CoTExample{j["scene_id"].get<std::string>(),
                             j["question"].get<std::string>(),
                             j["think"].get<std::string>(),
                             j["answer"].get<std::string>()});
  }
  if (malformed) *malformed = bad;
  return out;
}

void write_cot_jsonl(const std::string& path,
                     const std::vector<CoTExample>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  for (const CoTExample& r : records) {
    out << nlohmann::json{{"scene_id", r.sceneId},
                          {"question", r.question},
                          {"think", r.think},
                          {"answer", r.answer}}
               .dump()
        << "\n";
  }
}

namespace {

std::string_view trim_view(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string conclusion_text(const std::string& think) {
  std::istringstream lines(think);
  std::string line;
  while (std::getline(lines, line)) {
    std::string_view t = trim_view(line);
    if (t.size() < 10) continue;
    std::string head(t.substr(0, 10));
    std::transform(head.begin(), head.end(), head.begin(), ::tolower);
    if (head != "conclusion") continue;
    t.remove_prefix(10);
    if (!t.empty() && (t.front() == ':' || t.front() == ',')) t.remove_prefix(1);
    return std::string(trim_view(t));
  }
  return {};
}

}  // namespace

OracleAnswerer make_echo_oracle() {
  return [](const std::string& think,
            const std::string&) -> std::optional<std::string> {
    return conclusion_text(think);
  };
}

OracleAnswerer make_remote_oracle(const OracleConfig& cfg) {
  return [cfg](const std::string& think,
               const std::string& question) -> std::optional<std::string> {
    return oracle_client_answer(cfg, think, question);
  };
}

// ---------------------------------------------------------------------------
// Shared pipeline machinery
// ---------------------------------------------------------------------------

namespace {

SceneGenOptions scene_options(const RunConfig& cfg) {
  SceneGenOptions opts;
  if (cfg.scenePlacement == "perimeter_low")
    opts.placement = ScenePlacement::PerimeterLow;
  else if (cfg.scenePlacement != "uniform")
    throw std::invalid_argument("unknown scenePlacement: " + cfg.scenePlacement);
  return opts;
}

std::string scene_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05d", index);
  return buf;
}

std::vector<SceneSpec> make_scenes(const RunConfig& cfg, std::string_view stream,
                                   std::string_view prefix, int count) {
  std::mt19937_64 rng = make_rng(cfg.seed, stream);
  const SceneGenOptions opts = scene_options(cfg);
  std::vector<SceneSpec> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    SceneSpec s = generate_scene(rng, cfg.nObjects, opts);
    s.id = std::string(prefix) + scene_name(i).substr(6);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::vector<SceneSpec> training_scenes(const RunConfig& cfg) {
  return make_scenes(cfg, "scene", "scene_", cfg.nScenes);
}

std::vector<std::vector<QAItem>> questions_for(const RunConfig& cfg,
                                               const std::vector<SceneSpec>& scenes,
                                               std::string_view stream) {
  std::mt19937_64 rng = make_rng(cfg.seed, stream);
  std::vector<std::vector<QAItem>> out;
  out.reserve(scenes.size());
  for (const SceneSpec& s : scenes) {
    std::vector<QAItem> qs = generate_questions(s, rng);
    if (static_cast<int>(qs.size()) > cfg.questionsPerScene)
      qs.resize(cfg.questionsPerScene);
    out.push_back(std::move(qs));
  }
  return out;
}

std::vector<SceneSpec> load_scenes(const RunConfig& cfg) {
  std::vector<fs::path> files;
  const fs::path dir = scenes_dir(cfg);
  if (!fs::exists(dir))
    throw std::runtime_error("scenes directory missing: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SceneSpec> scenes;
  for (const fs::path& p : files) {
    std::ifstream in(p);
    nlohmann::json j;
    in >> j;
    scenes.push_back(scene_from_json(j));
  }
  return scenes;
}

struct ViewPool {
  std::vector<CameraPose> poses;
  std::vector<ViewCandidate> views;
  int horizontalCount = 0;
  int bottomStart = 0;
};

ViewPool build_view_pool(const SceneSpec& scene, const RunConfig& cfg,
                         const EmbeddingProvider& provider) {
  ViewPool pool;
  auto addRing = [&](RingKind kind, int n, char tag) {
    const std::vector<CameraPose> ring = sample_camera_ring(scene, n, kind);
    for (int i = 0; i < static_cast<int>(ring.size()); ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "%c%02d", tag, i);
      pool.poses.push_back(ring[i]);
      pool.views.push_back(render_view_features(scene, ring[i], provider, id));
    }
  };
  addRing(RingKind::Horizontal, cfg.horizontalViews, 'h');
  pool.horizontalCount = cfg.horizontalViews;
  addRing(RingKind::Elevated, cfg.elevatedViews, 'e');
  pool.bottomStart = static_cast<int>(pool.views.size());
  addRing(RingKind::Bottom, cfg.bottomViews, 'b');
  return pool;
}

SceneQueryContext build_query_context(const SceneSpec& scene,
                                      const std::string& question,
                                      const ViewPool& pool,
                                      const EmbeddingProvider& provider) {
  SceneQueryContext ctx;
  ctx.textEmbedding = provider.embed_text(Channel::Text, question);
  ctx.jointTextEmbedding = provider.embed_text(Channel::JointText, question);
  // The scene's image set: one embedding per horizontal view.
  for (int i = 0; i < pool.horizontalCount; ++i) {
    std::vector<std::string> toks;
    for (int idx : visible_object_indices(scene, pool.poses[i])) {
      toks.push_back(scene.objects[idx].label);
      toks.push_back(scene.objects[idx].color);
    }
    ctx.imageEmbeddings.push_back(provider.embed(Channel::Image, toks));
  }
  return ctx;
}

std::vector<int> select_view_indices(const ViewPool& pool,
                                     const SceneQueryContext& ctx,
                                     const RunConfig& cfg,
                                     const FusionWeights& w) {
  std::vector<int> picked;
  if (cfg.viewStrategy == "all") {
    picked.resize(pool.views.size());
    for (std::size_t i = 0; i < pool.views.size(); ++i) picked[i] = (int)i;
  } else if (cfg.viewStrategy == "horizontal") {
    const int n = std::min(cfg.kViews, pool.horizontalCount);
    for (int i = 0; i < n; ++i) picked.push_back(i);
  } else if (cfg.viewStrategy == "bottom") {
    const int n = std::min(cfg.kViews,
                           static_cast<int>(pool.views.size()) - pool.bottomStart);
    for (int i = 0; i < n; ++i) picked.push_back(pool.bottomStart + i);
  } else if (cfg.viewStrategy == "learned") {
    const auto top = select_top_k(pool.views, ctx, w, cfg.kViews);
    for (const auto& [id, score] : top) {
      for (std::size_t i = 0; i < pool.views.size(); ++i) {
        if (pool.views[i].id == id) {
          picked.push_back(static_cast<int>(i));
          break;
        }
      }
    }
  } else {
    throw std::invalid_argument("unknown viewStrategy: " + cfg.viewStrategy);
  }
  return picked;
}

std::vector<bool> visible_union(const SceneSpec& scene, const ViewPool& pool,
                                const std::vector<int>& viewIndices) {
  std::vector<bool> vis(scene.objects.size(), false);
  for (int vi : viewIndices)
    for (int obj : visible_object_indices(scene, pool.poses[vi]))
      vis[obj] = true;
  return vis;
}

// Scene-graph descriptors: each relation that makes object j the answer of a
// question about another object becomes one composite token, so descriptors
// of objects sharing a label cannot bleed into each other.
std::vector<std::vector<std::string>> geo_descriptors(const SceneSpec& scene) {
  struct Dir {
    const char* word;
    int axis;
    int sign;
  };
  static constexpr Dir kDirs[] = {
      {"north", 1, +1}, {"south", 1, -1}, {"east", 0, +1}, {"west", 0, -1}};

  const int n = static_cast<int>(scene.objects.size());
  std::vector<std::vector<std::string>> desc(n);
  for (int r = 0; r < n; ++r) {
    const std::string who = scene.objects[r].color + "|" + scene.objects[r].label;
    for (const Dir& d : kDirs) {
      if (auto j = nearest_in_direction(scene, r, d.axis, d.sign))
        desc[*j].push_back(std::string(d.word) + "|" + who);
    }
    if (auto j = nearest_object(scene, r))
      desc[*j].push_back("closest|" + who);
  }
  return desc;
}

// The relation the question asks about, in descriptor form.
std::optional<std::string> relation_probe(const std::string& question) {
  const QuestionKind kind = classify_question(question);
  if (kind != QuestionKind::Relation && kind != QuestionKind::Nearest)
    return std::nullopt;
  const std::vector<std::string> toks = tokenize(question);
  if (toks.size() < 7) return std::nullopt;
  return toks[2] + "|" + toks[5] + "|" + toks[6];
}

// Per-slot match features gated by visibility: [identity match | relational
// match | bias]. Attribute questions populate the identity block, relational
// ones the scene-graph block; a slot the selected views never see
// contributes zeros.
Eigen::VectorXd context_features(
    const SceneSpec& scene, const std::string& question,
    const std::vector<bool>& visible,
    const std::vector<std::vector<std::string>>& geoDesc,
    const EmbeddingProvider& provider, int numActions) {
  const QuestionKind kind = classify_question(question);
  const Eigen::VectorXd q =
      kind == QuestionKind::Attribute
          ? provider.embed_text(Channel::Text, question)
          : Eigen::VectorXd();
  const std::optional<std::string> probe = relation_probe(question);
  const Eigen::VectorXd probeEmbedding =
      probe ? provider.embed(Channel::Text, {*probe}) : Eigen::VectorXd();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * numActions + 1);
  x[2 * numActions] = 1.0;
  const int n = std::min<int>(numActions, scene.objects.size());
  for (int j = 0; j < n; ++j) {
    if (!visible[j]) continue;
    const SceneObject& o = scene.objects[j];
    if (kind == QuestionKind::Attribute) {
      x[j] = cosine(q, provider.embed(Channel::Text, {o.label, o.color}));
    } else if (probe && !geoDesc[j].empty()) {
      x[numActions + j] =
          cosine(probeEmbedding, provider.embed(Channel::Text, geoDesc[j]));
    }
  }
  return x;
}

// Rollout answers are full phrases so the similarity reward grades partial
// matches (shared color or label) instead of collapsing to 0/1. Every anchor
// also has a fragment twin: a well-formed render whose answer text never
// commits to the asked-for attribute. Only the text rewards can see the
// difference; the box reward cannot.
std::string action_answer(const SceneSpec& scene, QuestionKind kind, int obj,
                          int variant = 0) {
  if (obj >= static_cast<int>(scene.objects.size())) return {};
  const SceneObject& o = scene.objects[obj];
  if (variant != 0) return "the " + o.label;
  return kind == QuestionKind::Attribute
             ? "the " + o.label + " is " + o.color
             : "it is the " + o.color + " " + o.label;
}

// The bare answer token a full-phrase response commits to; evaluation
// compares these against the ground truth, so any object sharing the
// asked-about attribute answers correctly even when the grounding is wrong.
std::string short_answer(const SceneSpec& scene, QuestionKind kind, int obj) {
  if (obj >= static_cast<int>(scene.objects.size())) return {};
  return kind == QuestionKind::Attribute ? scene.objects[obj].color
                                         : scene.objects[obj].label;
}

// Actions 0..A-1 answer with the full phrase for each anchor; A..2A-1 are
// the fragment twins.
ActionSpace build_actions(const SceneSpec& scene, QuestionKind kind,
                          int numObjects) {
  ActionSpace as;
  as.actions.reserve(2 * numObjects);
  for (int variant = 0; variant < 2; ++variant)
    for (int j = 0; j < numObjects; ++j)
      as.actions.push_back({action_answer(scene, kind, j, variant), j});
  return as;
}

// A rollout rendered into the tagged template. corruptKind -1 renders clean;
// 0..2 produce the malformed variants used to keep the format reward live.
std::string render_response(const std::string& answer, int anchor,
                            int corruptKind) {
  switch (corruptKind) {
    case 0:
      return answer;
    case 1:
      return "<answer>" + answer + "</answer><think>checked</think>";
    case 2:
      return "<think></think><answer>" + answer + "</answer>";
    default:
      return "<think>Object " + std::to_string(anchor) +
             " best matches the question constraints.</think><answer>" +
             answer + "</answer>";
  }
}

Aabb3 dilated(const Aabb3& box, double margin) {
  return Aabb3{box.min.array() - margin, box.max.array() + margin};
}

// The grounding head's box estimate: the anchor box dilated and displaced by
// a fixed pseudo-random offset keyed on (scene, anchor).
Aabb3 predicted_box(const SceneSpec& scene, int anchor, const RunConfig& cfg) {
  const Aabb3& box = scene.objects[anchor].box;
  Eigen::Vector3d offset;
  for (int axis = 0; axis < 3; ++axis) {
    const std::uint64_t h = fnv1a64(scene.id + ":" + std::to_string(anchor) +
                                    ":" + std::to_string(axis));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    offset[axis] = cfg.perceptionNoise * (2.0 * u - 1.0);
  }
  return dilated(box, cfg.perceptionDilation).translated(offset);
}

RewardBreakdown score_response(const std::string& raw, int anchor,
                               const std::string& actionAnswer,
                               const SceneSpec& scene, const QAItem& qa,
                               const EmbeddingProvider& provider,
                               const RunConfig& cfg) {
  const auto parsed = parse_structured(raw);
  const int format = parsed ? 1 : 0;
  double perception = 0.0;
  double similarity = 0.0;
  const bool scoreContent = parsed.has_value() || cfg.scoreUnparsed;
  if (scoreContent && anchor < static_cast<int>(scene.objects.size())) {
    const QuestionKind kind = classify_question(qa.question);
    perception =
        reward_perception(predicted_box(scene, anchor, cfg),
                          dilated(scene.objects[qa.targetObjectIndex].box,
                                  cfg.perceptionDilation));
    similarity = reward_similarity(
        parsed ? parsed->answer : actionAnswer,
        action_answer(scene, kind, qa.targetObjectIndex), provider);
  }
  return make_breakdown(format, perception, similarity, cfg.rewardWeights);
}

struct TrainItem {
  int sceneIndex = 0;
  QAItem qa;
  QuestionKind kind = QuestionKind::Unknown;
  Context ctx;
  ActionSpace actions;
};

struct SceneCache {
  ViewPool pool;
  std::vector<std::vector<std::string>> geoDesc;
};

class ItemBuilder {
 public:
  ItemBuilder(const std::vector<SceneSpec>& scenes, const RunConfig& cfg,
              const EmbeddingProvider& provider, const FusionWeights& fusion)
      : scenes_(scenes), cfg_(cfg), provider_(provider), fusion_(fusion),
        cache_(scenes.size()) {}

  const SceneCache& cache(int sceneIdx) {
    SceneCache& c = cache_[sceneIdx];
    if (c.pool.views.empty()) {
      c.pool = build_view_pool(scenes_[sceneIdx], cfg_, provider_);
      c.geoDesc = geo_descriptors(scenes_[sceneIdx]);
    }
    return c;
  }

  TrainItem build(int sceneIdx, const QAItem& qa) {
    const SceneSpec& scene = scenes_[sceneIdx];
    const SceneCache& c = cache(sceneIdx);
    const SceneQueryContext qctx =
        build_query_context(scene, qa.question, c.pool, provider_);
    const std::vector<int> picked =
        select_view_indices(c.pool, qctx, cfg_, fusion_);
    const std::vector<bool> vis = visible_union(scene, c.pool, picked);

    TrainItem item;
    item.sceneIndex = sceneIdx;
    item.qa = qa;
    item.kind = classify_question(qa.question);
    item.ctx.features = context_features(scene, qa.question, vis, c.geoDesc,
                                         provider_, cfg_.nObjects);
    item.actions = build_actions(scene, item.kind, cfg_.nObjects);
    return item;
  }

 private:
  const std::vector<SceneSpec>& scenes_;
  const RunConfig& cfg_;
  const EmbeddingProvider& provider_;
  FusionWeights fusion_;
  std::vector<SceneCache> cache_;
};

double logit(double p) { return std::log(p / (1.0 - p)); }

FusionWeights fixed_fusion(const RunConfig& cfg) {
  FusionWeights w;
  w.wText = cfg.fusion.wText;
  w.preConstraint = logit(cfg.fusion.wCoverage);
  w.mu = cfg.fusion.mu;
  w.lambda = cfg.fusion.lambda;
  return w;
}

// Supervision for the learned fusion: a view is preferred when it sees the
// question's target object.
FusionWeights resolve_fusion(const RunConfig& cfg,
                             const std::vector<SceneSpec>& scenes,
                             const std::vector<std::vector<QAItem>>& questions,
                             const EmbeddingProvider& provider) {
  if (cfg.viewStrategy != "learned" || cfg.fusion.mode == "fixed")
    return fixed_fusion(cfg);

  std::vector<RankingItem> items;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const SceneSpec& scene = scenes[si];
    const ViewPool pool = build_view_pool(scene, cfg, provider);
    for (const QAItem& qa : questions[si]) {
      RankingItem item;
      item.ctx = build_query_context(scene, qa.question, pool, provider);
      item.candidates = pool.views;
      for (std::size_t vi = 0; vi < pool.views.size(); ++vi) {
        const auto vis = visible_object_indices(scene, pool.poses[vi]);
        if (std::find(vis.begin(), vis.end(), qa.targetObjectIndex) != vis.end())
          item.preferredIds.push_back(pool.views[vi].id);
      }
      if (item.preferredIds.empty() ||
          item.preferredIds.size() == pool.views.size())
        continue;
      items.push_back(std::move(item));
    }
  }
  if (items.empty()) return fixed_fusion(cfg);

  FusionTrainOptions opts;
  opts.margin = cfg.fusion.margin;
  opts.init = fixed_fusion(cfg);
  std::mt19937_64 rng = make_rng(cfg.seed, "fusion");
  return train_fusion_weights(items, cfg.fusion.steps, cfg.fusion.stepSize, rng,
                              opts);
}

// ---------------------------------------------------------------------------
// CoT templates
// ---------------------------------------------------------------------------

struct CotText {
  std::string think;
  std::string answer;
};

CotText build_cot(const QAItem& qa) {
  const QuestionKind kind = classify_question(qa.question);
  const std::vector<std::string> toks = tokenize(qa.question);
  const std::string& ans = qa.groundTruthAnswer;
  CotText out;
  if (kind == QuestionKind::Attribute) {
    const std::string& label = toks[4];
    out.answer = "After reviewing the visible objects and their arrangement "
                 "in the scene, the " + label + " in question is " + ans +
                 ", and no other reading of the layout supports a different "
                 "color.";
    out.think = "Step 1: Read the question and identify that it asks about "
                "the " + label + ".\n"
                "Step 2: Scan the scene objects and locate the " + label +
                " among the visible items.\n"
                "Step 3: Check the recorded attributes of the " + label +
                " and note its color value.\n"
                "Conclusion: " + out.answer;
  } else if (kind == QuestionKind::Relation) {
    const std::string& dir = toks[2];
    const std::string ref = toks[5] + " " + toks[6];
    out.answer = "Looking " + dir + " from the " + ref + ", the nearest "
                 "object in that direction is the " + ans + ", and the "
                 "layout of the scene leaves no other candidate in that "
                 "direction.";
    out.think = "Step 1: Parse the question and note that it asks what lies " +
                dir + " of the " + ref + ".\n"
                "Step 2: Locate the " + ref + " in the scene and fix its "
                "position as the reference point.\n"
                "Step 3: Compare the centers of the remaining objects against "
                "the reference along the " + dir + " axis and keep the one "
                "with the smallest distance.\n"
                "Conclusion: " + out.answer;
  } else {
    const std::string ref = toks[5] + " " + toks[6];
    out.answer = "Judging by the distances between the objects in this scene, "
                 "the item closest to the " + ref + " is the " + ans +
                 ", and every other object sits farther away from it.";
    out.think = "Step 1: Parse the question and note that it asks which "
                "object sits closest to the " + ref + ".\n"
                "Step 2: Locate the " + ref + " and measure the distance from "
                "it to every other object in the scene.\n"
                "Step 3: Rank the distances and keep the object with the "
                "smallest separation from the reference.\n"
                "Conclusion: " + out.answer;
  }
  return out;
}

constexpr const char* kDecoyAnswer =
    "The scene does not contain enough reliable evidence to settle this "
    "question, so the safest response is that the layout remains ambiguous "
    "from every sampled viewpoint available here.";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// kinds: 0 format, 1 think length, 2 answer length, 3 step count,
// 4 target mention, 5 answer consistency.
void corrupt_record(CotText& cot, const QAItem& qa, int kind) {
  switch (kind) {
    case 0:
      cot.think += "\n<think>";
      break;
    case 1:
      cot.think = "Step 1: Look around the room quickly.\nConclusion: it is "
                  "the " + qa.groundTruthAnswer + ".";
      break;
    case 2:
      cot.answer = qa.groundTruthAnswer;
      break;
    case 3:
      replace_all(cot.think, "Step ", "Stage ");
      break;
    case 4:
      replace_all(cot.think, "Conclusion:", "Overall,");
      break;
    case 5:
      cot.answer = kDecoyAnswer;
      break;
    default:
      break;
  }
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

GenDataReport cmd_gen_data(const RunConfig& cfg) {
  fs::create_directories(scenes_dir(cfg));
  const std::vector<SceneSpec> scenes = training_scenes(cfg);
  for (const SceneSpec& s : scenes)
    write_json_file(scene_to_json(s), scenes_dir(cfg) + "/" + s.id + ".json");

  const auto questions = questions_for(cfg, scenes, "questions");
  std::mt19937_64 corruptRng = make_rng(cfg.seed, "corruption");

  GenDataReport report;
  report.scenes = static_cast<int>(scenes.size());
  std::vector<CoTExample> records;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    for (const QAItem& qa : questions[si]) {
      CotText cot = build_cot(qa);
      if (uniform01(corruptRng) < cfg.corruptionFraction) {
        corrupt_record(cot, qa, static_cast<int>(uniform_index(corruptRng, 6)));
        ++report.corrupted;
      }
      records.push_back(
          CoTExample{scenes[si].id, qa.question, cot.think, cot.answer});
    }
  }
  write_cot_jsonl(raw_cot_path(cfg), records);
  report.records = static_cast<int>(records.size());

  // The JSONL schema is frozen, so the run manifest carries the config hash
  // for the data files in this directory.
  write_json_file(nlohmann::json{{"configHash", config_hash(cfg)},
                                 {"scenes", report.scenes},
                                 {"records", report.records},
                                 {"corrupted", report.corrupted}},
                  manifest_path(cfg));
  return report;
}

CmdFilterReport cmd_filter(const RunConfig& cfg) {
  std::size_t malformed = 0;
  const std::vector<CoTExample> input =
      read_cot_jsonl(raw_cot_path(cfg), &malformed);

  if (cfg.oracle.mode != "echo" && cfg.oracle.mode != "remote")
    throw std::invalid_argument("unknown oracle mode: " + cfg.oracle.mode);
  OracleAnswerer oracle = cfg.oracle.mode == "remote"
                              ? make_remote_oracle(cfg.oracle)
                              : make_echo_oracle();
  const FilterResult result = filter_dataset(input, oracle, cfg.filter);

  write_cot_jsonl(filtered_cot_path(cfg), result.accepted);
  if (!result.quarantined.empty())
    write_cot_jsonl(quarantine_path(cfg), result.quarantined);

  nlohmann::json perRule = nlohmann::json::object();
  for (const auto& [rule, count] : result.report.perRule) perRule[rule] = count;
  write_json_file(
      nlohmann::json{{"total", result.report.total},
                     {"accepted", result.report.accepted},
                     {"rejected", result.report.rejected},
                     {"oracleFailures", result.report.oracleFailures},
                     {"malformedInput", malformed},
                     {"perRule", perRule},
                     {"configHash", config_hash(cfg)}},
      filter_report_path(cfg));

  return CmdFilterReport{result.report, malformed};
}

namespace {

struct Corpus {
  std::vector<SceneSpec> scenes;
  std::vector<std::pair<int, QAItem>> items;  // scene index, resolved question
};

Corpus load_training_corpus(const RunConfig& cfg) {
  Corpus corpus;
  corpus.scenes = load_scenes(cfg);
  std::map<std::string, int> byId;
  for (int i = 0; i < static_cast<int>(corpus.scenes.size()); ++i)
    byId[corpus.scenes[i].id] = i;

  const std::vector<CoTExample> records =
      read_cot_jsonl(filtered_cot_path(cfg));
  for (const CoTExample& r : records) {
    const auto it = byId.find(r.sceneId);
    if (it == byId.end()) continue;
    const auto resolved = resolve_question(corpus.scenes[it->second], r.question);
    if (!resolved) continue;
    corpus.items.emplace_back(it->second, *resolved);
  }
  return corpus;
}

}  // namespace

SftReport cmd_train_sft(const RunConfig& cfg) {
  Corpus corpus = load_training_corpus(cfg);
  if (corpus.items.empty())
    throw std::runtime_error("cmd_train_sft: filtered dataset is empty");

  const EmbeddingProvider provider(cfg.embeddingDim);
  const auto questions = questions_for(cfg, corpus.scenes, "questions");
  const FusionWeights fusion =
      resolve_fusion(cfg, corpus.scenes, questions, provider);

  ItemBuilder builder(corpus.scenes, cfg, provider, fusion);
  std::vector<TrainItem> items;
  items.reserve(corpus.items.size());
  for (const auto& [si, qa] : corpus.items) items.push_back(builder.build(si, qa));

  CategoricalPolicy policy =
      CategoricalPolicy::zeros(2 * cfg.nObjects + 1, 2 * cfg.nObjects);

  SftReport report;
  report.examples = static_cast<int>(items.size());
  for (int epoch = 0; epoch < cfg.sftEpochs; ++epoch) {
    double lossSum = 0.0;
    for (const TrainItem& item : items) {
      const Eigen::VectorXd logp = policy.log_probs(item.ctx);
      const int target = item.qa.targetObjectIndex;
      lossSum += -logp[target];
      Eigen::VectorXd err = -logp.array().exp();
      err[target] += 1.0;
      policy.theta += cfg.sftStepSize * item.ctx.features * err.transpose();
    }
    report.epochLoss.push_back(lossSum / items.size());
  }

  PolicyCheckpoint ckpt;
  ckpt.configHash = config_hash(cfg);
  ckpt.policy = std::move(policy);
  if (cfg.viewStrategy == "learned") ckpt.fusion = fusion;
  save_checkpoint(ckpt, sft_checkpoint_path(cfg));
  return report;
}

RlReport cmd_train_rl(const RunConfig& cfg) {
  PolicyCheckpoint ckpt = load_checkpoint(sft_checkpoint_path(cfg));
  if (ckpt.configHash != config_hash(cfg))
    throw std::runtime_error("cmd_train_rl: checkpoint config hash mismatch");

  Corpus corpus = load_training_corpus(cfg);
  if (corpus.items.empty())
    throw std::runtime_error("cmd_train_rl: filtered dataset is empty");

  const EmbeddingProvider provider(cfg.embeddingDim);
  FusionWeights fusion = fixed_fusion(cfg);
  if (cfg.viewStrategy == "learned") {
    if (!ckpt.fusion)
      throw std::runtime_error("cmd_train_rl: checkpoint lacks fusion weights");
    fusion = *ckpt.fusion;
  }

  ItemBuilder builder(corpus.scenes, cfg, provider, fusion);
  std::vector<TrainItem> items;
  items.reserve(corpus.items.size());
  for (const auto& [si, qa] : corpus.items) items.push_back(builder.build(si, qa));

  CategoricalPolicy policy = ckpt.policy;
  const CategoricalPolicy reference = ckpt.policy;  // frozen cold-start policy
  std::mt19937_64 rng = make_rng(cfg.seed, "rl");

  std::ofstream log(rl_log_path(cfg));
  if (!log) throw std::runtime_error("cannot write: " + rl_log_path(cfg));

  RlReport report;
  for (int epoch = 0; epoch < cfg.rlEpochs; ++epoch) {
    double rewardAcc = 0.0;
    double klAcc = 0.0;
    for (std::size_t it = 0; it < items.size(); ++it) {
      const TrainItem& item = items[it];
      const SceneSpec& scene = corpus.scenes[item.sceneIndex];
      const CategoricalPolicy old = policy;

      Group group = sample_group(policy, item.ctx, cfg.grpo.groupSize, rng);
      group.rewards.resize(group.size());
      for (int i = 0; i < group.size(); ++i) {
        const ActionSpace::Action& action =
            item.actions.actions[group.responses[i]];
        int corruptKind = -1;
        if (uniform01(rng) < cfg.rlRenderCorruption)
          corruptKind = static_cast<int>(uniform_index(rng, 3));
        const std::string raw = render_response(
            action.answer, action.anchorObjectIndex, corruptKind);
        group.rewards[i] = score_response(raw, action.anchorObjectIndex,
                                          action.answer, scene, item.qa,
                                          provider, cfg)
                               .total;
      }
      group.advantages = normalize_advantages(group.rewards, cfg.grpo.stdEpsilon);
      policy = grpo_update(policy, old, reference, item.ctx, group, cfg.grpo);

      const double meanReward = group.rewards.mean();
      const double kl =
          kl_categorical(policy.probs(item.ctx), reference.probs(item.ctx));
      rewardAcc += meanReward;
      klAcc += kl;
      log << nlohmann::json{{"epoch", epoch},
                            {"item", it},
                            {"meanReward", meanReward},
                            {"kl", kl}}
                 .dump()
          << "\n";
    }
    report.epochMeanReward.push_back(rewardAcc / items.size());
    report.epochMeanKl.push_back(klAcc / items.size());
  }

  PolicyCheckpoint outCkpt;
  outCkpt.configHash = config_hash(cfg);
  outCkpt.policy = std::move(policy);
  outCkpt.fusion = ckpt.fusion;
  save_checkpoint(outCkpt, rl_checkpoint_path(cfg));
  return report;
}

void cmd_select_views(const RunConfig& cfg) {
  const std::vector<SceneSpec> scenes = load_scenes(cfg);
  const EmbeddingProvider provider(cfg.embeddingDim);
  const auto questions = questions_for(cfg, scenes, "questions");
  const FusionWeights fusion = resolve_fusion(cfg, scenes, questions, provider);

  std::ofstream out(views_path(cfg));
  if (!out) throw std::runtime_error("cannot write: " + views_path(cfg));
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const ViewPool pool = build_view_pool(scenes[si], cfg, provider);
    for (const QAItem& qa : questions[si]) {
      const SceneQueryContext ctx =
          build_query_context(scenes[si], qa.question, pool, provider);
      const std::vector<int> picked =
          select_view_indices(pool, ctx, cfg, fusion);
      nlohmann::json views = nlohmann::json::array();
      for (int vi : picked) {
        views.push_back(
            {{"id", pool.views[vi].id},
             {"score", fuse(score_view(pool.views[vi], ctx), fusion)}});
      }
      out << nlohmann::json{{"scene_id", scenes[si].id},
                            {"question", qa.question},
                            {"strategy", cfg.viewStrategy},
                            {"views", std::move(views)}}
                 .dump()
          << "\n";
    }
  }
}

MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpointPath) {
  const PolicyCheckpoint ckpt = load_checkpoint(checkpointPath);
  if (ckpt.configHash != config_hash(cfg))
    throw std::runtime_error("cmd_eval: checkpoint config hash mismatch");

  const EmbeddingProvider provider(cfg.embeddingDim);
  FusionWeights fusion = fixed_fusion(cfg);
  if (cfg.viewStrategy == "learned" && ckpt.fusion) fusion = *ckpt.fusion;

  const std::vector<SceneSpec> scenes =
      make_scenes(cfg, "eval-scenes", "eval_", cfg.evalScenes);
  const auto questions = questions_for(cfg, scenes, "eval-questions");

  ItemBuilder builder(scenes, cfg, provider, fusion);

  // Exact expectations under the policy distribution, so the report is free
  // of decoding noise.
  std::size_t total = 0;
  double exactSum = 0.0;
  double iouSum = 0.0;
  double rewardSum = 0.0;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    for (const QAItem& qa : questions[si]) {
      const TrainItem item = builder.build(static_cast<int>(si), qa);
      const Eigen::VectorXd p = ckpt.policy.probs(item.ctx);
      for (int a = 0; a < ckpt.policy.numActions(); ++a) {
        const ActionSpace::Action& chosen = item.actions.actions[a];
        // exact answers commit to the attribute (full phrase) and match it
        if (chosen.answer ==
                action_answer(scenes[si], item.kind,
                              chosen.anchorObjectIndex) &&
            short_answer(scenes[si], item.kind, chosen.anchorObjectIndex) ==
                qa.groundTruthAnswer)
          exactSum += p[a];
        iouSum += p[a] * iou(scenes[si].objects[chosen.anchorObjectIndex].box,
                             scenes[si].objects[qa.targetObjectIndex].box);
        const std::string raw =
            render_response(chosen.answer, chosen.anchorObjectIndex, -1);
        rewardSum += p[a] * score_response(raw, chosen.anchorObjectIndex,
                                           chosen.answer, scenes[si], qa,
                                           provider, cfg)
                                .total;
      }
      ++total;
    }
  }

  MetricsReport metrics;
  metrics.seed = cfg.seed;
  metrics.configHash = config_hash(cfg);
  if (total > 0) {
    metrics.answerExactMatchRate = exactSum / total;
    metrics.meanIoU = iouSum / total;
    metrics.meanReward = rewardSum / total;
  }
  if (fs::exists(filter_report_path(cfg))) {
    const nlohmann::json fr = read_json_file(filter_report_path(cfg));
    if (fr.contains("perRule"))
      for (const auto& [rule, count] : fr["perRule"].items())
        metrics.perRuleFilterCounts[rule] = count.get<std::size_t>();
  }

  nlohmann::json perRule = nlohmann::json::object();
  for (const auto& [rule, count] : metrics.perRuleFilterCounts)
    perRule[rule] = count;
  write_json_file(
      nlohmann::json{{"answerExactMatchRate", metrics.answerExactMatchRate},
                     {"meanIoU", metrics.meanIoU},
                     {"meanReward", metrics.meanReward},
                     {"perRuleFilterCounts", perRule},
                     {"seed", metrics.seed},
                     {"configHash", metrics.configHash},
                     {"config", config_canonical_json(cfg)}},
      metrics_path(cfg));
  return metrics;
}

}  // namespace scenerl
