#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenerl/aabb.hpp"
#include "scenerl/embedding.hpp"
#include "scenerl/view_select.hpp"

namespace scenerl {

struct SceneObject {
  std::string label;
  std::string color;
  Aabb3 box;
};

/// Synthetic room: non-overlapping axis-aligned objects inside an extent.
/// Axis convention: +x = east, +y = north, +z = up.
struct SceneSpec {
  std::string id;
  Aabb3 extent{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(10.0)};
  std::vector<SceneObject> objects;
};

struct QAItem {
  std::string question;
  std::string groundTruthAnswer;
  int targetObjectIndex = 0;
};

enum class QuestionKind { Attribute, Relation, Nearest, Unknown };

const std::vector<std::string>& scene_labels();  // ~30 nouns
const std::vector<std::string>& scene_colors();  // 8 colors

enum class ScenePlacement { Uniform, PerimeterLow };

struct SceneGenOptions {
  Aabb3 extent{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(10.0)};
  double minSide = 0.3;
  double maxSide = 2.0;
  ScenePlacement placement = ScenePlacement::Uniform;
  int maxRejections = 10000;
};

// Rejection-samples non-overlapping boxes (pairwise IoU exactly 0) and
// assigns labels/colors uniformly. PerimeterLow pins flat objects to the
// floor near the extent boundary, out of reach of under-floor cameras.
SceneSpec generate_scene(std::mt19937_64& rng, int nObjects,
                         const SceneGenOptions& opts = {});

// All unambiguous template instantiations (attribute / fixed-axis relation /
// nearest-object), shuffled. Every answer is recomputable from the scene.
std::vector<QAItem> generate_questions(const SceneSpec& scene,
                                       std::mt19937_64& rng);

QuestionKind classify_question(std::string_view question);

// Recomputes the answer for a template question from scratch.
// Unknown or unresolvable text yields nullopt.
std::optional<QAItem> resolve_question(const SceneSpec& scene,
                                       std::string_view question);

// Empty string for anything resolve_question cannot handle.
std::string oracle_answer(const SceneSpec& scene, std::string_view question);

// Index of the object nearest to ref among those whose center lies strictly
// beyond ref's center along the signed axis; nullopt when the half-space is
// empty.
std::optional<int> nearest_in_direction(const SceneSpec& scene, int refIndex,
                                        int axis, int sign);
std::optional<int> nearest_object(const SceneSpec& scene, int refIndex);

struct CameraPose {
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  Eigen::Vector3d lookAt{Eigen::Vector3d::Zero()};
};

enum class RingKind { Horizontal, Elevated, Bottom };

// n poses equally spaced on a circle. Horizontal/elevated rings orbit at
// 1.2x the extent half-diagonal looking at the extent center; the bottom
// ring sits just under the floor on a tight circle looking straight up.
std::vector<CameraPose> sample_camera_ring(const SceneSpec& scene, int n,
                                           RingKind kind = RingKind::Horizontal);

// Object centers inside the cone around the view direction; the default
// half-angle is 45 degrees (a 90-degree cone).
std::vector<int> visible_object_indices(
    const SceneSpec& scene, const CameraPose& pose,
    double coneCosine = 0.70710678118654752440);

// Feature proxy for a rendered view: embeddings of the visible labels+colors
// on the point3d and joint-image channels.
ViewCandidate render_view_features(const SceneSpec& scene,
                                   const CameraPose& pose,
                                   const EmbeddingProvider& provider,
                                   std::string id = {});

nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);

}  // namespace scenerl
