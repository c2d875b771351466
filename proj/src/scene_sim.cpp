#include "scenerl/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scenerl/rng.hpp"

namespace scenerl {

namespace {

struct Direction {
  const char* word;
  int axis;
  int sign;
};

constexpr Direction kDirections[] = {
    {"north", 1, +1}, {"south", 1, -1}, {"east", 0, +1}, {"west", 0, -1}};

// Reference phrase "{color} {label}" must identify exactly one object.
std::optional<int> find_unique_colored(const SceneSpec& scene,
                                       std::string_view color,
                                       std::string_view label) {
  std::optional<int> found;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    const SceneObject& o = scene.objects[i];
    if (o.color == color && o.label == label) {
      if (found) return std::nullopt;
      found = i;
    }
  }
  return found;
}

std::optional<int> find_unique_label(const SceneSpec& scene,
                                     std::string_view label) {
  std::optional<int> found;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    if (scene.objects[i].label == label) {
      if (found) return std::nullopt;
      found = i;
    }
  }
  return found;
}

bool color_label_unique(const SceneSpec& scene, int idx) {
  const SceneObject& o = scene.objects[idx];
  for (int j = 0; j < static_cast<int>(scene.objects.size()); ++j) {
    if (j != idx && scene.objects[j].color == o.color &&
        scene.objects[j].label == o.label)
      return false;
  }
  return true;
}

void shuffle_items(std::vector<QAItem>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

const std::vector<std::string>& scene_labels() {
  static const std::vector<std::string> kLabels{
      "chair",   "table",    "sofa",     "bed",      "desk",      "lamp",
      "shelf",   "cabinet",  "mirror",   "sink",     "toilet",    "stool",
      "bench",   "dresser",  "wardrobe", "bookcase", "monitor",   "television",
      "fridge",  "oven",     "microwave","curtain",  "rug",       "plant",
      "piano",   "guitar",   "clock",    "vase",     "basket",    "heater"};
  return kLabels;
}

const std::vector<std::string>& scene_colors() {
  static const std::vector<std::string> kColors{
      "red", "blue", "green", "yellow", "white", "black", "brown", "gray"};
  return kColors;
}

SceneSpec generate_scene(std::mt19937_64& rng, int nObjects,
                         const SceneGenOptions& opts) {
  if (nObjects < 3 || nObjects > 12)
    throw std::invalid_argument("generate_scene: nObjects must be in [3,12]");

  SceneSpec scene;
  scene.extent = opts.extent;
  const Eigen::Vector3d lo = opts.extent.min;
  const Eigen::Vector3d hi = opts.extent.max;
  const Eigen::Vector3d mid = opts.extent.center();
  const double halfW = 0.5 * std::min(hi.x() - lo.x(), hi.y() - lo.y());

  int rejections = 0;
  while (static_cast<int>(scene.objects.size()) < nObjects) {
    Eigen::Vector3d side;
    Eigen::Vector3d bmin;
    if (opts.placement == ScenePlacement::PerimeterLow) {
      side.x() = uniform_range(rng, opts.minSide, std::min(opts.maxSide, 0.9));
      side.y() = uniform_range(rng, opts.minSide, std::min(opts.maxSide, 0.9));
      side.z() = uniform_range(rng, opts.minSide, std::min(opts.maxSide, 0.5));
      bmin.x() = uniform_range(rng, lo.x(), hi.x() - side.x());
      bmin.y() = uniform_range(rng, lo.y(), hi.y() - side.y());
      bmin.z() = lo.z();
    } else {
      for (int k = 0; k < 3; ++k) {
        side[k] = uniform_range(rng, opts.minSide, opts.maxSide);
        bmin[k] = uniform_range(rng, lo[k], hi[k] - side[k]);
      }
    }
    const Aabb3 box{bmin, bmin + side};

    bool ok = true;
    if (opts.placement == ScenePlacement::PerimeterLow) {
      // Keep centers outside the union of the bottom-ring sight cones.
      const double radial = (box.center().head<2>() - mid.head<2>()).norm();
      ok = radial >= 0.92 * halfW;
    }
    if (ok) {
      for (const SceneObject& other : scene.objects) {
        if (intersection_volume(box, other.box) > 0.0) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      if (++rejections > opts.maxRejections)
        throw std::runtime_error("generate_scene: placement failed after " +
                                 std::to_string(opts.maxRejections) +
                                 " rejections");
      continue;
    }

    SceneObject obj;
    obj.label = scene_labels()[uniform_index(rng, scene_labels().size())];
    obj.color = scene_colors()[uniform_index(rng, scene_colors().size())];
    obj.box = box;
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

std::optional<int> nearest_in_direction(const SceneSpec& scene, int refIndex,
                                        int axis, int sign) {
  const Eigen::Vector3d ref = scene.objects[refIndex].box.center();
  std::optional<int> best;
  double bestDist = 0.0;
  for (int j = 0; j < static_cast<int>(scene.objects.size()); ++j) {
    if (j == refIndex) continue;
    const Eigen::Vector3d c = scene.objects[j].box.center();
    if (sign * (c[axis] - ref[axis]) <= 0.0) continue;
    const double d = (c - ref).norm();
    if (!best || d < bestDist) {
      best = j;
      bestDist = d;
    }
  }
  return best;
}

std::optional<int> nearest_object(const SceneSpec& scene, int refIndex) {
  const Eigen::Vector3d ref = scene.objects[refIndex].box.center();
  std::optional<int> best;
  double bestDist = 0.0;
  for (int j = 0; j < static_cast<int>(scene.objects.size()); ++j) {
    if (j == refIndex) continue;
    const double d = (scene.objects[j].box.center() - ref).norm();
    if (!best || d < bestDist) {
      best = j;
      bestDist = d;
    }
  }
  return best;
}

std::vector<QAItem> generate_questions(const SceneSpec& scene,
                                       std::mt19937_64& rng) {
  std::vector<QAItem> items;
  const int n = static_cast<int>(scene.objects.size());

  for (int i = 0; i < n; ++i) {
    const SceneObject& o = scene.objects[i];
    if (find_unique_label(scene, o.label) == i) {
      items.push_back(QAItem{"what color is the " + o.label, o.color, i});
    }
    if (!color_label_unique(scene, i)) continue;
    const std::string ref = o.color + " " + o.label;
    for (const Direction& d : kDirections) {
      if (auto j = nearest_in_direction(scene, i, d.axis, d.sign)) {
        items.push_back(QAItem{
            "what is " + std::string(d.word) + " of the " + ref,
            scene.objects[*j].label, *j});
      }
    }
    if (auto j = nearest_object(scene, i)) {
      items.push_back(QAItem{"what is closest to the " + ref,
                             scene.objects[*j].label, *j});
    }
  }
  shuffle_items(items, rng);
  return items;
}

QuestionKind classify_question(std::string_view question) {
  const std::vector<std::string> toks = tokenize(question);
  if (toks.size() >= 2 && toks[0] == "what" && toks[1] == "color")
    return QuestionKind::Attribute;
  if (toks.size() >= 3 && toks[0] == "what" && toks[1] == "is") {
    if (toks[2] == "closest") return QuestionKind::Nearest;
    for (const Direction& d : kDirections)
      if (toks[2] == d.word) return QuestionKind::Relation;
  }
  return QuestionKind::Unknown;
}

std::optional<QAItem> resolve_question(const SceneSpec& scene,
                                       std::string_view question) {
  const std::vector<std::string> toks = tokenize(question);
  const QuestionKind kind = classify_question(question);

  if (kind == QuestionKind::Attribute) {
    // what color is the {label}
    if (toks.size() != 5 || toks[2] != "is" || toks[3] != "the")
      return std::nullopt;
    const auto idx = find_unique_label(scene, toks[4]);
    if (!idx) return std::nullopt;
    return QAItem{std::string(question), scene.objects[*idx].color, *idx};
  }
  if (kind == QuestionKind::Relation) {
    // what is {dir} of the {color} {label}
    if (toks.size() != 7 || toks[3] != "of" || toks[4] != "the")
      return std::nullopt;
    const auto ref = find_unique_colored(scene, toks[5], toks[6]);
    if (!ref) return std::nullopt;
    for (const Direction& d : kDirections) {
      if (toks[2] != d.word) continue;
      const auto j = nearest_in_direction(scene, *ref, d.axis, d.sign);
      if (!j) return std::nullopt;
      return QAItem{std::string(question), scene.objects[*j].label, *j};
    }
    return std::nullopt;
  }
  if (kind == QuestionKind::Nearest) {
    // what is closest to the {color} {label}
    if (toks.size() != 7 || toks[3] != "to" || toks[4] != "the")
      return std::nullopt;
    const auto ref = find_unique_colored(scene, toks[5], toks[6]);
    if (!ref) return std::nullopt;
    const auto j = nearest_object(scene, *ref);
    if (!j) return std::nullopt;
    return QAItem{std::string(question), scene.objects[*j].label, *j};
  }
  return std::nullopt;
}

std::string oracle_answer(const SceneSpec& scene, std::string_view question) {
  const auto resolved = resolve_question(scene, question);
  return resolved ? resolved->groundTruthAnswer : std::string{};
}

std::vector<CameraPose> sample_camera_ring(const SceneSpec& scene, int n,
                                           RingKind kind) {
  if (n < 1) throw std::invalid_argument("sample_camera_ring: n must be >= 1");
  const Eigen::Vector3d mid = scene.extent.center();
  const Eigen::Vector3d ext = scene.extent.extent();
  const double height = ext.z();
  const double halfDiag = 0.5 * ext.norm();

  double radius = 1.2 * halfDiag;
  double z = scene.extent.min.z() + 0.7 * height;
  if (kind == RingKind::Elevated) {
    z = scene.extent.min.z() + 1.5 * height;
  } else if (kind == RingKind::Bottom) {
    radius = 0.25 * halfDiag;
    z = scene.extent.min.z() - 0.2 * height;
  }

  std::vector<CameraPose> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * M_PI * i / n;
    CameraPose pose;
    pose.position = Eigen::Vector3d(mid.x() + radius * std::cos(angle),
                                    mid.y() + radius * std::sin(angle), z);
    if (kind == RingKind::Bottom) {
      // Straight up, so each under-floor camera covers only the objects in
      // the 45-degree cone above it.
      pose.lookAt = Eigen::Vector3d(pose.position.x(), pose.position.y(), mid.z());
    } else {
      pose.lookAt = mid;
    }
    poses.push_back(pose);
  }
  return poses;
}

std::vector<int> visible_object_indices(const SceneSpec& scene,
                                        const CameraPose& pose,
                                        double coneCosine) {
  std::vector<int> out;
  const Eigen::Vector3d dir = (pose.lookAt - pose.position).normalized();
  if (!dir.allFinite()) return out;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    const Eigen::Vector3d v = scene.objects[i].box.center() - pose.position;
    const double norm = v.norm();
    if (norm == 0.0) continue;
    if (v.dot(dir) / norm >= coneCosine) out.push_back(i);
  }
  return out;
}

ViewCandidate render_view_features(const SceneSpec& scene,
                                   const CameraPose& pose,
                                   const EmbeddingProvider& provider,
                                   std::string id) {
  std::vector<std::string> tokens;
  for (int i : visible_object_indices(scene, pose)) {
    tokens.push_back(scene.objects[i].label);
    tokens.push_back(scene.objects[i].color);
  }
  ViewCandidate v;
  v.id = std::move(id);
  v.cameraPosition = pose.position;
  v.lookAt = pose.lookAt;
  v.point3dEmbedding = provider.embed(Channel::Point3d, tokens);
  v.renderedJointEmbedding = provider.embed(Channel::JointImage, tokens);
  return v;
}

nlohmann::json scene_to_json(const SceneSpec& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const SceneObject& o : scene.objects) {
    objects.push_back({
        {"label", o.label},
        {"color", o.color},
        {"box",
         {{"min", {o.box.min.x(), o.box.min.y(), o.box.min.z()}},
          {"max", {o.box.max.x(), o.box.max.y(), o.box.max.z()}}}},
    });
  }
  return nlohmann::json{
      {"id", scene.id},
      {"extent",
       {{"min", {scene.extent.min.x(), scene.extent.min.y(), scene.extent.min.z()}},
        {"max", {scene.extent.max.x(), scene.extent.max.y(), scene.extent.max.z()}}}},
      {"objects", objects}};
}

namespace {

Eigen::Vector3d vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("scene_from_json: expected [x,y,z]");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(),
                         j[2].get<double>());
}

Aabb3 box_from_json(const nlohmann::json& j) {
  Aabb3 box{vec3_from_json(j.at("min")), vec3_from_json(j.at("max"))};
  if (!box.valid()) throw std::invalid_argument("scene_from_json: invalid box");
  return box;
}

}  // namespace

SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec scene;
  scene.id = j.at("id").get<std::string>();
  scene.extent = box_from_json(j.at("extent"));
  for (const nlohmann::json& jo : j.at("objects")) {
    SceneObject o;
    o.label = jo.at("label").get<std::string>();
    o.color = jo.at("color").get<std::string>();
    o.box = box_from_json(jo.at("box"));
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

}  // namespace scenerl
