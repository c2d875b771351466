#pragma once

#include <Eigen/Dense>

namespace scenerl {

/// Axis-aligned box in R^3. Degenerate (zero-volume) boxes are valid.
struct Aabb3 {
  Eigen::Vector3d min{Eigen::Vector3d::Zero()};
  Eigen::Vector3d max{Eigen::Vector3d::Zero()};

  bool valid() const {
    return min.allFinite() && max.allFinite() && (min.array() <= max.array()).all();
  }

  Eigen::Vector3d extent() const { return max - min; }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }

  Aabb3 translated(const Eigen::Vector3d& delta) const {
    return Aabb3{min + delta, max + delta};
  }

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

inline double volume(const Aabb3& b) { return b.extent().prod(); }

inline double intersection_volume(const Aabb3& a, const Aabb3& b) {
  const Eigen::Vector3d side =
      (a.max.cwiseMin(b.max) - a.min.cwiseMax(b.min)).cwiseMax(0.0);
  return side.prod();
}

// vol(a ∩ b) / vol(a ∪ b); 0 when the union has no volume.
inline double iou(const Aabb3& a, const Aabb3& b) {
  const double inter = intersection_volume(a, b);
  const double uni = volume(a) + volume(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace scenerl
