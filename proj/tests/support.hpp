#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "posemu/geometry.hpp"
#include "posemu/random.hpp"
#include "posemu/skeleton.hpp"

namespace posemu::test {

inline Vec3 random_unit(Rng& rng) {
  Vec3 v = standard_normal(rng, 3);
  return v.normalized();
}

inline Vec3 random_tangent(Rng& rng, const Vec3& y, double scale = 1.0) {
  Vec3 v = standard_normal(rng, 3);
  return scale * (v - v.dot(y) * y);
}

inline Posture random_posture(Rng& rng, int bones) {
  Eigen::Matrix3Xd b(3, bones);
  for (int i = 0; i < bones; ++i) b.col(i) = random_unit(rng);
  return Posture(b);
}

inline TangentField random_field(Rng& rng, const Posture& p, double scale = 1.0) {
  TangentField v(3, p.bone_count());
  for (Eigen::Index i = 0; i < p.bone_count(); ++i) v.col(i) = random_tangent(rng, p.bone(i), scale);
  return v;
}

inline Posture perturb(Rng& rng, const Posture& p, double scale) { return posture_exp(p, random_field(rng, p, scale)); }

// Smooth random walk: start plus a sum of a few low-frequency tangent modes.
inline MotionSequence smooth_sequence(Rng& rng, int bones, Eigen::Index length, double amplitude = 0.5) {
  const Posture base = random_posture(rng, bones);
  const TangentField a = random_field(rng, base, amplitude);
  const TangentField b = random_field(rng, base, amplitude);
  std::vector<Posture> frames;
  for (Eigen::Index t = 0; t < length; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(length - 1);
    frames.push_back(posture_exp(base, std::sin(3.0 * s) * a + (s * s) * b));
  }
  return MotionSequence(std::move(frames));
}

inline Eigen::Vector3d axis(int i) { return Eigen::Vector3d::Unit(i); }

}  // namespace posemu::test
