#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "posemu/geometry.hpp"

namespace posemu {

inline constexpr double kBoneEpsilon = 1e-9;

/// Landmark tree. parent[root] == -1; every other landmark has exactly one
/// parent and the relation is acyclic.
class SkeletonHierarchy {
 public:
  SkeletonHierarchy() = default;
  /// Validates the parent array. Throws InvalidArgument.
  static SkeletonHierarchy from_parents(std::vector<int> parent);

  /// 21-landmark humanoid tree (pelvis root at index 20).
  static SkeletonHierarchy humanoid21();
  /// Chain 0 <- 1 <- ... with the root at n-1; each landmark's parent is the next index.
  static SkeletonHierarchy chain(int landmarks);
  /// humanoid21() for 21 landmarks, chain() otherwise.
  static SkeletonHierarchy default_for(int landmarks);

  int landmarks() const { return static_cast<int>(parent_.size()); }
  int root() const { return root_; }
  const std::vector<int>& parents() const { return parent_; }
  /// Landmark indices that own a bone, in increasing order (root excluded).
  const std::vector<int>& bone_landmarks() const { return bone_landmarks_; }

  bool operator==(const SkeletonHierarchy& other) const { return parent_ == other.parent_; }

 private:
  std::vector<int> parent_;
  std::vector<int> bone_landmarks_;
  int root_ = -1;
};

/// Landmark coordinates, one column per landmark.
using RawFrame = Eigen::Matrix3Xd;

/// T >= 2 postures on a uniform grid over [0, 1].
class MotionSequence {
 public:
  MotionSequence() = default;
  /// Throws InvalidArgument when T < 2 and DimensionMismatch on mixed bone counts.
  explicit MotionSequence(std::vector<Posture> frames);

  Eigen::Index length() const { return static_cast<Eigen::Index>(frames_.size()); }
  Eigen::Index bone_count() const { return frames_.empty() ? 0 : frames_.front().bone_count(); }
  double dt() const { return 1.0 / static_cast<double>(length() - 1); }

  const Posture& operator[](Eigen::Index t) const { return frames_[static_cast<std::size_t>(t)]; }
  const std::vector<Posture>& frames() const { return frames_; }

  bool operator==(const MotionSequence& other) const { return frames_ == other.frames_; }

 private:
  std::vector<Posture> frames_;
};

/// Relative bone vectors normalized to unit length; the root location is
/// dropped. Throws DegenerateBone when a bone is not longer than 1e-9.
Posture to_posture(const RawFrame& frame, const SkeletonHierarchy& hierarchy);

/// Per-frame to_posture. DegenerateBone messages carry the frame index.
MotionSequence ingest_sequence(std::span<const RawFrame> frames, const SkeletonHierarchy& hierarchy);

/// Index selection round(k (T-1) / (T'-1)). Throws BadTarget unless 2 <= T' <= T.
MotionSequence downsample(const MotionSequence& seq, Eigen::Index target);

/// Landmark positions for a posture, given per-bone lengths and a root
/// location; the inverse of to_posture up to translation and bone lengths.
RawFrame to_raw_frame(const Posture& posture, const SkeletonHierarchy& hierarchy,
                      const Eigen::VectorXd& bone_lengths, const Vec3& root_location);

/// Mean over time of posture distances, (1/T) sum_t d(a(t), b(t)).
double seq_dist(const MotionSequence& a, const MotionSequence& b);

}  // namespace posemu
