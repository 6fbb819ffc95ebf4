#include "posemu/skeleton.hpp"

#include <cmath>
#include <sstream>

#include "posemu/error.hpp"

namespace posemu {

SkeletonHierarchy SkeletonHierarchy::from_parents(std::vector<int> parent) {
  const int n = static_cast<int>(parent.size());
  require(n >= 2, ErrorKind::InvalidArgument, "hierarchy needs at least 2 landmarks");
  int root = -1;
  for (int i = 0; i < n; ++i) {
    if (parent[i] == -1) {
      require(root == -1, ErrorKind::InvalidArgument, "hierarchy has more than one root");
      root = i;
    } else if (parent[i] < 0 || parent[i] >= n || parent[i] == i) {
      std::ostringstream os;
      os << "landmark " << i << " has invalid parent " << parent[i];
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }
  require(root != -1, ErrorKind::InvalidArgument, "hierarchy has no root");
  // Every landmark must reach the root within n steps.
  for (int i = 0; i < n; ++i) {
    int node = i;
    int steps = 0;
    while (node != root) {
      node = parent[node];
      if (++steps > n) {
        std::ostringstream os;
        os << "hierarchy has a cycle through landmark " << i;
        fail(ErrorKind::InvalidArgument, os.str());
      }
    }
  }
  SkeletonHierarchy h;
  h.parent_ = std::move(parent);
  h.root_ = root;
  for (int i = 0; i < n; ++i)
    if (i != root) h.bone_landmarks_.push_back(i);
  return h;
}

SkeletonHierarchy SkeletonHierarchy::humanoid21() {
  // 0 spine, 1 chest, 2 neck, 3 head, 4-7 left arm, 8-11 right arm,
  // 12-15 left leg, 16-19 right leg, 20 pelvis (root).
  return from_parents({20, 0, 1, 2, 1, 4, 5, 6, 1, 8, 9, 10, 20, 12, 13, 14, 20, 16, 17, 18, -1});
}

SkeletonHierarchy SkeletonHierarchy::chain(int landmarks) {
  require(landmarks >= 2, ErrorKind::InvalidArgument, "chain needs at least 2 landmarks");
  std::vector<int> parent(static_cast<std::size_t>(landmarks));
  for (int i = 0; i + 1 < landmarks; ++i) parent[static_cast<std::size_t>(i)] = i + 1;
  parent.back() = -1;
  return from_parents(std::move(parent));
}

SkeletonHierarchy SkeletonHierarchy::default_for(int landmarks) {
  return landmarks == 21 ? humanoid21() : chain(landmarks);
}

MotionSequence::MotionSequence(std::vector<Posture> frames) : frames_(std::move(frames)) {
  require(frames_.size() >= 2, ErrorKind::InvalidArgument, "a motion sequence needs T >= 2 frames");
  const Eigen::Index bones = frames_.front().bone_count();
  for (const auto& f : frames_)
    require(f.bone_count() == bones, ErrorKind::DimensionMismatch,
            "all postures of a sequence must share the bone count");
}

Posture to_posture(const RawFrame& frame, const SkeletonHierarchy& hierarchy) {
  if (frame.cols() != hierarchy.landmarks()) {
    std::ostringstream os;
    os << "frame has " << frame.cols() << " landmarks, hierarchy has " << hierarchy.landmarks();
    fail(ErrorKind::DimensionMismatch, os.str());
  }
  const auto& owners = hierarchy.bone_landmarks();
  Eigen::Matrix3Xd bones(3, static_cast<Eigen::Index>(owners.size()));
  for (std::size_t k = 0; k < owners.size(); ++k) {
    const int i = owners[k];
    const Vec3 rel = frame.col(i) - frame.col(hierarchy.parents()[static_cast<std::size_t>(i)]);
    const double len = rel.norm();
    if (!std::isfinite(len) || len <= kBoneEpsilon) {
      std::ostringstream os;
      os << "DegenerateBone(" << k << "): landmark " << i << " bone length " << len;
      fail(ErrorKind::DegenerateBone, os.str());
    }
    bones.col(static_cast<Eigen::Index>(k)) = rel / len;
  }
  return Posture(std::move(bones));
}

MotionSequence ingest_sequence(std::span<const RawFrame> frames, const SkeletonHierarchy& hierarchy) {
  require(frames.size() >= 2, ErrorKind::InvalidArgument, "ingest needs at least 2 frames");
  std::vector<Posture> postures;
  postures.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    try {
      postures.push_back(to_posture(frames[t], hierarchy));
    } catch (const Error& e) {
      std::ostringstream os;
      os << "frame " << t << ": " << e.detail();
      fail(e.kind(), os.str());
    }
  }
  return MotionSequence(std::move(postures));
}

MotionSequence downsample(const MotionSequence& seq, Eigen::Index target) {
  const Eigen::Index T = seq.length();
  if (target < 2 || target > T) {
    std::ostringstream os;
    os << "cannot downsample T=" << T << " to " << target;
    fail(ErrorKind::BadTarget, os.str());
  }
  std::vector<Posture> out;
  out.reserve(static_cast<std::size_t>(target));
  for (Eigen::Index k = 0; k < target; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(T - 1) / static_cast<double>(target - 1);
    out.push_back(seq[static_cast<Eigen::Index>(std::lround(pos))]);
  }
  return MotionSequence(std::move(out));
}

RawFrame to_raw_frame(const Posture& posture, const SkeletonHierarchy& hierarchy,
                      const Eigen::VectorXd& bone_lengths, const Vec3& root_location) {
  const auto& owners = hierarchy.bone_landmarks();
  const auto bones = static_cast<Eigen::Index>(owners.size());
  require(posture.bone_count() == bones && bone_lengths.size() == bones,
          ErrorKind::DimensionMismatch, "to_raw_frame: bone count mismatch");
  const int n = hierarchy.landmarks();
  std::vector<int> bone_of(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < owners.size(); ++k) bone_of[static_cast<std::size_t>(owners[k])] = static_cast<int>(k);

  RawFrame frame(3, n);
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  frame.col(hierarchy.root()) = root_location;
  placed[static_cast<std::size_t>(hierarchy.root())] = true;
  // Place landmarks once their parent is placed; the tree guarantees progress.
  for (int remaining = n - 1; remaining > 0;) {
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (placed[ui]) continue;
      const int p = hierarchy.parents()[ui];
      if (!placed[static_cast<std::size_t>(p)]) continue;
      const Eigen::Index k = bone_of[ui];
      frame.col(i) = frame.col(p) + bone_lengths(k) * posture.bone(k);
      placed[ui] = true;
      --remaining;
    }
  }
  return frame;
}

double seq_dist(const MotionSequence& a, const MotionSequence& b) {
  if (a.length() != b.length() || a.bone_count() != b.bone_count()) {
    std::ostringstream os;
    os << "sequence shapes differ (" << a.length() << "x" << a.bone_count() << " vs "
       << b.length() << "x" << b.bone_count() << ")";
    fail(ErrorKind::DimensionMismatch, os.str());
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < a.length(); ++t) total += posture_dist(a[t], b[t]);
  return total / static_cast<double>(a.length());
}

}  // namespace posemu
