#pragma once

// Riemannian primitives on the unit sphere S^2 and on the posture manifold
// (S^2)^(n-1). All functions are pure.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace posemu {

using Vec3 = Eigen::Vector3d;

/// Per-bone tangent vectors, one column per bone. The base posture is carried
/// by the caller.
using TangentField = Eigen::Matrix3Xd;

inline constexpr double kAntipodalCutoff = 1e-9;  // y.z < -1 + cutoff
inline constexpr double kZeroAngle = 1e-12;
inline constexpr double kTangentTolerance = 1e-8;

/// A point of (S^2)^(n-1): one unit bone direction per column.
class Posture {
 public:
  Posture() = default;
  explicit Posture(Eigen::Matrix3Xd bones) : bones_(std::move(bones)) {}

  /// Validates unit-norm bones (|1 - |y|| <= tol) and finiteness.
  static Posture checked(Eigen::Matrix3Xd bones, double tol = 1e-10);

  Eigen::Index bone_count() const { return bones_.cols(); }
  Vec3 bone(Eigen::Index i) const { return bones_.col(i); }
  const Eigen::Matrix3Xd& bones() const { return bones_; }

  bool operator==(const Posture& other) const {
    return bones_.cols() == other.bones_.cols() && bones_ == other.bones_;
  }

 private:
  Eigen::Matrix3Xd bones_;
};

// --- S^2 -------------------------------------------------------------------

/// Geodesic distance, arccos(y.z) evaluated as atan2(|y x z|, y.z) so that
/// nearby points keep full relative precision.
double sphere_dist(const Vec3& y, const Vec3& z);

/// Inverse exponential map. Throws AntipodalPoints when y.z < -1 + 1e-9.
Vec3 sphere_log(const Vec3& y, const Vec3& z);

/// Exponential map. Throws NotTangent when |y.v| > 1e-8.
Vec3 sphere_exp(const Vec3& y, const Vec3& v);

/// Parallel transport of u in T_y along the geodesic to z:
/// u - 2(u.z)/|y+z|^2 (y+z). Throws AntipodalPoints.
Vec3 sphere_transport(const Vec3& y, const Vec3& z, const Vec3& u);

// --- product manifold --------------------------------------------------------

/// Sum of per-bone geodesic distances.
double posture_dist(const Posture& y, const Posture& z);
TangentField posture_log(const Posture& y, const Posture& z);
Posture posture_exp(const Posture& y, const TangentField& v);
TangentField posture_transport(const Posture& from, const Posture& to, const TangentField& u);

/// Euclidean norm of a tangent field (sqrt of sum of squared bone norms).
double tangent_norm(const TangentField& v);

/// Deterministic orthonormal 2-frame per bone. The first frame vector is the
/// global axis least aligned with the bone (lowest index on ties) with its
/// bone component removed; the second is bone x first.
class TangentBasis {
 public:
  explicit TangentBasis(const Posture& base);

  const Posture& base() const { return base_; }
  Eigen::Index dim() const { return 2 * base_.bone_count(); }

  /// Coordinates (c_{2i}, c_{2i+1}) of bone i.
  Eigen::VectorXd coords(const TangentField& v) const;
  TangentField tangent(const Eigen::Ref<const Eigen::VectorXd>& c) const;

 private:
  Posture base_;
  Eigen::Matrix3Xd first_;
  Eigen::Matrix3Xd second_;
};

Eigen::VectorXd tangent_coords(const Posture& base, const TangentField& v);
TangentField coords_to_tangent(const Posture& base, const Eigen::VectorXd& c);

struct KarcherOptions {
  double tolerance = 1e-9;
  int max_iterations = 200;
};

/// Intrinsic mean under the product (per-bone L2) metric: unit-step gradient
/// descent from the per-bone normalized chordal mean until the mean log has
/// norm below `tolerance`. Throws NoConvergence with the final residual.
Posture karcher_mean(std::span<const Posture> postures, const KarcherOptions& options = {});

}  // namespace posemu
