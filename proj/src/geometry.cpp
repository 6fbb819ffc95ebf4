#include "posemu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "posemu/error.hpp"

namespace posemu {

namespace {

void require_same_bones(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": bone counts differ (" << a << " vs " << b << ")";
    fail(ErrorKind::DimensionMismatch, os.str());
  }
}

}  // namespace

Posture Posture::checked(Eigen::Matrix3Xd bones, double tol) {
  for (Eigen::Index i = 0; i < bones.cols(); ++i) {
    const double norm = bones.col(i).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > tol) {
      std::ostringstream os;
      os << "bone " << i << " is not a unit vector (norm " << norm << ")";
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }
  return Posture(std::move(bones));
}

double sphere_dist(const Vec3& y, const Vec3& z) {
  return std::atan2(y.cross(z).norm(), y.dot(z));
}

Vec3 sphere_log(const Vec3& y, const Vec3& z) {
  const double c = y.dot(z);
  if (c < -1.0 + kAntipodalCutoff) {
    std::ostringstream os;
    os << "log undefined, y.z = " << c;
    fail(ErrorKind::AntipodalPoints, os.str());
  }
  const Vec3 w = z - c * y;
  const double s = w.norm();
  const double theta = std::atan2(s, c);
  if (theta < kZeroAngle) return Vec3::Zero();
  return (theta / s) * w;
}

Vec3 sphere_exp(const Vec3& y, const Vec3& v) {
  const double normal = y.dot(v);
  if (std::abs(normal) > kTangentTolerance) {
    std::ostringstream os;
    os << "|y.v| = " << std::abs(normal);
    fail(ErrorKind::NotTangent, os.str());
  }
  const double len = v.norm();
  if (len < kZeroAngle) return y;
  Vec3 out = std::cos(len) * y + (std::sin(len) / len) * v;
  return out / out.norm();
}

Vec3 sphere_transport(const Vec3& y, const Vec3& z, const Vec3& u) {
  const double c = y.dot(z);
  if (c < -1.0 + kAntipodalCutoff) {
    std::ostringstream os;
    os << "transport undefined, y.z = " << c;
    fail(ErrorKind::AntipodalPoints, os.str());
  }
  const Vec3 s = y + z;
  return u - (2.0 * u.dot(z) / s.squaredNorm()) * s;
}

double posture_dist(const Posture& y, const Posture& z) {
  require_same_bones(y.bone_count(), z.bone_count(), "posture_dist");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.bone_count(); ++i) total += sphere_dist(y.bone(i), z.bone(i));
  return total;
}

TangentField posture_log(const Posture& y, const Posture& z) {
  require_same_bones(y.bone_count(), z.bone_count(), "posture_log");
  TangentField out(3, y.bone_count());
  for (Eigen::Index i = 0; i < y.bone_count(); ++i) out.col(i) = sphere_log(y.bone(i), z.bone(i));
  return out;
}

Posture posture_exp(const Posture& y, const TangentField& v) {
  require_same_bones(y.bone_count(), v.cols(), "posture_exp");
  Eigen::Matrix3Xd out(3, y.bone_count());
  for (Eigen::Index i = 0; i < y.bone_count(); ++i) out.col(i) = sphere_exp(y.bone(i), v.col(i));
  return Posture(std::move(out));
}

TangentField posture_transport(const Posture& from, const Posture& to, const TangentField& u) {
  require_same_bones(from.bone_count(), to.bone_count(), "posture_transport");
  require_same_bones(from.bone_count(), u.cols(), "posture_transport");
  TangentField out(3, u.cols());
  for (Eigen::Index i = 0; i < u.cols(); ++i)
    out.col(i) = sphere_transport(from.bone(i), to.bone(i), u.col(i));
  return out;
}

double tangent_norm(const TangentField& v) { return v.norm(); }

TangentBasis::TangentBasis(const Posture& base)
    : base_(base), first_(3, base.bone_count()), second_(3, base.bone_count()) {
  for (Eigen::Index i = 0; i < base.bone_count(); ++i) {
    const Vec3 b = base.bone(i);
    Eigen::Index axis = 0;
    for (Eigen::Index k = 1; k < 3; ++k)
      if (std::abs(b(k)) < std::abs(b(axis))) axis = k;
    Vec3 seed = Vec3::Unit(axis);
    Vec3 e1 = seed - seed.dot(b) * b;
    e1.normalize();
    first_.col(i) = e1;
    second_.col(i) = b.cross(e1);
  }
}

Eigen::VectorXd TangentBasis::coords(const TangentField& v) const {
  require_same_bones(base_.bone_count(), v.cols(), "tangent_coords");
  Eigen::VectorXd c(dim());
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    c(2 * i) = first_.col(i).dot(v.col(i));
    c(2 * i + 1) = second_.col(i).dot(v.col(i));
  }
  return c;
}

TangentField TangentBasis::tangent(const Eigen::Ref<const Eigen::VectorXd>& c) const {
  if (c.size() != dim()) {
    std::ostringstream os;
    os << "coordinate vector has length " << c.size() << ", expected " << dim();
    fail(ErrorKind::DimensionMismatch, os.str());
  }
  TangentField v(3, base_.bone_count());
  for (Eigen::Index i = 0; i < base_.bone_count(); ++i)
    v.col(i) = c(2 * i) * first_.col(i) + c(2 * i + 1) * second_.col(i);
  return v;
}

Eigen::VectorXd tangent_coords(const Posture& base, const TangentField& v) {
  return TangentBasis(base).coords(v);
}

TangentField coords_to_tangent(const Posture& base, const Eigen::VectorXd& c) {
  return TangentBasis(base).tangent(c);
}

Posture karcher_mean(std::span<const Posture> postures, const KarcherOptions& options) {
  require(!postures.empty(), ErrorKind::InsufficientData, "karcher_mean of an empty set");
  const Eigen::Index bones = postures.front().bone_count();
  Eigen::Matrix3Xd chordal = Eigen::Matrix3Xd::Zero(3, bones);
  for (const auto& p : postures) {
    require_same_bones(bones, p.bone_count(), "karcher_mean");
    chordal += p.bones();
  }
  if (std::all_of(postures.begin(), postures.end(), [&](const Posture& p) { return p == postures.front(); }))
    return postures.front();
  for (Eigen::Index i = 0; i < bones; ++i) {
    const double norm = chordal.col(i).norm();
    if (norm < 1e-12) {
      std::ostringstream os;
      os << "bone " << i << " has antipodal spread (chordal mean vanishes)";
      fail(ErrorKind::NoConvergence, os.str());
    }
    chordal.col(i) /= norm;
  }

  Posture mean(std::move(chordal));
  const double inv_count = 1.0 / static_cast<double>(postures.size());
  double residual = 0.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    TangentField step = TangentField::Zero(3, bones);
    for (const auto& p : postures) step += posture_log(mean, p);
    step *= inv_count;
    residual = tangent_norm(step);
    if (residual < options.tolerance) return mean;
    mean = posture_exp(mean, step);
  }
  std::ostringstream os;
  os << "karcher_mean did not converge in " << options.max_iterations
     << " iterations (residual " << residual << ")";
  fail(ErrorKind::NoConvergence, os.str());
}

}  // namespace posemu
