#pragma once

// Transported square-root velocity fields and dynamic-programming time warping.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "posemu/geometry.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

/// Square-root velocity field with every value expressed in tangent
/// coordinates at `reference`. Column t is the value on [t dt, (t+1) dt].
struct TsrvfField {
  Posture reference;
  Eigen::MatrixXd values;  // 2(n-1) x (T-1)
  double dt = 0.0;
};

/// Boundary-fixed, strictly increasing samples of a warp on the uniform grid
/// t_k = k / (T-1).
class WarpFunction {
 public:
  WarpFunction() = default;
  /// Throws InvalidArgument unless samples[0] == 0, samples[T-1] == 1 and the
  /// samples strictly increase.
  explicit WarpFunction(Eigen::VectorXd samples);
  static WarpFunction identity(Eigen::Index length);

  Eigen::Index length() const { return samples_.size(); }
  const Eigen::VectorXd& samples() const { return samples_; }
  /// Piecewise-linear evaluation on [0, 1].
  double operator()(double t) const;

 private:
  Eigen::VectorXd samples_;
};

/// (outer o inner)(t_k) = outer(inner(t_k)).
WarpFunction compose(const WarpFunction& outer, const WarpFunction& inner);

/// Discrete derivative log_{a(t)}(a(t+1)) / dt for t = 0..T-2.
std::vector<TangentField> shooting_vectors(const MotionSequence& seq);

/// Shooting vectors transported in one hop to T_{Y_R} and divided by the
/// square root of their norm; zero where the sequence is stationary.
TsrvfField tsrvf(const MotionSequence& seq, const Posture& reference);

/// a o gamma, sampled on the original grid with geodesic interpolation between
/// neighbouring frames.
MotionSequence warp_sequence(const MotionSequence& seq, const WarpFunction& warp);

/// Warp action on a discrete field: h(gamma(t)) sqrt(gamma'(t)) at cell
/// midpoints, with h linearly interpolated in the shared tangent space.
TsrvfField warp_field(const TsrvfField& field, const WarpFunction& warp);

/// Riemann sum of the integral of |h1(t) - h2(t)| over [0, 1].
double tsrvf_dist(const TsrvfField& a, const TsrvfField& b);

struct WarpResult {
  WarpFunction warp;
  double cost = 0.0;
};

/// Predecessor stencil of the alignment lattice (slopes within [1/3, 3]).
inline constexpr int kWarpStencil[7][2] = {{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 3}, {3, 2}};

/// Minimizes the integral of |h2(t) - sqrt(gamma'(t)) h1(gamma(t))| over
/// piecewise-linear warps whose knots lie on the (T-1) x (T-1) lattice and
/// whose steps come from kWarpStencil. Fields are piecewise constant per cell,
/// so each segment cost is integrated exactly. Returns gamma and the cost.
WarpResult optimal_warp(const TsrvfField& moving, const TsrvfField& target);

struct AlignmentResult {
  std::vector<MotionSequence> aligned;
  std::vector<WarpFunction> warps;
  std::vector<double> costs;
};

/// Warps every sequence onto seqs[ref_index] through TSRVFs at `reference`.
/// The reference sequence is returned unchanged with the identity warp.
AlignmentResult align_all(std::span<const MotionSequence> seqs, std::size_t ref_index,
                          const Posture& reference);

/// Karcher mean of the first frames, the default TSRVF reference point.
Posture default_alignment_reference(std::span<const MotionSequence> seqs);

}  // namespace posemu
