#pragma once

// Spatial PCA over pooled tangent columns, per-dimension functional PCA of
// the spatial scores, and the joint two-mode MPCA alternative.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "posemu/flatten.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

/// d1 x d2 matrix of FPCA scores a_ij (or an MPCA core).
using CoeffMatrix = Eigen::MatrixXd;

/// Either a fixed dimension or the smallest dimension reaching `threshold` of
/// the total variance.
struct DimSelection {
  std::optional<Eigen::Index> fixed;
  double threshold = 0.9;

  static DimSelection fixed_dims(Eigen::Index d) { return {d, 1.0}; }
  static DimSelection variance(double fraction) { return {std::nullopt, fraction}; }
};

/// Smallest d whose cumulative share of the spectrum reaches `threshold`
/// (0 for an all-zero spectrum). Threshold must lie in (0, 1].
Eigen::Index select_dims(const Eigen::VectorXd& spectrum, double threshold);

/// Number of eigenvalues above 1e-12 of the largest.
Eigen::Index spectrum_rank(const Eigen::VectorXd& spectrum);

struct SpatialPCA {
  Eigen::VectorXd mean;         // 2(n-1)
  Eigen::MatrixXd basis;        // 2(n-1) x d1, orthonormal columns
  Eigen::VectorXd eigenvalues;  // full spectrum, descending
  double threshold = std::numeric_limits<double>::quiet_NaN();  // NaN when d1 was fixed

  Eigen::Index dims() const { return basis.cols(); }
};

/// Pools all columns of all fields. d1 is capped at the data rank.
SpatialPCA spatial_pca_fit(std::span<const Eigen::MatrixXd> fields, const DimSelection& selection);
SpatialPCA spatial_pca_fit(std::span<const FlatField> fields, const DimSelection& selection);

/// H(t) = U^T (G(t) - m).
Eigen::MatrixXd spatial_project(const Eigen::MatrixXd& field, const SpatialPCA& pca);
/// G(t) = m + U H(t).
Eigen::MatrixXd spatial_reconstruct(const Eigen::MatrixXd& scores, const SpatialPCA& pca);

struct FpcaComponent {
  Eigen::VectorXd mean;         // L
  Eigen::MatrixXd basis;        // L x d2, orthonormal under <f, g> = dt f.g
  Eigen::VectorXd eigenvalues;  // full spectrum (length L), descending
};

struct FPCABasis {
  double dt = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::vector<FpcaComponent> dims;  // one per spatial dimension

  Eigen::Index d1() const { return static_cast<Eigen::Index>(dims.size()); }
  Eigen::Index d2() const { return dims.empty() ? 0 : dims.front().basis.cols(); }
  Eigen::Index length() const { return dims.empty() ? 0 : dims.front().mean.size(); }
};

/// Per spatial dimension: sample mean of the score rows and the eigenvectors of
/// (1/(M-1)) sum (H - mu)(H - mu)^T, computed through an SVD of the centred
/// data. With a threshold, d2 is the largest per-dimension selection.
FPCABasis fpca_fit(std::span<const Eigen::MatrixXd> scores, double dt, const DimSelection& selection);

/// a_ij = <H_i - mu_i, beta_ij> under the dt-scaled inner product.
CoeffMatrix fpca_project(const Eigen::MatrixXd& scores, const FPCABasis& basis);
/// H_i = mu_i + sum_j a_ij beta_ij.
Eigen::MatrixXd fpca_reconstruct(const CoeffMatrix& coeffs, const FPCABasis& basis);

struct MpcaOptions {
  double tolerance = 1e-8;  // on captured variance gain, relative to total scatter
  int max_iterations = 50;
};

struct MPCAModel {
  Eigen::MatrixXd mean;  // I1 x I2
  Eigen::MatrixXd u1;    // I1 x d1
  Eigen::MatrixXd u2;    // I2 x d2
  std::vector<double> captured;  // captured variance after each alternating pass
  double total_scatter = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Alternating maximization of sum_m |U1^T (X_m - mean) U2|^2, starting from
/// the full-mode-2 projection. Returns the last iterate with `converged`
/// cleared when the iteration cap is hit.
MPCAModel mpca_fit(std::span<const Eigen::MatrixXd> tensors, Eigen::Index d1, Eigen::Index d2,
                   const MpcaOptions& options = {});
CoeffMatrix mpca_project(const Eigen::MatrixXd& tensor, const MPCAModel& model);
Eigen::MatrixXd mpca_reconstruct(const CoeffMatrix& core, const MPCAModel& model);

/// Sequence reconstruction error: mean over time of posture distances.
double seq_recon_error(const MotionSequence& original, const MotionSequence& reconstructed);

/// Flips each column so that its largest-magnitude entry is positive.
void canonicalize_signs(Eigen::MatrixXd& vectors);

}  // namespace posemu
