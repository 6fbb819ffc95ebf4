#pragma once

// Generative models on sequential-PCA coefficients (MVG, IG), on spatial score
// curves (VAR), and directly on the manifold (PWI), plus the fitted pipeline
// bundle that turns random draws back into motion sequences.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "posemu/dimred.hpp"
#include "posemu/flatten.hpp"
#include "posemu/random.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

/// Zero-mean Gaussian on vec(A) (column-major).
struct MVGModel {
  Eigen::Index rows = 0;  // d1
  Eigen::Index cols = 0;  // d2
  Eigen::MatrixXd covariance;
  double jitter = 0.0;  // 1e-10 tr / d

  Eigen::Index dim() const { return rows * cols; }
};

struct IGModel {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::VectorXd variances;
  double jitter = 0.0;

  Eigen::Index dim() const { return rows * cols; }
};

/// Sample covariance (1/(M-1)) sum vec(A) vec(A)^T about zero.
MVGModel fit_mvg(std::span<const CoeffMatrix> coeffs);
IGModel fit_ig(std::span<const CoeffMatrix> coeffs);

/// Draws A = S z with S the symmetric square root of Sigma + jitter I.
std::vector<CoeffMatrix> sample_coeffs(const MVGModel& model, std::size_t count, std::uint64_t seed);
std::vector<CoeffMatrix> sample_coeffs(const IGModel& model, std::size_t count, std::uint64_t seed);

/// Gaussian log-density of vec(A). Uses Sigma itself when it is positive
/// definite, Sigma + jitter I otherwise; throws SingularCovariance when both fail.
double loglik(const CoeffMatrix& coeffs, const MVGModel& model);
double loglik(const CoeffMatrix& coeffs, const IGModel& model);

struct VAROptions {
  int order = 4;
  bool require_full_rank = false;  // throw RankDeficient instead of a minimum-norm solution
};

/// H(t) = c + sum_k Phi_k H(t-k) + e(t), e ~ N(0, noise_cov).
struct VARModel {
  int order = 0;
  std::vector<Eigen::MatrixXd> phi;  // Phi_1 .. Phi_p, each d x d
  Eigen::VectorXd intercept;
  Eigen::MatrixXd noise_cov;
  Eigen::MatrixXd initial;  // d x p, first lags of the fitted series
  Eigen::Index rank = 0;    // rank of the regression design

  Eigen::Index dim() const { return intercept.size(); }
};

/// Least-squares fit pooled over all series (one series is the usual case).
/// The noise covariance divides residual scatter by N - (d p + 1).
VARModel fit_var(std::span<const Eigen::MatrixXd> series, const VAROptions& options = {});

/// Runs the recursion for `length` columns, the first p taken from `init`.
Eigen::MatrixXd simulate_var(const VARModel& model, Eigen::Index length, const Eigen::MatrixXd& init, Rng& rng);

/// Per-time Karcher mean and tangent covariance.
struct PWIModel {
  std::vector<Posture> mean;
  std::vector<Eigen::MatrixXd> covariance;  // 2(n-1) square, in TangentBasis(mean[t]) coordinates
  bool diagonal = false;

  Eigen::Index length() const { return static_cast<Eigen::Index>(mean.size()); }
};

PWIModel fit_pwi(std::span<const MotionSequence> seqs, bool diagonal = false);
/// alpha*(t) = exp_{mu(t)}(V*(t)), V*(t) ~ N(0, Sigma(t)) independently per t.
std::vector<MotionSequence> sample_pwi(const PWIModel& model, std::size_t count, std::uint64_t seed);

enum class DimRedKind { SeqPCA, MPCA, None };
enum class ModelKind { MVG, IG, VAR, PWI };

std::string_view to_string(DimRedKind kind);
std::string_view to_string(ModelKind kind);

/// "<repr>/<dimred>/<model>", case-insensitive. "pwi" alone is accepted.
struct Scheme {
  FlatKind repr = FlatKind::ISTVF;
  DimRedKind dimred = DimRedKind::SeqPCA;
  ModelKind model = ModelKind::MVG;

  static Scheme parse(std::string_view text);
  std::string str() const;
  bool operator==(const Scheme&) const = default;
};

enum class StartPolicy { TrainingMean, Fixed, Sampled };
std::string_view to_string(StartPolicy policy);
StartPolicy parse_start_policy(std::string_view text);

struct FitOptions {
  Scheme scheme;
  DimSelection spatial = DimSelection::variance(0.90);
  DimSelection temporal = DimSelection::variance(0.95);
  VAROptions var;
  bool pool_var = false;  // fit VAR on all sequences instead of one chosen by seed
  bool pwi_diagonal = false;
  StartPolicy start_policy = StartPolicy::TrainingMean;
  std::optional<Posture> reference;    // Y_R; pooled Karcher mean when absent
  std::optional<Posture> fixed_start;  // for StartPolicy::Fixed
  std::uint64_t seed = 0;
};

using ModelVariant = std::variant<std::monostate, MVGModel, IGModel, VARModel, PWIModel>;

struct EmulatorBundle {
  Scheme scheme;
  Eigen::Index length = 0;  // T
  Eigen::Index bones = 0;   // n - 1
  Posture reference;
  StartPolicy start_policy = StartPolicy::TrainingMean;
  Posture start;                   // training mean or fixed start
  std::vector<Posture> start_pool; // training starts, for StartPolicy::Sampled
  std::optional<SpatialPCA> spatial;
  std::optional<FPCABasis> fpca;
  std::optional<MPCAModel> mpca;
  ModelVariant model;
  std::map<std::string, std::string> provenance;
};

/// Fitted dimension reduction of a set of flat fields.
struct Reduction {
  DimRedKind kind = DimRedKind::SeqPCA;
  std::optional<SpatialPCA> spatial;
  std::optional<FPCABasis> fpca;  // absent for VAR schemes
  std::optional<MPCAModel> mpca;
};

Reduction fit_reduction(std::span<const FlatField> fields, const Scheme& scheme, const DimSelection& spatial,
                        const DimSelection& temporal);

/// Coefficients (or VAR score curves) of a field under a reduction.
CoeffMatrix reduce_field(const Eigen::MatrixXd& values, const Reduction& reduction);

/// Fits the scheme's coefficient model on fields that share one reference.
EmulatorBundle fit_bundle_from_fields(std::span<const FlatField> fields, const Reduction& reduction,
                                      const FitOptions& options);

/// Flattens, reduces and fits in one go. PWI schemes skip the first two steps.
EmulatorBundle fit_bundle(std::span<const MotionSequence> aligned, const FitOptions& options);

/// Sequence i uses the generator seeded with derive_seed(seed, i).
std::vector<MotionSequence> simulate_sequence(const EmulatorBundle& bundle, std::size_t count, std::uint64_t seed);

/// Flat field of `seq` under the bundle's representation and reference.
FlatField bundle_encode(const EmulatorBundle& bundle, const MotionSequence& seq);
/// Coefficient matrix of `seq` (sequential PCA or MPCA core). Throws KindMismatch
/// for bundles without a coefficient model.
CoeffMatrix bundle_coefficients(const EmulatorBundle& bundle, const MotionSequence& seq);
/// Log-likelihood of `seq` under an MVG or IG bundle.
double bundle_loglik(const EmulatorBundle& bundle, const MotionSequence& seq);

/// Inverse of the deterministic tail: coefficients -> flat field -> sequence.
MotionSequence decode_coefficients(const EmulatorBundle& bundle, const CoeffMatrix& coeffs, const Posture& start);

}  // namespace posemu
