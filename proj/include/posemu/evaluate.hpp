#pragma once

// Evaluation of simulated sequences: energy-distance two-sample test,
// posture quantization, roughness, classical MDS and Q-Q data.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "posemu/geometry.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

/// Symmetric matrix of sequence distances d_A, zero diagonal.
Eigen::MatrixXd seq_distance_matrix(std::span<const MotionSequence> seqs);

/// Energy statistic from a pooled distance matrix. in_a[i] marks membership of
/// item i in the first group.
double disco_stat(const Eigen::MatrixXd& dist, const std::vector<char>& in_a);
double disco_stat(std::span<const MotionSequence> a, std::span<const MotionSequence> b);

struct DiscoResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int permutations = 0;  // number of relabelings compared (all splits when exhaustive)
  bool exhaustive = false;
  std::uint64_t seed = 0;
};

/// Permutation p = (1 + #{eps_perm >= eps_obs}) / (n_perm + 1). Permutation r
/// shuffles with the generator seeded by derive_seed(seed, r).
DiscoResult disco_test(const Eigen::MatrixXd& dist, std::size_t n_a, int n_perm, std::uint64_t seed);
DiscoResult disco_test(std::span<const MotionSequence> a, std::span<const MotionSequence> b, int n_perm,
                       std::uint64_t seed);

/// Enumerates every split of the pooled items into groups of the original
/// sizes; p = #{eps_split >= eps_obs} / #splits. Limited to 10^6 splits.
DiscoResult disco_exhaustive(const Eigen::MatrixXd& dist, std::size_t n_a);

struct ClusterModel {
  std::vector<Posture> modes;
  std::vector<std::size_t> medoids;  // indices into the clustered sample
  std::vector<int> labels;           // 1-based, per sample posture
  double objective = 0.0;            // sum of distances to the nearest mode
  std::vector<double> history;       // objective after BUILD and after each accepted swap

  int k() const { return static_cast<int>(modes.size()); }
};

/// Pairwise posture distances of a sample, single precision.
Eigen::MatrixXf posture_distance_matrix(std::span<const Posture> postures);

/// K-medoids under d_Y: greedy BUILD, then best-improvement swaps until no swap
/// lowers the objective. Ties go to the lowest index.
ClusterModel cluster_postures(std::span<const Posture> postures, int k, int max_swaps = 1000);
ClusterModel cluster_postures(std::span<const Posture> postures, const Eigen::MatrixXf& dist, int k,
                              int max_swaps = 1000);

/// Mean silhouette width of a labelling (1-based labels).
double silhouette(const Eigen::MatrixXf& dist, const std::vector<int>& labels);

/// K in [k_min, k_max] with the largest mean silhouette (lowest K on ties).
int select_k(std::span<const Posture> postures, const Eigen::MatrixXf& dist, int k_min = 2, int k_max = 15);

/// Uniform random sample of `count` frames drawn without replacement from all
/// frames of all sequences.
std::vector<Posture> sample_postures(std::span<const MotionSequence> seqs, std::size_t count, std::uint64_t seed);

using QuantizedSequence = std::vector<int>;

/// Nearest mode per frame, 1-based; lowest index on ties.
QuantizedSequence quantize(const MotionSequence& seq, const ClusterModel& model);

/// Fraction of time points with differing labels.
double variability(const QuantizedSequence& b, const QuantizedSequence& reference);

struct VariabilityStats {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, 0 for a single sequence
};
VariabilityStats variability_stats(std::span<const QuantizedSequence> set, const QuantizedSequence& reference);

/// Per-time Karcher mean of a set of equal-length sequences.
MotionSequence pointwise_mean(std::span<const MotionSequence> seqs);

/// d_Y(a(t), a(t+1)) for t = 0..T-2.
std::vector<double> roughness(const MotionSequence& seq);
double mean_roughness(const MotionSequence& seq);

/// Classical scaling of a distance matrix; negative eigenvalues are dropped.
Eigen::MatrixXd mds_coords(const Eigen::MatrixXd& dist, int dims = 2);
Eigen::MatrixXd mds_coords(std::span<const MotionSequence> seqs, int dims = 2);

/// Sample quantile with position h = p n - 0.5 (0-based), linear between order
/// statistics and clamped at the ends.
double sample_quantile(const std::vector<double>& sorted, double p);

/// Quantile pairs at plotting positions (k - 0.5) / N, N = the smaller size.
std::vector<std::pair<double, double>> qq_data(std::vector<double> test_logliks, std::vector<double> sim_logliks);

}  // namespace posemu
