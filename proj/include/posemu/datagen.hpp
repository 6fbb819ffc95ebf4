#pragma once

// Synthetic motion classes: a smooth template curve on the posture manifold,
// randomly time-warped and perturbed per sample.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "posemu/alignment.hpp"
#include "posemu/random.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

struct SynthConfig {
  int landmarks = 21;
  Eigen::Index frames = 301;
  std::size_t sequences = 60;
  double bandwidth = 0.05;      // Gaussian kernel sd as a fraction of T
  double amplitude = 0.6;       // radians, max per-bone template excursion
  double warp_strength = 0.3;   // 0 = identity warps
  double noise_scale = 0.05;    // radians, per-coordinate sd of the smooth perturbation
  std::uint64_t seed = 1;

  /// Throws ConfigError unless n >= 3, T >= 10, amplitude < pi/2 and
  /// warp_strength lies in [0, 1).
  void validate() const;
};

/// White noise of length `length` smoothed by a Gaussian kernel of sd `sigma`
/// samples, rescaled to unit marginal variance. One column per channel.
Eigen::MatrixXd smooth_noise(Rng& rng, Eigen::Index length, Eigen::Index channels, double sigma);

/// Strictly increasing warp (1 - s) id + s W, W the normalized integral of exp(noise).
WarpFunction random_warp(Rng& rng, Eigen::Index length, double strength, double sigma);

/// Template of a class: exp_{base}(c(t)) with smooth coordinate curves c.
MotionSequence class_template(const SynthConfig& cfg);

std::vector<MotionSequence> gen_class(const SynthConfig& cfg);

struct LabeledDataset {
  std::vector<MotionSequence> sequences;
  std::vector<int> labels;  // class index, 0-based
};

struct MixtureConfig {
  std::vector<SynthConfig> classes;
  std::optional<Eigen::Index> downsample_to;

  /// Five classes of 60 sequences, n = 21, generated at T = 1000 and
  /// downsampled to 301. Class c uses seed derive_seed(seed, c).
  static MixtureConfig defaults(std::uint64_t seed);
};

LabeledDataset gen_mixture(const MixtureConfig& cfg);

}  // namespace posemu
