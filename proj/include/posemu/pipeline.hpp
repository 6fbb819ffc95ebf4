#pragma once

// Two-level simulation protocol: a level-one emulator fitted on training data
// stands in for the truth, level-two emulators are fitted on its simulations
// and compared with held-out level-one simulations.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "posemu/evaluate.hpp"
#include "posemu/models.hpp"

namespace posemu {

struct TwoLevelConfig {
  FitOptions level_one;                 // scheme, dims and start policy of the level-one fit
  std::vector<Scheme> level_two;        // each fitted with level_one's dims and policy
  std::size_t simulate = 1000;          // level-one simulations per repeat
  std::size_t train = 800;              // of which used to fit level two; the rest are held out
  std::size_t level_two_count = 0;      // level-two simulations per repeat; 0 = held-out size
  int n_perm = 999;
  std::size_t repeats = 10;
  std::uint64_t seed = 1;
};

struct TwoLevelRow {
  std::string scheme;
  std::vector<double> statistics;       // DISCO statistic per repeat
  std::vector<double> p_values;         // per repeat
  double median_p = 0.0;
  std::vector<std::pair<double, double>> qq;  // (held-out, level-two) loglik quantiles, all repeats
  double below_fraction = 0.0;          // share of Q-Q pairs under the identity line
  double median_shift = 0.0;            // median of (level-two - held-out) quantile differences
};

struct TwoLevelReport {
  std::string level_one;
  std::vector<TwoLevelRow> rows;
};

/// Repeat r derives its seeds from derive_seed(seed, r + 1); the level-one fit
/// itself uses derive_seed(seed, 0).
TwoLevelReport run_twolevel(std::span<const MotionSequence> training, const TwoLevelConfig& config);

double median(std::vector<double> values);

}  // namespace posemu
