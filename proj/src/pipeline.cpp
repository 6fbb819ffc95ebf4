#include "posemu/pipeline.hpp"

#include <algorithm>

#include "posemu/error.hpp"
#include "posemu/random.hpp"

namespace posemu {

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::InsufficientData, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TwoLevelReport run_twolevel(std::span<const MotionSequence> training, const TwoLevelConfig& config) {
  require(config.train >= 2 && config.train < config.simulate, ErrorKind::ConfigError,
          "twolevel: need 2 <= train < simulate");
  require(config.repeats >= 1, ErrorKind::ConfigError, "twolevel: need at least one repeat");
  require(config.level_one.scheme.model == ModelKind::MVG || config.level_one.scheme.model == ModelKind::IG,
          ErrorKind::ConfigError, "twolevel: level-one model must be mvg or ig");

  FitOptions one = config.level_one;
  one.seed = derive_seed(config.seed, 0);
  const EmulatorBundle level_one = fit_bundle(training, one);

  TwoLevelReport report;
  report.level_one = level_one.scheme.str();
  report.rows.resize(config.level_two.size());
  for (std::size_t k = 0; k < config.level_two.size(); ++k) report.rows[k].scheme = config.level_two[k].str();
  std::vector<std::vector<double>> shifts(config.level_two.size());

  const std::size_t held_out = config.simulate - config.train;
  const std::size_t count = config.level_two_count == 0 ? held_out : config.level_two_count;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed_r = derive_seed(config.seed, r + 1);
    std::vector<MotionSequence> sims = simulate_sequence(level_one, config.simulate, derive_seed(seed_r, 0));
    const std::span<const MotionSequence> train(sims.data(), config.train);
    const std::span<const MotionSequence> test(sims.data() + config.train, held_out);
    std::vector<double> test_ll(held_out);
    parallel_for(held_out, [&](std::size_t i) { test_ll[i] = bundle_loglik(level_one, test[i]); });

    for (std::size_t k = 0; k < config.level_two.size(); ++k) {
      FitOptions two = config.level_one;
      two.scheme = config.level_two[k];
      two.reference.reset();
      two.seed = derive_seed(seed_r, 10 + k);
      const EmulatorBundle level_two = fit_bundle(train, two);
      const auto out = simulate_sequence(level_two, count, derive_seed(seed_r, 100 + k));
      const DiscoResult disco = disco_test(test, out, config.n_perm, derive_seed(seed_r, 200 + k));
      std::vector<double> sim_ll(out.size());
      parallel_for(out.size(), [&](std::size_t i) { sim_ll[i] = bundle_loglik(level_one, out[i]); });

      auto& row = report.rows[k];
      row.statistics.push_back(disco.statistic);
      row.p_values.push_back(disco.p_value);
      for (const auto& [x, y] : qq_data(test_ll, sim_ll)) {
        row.qq.emplace_back(x, y);
        shifts[k].push_back(y - x);
      }
    }
  }
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    auto& row = report.rows[k];
    row.median_p = median(row.p_values);
    const auto below = std::count_if(row.qq.begin(), row.qq.end(), [](const auto& q) { return q.second < q.first; });
    row.below_fraction = static_cast<double>(below) / static_cast<double>(row.qq.size());
    row.median_shift = median(shifts[k]);
  }
  return report;
}

}  // namespace posemu
