#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace posemu {

using Rng = std::mt19937_64;

// Seed expansion: stream k of root seed r is splitmix64(r ^ splitmix64(k + 1)).
// Every random draw in the library takes an explicit seed derived this way, so a
// whole run is reproducible from one root seed.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index size);

// Symmetric square root of a PSD matrix via eigen-factorization; negative
// eigenvalues from rounding are clipped to zero.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov);

// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Work items
// must write to disjoint outputs; results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace posemu
