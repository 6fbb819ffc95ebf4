#include "posemu/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "posemu/error.hpp"
#include "posemu/random.hpp"

namespace posemu {

Eigen::MatrixXd seq_distance_matrix(std::span<const MotionSequence> seqs) {
  const auto n = static_cast<Eigen::Index>(seqs.size());
  for (const auto& s : seqs)
    require(s.length() == seqs.front().length() && s.bone_count() == seqs.front().bone_count(),
            ErrorKind::DimensionMismatch, "seq_distance_matrix: sequences differ in shape");
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  parallel_for(seqs.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < seqs.size(); ++j)
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = seq_dist(seqs[i], seqs[j]);
  });
  dist.triangularView<Eigen::StrictlyLower>() = dist.transpose();
  return dist;
}

double disco_stat(const Eigen::MatrixXd& dist, const std::vector<char>& in_a) {
  const auto n = static_cast<Eigen::Index>(in_a.size());
  require(dist.rows() == n && dist.cols() == n, ErrorKind::DimensionMismatch, "disco_stat: matrix size differs");
  double cross = 0.0;
  double within_a = 0.0;
  double within_b = 0.0;
  double na = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (in_a[static_cast<std::size_t>(i)]) na += 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      const bool ai = in_a[static_cast<std::size_t>(i)] != 0;
      const bool aj = in_a[static_cast<std::size_t>(j)] != 0;
      if (ai && aj) {
        within_a += d;
      } else if (!ai && !aj) {
        within_b += d;
      } else {
        cross += d;
      }
    }
  }
  const double nb = static_cast<double>(n) - na;
  require(na > 0 && nb > 0, ErrorKind::InsufficientData, "disco_stat: both groups must be nonempty");
  return 2.0 * cross / (na * nb) - 2.0 * within_a / (na * na) - 2.0 * within_b / (nb * nb);
}

namespace {

void require_groups(std::span<const MotionSequence> a, std::span<const MotionSequence> b) {
  require(!a.empty() && !b.empty(), ErrorKind::InsufficientData, "disco: both groups must be nonempty");
}

std::vector<MotionSequence> pooled(std::span<const MotionSequence> a, std::span<const MotionSequence> b) {
  std::vector<MotionSequence> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  return all;
}

std::vector<char> first_group(std::size_t n, std::size_t n_a) {
  std::vector<char> in_a(n, 0);
  std::fill(in_a.begin(), in_a.begin() + static_cast<std::ptrdiff_t>(n_a), 1);
  return in_a;
}

bool at_least(double value, double observed) { return value >= observed - 1e-12 * (1.0 + std::abs(observed)); }

}  // namespace

double disco_stat(std::span<const MotionSequence> a, std::span<const MotionSequence> b) {
  require_groups(a, b);
  const auto all = pooled(a, b);
  return disco_stat(seq_distance_matrix(all), first_group(all.size(), a.size()));
}

DiscoResult disco_test(const Eigen::MatrixXd& dist, std::size_t n_a, int n_perm, std::uint64_t seed) {
  require(n_perm >= 1, ErrorKind::InvalidArgument, "disco_test: n_perm must be at least 1");
  const auto n = static_cast<std::size_t>(dist.rows());
  require(n_a >= 1 && n_a < n, ErrorKind::InsufficientData, "disco_test: both groups must be nonempty");
  DiscoResult result;
  result.statistic = disco_stat(dist, first_group(n, n_a));
  result.permutations = n_perm;
  result.seed = seed;
  std::vector<char> exceed(static_cast<std::size_t>(n_perm), 0);
  parallel_for(exceed.size(), [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    std::vector<char> labels = first_group(n, n_a);
    std::shuffle(labels.begin(), labels.end(), rng);
    exceed[r] = at_least(disco_stat(dist, labels), result.statistic) ? 1 : 0;
  });
  const auto count = std::count(exceed.begin(), exceed.end(), 1);
  result.p_value = (1.0 + static_cast<double>(count)) / (static_cast<double>(n_perm) + 1.0);
  return result;
}

DiscoResult disco_test(std::span<const MotionSequence> a, std::span<const MotionSequence> b, int n_perm,
                       std::uint64_t seed) {
  require_groups(a, b);
  const auto all = pooled(a, b);
  return disco_test(seq_distance_matrix(all), a.size(), n_perm, seed);
}

DiscoResult disco_exhaustive(const Eigen::MatrixXd& dist, std::size_t n_a) {
  const auto n = static_cast<std::size_t>(dist.rows());
  require(n_a >= 1 && n_a < n, ErrorKind::InsufficientData, "disco_exhaustive: both groups must be nonempty");
  double splits = 1.0;
  for (std::size_t k = 1; k <= n_a; ++k) splits = splits * static_cast<double>(n - n_a + k) / static_cast<double>(k);
  require(splits <= 1e6, ErrorKind::InvalidArgument, "disco_exhaustive: too many splits to enumerate");

  DiscoResult result;
  result.exhaustive = true;
  std::vector<char> labels = first_group(n, n_a);
  result.statistic = disco_stat(dist, labels);
  long total = 0;
  long count = 0;
  do {
    ++total;
    if (at_least(disco_stat(dist, labels), result.statistic)) ++count;
  } while (std::prev_permutation(labels.begin(), labels.end()));
  result.permutations = static_cast<int>(total);
  result.p_value = static_cast<double>(count) / static_cast<double>(total);
  return result;
}

Eigen::MatrixXf posture_distance_matrix(std::span<const Posture> postures) {
  const auto n = static_cast<Eigen::Index>(postures.size());
  Eigen::MatrixXf dist = Eigen::MatrixXf::Zero(n, n);
  parallel_for(postures.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < postures.size(); ++j)
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(posture_dist(postures[i], postures[j]));
  });
  dist.triangularView<Eigen::StrictlyLower>() = dist.transpose();
  return dist;
}

namespace {

struct Assignment {
  std::vector<int> nearest;  // position in the medoid list
  std::vector<double> d_nearest;
  std::vector<double> d_second;
  double objective = 0.0;
};

Assignment assign(const Eigen::MatrixXf& dist, const std::vector<std::size_t>& medoids) {
  const auto n = static_cast<std::size_t>(dist.rows());
  const double inf = std::numeric_limits<double>::infinity();
  Assignment a{std::vector<int>(n, 0), std::vector<double>(n, inf), std::vector<double>(n, inf), 0.0};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const double d = dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(medoids[m]));
      if (d < a.d_nearest[j]) {
        a.d_second[j] = a.d_nearest[j];
        a.d_nearest[j] = d;
        a.nearest[j] = static_cast<int>(m);
      } else if (d < a.d_second[j]) {
        a.d_second[j] = d;
      }
    }
    a.objective += a.d_nearest[j];
  }
  return a;
}

}  // namespace

ClusterModel cluster_postures(std::span<const Posture> postures, const Eigen::MatrixXf& dist, int k,
                              int max_swaps) {
  const auto n = postures.size();
  require(k >= 1, ErrorKind::InvalidArgument, "cluster_postures: K must be positive");
  require(n >= static_cast<std::size_t>(k), ErrorKind::InsufficientData, "cluster_postures: fewer postures than K");
  require(dist.rows() == static_cast<Eigen::Index>(n) && dist.cols() == static_cast<Eigen::Index>(n),
          ErrorKind::DimensionMismatch, "cluster_postures: distance matrix size differs");
  const double inf = std::numeric_limits<double>::infinity();
  auto d = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  };

  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  std::vector<double> nearest(n, inf);
  for (int m = 0; m < k; ++m) {
    double best = inf;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_medoid[i]) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += std::min(nearest[j], d(i, j));
      if (total < best) {
        best = total;
        best_i = i;
      }
    }
    medoids.push_back(best_i);
    is_medoid[best_i] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d(best_i, j));
  }

  ClusterModel model;
  Assignment a = assign(dist, medoids);
  model.history.push_back(a.objective);
  std::vector<double> removal(static_cast<std::size_t>(k));
  std::vector<double> delta(static_cast<std::size_t>(k));
  for (int swap = 0; k > 1 && swap < max_swaps; ++swap) {
    std::fill(removal.begin(), removal.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      removal[static_cast<std::size_t>(a.nearest[j])] += a.d_second[j] - a.d_nearest[j];
    double best = -1e-10 * (1.0 + a.objective);
    std::size_t best_h = n;
    int best_m = -1;
    for (std::size_t h = 0; h < n; ++h) {
      if (is_medoid[h]) continue;
      delta = removal;
      double shared = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double djh = d(j, h);
        const auto m = static_cast<std::size_t>(a.nearest[j]);
        if (djh < a.d_nearest[j]) {
          shared += djh - a.d_nearest[j];
          delta[m] += a.d_nearest[j] - a.d_second[j];
        } else if (djh < a.d_second[j]) {
          delta[m] += djh - a.d_second[j];
        }
      }
      for (int m = 0; m < k; ++m) {
        const double change = delta[static_cast<std::size_t>(m)] + shared;
        if (change < best) {
          best = change;
          best_h = h;
          best_m = m;
        }
      }
    }
    if (best_m < 0) break;
    const Assignment trial = [&] {
      auto next = medoids;
      next[static_cast<std::size_t>(best_m)] = best_h;
      return assign(dist, next);
    }();
    if (!(trial.objective < a.objective)) break;
    is_medoid[medoids[static_cast<std::size_t>(best_m)]] = 0;
    is_medoid[best_h] = 1;
    medoids[static_cast<std::size_t>(best_m)] = best_h;
    a = trial;
    model.history.push_back(a.objective);
  }

  std::vector<std::size_t> order(medoids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return medoids[x] < medoids[y]; });
  std::vector<int> rank(medoids.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    model.medoids.push_back(medoids[order[r]]);
    model.modes.push_back(postures[medoids[order[r]]]);
    rank[order[r]] = static_cast<int>(r);
  }
  model.labels.resize(n);
  for (std::size_t j = 0; j < n; ++j) model.labels[j] = rank[static_cast<std::size_t>(a.nearest[j])] + 1;
  model.objective = a.objective;
  return model;
}

ClusterModel cluster_postures(std::span<const Posture> postures, int k, int max_swaps) {
  return cluster_postures(postures, posture_distance_matrix(postures), k, max_swaps);
}

double silhouette(const Eigen::MatrixXf& dist, const std::vector<int>& labels) {
  const auto n = labels.size();
  require(dist.rows() == static_cast<Eigen::Index>(n), ErrorKind::DimensionMismatch, "silhouette: size mismatch");
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  std::vector<double> size(static_cast<std::size_t>(k) + 1, 0.0);
  for (int l : labels) size[static_cast<std::size_t>(l)] += 1.0;
  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      sums[static_cast<std::size_t>(labels[j])] += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const auto own = static_cast<std::size_t>(labels[i]);
    if (size[own] <= 1.0) continue;
    const double a = sums[own] / (size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c <= static_cast<std::size_t>(k); ++c)
      if (c != own && size[c] > 0.0) b = std::min(b, sums[c] / size[c]);
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

int select_k(std::span<const Posture> postures, const Eigen::MatrixXf& dist, int k_min, int k_max) {
  require(k_min >= 2 && k_max >= k_min, ErrorKind::InvalidArgument, "select_k: need 2 <= k_min <= k_max");
  k_max = std::min<int>(k_max, static_cast<int>(postures.size()) - 1);
  require(k_max >= k_min, ErrorKind::InsufficientData, "select_k: too few postures");
  int best_k = k_min;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const double s = silhouette(dist, cluster_postures(postures, dist, k).labels);
    if (s > best) {
      best = s;
      best_k = k;
    }
  }
  return best_k;
}

std::vector<Posture> sample_postures(std::span<const MotionSequence> seqs, std::size_t count, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, Eigen::Index>> index;
  for (std::size_t m = 0; m < seqs.size(); ++m)
    for (Eigen::Index t = 0; t < seqs[m].length(); ++t) index.emplace_back(m, t);
  Rng rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  index.resize(std::min(count, index.size()));
  std::vector<Posture> out;
  out.reserve(index.size());
  for (const auto& [m, t] : index) out.push_back(seqs[m][t]);
  return out;
}

QuantizedSequence quantize(const MotionSequence& seq, const ClusterModel& model) {
  require(!model.modes.empty(), ErrorKind::InvalidArgument, "quantize: empty cluster model");
  require(seq.bone_count() == model.modes.front().bone_count(), ErrorKind::DimensionMismatch,
          "quantize: bone counts differ");
  QuantizedSequence labels(static_cast<std::size_t>(seq.length()));
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t m = 0; m < model.modes.size(); ++m) {
      const double d = posture_dist(seq[t], model.modes[m]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(m);
      }
    }
    labels[static_cast<std::size_t>(t)] = arg + 1;
  }
  return labels;
}

double variability(const QuantizedSequence& b, const QuantizedSequence& reference) {
  if (b.size() != reference.size()) {
    std::ostringstream os;
    os << "variability: lengths " << b.size() << " and " << reference.size() << " differ";
    fail(ErrorKind::LengthMismatch, os.str());
  }
  require(!b.empty(), ErrorKind::LengthMismatch, "variability: empty sequences");
  std::size_t differ = 0;
  for (std::size_t t = 0; t < b.size(); ++t) differ += b[t] != reference[t] ? 1 : 0;
  return static_cast<double>(differ) / static_cast<double>(b.size());
}

VariabilityStats variability_stats(std::span<const QuantizedSequence> set, const QuantizedSequence& reference) {
  require(!set.empty(), ErrorKind::InsufficientData, "variability_stats: empty set");
  std::vector<double> e;
  e.reserve(set.size());
  for (const auto& b : set) e.push_back(variability(b, reference));
  VariabilityStats s;
  s.mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  if (e.size() > 1) {
    double ss = 0.0;
    for (double x : e) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(e.size() - 1);
  }
  return s;
}

MotionSequence pointwise_mean(std::span<const MotionSequence> seqs) {
  require(!seqs.empty(), ErrorKind::InsufficientData, "pointwise_mean: no sequences");
  const Eigen::Index T = seqs.front().length();
  for (const auto& s : seqs)
    require(s.length() == T && s.bone_count() == seqs.front().bone_count(), ErrorKind::DimensionMismatch,
            "pointwise_mean: sequences differ in shape");
  std::vector<Posture> frames(static_cast<std::size_t>(T));
  parallel_for(frames.size(), [&](std::size_t t) {
    std::vector<Posture> slice;
    slice.reserve(seqs.size());
    for (const auto& s : seqs) slice.push_back(s[static_cast<Eigen::Index>(t)]);
    frames[t] = karcher_mean(slice);
  });
  return MotionSequence(std::move(frames));
}

std::vector<double> roughness(const MotionSequence& seq) {
  std::vector<double> r(static_cast<std::size_t>(seq.length() - 1));
  for (Eigen::Index t = 0; t + 1 < seq.length(); ++t) r[static_cast<std::size_t>(t)] = posture_dist(seq[t], seq[t + 1]);
  return r;
}

double mean_roughness(const MotionSequence& seq) {
  const auto r = roughness(seq);
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

Eigen::MatrixXd mds_coords(const Eigen::MatrixXd& dist, int dims) {
  const Eigen::Index n = dist.rows();
  require(dist.cols() == n, ErrorKind::DimensionMismatch, "mds_coords: distance matrix must be square");
  require(dims >= 1 && n >= dims + 1, ErrorKind::InsufficientData, "mds_coords: need at least dims + 1 items");
  const Eigen::MatrixXd sq = dist.array().square();
  const Eigen::MatrixXd centre = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd gram = -0.5 * centre * sq * centre;
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  require(es.info() == Eigen::Success, ErrorKind::NoConvergence, "mds_coords: eigensolver failed");
  Eigen::MatrixXd coords(n, dims);
  for (int c = 0; c < dims; ++c) {
    const Eigen::Index col = n - 1 - c;
    const double lambda = std::max(es.eigenvalues()(col), 0.0);
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    coords.col(c) = v * std::sqrt(lambda);
  }
  return coords;
}

Eigen::MatrixXd mds_coords(std::span<const MotionSequence> seqs, int dims) {
  return mds_coords(seq_distance_matrix(seqs), dims);
}

double sample_quantile(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), ErrorKind::InsufficientData, "sample_quantile: empty sample");
  const double last = static_cast<double>(sorted.size() - 1);
  const double h = std::clamp(p * static_cast<double>(sorted.size()) - 0.5, 0.0, last);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = h - static_cast<double>(lo);
  return f == 0.0 ? sorted[lo] : sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

std::vector<std::pair<double, double>> qq_data(std::vector<double> test_logliks, std::vector<double> sim_logliks) {
  require(!test_logliks.empty() && !sim_logliks.empty(), ErrorKind::InsufficientData, "qq_data: empty sample");
  std::sort(test_logliks.begin(), test_logliks.end());
  std::sort(sim_logliks.begin(), sim_logliks.end());
  const std::size_t n = std::min(test_logliks.size(), sim_logliks.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double p = (static_cast<double>(k) - 0.5) / static_cast<double>(n);
    out.emplace_back(sample_quantile(test_logliks, p), sample_quantile(sim_logliks, p));
  }
  return out;
}

}  // namespace posemu
