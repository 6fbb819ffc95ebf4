#include "posemu/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "posemu/error.hpp"
#include "posemu/random.hpp"

namespace posemu {

WarpFunction::WarpFunction(Eigen::VectorXd samples) : samples_(std::move(samples)) {
  const Eigen::Index n = samples_.size();
  require(n >= 2, ErrorKind::InvalidArgument, "warp needs at least 2 samples");
  require(samples_(0) == 0.0 && samples_(n - 1) == 1.0, ErrorKind::InvalidArgument,
          "warp must satisfy gamma(0) = 0 and gamma(1) = 1");
  for (Eigen::Index k = 1; k < n; ++k) {
    if (!(samples_(k) > samples_(k - 1))) {
      std::ostringstream os;
      os << "warp is not strictly increasing at sample " << k;
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }
}

WarpFunction WarpFunction::identity(Eigen::Index length) {
  Eigen::VectorXd s(length);
  for (Eigen::Index k = 0; k < length; ++k) s(k) = static_cast<double>(k) / static_cast<double>(length - 1);
  return WarpFunction(std::move(s));
}

double WarpFunction::operator()(double t) const {
  const Eigen::Index last = samples_.size() - 1;
  if (t <= 0.0) return samples_(0);
  if (t >= 1.0) return samples_(last);
  const double pos = t * static_cast<double>(last);
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), last - 1);
  const double f = pos - static_cast<double>(i);
  return samples_(i) + f * (samples_(i + 1) - samples_(i));
}

WarpFunction compose(const WarpFunction& outer, const WarpFunction& inner) {
  Eigen::VectorXd s(inner.length());
  for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = outer(inner.samples()(k));
  return WarpFunction(std::move(s));
}

std::vector<TangentField> shooting_vectors(const MotionSequence& seq) {
  const double inv_dt = static_cast<double>(seq.length() - 1);
  std::vector<TangentField> out;
  out.reserve(static_cast<std::size_t>(seq.length() - 1));
  for (Eigen::Index t = 0; t + 1 < seq.length(); ++t)
    out.push_back(posture_log(seq[t], seq[t + 1]) * inv_dt);
  return out;
}

TsrvfField tsrvf(const MotionSequence& seq, const Posture& reference) {
  require(seq.bone_count() == reference.bone_count(), ErrorKind::DimensionMismatch,
          "tsrvf: reference bone count differs from the sequence");
  const TangentBasis basis(reference);
  const auto velocities = shooting_vectors(seq);
  TsrvfField field{reference, Eigen::MatrixXd::Zero(basis.dim(), seq.length() - 1), seq.dt()};
  for (std::size_t t = 0; t < velocities.size(); ++t) {
    const double speed = tangent_norm(velocities[t]);
    if (speed == 0.0) continue;
    const TangentField moved = posture_transport(seq[static_cast<Eigen::Index>(t)], reference, velocities[t]);
    field.values.col(static_cast<Eigen::Index>(t)) = basis.coords(moved) / std::sqrt(speed);
  }
  return field;
}

MotionSequence warp_sequence(const MotionSequence& seq, const WarpFunction& warp) {
  require(warp.length() == seq.length(), ErrorKind::DimensionMismatch,
          "warp_sequence: warp and sequence lengths differ");
  const Eigen::Index T = seq.length();
  std::vector<Posture> frames;
  frames.reserve(static_cast<std::size_t>(T));
  for (Eigen::Index k = 0; k < T; ++k) {
    double pos = warp.samples()(k) * static_cast<double>(T - 1);
    if (std::abs(pos - std::round(pos)) <= 1e-9) pos = std::round(pos);
    const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), 0, T - 2);
    const double f = pos - static_cast<double>(i);
    if (f <= 0.0) {
      frames.push_back(seq[i]);
    } else if (f >= 1.0) {
      frames.push_back(seq[i + 1]);
    } else {
      frames.push_back(posture_exp(seq[i], f * posture_log(seq[i], seq[i + 1])));
    }
  }
  return MotionSequence(std::move(frames));
}

TsrvfField warp_field(const TsrvfField& field, const WarpFunction& warp) {
  const Eigen::Index L = field.values.cols();
  require(warp.length() == L + 1, ErrorKind::DimensionMismatch,
          "warp_field: warp needs one more sample than the field has columns");
  TsrvfField out{field.reference, Eigen::MatrixXd(field.values.rows(), L), field.dt};
  const auto& g = warp.samples();
  for (Eigen::Index k = 0; k < L; ++k) {
    const double at = 0.5 * (g(k) + g(k + 1));
    const double slope = (g(k + 1) - g(k)) * static_cast<double>(L);
    const double u = std::clamp(at * static_cast<double>(L) - 0.5, 0.0, static_cast<double>(L - 1));
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(u), std::max<Eigen::Index>(L - 2, 0));
    const double f = L > 1 ? u - static_cast<double>(i) : 0.0;
    Eigen::VectorXd value = field.values.col(i);
    if (f > 0.0) value = (1.0 - f) * field.values.col(i) + f * field.values.col(i + 1);
    out.values.col(k) = value * std::sqrt(slope);
  }
  return out;
}

double tsrvf_dist(const TsrvfField& a, const TsrvfField& b) {
  if (a.reference.bone_count() != b.reference.bone_count() ||
      (a.reference.bones() - b.reference.bones()).cwiseAbs().maxCoeff() > 1e-12) {
    fail(ErrorKind::ReferenceMismatch, "tsrvf_dist: fields use different reference postures");
  }
  require(a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols(),
          ErrorKind::DimensionMismatch, "tsrvf_dist: field shapes differ");
  return (a.values - b.values).colwise().norm().sum() * a.dt;
}

namespace {

// Exact integral over t in [k, i] (cell units) of |target(t) - sqrt(m) moving(gamma(t))|
// where gamma is linear from l to j. Returned in cell units (multiply by dt).
double segment_cost(const Eigen::MatrixXd& moving, const Eigen::MatrixXd& target, int k, int l, int i,
                    int j, Eigen::VectorXd& scratch) {
  const double m = static_cast<double>(j - l) / static_cast<double>(i - k);
  const double root_m = std::sqrt(m);
  double breaks[8];
  int nb = 0;
  for (int q = k; q <= i; ++q) breaks[nb++] = q;
  for (int q = l + 1; q < j; ++q) breaks[nb++] = k + (q - l) / m;
  std::sort(breaks, breaks + nb);
  double total = 0.0;
  for (int p = 0; p + 1 < nb; ++p) {
    const double a = breaks[p];
    const double b = breaks[p + 1];
    if (b - a <= 0.0) continue;
    const double mid = 0.5 * (a + b);
    const auto cell_t = static_cast<Eigen::Index>(std::floor(mid));
    const auto cell_g = static_cast<Eigen::Index>(std::floor(l + m * (mid - k)));
    scratch.noalias() = target.col(cell_t) - root_m * moving.col(cell_g);
    total += (b - a) * scratch.norm();
  }
  return total;
}

}  // namespace

WarpResult optimal_warp(const TsrvfField& moving, const TsrvfField& target) {
  require(moving.values.rows() == target.values.rows() && moving.values.cols() == target.values.cols(),
          ErrorKind::DimensionMismatch, "optimal_warp: field shapes differ");
  const int L = static_cast<int>(target.values.cols());
  require(L >= 1, ErrorKind::InvalidArgument, "optimal_warp: empty fields");
  const int N = L + 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(N) * N, inf);
  std::vector<int> from(static_cast<std::size_t>(N) * N, -1);
  auto at = [N](int i, int j) { return static_cast<std::size_t>(i) * N + j; };
  cost[at(0, 0)] = 0.0;
  Eigen::VectorXd scratch(target.values.rows());

  for (int i = 1; i < N; ++i) {
    for (int j = 1; j < N; ++j) {
      double best = inf;
      int best_from = -1;
      for (const auto& step : kWarpStencil) {
        const int k = i - step[0];
        const int l = j - step[1];
        if (k < 0 || l < 0) continue;
        const double prev = cost[at(k, l)];
        if (prev == inf) continue;
        const double c = prev + segment_cost(moving.values, target.values, k, l, i, j, scratch);
        if (c < best) {
          best = c;
          best_from = static_cast<int>(at(k, l));
        }
      }
      cost[at(i, j)] = best;
      from[at(i, j)] = best_from;
    }
  }
  require(cost[at(L, L)] < inf, ErrorKind::InvalidArgument, "optimal_warp: lattice end unreachable");

  std::vector<std::pair<int, int>> knots;
  for (int node = static_cast<int>(at(L, L)); node != -1; node = from[static_cast<std::size_t>(node)])
    knots.emplace_back(node / N, node % N);
  std::reverse(knots.begin(), knots.end());

  Eigen::VectorXd samples(N);
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    const auto [k, l] = knots[s];
    const auto [i, j] = knots[s + 1];
    for (int q = k; q <= i; ++q)
      samples(q) = (l + static_cast<double>(j - l) * (q - k) / (i - k)) / L;
  }
  samples(0) = 0.0;
  samples(L) = 1.0;
  return {WarpFunction(std::move(samples)), cost[at(L, L)] / L};
}

AlignmentResult align_all(std::span<const MotionSequence> seqs, std::size_t ref_index,
                          const Posture& reference) {
  require(ref_index < seqs.size(), ErrorKind::InvalidArgument, "align_all: reference index out of range");
  const auto& ref = seqs[ref_index];
  for (const auto& s : seqs)
    require(s.length() == ref.length() && s.bone_count() == ref.bone_count(),
            ErrorKind::DimensionMismatch, "align_all: sequences must share T and n");
  const TsrvfField target = tsrvf(ref, reference);

  AlignmentResult result;
  result.aligned.resize(seqs.size());
  result.warps.resize(seqs.size());
  result.costs.assign(seqs.size(), 0.0);
  parallel_for(seqs.size(), [&](std::size_t m) {
    if (m == ref_index) {
      result.aligned[m] = ref;
      result.warps[m] = WarpFunction::identity(ref.length());
      return;
    }
    auto [warp, cost] = optimal_warp(tsrvf(seqs[m], reference), target);
    result.aligned[m] = warp_sequence(seqs[m], warp);
    result.warps[m] = std::move(warp);
    result.costs[m] = cost;
  });
  return result;
}

Posture default_alignment_reference(std::span<const MotionSequence> seqs) {
  require(!seqs.empty(), ErrorKind::InsufficientData, "no sequences");
  std::vector<Posture> firsts;
  firsts.reserve(seqs.size());
  for (const auto& s : seqs) firsts.push_back(s[0]);
  return karcher_mean(firsts);
}

}  // namespace posemu
