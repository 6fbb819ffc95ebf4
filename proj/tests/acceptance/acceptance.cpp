// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posemu/alignment.hpp"
#include "posemu/datagen.hpp"
#include "posemu/dimred.hpp"
#include "posemu/evaluate.hpp"
#include "posemu/flatten.hpp"
#include "posemu/geometry.hpp"
#include "posemu/models.hpp"
#include "posemu/pipeline.hpp"
#include "posemu/random.hpp"

using namespace posemu;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Report {
  bool ok = true;
  std::ostringstream notes;

  void check(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      notes << " [failed: " << what << "]";
    }
  }
  template <typename T>
  void note(const std::string& key, const T& value) {
    notes << ' ' << key << '=' << value;
  }
};

Vec3 random_unit(Rng& rng) {
  Vec3 v = standard_normal(rng, 3);
  return v.normalized();
}

Posture random_posture(Rng& rng, int bones) {
  Eigen::Matrix3Xd b(3, bones);
  for (int i = 0; i < bones; ++i) b.col(i) = random_unit(rng);
  return Posture(b);
}

double mean_pairwise(std::span<const MotionSequence> seqs) {
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t j = i + 1; j < seqs.size(); ++j, ++pairs) total += seq_dist(seqs[i], seqs[j]);
  return total / pairs;
}

// Sine of the largest principal angle between two orthonormal column sets.
double subspace_sine(const Eigen::MatrixXd& u, const Eigen::MatrixXd& u0) {
  const Eigen::MatrixXd residual = u0 - u * (u.transpose() * u0);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(residual).singularValues()(0);
}

Eigen::MatrixXd orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) a.col(c) = standard_normal(rng, rows);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) a.col(c) = standard_normal(rng, rows);
  return a;
}

std::vector<MotionSequence> aligned_class(const SynthConfig& cfg) {
  const auto seqs = gen_class(cfg);
  return align_all(seqs, 0, default_alignment_reference(seqs)).aligned;
}

// --- 1 ---------------------------------------------------------------------

Report geometry_suite() {
  Report r;
  const auto t0 = Clock::now();
  Rng rng(101);
  double roundtrip = 0.0, isometry = 0.0, orthogonal = 0.0, reversal = 0.0, symmetry = 0.0, triangle = 0.0,
         coords = 0.0, coords_norm = 0.0;
  const int cases = 10000;
  for (int k = 0; k < cases; ++k) {
    const Vec3 y = random_unit(rng);
    Vec3 z = random_unit(rng);
    while (sphere_dist(y, z) >= std::numbers::pi - 1e-3) z = random_unit(rng);
    roundtrip = std::max(roundtrip, (sphere_exp(y, sphere_log(y, z)) - z).norm());

    Vec3 u = standard_normal(rng, 3);
    u -= u.dot(y) * y;
    const Vec3 moved = sphere_transport(y, z, u);
    isometry = std::max(isometry, std::abs(moved.norm() - u.norm()));
    orthogonal = std::max(orthogonal, std::abs(moved.dot(z)));
    reversal = std::max(reversal, (sphere_transport(y, z, sphere_log(y, z)) + sphere_log(z, y)).norm());

    const Posture a = random_posture(rng, 20), b = random_posture(rng, 20), c = random_posture(rng, 20);
    symmetry = std::max(symmetry, std::abs(posture_dist(a, b) - posture_dist(b, a)));
    triangle = std::max(triangle, posture_dist(a, c) - posture_dist(a, b) - posture_dist(b, c));

    const TangentField v = posture_log(a, b);
    const Eigen::VectorXd cv = tangent_coords(a, v);
    coords = std::max(coords, (coords_to_tangent(a, cv) - v).cwiseAbs().maxCoeff());
    coords_norm = std::max(coords_norm, std::abs(cv.norm() - tangent_norm(v)));
  }
  const double elapsed = seconds_since(t0);
  r.note("cases", cases);
  r.note("exp_log", roundtrip);
  r.note("transport_norm", isometry);
  r.note("transport_orth", orthogonal);
  r.note("reversal", reversal);
  r.note("triangle_excess", triangle);
  r.note("coords", std::max(coords, coords_norm));
  r.note("seconds", elapsed);
  r.check(roundtrip <= 1e-10, "exp/log roundtrip 1e-10");
  r.check(isometry <= 1e-12, "transport isometry 1e-12");
  r.check(orthogonal <= 1e-12, "transport orthogonality 1e-12");
  r.check(reversal <= 1e-8, "geodesic direction reversal 1e-8");
  r.check(symmetry == 0.0, "exact symmetry");
  r.check(triangle <= 1e-12, "triangle inequality 1e-12");
  r.check(coords <= 1e-12 && coords_norm <= 1e-12, "tangent coordinate isometry 1e-12");
  r.check(elapsed < 10.0, "runtime < 10 s");
  return r;
}

// --- 2 ---------------------------------------------------------------------

Report flattening() {
  Report r;
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.landmarks = 21;
  cfg.frames = 301;
  cfg.sequences = 50;
  cfg.seed = 202;
  const auto seqs = aligned_class(cfg);
  const Posture ref = pooled_reference(seqs);
  std::vector<double> stvf(seqs.size()), siem(seqs.size()), mtvf(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t m) {
    const auto worst = [](const std::vector<double>& e) { return *std::max_element(e.begin(), e.end()); };
    stvf[m] = worst(recon_error(stvf_decode(stvf_encode(seqs[m], ref)), seqs[m]));
    siem[m] = worst(recon_error(siem_decode(siem_encode(seqs[m], ref)), seqs[m]));
    mtvf[m] = worst(recon_error(mtvf_decode(mtvf_encode(seqs[m], ref)), seqs[m]));
  });
  const double s = *std::max_element(stvf.begin(), stvf.end());
  const double w = *std::max_element(siem.begin(), siem.end());
  const double m = *std::max_element(mtvf.begin(), mtvf.end());
  const double elapsed = seconds_since(t0);
  r.note("max_e_stvf", s);
  r.note("max_e_siem", w);
  r.note("max_e_mtvf", m);
  r.note("mtvf_over_stvf", s > 0.0 ? m / s : std::numeric_limits<double>::infinity());
  r.note("seconds", elapsed);
  r.check(s <= 1e-6, "S-TVF roundtrip <= 1e-6");
  r.check(w <= 1e-6, "SIEM roundtrip <= 1e-6");
  r.check(m >= 1e3 * s, "M-TVF error >= 1e3 x S-TVF error");
  r.check(elapsed < 60.0, "runtime < 60 s");
  return r;
}

// --- 3 ---------------------------------------------------------------------

using Knots = std::vector<std::pair<int, int>>;

void enumerate_paths(int last, Knots& path, std::vector<Knots>& out) {
  const auto [i, j] = path.back();
  if (i == last && j == last) {
    out.push_back(path);
    return;
  }
  for (const auto& step : kWarpStencil) {
    const int ni = i + step[0], nj = j + step[1];
    if (ni > last || nj > last) continue;
    path.emplace_back(ni, nj);
    enumerate_paths(last, path, out);
    path.pop_back();
  }
}

// Integral of |target(t) - sqrt(gamma') moving(gamma(t))| over [0, 1] for a
// lattice path, evaluated piece by piece between all cell boundaries.
double path_cost(const Knots& path, const Eigen::MatrixXd& moving, const Eigen::MatrixXd& target) {
  const double L = static_cast<double>(target.cols());
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const auto [k, l] = path[s];
    const auto [i, j] = path[s + 1];
    const double slope = static_cast<double>(j - l) / (i - k);
    std::vector<double> cuts;
    for (int q = k; q <= i; ++q) cuts.push_back(q);
    for (int q = l; q <= j; ++q) cuts.push_back(k + (q - l) / slope);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double a = cuts[p], b = cuts[p + 1];
      if (b <= a) continue;
      const double mid = 0.5 * (a + b);
      const auto ct = static_cast<Eigen::Index>(mid);
      const auto cg = static_cast<Eigen::Index>(l + slope * (mid - k));
      total += (b - a) * (target.col(ct) - std::sqrt(slope) * moving.col(cg)).norm();
    }
  }
  return total / L;
}

Report alignment() {
  Report r;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    SynthConfig cfg;
    cfg.landmarks = 21;
    cfg.frames = 101;
    cfg.sequences = 20;
    cfg.noise_scale = 0.0;
    cfg.seed = 300 + static_cast<std::uint64_t>(trial);
    const auto seqs = gen_class(cfg);
    const auto aligned = align_all(seqs, 0, default_alignment_reference(seqs)).aligned;
    worst_ratio = std::max(worst_ratio, mean_pairwise(aligned) / mean_pairwise(seqs));
  }
  r.note("worst_post_over_pre", worst_ratio);
  r.check(worst_ratio <= 0.2, "post-alignment mean d_A <= 0.2 x pre-alignment in every trial");

  Rng rng(303);
  double worst_gap = 0.0;
  int grids = 0;
  for (int T = 2; T <= 8; ++T) {
    std::vector<Knots> paths;
    Knots start{{0, 0}};
    enumerate_paths(T - 1, start, paths);
    for (int trial = 0; trial < 10; ++trial, ++grids) {
      const Posture ref = random_posture(rng, 3);
      TsrvfField a{ref, gaussian(rng, 6, T - 1), 1.0 / (T - 1)}, b{ref, gaussian(rng, 6, T - 1), 1.0 / (T - 1)};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : paths) best = std::min(best, path_cost(p, a.values, b.values));
      worst_gap = std::max(worst_gap, std::abs(optimal_warp(a, b).cost - best) / (1.0 + best));
    }
  }
  r.note("dp_grids", grids);
  r.note("dp_vs_enumeration", worst_gap);
  r.check(worst_gap <= 1e-12, "DP cost equals exhaustive enumeration for T <= 8");
  return r;
}

// --- 4 ---------------------------------------------------------------------

Report dimension_reduction() {
  Report r;
  Rng rng(404);

  // Full-dimension reconstructions.
  const Eigen::Index D = 12, L = 30, M = 40;
  std::vector<Eigen::MatrixXd> fields;
  for (Eigen::Index m = 0; m < M; ++m) fields.push_back(gaussian(rng, D, L));
  const SpatialPCA full_spatial = spatial_pca_fit(std::span<const Eigen::MatrixXd>(fields), DimSelection::fixed_dims(D));
  double spatial_err = 0.0;
  for (const auto& f : fields)
    spatial_err = std::max(spatial_err, (spatial_reconstruct(spatial_project(f, full_spatial), full_spatial) - f).cwiseAbs().maxCoeff());
  const double dt = 1.0 / L;
  std::vector<Eigen::MatrixXd> scores;
  for (Eigen::Index m = 0; m < M; ++m) scores.push_back(gaussian(rng, 3, L));
  const FPCABasis full_fpca = fpca_fit(scores, dt, DimSelection::fixed_dims(L));
  double fpca_err = 0.0;
  for (const auto& h : scores)
    fpca_err = std::max(fpca_err, (fpca_reconstruct(fpca_project(h, full_fpca), full_fpca) - h).cwiseAbs().maxCoeff());
  const MPCAModel full_mpca = mpca_fit(fields, D, L);
  double mpca_err = 0.0;
  for (const auto& f : fields)
    mpca_err = std::max(mpca_err, (mpca_reconstruct(mpca_project(f, full_mpca), full_mpca) - f).cwiseAbs().maxCoeff());
  r.note("full_spatial", spatial_err);
  r.note("full_fpca", fpca_err);
  r.note("full_mpca", mpca_err);
  r.check(spatial_err <= 1e-10, "full spatial reconstruction 1e-10");
  r.check(fpca_err <= 1e-9, "full FPCA reconstruction 1e-9");
  r.check(mpca_err <= 1e-9, "full MPCA reconstruction 1e-9");

  // Planted subspaces.
  const Eigen::MatrixXd u0 = orthonormal(rng, D, 3);
  const Eigen::VectorXd m0 = standard_normal(rng, D);
  std::vector<Eigen::MatrixXd> planted;
  for (Eigen::Index m = 0; m < M; ++m) planted.push_back((u0 * gaussian(rng, 3, L)).colwise() + m0);
  const SpatialPCA sp = spatial_pca_fit(std::span<const Eigen::MatrixXd>(planted), DimSelection::fixed_dims(3));
  const double spatial_angle = subspace_sine(sp.basis, u0);

  const Eigen::MatrixXd beta0 = orthonormal(rng, L, 2) / std::sqrt(dt);
  const Eigen::VectorXd mu0 = standard_normal(rng, L);
  std::vector<Eigen::MatrixXd> curves;
  for (Eigen::Index m = 0; m < M; ++m) {
    Eigen::MatrixXd h(2, L);
    for (Eigen::Index i = 0; i < 2; ++i) h.row(i) = (mu0 + beta0 * standard_normal(rng, 2)).transpose();
    curves.push_back(h);
  }
  const FPCABasis fb = fpca_fit(curves, dt, DimSelection::fixed_dims(2));
  double fpca_angle = 0.0;
  for (const auto& comp : fb.dims)
    fpca_angle = std::max(fpca_angle, subspace_sine(comp.basis * std::sqrt(dt), beta0 * std::sqrt(dt)));

  const Eigen::MatrixXd v1 = orthonormal(rng, D, 2), v2 = orthonormal(rng, L, 3);
  std::vector<Eigen::MatrixXd> tensors;
  for (Eigen::Index m = 0; m < M; ++m) tensors.push_back(v1 * gaussian(rng, 2, 3) * v2.transpose());
  const MPCAModel mp = mpca_fit(tensors, 2, 3);
  const double mpca_angle = std::max(subspace_sine(mp.u1, v1), subspace_sine(mp.u2, v2));
  r.note("angle_spatial", spatial_angle);
  r.note("angle_fpca", fpca_angle);
  r.note("angle_mpca", mpca_angle);
  r.check(std::max({spatial_angle, fpca_angle, mpca_angle}) < 1e-6, "planted subspaces within 1e-6");

  // MPCA captured variance over iterations.
  bool monotone = true;
  int passes = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::MatrixXd> xs;
    for (Eigen::Index m = 0; m < M; ++m) xs.push_back(gaussian(rng, D, L));
    const MPCAModel model = mpca_fit(xs, 3, 4);
    passes += static_cast<int>(model.captured.size());
    for (std::size_t k = 1; k < model.captured.size(); ++k)
      monotone = monotone && model.captured[k] >= model.captured[k - 1] - 1e-12 * model.total_scatter;
  }
  r.note("mpca_passes", passes);
  r.check(monotone, "MPCA captured variance monotone");

  // Nested dimensions: sequence reconstruction error averaged over 20 trials.
  const std::vector<Eigen::Index> d1s{1, 2, 3, 4, 6, 8, 10}, d2s{1, 2, 4, 8, 16, 40};
  std::vector<double> by_d1(d1s.size(), 0.0), by_d2(d2s.size(), 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    SynthConfig cfg;
    cfg.landmarks = 6;
    cfg.frames = 41;
    cfg.sequences = 30;
    cfg.seed = 450 + static_cast<std::uint64_t>(trial);
    const auto seqs = aligned_class(cfg);
    const auto mean_error = [&](Eigen::Index d1, Eigen::Index d2) {
      FitOptions o;
      o.spatial = DimSelection::fixed_dims(d1);
      o.temporal = DimSelection::fixed_dims(d2);
      const EmulatorBundle b = fit_bundle(seqs, o);
      double err = 0.0;
      for (const auto& s : seqs) err += seq_recon_error(s, decode_coefficients(b, bundle_coefficients(b, s), s[0]));
      return err / (20.0 * static_cast<double>(seqs.size()));
    };
    for (std::size_t i = 0; i < d1s.size(); ++i) by_d1[i] += mean_error(d1s[i], 40);
    for (std::size_t i = 0; i < d2s.size(); ++i) by_d2[i] += mean_error(4, d2s[i]);
  }
  const auto nonincreasing = [](const std::vector<double>& v) {
    for (std::size_t d = 1; d < v.size(); ++d)
      if (v[d] > v[d - 1] + 1e-12) return false;
    return true;
  };
  r.note("recon_d1_min", by_d1.front());
  r.note("recon_d1_max", by_d1.back());
  r.note("recon_d2_min", by_d2.front());
  r.note("recon_d2_max", by_d2.back());
  r.check(nonincreasing(by_d1), "mean sequence reconstruction error nonincreasing in d1");
  r.check(nonincreasing(by_d2), "mean sequence reconstruction error nonincreasing in d2");
  return r;
}

// --- 5 ---------------------------------------------------------------------

bool within_se(const Eigen::MatrixXd& s, const Eigen::MatrixXd& sigma, double n, double& worst) {
  bool ok = true;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
      const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / n);
      const double z = std::abs(s(i, j) - sigma(i, j)) / se;
      worst = std::max(worst, z);
      ok = ok && z <= 5.0;
    }
  return ok;
}

Report models() {
  Report r;
  Rng rng(505);
  const Eigen::Index d = 12;
  Eigen::MatrixXd a = gaussian(rng, d, d);
  const Eigen::MatrixXd sigma = a * a.transpose() / static_cast<double>(d) + 0.05 * Eigen::MatrixXd::Identity(d, d);
  const MVGModel truth{3, 4, sigma, 1e-10 * sigma.trace() / d};
  const auto draws = sample_coeffs(truth, 10000, 17);
  const MVGModel fitted = fit_mvg(draws);
  double worst_z = 0.0;
  const bool mvg_ok = within_se(fitted.covariance, sigma, 10000.0, worst_z);
  const IGModel ig_truth{3, 4, sigma.diagonal(), truth.jitter};
  const IGModel ig_fit = fit_ig(sample_coeffs(ig_truth, 10000, 18));
  const bool ig_ok = within_se(Eigen::MatrixXd(ig_fit.variances.asDiagonal()),
                               Eigen::MatrixXd(sigma.diagonal().asDiagonal()), 10000.0, worst_z);
  r.note("max_z", worst_z);
  r.check(mvg_ok && ig_ok, "Monte-Carlo covariance within 5 SE");

  const double log2pi = std::log(2.0 * std::numbers::pi);
  double analytic = 0.0;
  for (Eigen::Index k : {1, 3, 8}) {
    const MVGModel id{k, 1, Eigen::MatrixXd::Identity(k, k), 1e-10};
    analytic = std::max(analytic, std::abs(loglik(CoeffMatrix::Zero(k, 1), id) + 0.5 * k * log2pi));
  }
  const MVGModel two{1, 2, Eigen::MatrixXd::Identity(2, 2), 1e-10};
  analytic = std::max(analytic, std::abs(loglik(CoeffMatrix::Ones(1, 2), two) - (-log2pi - 1.0)));
  const Eigen::Vector3d var(0.5, 2.0, 4.0);
  const Eigen::Vector3d x(1.0, -1.0, 2.0);
  const double diag_expected = -1.5 * log2pi - 0.5 * std::log(var.prod()) - 0.5 * (x.array().square() / var.array()).sum();
  const MVGModel diag{3, 1, Eigen::MatrixXd(var.asDiagonal()), 1e-10};
  const IGModel ig{3, 1, var, 1e-10};
  analytic = std::max(analytic, std::abs(loglik(CoeffMatrix(x), diag) - diag_expected));
  analytic = std::max(analytic, std::abs(loglik(CoeffMatrix(x), ig) - diag_expected));
  r.note("analytic_loglik", analytic);
  r.check(analytic <= 1e-12, "analytic log-likelihoods 1e-12");

  Eigen::Matrix4d phi = 0.5 * orthonormal(rng, 4, 4);
  const Eigen::Vector4d c(0.1, -0.2, 0.05, 0.3);
  Eigen::MatrixXd series(4, 120);
  series.col(0) = standard_normal(rng, 4);
  for (Eigen::Index t = 1; t < 120; ++t) series.col(t) = c + phi * series.col(t - 1);
  const VARModel var1 = fit_var(std::vector<Eigen::MatrixXd>{series}, {1, true});
  const double var_err = std::max((var1.phi[0] - phi).cwiseAbs().maxCoeff(), (var1.intercept - c).cwiseAbs().maxCoeff());
  r.note("var1_error", var_err);
  r.check(var_err <= 1e-6, "noiseless VAR(1) recovery 1e-6");

  SynthConfig cfg;
  cfg.landmarks = 8;
  cfg.frames = 51;
  cfg.sequences = 1;
  cfg.seed = 55;
  const MotionSequence one = gen_class(cfg).front();
  const std::vector<MotionSequence> copies(6, one);
  bool exact = true;
  for (const auto& s : sample_pwi(fit_pwi(copies), 10, 3)) exact = exact && s == one;
  r.check(exact, "PWI reproduces zero-variance training exactly");
  return r;
}

// --- 6 ---------------------------------------------------------------------

double energy(const std::vector<MotionSequence>& a, const std::vector<MotionSequence>& b) {
  const auto mean_dist = [](const std::vector<MotionSequence>& x, const std::vector<MotionSequence>& y) {
    double s = 0.0;
    for (const auto& p : x)
      for (const auto& q : y) s += seq_dist(p, q);
    return s / static_cast<double>(x.size() * y.size());
  };
  return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

MotionSequence rotated(const MotionSequence& s, const Eigen::Matrix3d& rot) {
  std::vector<Posture> frames;
  for (Eigen::Index t = 0; t < s.length(); ++t) frames.emplace_back(rot * s[t].bones());
  return MotionSequence(frames);
}

Report disco() {
  Report r;
  const auto t0 = Clock::now();

  SynthConfig small;
  small.landmarks = 5;
  small.frames = 21;
  small.sequences = 6;
  small.seed = 606;
  const auto six = gen_class(small);
  const DiscoResult ex = disco_exhaustive(seq_distance_matrix(six), 3);
  const std::vector<MotionSequence> obs_a(six.begin(), six.begin() + 3), obs_b(six.begin() + 3, six.end());
  const double observed = energy(obs_a, obs_b);
  int splits = 0, at_least = 0;
  for (int mask = 0; mask < 64; ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
    std::vector<MotionSequence> a, b;
    for (int i = 0; i < 6; ++i) ((mask >> i) & 1 ? a : b).push_back(six[static_cast<std::size_t>(i)]);
    ++splits;
    if (energy(a, b) >= observed - 1e-10) ++at_least;
  }
  const double brute_p = static_cast<double>(at_least) / splits;
  r.note("exhaustive_p", ex.p_value);
  r.note("enumerated_p", brute_p);
  r.check(ex.permutations == 20 && ex.p_value == brute_p && std::abs(ex.statistic - observed) <= 1e-10,
          "exhaustive permutation equality for 3 + 3");

  const int repeats = 200;
  int rejections = 0, power_hits = 0;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 2).normalized()).toRotationMatrix();
  for (int rep = 0; rep < repeats; ++rep) {
    SynthConfig cfg;
    cfg.landmarks = 8;
    cfg.frames = 51;
    cfg.sequences = 20;
    cfg.seed = 6000 + static_cast<std::uint64_t>(rep);
    const auto pool = gen_class(cfg);
    const std::vector<MotionSequence> a(pool.begin(), pool.begin() + 10), b(pool.begin() + 10, pool.end());
    if (disco_test(a, b, 999, derive_seed(cfg.seed, 1)).p_value < 0.05) ++rejections;
    std::vector<MotionSequence> shifted;
    for (const auto& s : b) shifted.push_back(rotated(s, rot));
    if (disco_test(a, shifted, 999, derive_seed(cfg.seed, 2)).p_value <= 0.01) ++power_hits;
  }
  const double size = static_cast<double>(rejections) / repeats;
  const double power = static_cast<double>(power_hits) / repeats;
  const double elapsed = seconds_since(t0);
  r.note("null_rejection_rate", size);
  r.note("power", power);
  r.note("seconds", elapsed);
  r.check(size >= 0.01 && size <= 0.12, "calibration within [0.01, 0.12]");
  r.check(power >= 0.95, "power >= 95%");
  r.check(elapsed < 120.0, "runtime < 120 s");
  return r;
}

// --- 7 & 8 -----------------------------------------------------------------

std::vector<MotionSequence> training_set() {
  SynthConfig cfg;
  cfg.landmarks = 21;
  cfg.frames = 301;
  cfg.sequences = 60;
  cfg.seed = 707;
  return aligned_class(cfg);
}

Report two_level(const std::vector<MotionSequence>& training) {
  Report r;
  const auto t0 = Clock::now();
  TwoLevelConfig cfg;
  cfg.level_one.scheme = Scheme::parse("istvf/seqpca/mvg");
  cfg.level_one.spatial = DimSelection::fixed_dims(4);
  cfg.level_one.temporal = DimSelection::fixed_dims(4);
  cfg.level_two = {Scheme::parse("istvf/seqpca/mvg"), Scheme::parse("pwi")};
  cfg.simulate = 1000;
  cfg.train = 800;
  cfg.repeats = 10;
  cfg.n_perm = 999;
  cfg.seed = 77;
  const TwoLevelReport report = run_twolevel(training, cfg);
  const TwoLevelRow& matched = report.rows[0];
  const TwoLevelRow& pwi = report.rows[1];
  const double elapsed = seconds_since(t0);
  r.note("median_p_matched", matched.median_p);
  r.note("median_p_pwi", pwi.median_p);
  r.note("qq_below_pwi", pwi.below_fraction);
  r.note("qq_shift_pwi", pwi.median_shift);
  r.note("qq_below_matched", matched.below_fraction);
  r.note("seconds", elapsed);
  r.check(matched.median_p > 0.05, "matched-family median p > 0.05");
  r.check(pwi.median_p < matched.median_p, "PWI median p below matched");
  r.check(pwi.below_fraction >= 0.8 && pwi.median_shift < 0.0, "PWI Q-Q pairs below the identity");
  r.check(elapsed < 900.0, "runtime < 15 min");
  return r;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Report orderings(const std::vector<MotionSequence>& training) {
  Report r;
  FitOptions o;
  o.seed = 81;
  const EmulatorBundle mvg = fit_bundle(training, o);
  o.scheme = Scheme::parse("pwi");
  const EmulatorBundle pwi = fit_bundle(training, o);
  const std::size_t M = training.size();
  const auto mvg_sims = simulate_sequence(mvg, M, 82);
  const auto pwi_sims = simulate_sequence(pwi, M, 83);

  const auto roughness_of = [](const std::vector<MotionSequence>& seqs) {
    std::vector<double> v;
    for (const auto& s : seqs) v.push_back(mean_roughness(s));
    return mean_of(v);
  };
  const double rough_train = roughness_of(training);
  const double rough_mvg = roughness_of(mvg_sims);
  const double rough_pwi = roughness_of(pwi_sims);
  r.note("roughness_train", rough_train);
  r.note("roughness_mvg", rough_mvg);
  r.note("roughness_pwi", rough_pwi);
  r.check(rough_pwi > rough_mvg, "roughness PWI > MVG");
  r.check(rough_mvg >= 0.8 * rough_train, "roughness MVG at or above the training band");

  const auto sample = sample_postures(training, 2000, 84);
  const Eigen::MatrixXf dist = posture_distance_matrix(sample);
  const int k = select_k(sample, dist, 2, 15);
  const ClusterModel model = cluster_postures(sample, dist, k);
  const QuantizedSequence reference = quantize(pointwise_mean(training), model);
  const auto variability_of = [&](const std::vector<MotionSequence>& seqs) {
    std::vector<QuantizedSequence> q(seqs.size());
    parallel_for(seqs.size(), [&](std::size_t i) { q[i] = quantize(seqs[i], model); });
    return variability_stats(q, reference).mean;
  };
  const double var_train = variability_of(training);
  const double var_mvg = variability_of(mvg_sims);
  const double var_pwi = variability_of(pwi_sims);
  r.note("k", k);
  r.note("variability_train", var_train);
  r.note("variability_mvg", var_mvg);
  r.note("variability_pwi", var_pwi);
  r.check(var_pwi < var_train && var_train < var_mvg, "variability PWI < training < IS-TVF/MVG");
  return r;
}

// --- 9 ---------------------------------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + POSEMU_CLI_PATH + "' " + args + " >> stdout.txt 2>> stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Report determinism() {
  Report r;
  const std::vector<std::string> commands = {
      "synth --run-dir data --classes 2 --per-class 10 --landmarks 8 --frames 120 --downsample 61 --format raw --seed 9",
      "ingest --run-dir data --input data/raw.jsonl --seed 9",
      "align --run-dir out --input data/postures.jsonl --seed 9",
      "flatten --run-dir out --input out/aligned.jsonl --repr istvf --seed 9",
      "reduce --run-dir out --input out/fields.jsonl --seed 9",
      "fit --run-dir out --fields out/fields.jsonl --reduction out/reduction.json --start-policy sampled --seed 9",
      "fit --run-dir pwi --scheme pwi --input out/aligned.jsonl --seed 9",
      "simulate --run-dir out --bundle out/bundle.json --count 30 --split 20/10 --seed 9",
      "simulate --run-dir pwi --bundle pwi/bundle.json --count 20 --seed 9",
      "eval two-sample --run-dir out --a out/aligned.jsonl --b pwi/simulated.jsonl --n-perm 199 --distances --seed 9",
      "eval quantize --run-dir out --train out/aligned.jsonl --input out/train.jsonl --input pwi/simulated.jsonl "
      "--k-max 6 --sample 300 --seed 9",
      "eval roughness --run-dir out --input out/aligned.jsonl --input pwi/simulated.jsonl --seed 9",
      "eval mds --run-dir out --input out/aligned.jsonl --input out/test.jsonl --seed 9",
      "eval qq --run-dir out --bundle out/bundle.json --test out/test.jsonl --sim out/train.jsonl --seed 9",
      "pipeline --run-dir pipe --input data/raw.jsonl --scheme siem/mpca/ig --d1 3 --d2 3 --n-perm 99 --seed 9",
      "pipeline --run-dir pipevar --input data/postures.jsonl --scheme istvf/seqpca/var --var-order 2 --n-perm 99 --seed 9",
      "twolevel --run-dir two --input out/aligned.jsonl --simulate 60 --split 40/20 --repeats 2 --n-perm 99 --seed 9",
  };
  const fs::path base = fs::temp_directory_path() / "posemu_acceptance_cli";
  fs::remove_all(base);
  bool all_ran = true;
  for (const char* name : {"first", "second"}) {
    fs::create_directories(base / name);
    for (const auto& c : commands) {
      const int code = run_cli(base / name, c);
      if (code != 0) {
        all_ran = false;
        r.notes << " [exit " << code << ": " << c.substr(0, c.find(" --")) << "]";
      }
    }
  }
  int files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(base / "first")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), base / "first");
    ++files;
    if (slurp(entry.path()) != slurp(base / "second" / rel)) {
      ++differing;
      r.notes << " [differs: " << rel.string() << "]";
    }
  }
  r.note("commands", commands.size());
  r.note("files_compared", files);
  r.check(all_ran, "every command exits 0");
  r.check(files > 30 && differing == 0, "byte-identical outputs across runs");
  fs::remove_all(base);
  return r;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Report()>>> criteria;
  std::vector<MotionSequence> training;
  criteria.emplace_back("geometry suite", geometry_suite);
  criteria.emplace_back("flattening bijectivity", flattening);
  criteria.emplace_back("alignment", alignment);
  criteria.emplace_back("PCA/FPCA/MPCA", dimension_reduction);
  criteria.emplace_back("models", models);
  criteria.emplace_back("DISCO", disco);
  criteria.emplace_back("two-level simulation", [&] {
    if (training.empty()) training = training_set();
    return two_level(training);
  });
  criteria.emplace_back("evaluation orderings", [&] {
    if (training.empty()) training = training_set();
    return orderings(training);
  });
  criteria.emplace_back("CLI determinism", determinism);

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Report rep;
    try {
      rep = criteria[i].second();
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.notes << " [exception: " << e.what() << "]";
    }
    if (!rep.ok) ++failed;
    std::cout << "[PRIMARY] criterion " << i + 1 << " (" << criteria[i].first << "): " << (rep.ok ? "PASS" : "FAIL")
              << rep.notes.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
