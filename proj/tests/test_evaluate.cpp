#include <gtest/gtest.h>

#include <numbers>

#include "posemu/error.hpp"
#include "posemu/evaluate.hpp"
#include "support.hpp"

using namespace posemu;

namespace {

Eigen::MatrixXd random_metric(Rng& rng, Eigen::Index n) {
  Eigen::MatrixXd pts(3, n);
  for (Eigen::Index i = 0; i < n; ++i) pts.col(i) = standard_normal(rng, 3);
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (pts.col(i) - pts.col(j)).norm();
  return d;
}

// Direct definition with separate loops over each pair of groups.
double energy_oracle(const Eigen::MatrixXd& d, const std::vector<Eigen::Index>& a, const std::vector<Eigen::Index>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (auto i : a)
    for (auto j : b) ab += d(i, j);
  for (auto i : a)
    for (auto j : a) aa += d(i, j);
  for (auto i : b)
    for (auto j : b) bb += d(i, j);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  return 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
}

std::vector<Posture> blobs(Rng& rng, int per_blob, std::vector<Posture>& centres) {
  centres = {Posture(Eigen::Matrix3Xd(test::axis(0))), Posture(Eigen::Matrix3Xd(test::axis(1))),
             Posture(Eigen::Matrix3Xd(test::axis(2)))};
  std::vector<Posture> out;
  for (const auto& c : centres)
    for (int k = 0; k < per_blob; ++k) out.push_back(test::perturb(rng, c, 0.05));
  return out;
}

MotionSequence constant(const Posture& p, int length) { return MotionSequence(std::vector<Posture>(length, p)); }

}  // namespace

TEST(Disco, StatisticFormula) {
  Rng rng(1);
  const Eigen::MatrixXd d = random_metric(rng, 9);
  std::vector<char> in_a{1, 0, 1, 1, 0, 0, 1, 0, 0};
  std::vector<Eigen::Index> a, b;
  for (Eigen::Index i = 0; i < 9; ++i) (in_a[static_cast<std::size_t>(i)] ? a : b).push_back(i);
  EXPECT_NEAR(disco_stat(d, in_a), energy_oracle(d, a, b), 1e-12);
  EXPECT_GE(disco_stat(d, in_a), -1e-12);

  Eigen::Matrix2d pair;
  pair << 0.0, 1.5, 1.5, 0.0;
  EXPECT_NEAR(disco_stat(pair, {1, 0}), 3.0, 1e-15);

  const MotionSequence s = test::smooth_sequence(rng, 2, 8);
  const std::vector<MotionSequence> same(3, s);
  EXPECT_EQ(disco_stat(same, same), 0.0);
  EXPECT_THROW(disco_stat(d, std::vector<char>(9, 1)), Error);
}

TEST(Disco, ExhaustiveSmallSample) {
  Rng rng(2);
  const Eigen::MatrixXd d = random_metric(rng, 6);
  const DiscoResult r = disco_exhaustive(d, 3);
  EXPECT_EQ(r.permutations, 20);
  std::vector<char> labels{1, 1, 1, 0, 0, 0};
  const double observed = disco_stat(d, labels);
  int count = 0;
  for (int mask = 0; mask < 64; ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
    std::vector<char> l(6);
    for (int i = 0; i < 6; ++i) l[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    if (disco_stat(d, l) >= observed - 1e-12) ++count;
  }
  EXPECT_DOUBLE_EQ(r.p_value, count / 20.0);
  EXPECT_EQ(r.statistic, observed);
  EXPECT_TRUE(r.exhaustive);
}

TEST(Disco, PermutationPValue) {
  Rng rng(3);
  const Eigen::MatrixXd d = random_metric(rng, 12);
  const DiscoResult r = disco_test(d, 6, 199, 7);
  EXPECT_EQ(r.permutations, 199);
  EXPECT_GE(r.p_value, 1.0 / 200.0);
  EXPECT_LE(r.p_value, 1.0);
  const double scaled = r.p_value * 200.0;
  EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  EXPECT_EQ(disco_test(d, 6, 199, 7).p_value, r.p_value);
  EXPECT_THROW(disco_test(d, 0, 10, 1), Error);
  EXPECT_THROW(disco_test(d, 6, 0, 1), Error);

  // Two well separated groups: every relabelling is smaller.
  Eigen::MatrixXd far(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) far(i, j) = i == j ? 0.0 : ((i < 5) == (j < 5) ? 0.1 : 5.0);
  EXPECT_DOUBLE_EQ(disco_test(far, 5, 99, 1).p_value, 0.01);
}

TEST(Cluster, PlantedBlobs) {
  Rng rng(4);
  std::vector<Posture> centres;
  const auto pts = blobs(rng, 15, centres);
  const ClusterModel m = cluster_postures(pts, 3);
  ASSERT_EQ(m.k(), 3);
  for (int b = 0; b < 3; ++b)
    for (int k = 1; k < 15; ++k) EXPECT_EQ(m.labels[static_cast<std::size_t>(15 * b + k)], m.labels[static_cast<std::size_t>(15 * b)]);
  EXPECT_NE(m.labels[0], m.labels[15]);
  EXPECT_NE(m.labels[15], m.labels[30]);
  EXPECT_NE(m.labels[0], m.labels[30]);
  for (std::size_t i = 1; i < m.history.size(); ++i) EXPECT_LT(m.history[i], m.history[i - 1]);
  EXPECT_NEAR(m.objective, m.history.back(), 1e-4);

  const Eigen::MatrixXf dist = posture_distance_matrix(pts);
  EXPECT_EQ(select_k(pts, dist, 2, 6), 3);
  EXPECT_GT(silhouette(dist, m.labels), 0.8);

  const ClusterModel all = cluster_postures(pts, static_cast<int>(pts.size()));
  EXPECT_EQ(all.objective, 0.0);
  EXPECT_THROW(cluster_postures(pts, 0), Error);
}

TEST(Cluster, QuantizeAndVariability) {
  ClusterModel m;
  m.modes = {Posture(Eigen::Matrix3Xd(test::axis(0))), Posture(Eigen::Matrix3Xd(test::axis(1)))};
  const Vec3 mid = (test::axis(0) + test::axis(1)).normalized();
  const Vec3 near_y = (0.2 * test::axis(0) + test::axis(1)).normalized();
  const MotionSequence s(std::vector<Posture>{Posture(Eigen::Matrix3Xd(test::axis(0))), Posture(Eigen::Matrix3Xd(mid)),
                                              Posture(Eigen::Matrix3Xd(near_y))});
  const QuantizedSequence q = quantize(s, m);
  EXPECT_EQ(q, (QuantizedSequence{1, 1, 2}));

  EXPECT_EQ(variability(q, q), 0.0);
  EXPECT_EQ(variability({1, 1, 1}, {2, 2, 2}), 1.0);
  EXPECT_NEAR(variability({1, 2, 1, 2}, {1, 1, 1, 1}), 0.5, 1e-15);
  try {
    variability({1, 2}, {1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
  const std::vector<QuantizedSequence> set{{1, 1}, {1, 2}, {2, 2}};
  const VariabilityStats st = variability_stats(set, {1, 1});
  EXPECT_NEAR(st.mean, 0.5, 1e-15);
  EXPECT_NEAR(st.variance, 0.25, 1e-15);
  EXPECT_EQ(variability_stats(std::vector<QuantizedSequence>{{1, 2}}, {1, 1}).variance, 0.0);
}

TEST(Cluster, SamplePostures) {
  Rng rng(5);
  const std::vector<MotionSequence> seqs{test::smooth_sequence(rng, 2, 10), test::smooth_sequence(rng, 2, 10)};
  const auto all = sample_postures(seqs, 20, 1);
  EXPECT_EQ(all.size(), 20u);
  const auto some = sample_postures(seqs, 7, 3);
  ASSERT_EQ(some.size(), 7u);
  for (std::size_t i = 0; i < some.size(); ++i)
    for (std::size_t j = i + 1; j < some.size(); ++j) EXPECT_FALSE(some[i] == some[j]);
  EXPECT_EQ(sample_postures(seqs, 7, 3), some);
}

TEST(Roughness, KnownValues) {
  Rng rng(6);
  const Posture p = test::random_posture(rng, 3);
  for (double r : roughness(constant(p, 5))) EXPECT_EQ(r, 0.0);
  EXPECT_EQ(mean_roughness(constant(p, 5)), 0.0);

  std::vector<Posture> frames;
  for (int t = 0; t <= 8; ++t) {
    const double a = std::numbers::pi / 2 * t / 8;
    Eigen::Matrix3Xd b(3, 2);
    b.col(0) = Vec3(std::cos(a), std::sin(a), 0.0);
    b.col(1) = Vec3(0.0, std::cos(a), std::sin(a));
    frames.emplace_back(b);
  }
  const auto r = roughness(MotionSequence(frames));
  ASSERT_EQ(r.size(), 8u);
  for (double v : r) EXPECT_NEAR(v, std::numbers::pi / 8, 1e-12);
}

TEST(Mds, KnownTriangle) {
  Eigen::Matrix3d d;
  d << 0, 3, 4, 3, 0, 5, 4, 5, 0;
  const Eigen::MatrixXd x = mds_coords(d, 2);
  ASSERT_EQ(x.rows(), 3);
  ASSERT_EQ(x.cols(), 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR((x.row(i) - x.row(j)).norm(), d(i, j), 1e-8);
  EXPECT_LE(x.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(mds_coords(Eigen::MatrixXd::Zero(4, 4), 2).cwiseAbs().maxCoeff(), 0.0);

  Rng rng(7);
  const Posture p = test::random_posture(rng, 2);
  const std::vector<MotionSequence> same(3, constant(p, 4));
  EXPECT_EQ(mds_coords(same, 2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Quantile, Rule) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.125), 1.0);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.3), 1.7);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 1.0), 4.0);
}

TEST(Quantile, QqData) {
  Rng rng(8);
  std::vector<double> x(50);
  for (auto& v : x) v = standard_normal(rng, 1)(0);
  for (const auto& [a, b] : qq_data(x, x)) EXPECT_EQ(a, b);
  std::vector<double> shifted = x;
  for (auto& v : shifted) v -= 2.0;
  for (const auto& [a, b] : qq_data(x, shifted)) EXPECT_NEAR(b, a - 2.0, 1e-12);

  // Unequal sizes: the smaller set is used as is, the larger one interpolated.
  const std::vector<double> small{3.0, 1.0, 2.0};
  const std::vector<double> big{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  const auto qq = qq_data(small, big);
  ASSERT_EQ(qq.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    const double p = (k + 0.5) / 3.0;
    EXPECT_NEAR(qq[static_cast<std::size_t>(k)].first, k + 1.0, 1e-12);
    const double h = p * 6.0 - 0.5;
    EXPECT_NEAR(qq[static_cast<std::size_t>(k)].second, h, 1e-12);
  }
}

TEST(PointwiseMean, IdenticalAndSymmetric) {
  Rng rng(9);
  const MotionSequence s = test::smooth_sequence(rng, 2, 6);
  EXPECT_EQ(pointwise_mean(std::vector<MotionSequence>(3, s)), s);

  std::vector<Posture> a, b;
  for (int t = 0; t < 3; ++t) {
    a.emplace_back(Eigen::Matrix3Xd(test::axis(0)));
    b.emplace_back(Eigen::Matrix3Xd(test::axis(1)));
  }
  const MotionSequence m = pointwise_mean(std::vector<MotionSequence>{MotionSequence(a), MotionSequence(b)});
  const Vec3 mid = (test::axis(0) + test::axis(1)).normalized();
  for (Eigen::Index t = 0; t < 3; ++t) EXPECT_LE((m[t].bone(0) - mid).norm(), 1e-8);
}
