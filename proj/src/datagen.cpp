#include "posemu/datagen.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "posemu/error.hpp"
#include "posemu/random.hpp"

namespace posemu {

void SynthConfig::validate() const {
  std::ostringstream os;
  if (landmarks < 3) os << "landmarks must be >= 3; ";
  if (frames < 10) os << "frames must be >= 10; ";
  if (sequences < 1) os << "sequences must be >= 1; ";
  if (!(bandwidth > 0.0)) os << "bandwidth must be positive; ";
  if (!(amplitude >= 0.0 && amplitude < std::numbers::pi / 2)) os << "amplitude must lie in [0, pi/2); ";
  if (!(warp_strength >= 0.0 && warp_strength < 1.0)) os << "warp strength must lie in [0, 1); ";
  if (!(noise_scale >= 0.0)) os << "noise scale must be nonnegative; ";
  const std::string msg = os.str();
  if (!msg.empty()) fail(ErrorKind::ConfigError, "synth config: " + msg.substr(0, msg.size() - 2));
}

Eigen::MatrixXd smooth_noise(Rng& rng, Eigen::Index length, Eigen::Index channels, double sigma) {
  const auto half = static_cast<Eigen::Index>(std::ceil(3.0 * sigma));
  Eigen::VectorXd kernel(2 * half + 1);
  for (Eigen::Index k = -half; k <= half; ++k) {
    const double x = static_cast<double>(k) / std::max(sigma, 1e-12);
    kernel(k + half) = std::exp(-0.5 * x * x);
  }
  kernel /= kernel.norm();
  Eigen::MatrixXd out(length, channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const Eigen::VectorXd white = standard_normal(rng, length + 2 * half);
    for (Eigen::Index t = 0; t < length; ++t) out(t, c) = kernel.dot(white.segment(t, 2 * half + 1));
  }
  return out;
}

WarpFunction random_warp(Rng& rng, Eigen::Index length, double strength, double sigma) {
  const Eigen::VectorXd rate = smooth_noise(rng, length - 1, 1, sigma).col(0).array().exp();
  Eigen::VectorXd s(length);
  s(0) = 0.0;
  for (Eigen::Index k = 1; k < length; ++k) s(k) = s(k - 1) + rate(k - 1);
  s /= s(length - 1);
  const Eigen::VectorXd id = Eigen::VectorXd::LinSpaced(length, 0.0, 1.0);
  Eigen::VectorXd g = (1.0 - strength) * id + strength * s;
  g(0) = 0.0;
  g(length - 1) = 1.0;
  return WarpFunction(std::move(g));
}

namespace {

Posture random_posture(Rng& rng, Eigen::Index bones) {
  Eigen::Matrix3Xd b(3, bones);
  for (Eigen::Index i = 0; i < bones; ++i) {
    Vec3 v = standard_normal(rng, 3);
    while (v.norm() < 1e-6) v = standard_normal(rng, 3);
    b.col(i) = v.normalized();
  }
  return Posture(std::move(b));
}

double sigma_frames(const SynthConfig& cfg) { return cfg.bandwidth * static_cast<double>(cfg.frames); }

}  // namespace

MotionSequence class_template(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0));
  const Eigen::Index bones = cfg.landmarks - 1;
  const Posture base = random_posture(rng, bones);
  const TangentBasis basis(base);
  Eigen::MatrixXd curves = smooth_noise(rng, cfg.frames, 2 * bones, sigma_frames(cfg));
  for (Eigen::Index i = 0; i < bones; ++i) {
    const double peak = curves.middleCols(2 * i, 2).rowwise().norm().maxCoeff();
    curves.middleCols(2 * i, 2) *= peak > 0.0 ? cfg.amplitude / peak : 0.0;
  }
  std::vector<Posture> frames;
  frames.reserve(static_cast<std::size_t>(cfg.frames));
  for (Eigen::Index t = 0; t < cfg.frames; ++t)
    frames.push_back(posture_exp(base, basis.tangent(curves.row(t).transpose())));
  return MotionSequence(std::move(frames));
}

std::vector<MotionSequence> gen_class(const SynthConfig& cfg) {
  const MotionSequence tmpl = class_template(cfg);
  const Posture& base = tmpl[0];
  const TangentBasis basis(base);
  const Eigen::Index bones = cfg.landmarks - 1;
  std::vector<MotionSequence> out(cfg.sequences);
  parallel_for(cfg.sequences, [&](std::size_t m) {
    Rng rng(derive_seed(cfg.seed, m + 1));
    MotionSequence seq = tmpl;
    if (cfg.warp_strength > 0.0)
      seq = warp_sequence(tmpl, random_warp(rng, cfg.frames, cfg.warp_strength, sigma_frames(cfg)));
    if (cfg.noise_scale > 0.0) {
      const Eigen::MatrixXd noise = smooth_noise(rng, cfg.frames, 2 * bones, sigma_frames(cfg)) * cfg.noise_scale;
      std::vector<Posture> frames;
      frames.reserve(static_cast<std::size_t>(cfg.frames));
      for (Eigen::Index t = 0; t < cfg.frames; ++t) {
        const TangentField v = posture_transport(base, seq[t], basis.tangent(noise.row(t).transpose()));
        frames.push_back(posture_exp(seq[t], v));
      }
      seq = MotionSequence(std::move(frames));
    }
    out[m] = std::move(seq);
  });
  return out;
}

MixtureConfig MixtureConfig::defaults(std::uint64_t seed) {
  MixtureConfig cfg;
  for (std::uint64_t c = 0; c < 5; ++c) {
    SynthConfig s;
    s.landmarks = 21;
    s.frames = 1000;
    s.sequences = 60;
    s.seed = derive_seed(seed, c);
    cfg.classes.push_back(s);
  }
  cfg.downsample_to = 301;
  return cfg;
}

LabeledDataset gen_mixture(const MixtureConfig& cfg) {
  LabeledDataset data;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    for (auto& seq : gen_class(cfg.classes[c])) {
      data.sequences.push_back(cfg.downsample_to ? downsample(seq, *cfg.downsample_to) : std::move(seq));
      data.labels.push_back(static_cast<int>(c));
    }
  }
  return data;
}

}  // namespace posemu
