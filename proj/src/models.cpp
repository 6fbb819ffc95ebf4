#include "posemu/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "posemu/error.hpp"

namespace posemu {

namespace {

Eigen::VectorXd vec(const CoeffMatrix& a) { return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()); }

CoeffMatrix unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

void check_coeff_set(std::span<const CoeffMatrix> coeffs, const char* op) {
  require(coeffs.size() >= 2, ErrorKind::InsufficientData, std::string(op) + ": need at least 2 coefficient matrices");
  for (const auto& a : coeffs)
    require(a.rows() == coeffs.front().rows() && a.cols() == coeffs.front().cols(), ErrorKind::DimensionMismatch,
            std::string(op) + ": coefficient shapes differ");
}

double jitter_for(double trace, Eigen::Index d) { return d > 0 ? 1e-10 * trace / static_cast<double>(d) : 0.0; }

double log_norm_const(Eigen::Index d) { return -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi); }

std::string lowercase(std::string_view text) {
  std::string out;
  for (char c : text) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

MVGModel fit_mvg(std::span<const CoeffMatrix> coeffs) {
  check_coeff_set(coeffs, "fit_mvg");
  MVGModel model{coeffs.front().rows(), coeffs.front().cols(), {}, 0.0};
  const Eigen::Index d = model.dim();
  Eigen::MatrixXd data(d, static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t m = 0; m < coeffs.size(); ++m) data.col(static_cast<Eigen::Index>(m)) = vec(coeffs[m]);
  model.covariance = data * data.transpose() / static_cast<double>(coeffs.size() - 1);
  model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();
  model.jitter = jitter_for(model.covariance.trace(), d);
  return model;
}

IGModel fit_ig(std::span<const CoeffMatrix> coeffs) {
  const MVGModel full = fit_mvg(coeffs);
  return {full.rows, full.cols, full.covariance.diagonal(), full.jitter};
}

std::vector<CoeffMatrix> sample_coeffs(const MVGModel& model, std::size_t count, std::uint64_t seed) {
  const Eigen::Index d = model.dim();
  const Eigen::MatrixXd factor =
      symmetric_sqrt(model.covariance + model.jitter * Eigen::MatrixXd::Identity(d, d));
  Rng rng(seed);
  std::vector<CoeffMatrix> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(unvec(factor * standard_normal(rng, d), model.rows, model.cols));
  return out;
}

std::vector<CoeffMatrix> sample_coeffs(const IGModel& model, std::size_t count, std::uint64_t seed) {
  const Eigen::VectorXd sd = (model.variances.array().max(0.0) + model.jitter).sqrt();
  Rng rng(seed);
  std::vector<CoeffMatrix> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(unvec(sd.cwiseProduct(standard_normal(rng, model.dim())), model.rows, model.cols));
  return out;
}

double loglik(const CoeffMatrix& coeffs, const MVGModel& model) {
  require(coeffs.rows() == model.rows && coeffs.cols() == model.cols, ErrorKind::DimensionMismatch,
          "loglik: coefficient shape differs from the model");
  const Eigen::Index d = model.dim();
  const Eigen::VectorXd x = vec(coeffs);
  auto attempt = [&](const Eigen::MatrixXd& sigma, double floor, double& out) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    if (d > 0 && !(diag.array().square().minCoeff() > floor)) return false;
    const Eigen::VectorXd z = llt.matrixL().solve(x);
    out = log_norm_const(d) - diag.array().log().sum() - 0.5 * z.squaredNorm();
    return true;
  };
  double value = 0.0;
  if (attempt(model.covariance, model.jitter, value)) return value;
  if (model.jitter > 0.0 &&
      attempt(model.covariance + model.jitter * Eigen::MatrixXd::Identity(d, d), 0.0, value))
    return value;
  fail(ErrorKind::SingularCovariance, "loglik: covariance is singular even after jitter");
}

double loglik(const CoeffMatrix& coeffs, const IGModel& model) {
  require(coeffs.rows() == model.rows && coeffs.cols() == model.cols, ErrorKind::DimensionMismatch,
          "loglik: coefficient shape differs from the model");
  const Eigen::VectorXd x = vec(coeffs);
  Eigen::VectorXd var = model.variances;
  if (var.size() > 0 && !(var.minCoeff() > model.jitter)) var.array() += model.jitter;
  require(var.size() == 0 || var.minCoeff() > 0.0, ErrorKind::SingularCovariance,
          "loglik: zero variance even after jitter");
  return log_norm_const(model.dim()) - 0.5 * var.array().log().sum() - 0.5 * (x.array().square() / var.array()).sum();
}

VARModel fit_var(std::span<const Eigen::MatrixXd> series, const VAROptions& options) {
  require(!series.empty(), ErrorKind::InsufficientData, "fit_var: no series");
  require(options.order >= 1, ErrorKind::InvalidArgument, "fit_var: order must be at least 1");
  const int p = options.order;
  const Eigen::Index d = series.front().rows();
  const Eigen::Index k = d * p + 1;
  Eigen::Index n = 0;
  for (const auto& h : series) {
    require(h.rows() == d, ErrorKind::DimensionMismatch, "fit_var: series dimensions differ");
    n += std::max<Eigen::Index>(h.cols() - p, 0);
  }
  if (n <= k) {
    std::ostringstream os;
    os << "fit_var: " << n << " regression rows for " << k << " parameters";
    fail(ErrorKind::InsufficientData, os.str());
  }

  Eigen::MatrixXd x(n, k);
  Eigen::MatrixXd y(n, d);
  Eigen::Index row = 0;
  for (const auto& h : series) {
    for (Eigen::Index t = p; t < h.cols(); ++t, ++row) {
      for (int lag = 1; lag <= p; ++lag) x.block(row, (lag - 1) * d, 1, d) = h.col(t - lag).transpose();
      x(row, k - 1) = 1.0;
      y.row(row) = h.col(t).transpose();
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  VARModel model;
  model.order = p;
  model.rank = cod.rank();
  if (options.require_full_rank && model.rank < k) {
    std::ostringstream os;
    os << "fit_var: design rank " << model.rank << " < " << k;
    fail(ErrorKind::RankDeficient, os.str());
  }
  const Eigen::MatrixXd beta = cod.solve(y);  // k x d
  for (int lag = 1; lag <= p; ++lag) model.phi.push_back(beta.block((lag - 1) * d, 0, d, d).transpose());
  model.intercept = beta.row(k - 1).transpose();
  const Eigen::MatrixXd resid = y - x * beta;
  model.noise_cov = resid.transpose() * resid / static_cast<double>(n - k);
  model.noise_cov = 0.5 * (model.noise_cov + model.noise_cov.transpose()).eval();
  model.initial = series.front().leftCols(p);
  return model;
}

Eigen::MatrixXd simulate_var(const VARModel& model, Eigen::Index length, const Eigen::MatrixXd& init, Rng& rng) {
  const Eigen::Index d = model.dim();
  const int p = model.order;
  require(init.rows() == d && init.cols() >= p, ErrorKind::DimensionMismatch,
          "simulate_var: init must hold p columns of dimension d");
  require(length >= p, ErrorKind::InvalidArgument, "simulate_var: length shorter than the order");
  const Eigen::MatrixXd factor = symmetric_sqrt(model.noise_cov);
  Eigen::MatrixXd h(d, length);
  h.leftCols(p) = init.leftCols(p);
  for (Eigen::Index t = p; t < length; ++t) {
    Eigen::VectorXd next = model.intercept;
    for (int lag = 1; lag <= p; ++lag) next.noalias() += model.phi[static_cast<std::size_t>(lag - 1)] * h.col(t - lag);
    next.noalias() += factor * standard_normal(rng, d);
    h.col(t) = next;
  }
  return h;
}

PWIModel fit_pwi(std::span<const MotionSequence> seqs, bool diagonal) {
  require(seqs.size() >= 2, ErrorKind::InsufficientData, "fit_pwi: need at least 2 sequences");
  const Eigen::Index T = seqs.front().length();
  for (const auto& s : seqs)
    require(s.length() == T && s.bone_count() == seqs.front().bone_count(), ErrorKind::DimensionMismatch,
            "fit_pwi: sequences differ in shape");
  PWIModel model;
  model.diagonal = diagonal;
  model.mean.resize(static_cast<std::size_t>(T));
  model.covariance.resize(static_cast<std::size_t>(T));
  const double scale = 1.0 / static_cast<double>(seqs.size() - 1);
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t t) {
    std::vector<Posture> slice;
    slice.reserve(seqs.size());
    for (const auto& s : seqs) slice.push_back(s[static_cast<Eigen::Index>(t)]);
    Posture mu = karcher_mean(slice);
    const TangentBasis basis(mu);
    Eigen::MatrixXd v(basis.dim(), static_cast<Eigen::Index>(slice.size()));
    for (std::size_t m = 0; m < slice.size(); ++m)
      v.col(static_cast<Eigen::Index>(m)) = basis.coords(posture_log(mu, slice[m]));
    Eigen::MatrixXd cov = v * v.transpose() * scale;
    cov = 0.5 * (cov + cov.transpose()).eval();
    if (diagonal) cov = Eigen::MatrixXd(cov.diagonal().asDiagonal());
    model.mean[t] = std::move(mu);
    model.covariance[t] = std::move(cov);
  });
  return model;
}

std::vector<MotionSequence> sample_pwi(const PWIModel& model, std::size_t count, std::uint64_t seed) {
  const auto T = static_cast<std::size_t>(model.length());
  std::vector<Eigen::MatrixXd> factors(T);
  std::vector<TangentBasis> bases;
  bases.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    factors[t] = symmetric_sqrt(model.covariance[t]);
    bases.emplace_back(model.mean[t]);
  }
  std::vector<MotionSequence> out(count);
  parallel_for(count, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    std::vector<Posture> frames;
    frames.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      const Eigen::VectorXd v = factors[t] * standard_normal(rng, factors[t].rows());
      frames.push_back(posture_exp(model.mean[t], bases[t].tangent(v)));
    }
    out[k] = MotionSequence(std::move(frames));
  });
  return out;
}

std::string_view to_string(DimRedKind kind) {
  switch (kind) {
    case DimRedKind::SeqPCA: return "seqpca";
    case DimRedKind::MPCA: return "mpca";
    case DimRedKind::None: return "none";
  }
  return "?";
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::MVG: return "mvg";
    case ModelKind::IG: return "ig";
    case ModelKind::VAR: return "var";
    case ModelKind::PWI: return "pwi";
  }
  return "?";
}

Scheme Scheme::parse(std::string_view text) {
  const std::string key = lowercase(text);
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const std::size_t slash = key.find('/', begin);
    parts.push_back(key.substr(begin, slash == std::string::npos ? std::string::npos : slash - begin));
    if (slash == std::string::npos) break;
    begin = slash + 1;
  }
  Scheme s;
  if (parts.size() == 1 && parts[0] == "pwi") {
    s.repr = FlatKind::SIEM;
    s.dimred = DimRedKind::None;
    s.model = ModelKind::PWI;
    return s;
  }
  if (parts.size() != 3) fail(ErrorKind::ConfigError, "scheme must look like <repr>/<dimred>/<model>: '" + key + "'");
  s.repr = parse_flat_kind(parts[0]);
  if (parts[1] == "seqpca" || parts[1] == "pca") {
    s.dimred = DimRedKind::SeqPCA;
  } else if (parts[1] == "mpca") {
    s.dimred = DimRedKind::MPCA;
  } else if (parts[1] == "none" || parts[1] == "-") {
    s.dimred = DimRedKind::None;
  } else {
    fail(ErrorKind::ConfigError, "unknown dimension reduction '" + parts[1] + "'");
  }
  if (parts[2] == "mvg") {
    s.model = ModelKind::MVG;
  } else if (parts[2] == "ig") {
    s.model = ModelKind::IG;
  } else if (parts[2] == "var") {
    s.model = ModelKind::VAR;
  } else if (parts[2] == "pwi") {
    s.model = ModelKind::PWI;
  } else {
    fail(ErrorKind::ConfigError, "unknown model '" + parts[2] + "'");
  }
  if (s.model == ModelKind::PWI) {
    s.dimred = DimRedKind::None;
  } else if (s.dimred == DimRedKind::None) {
    fail(ErrorKind::ConfigError, "model '" + parts[2] + "' needs a dimension reduction");
  }
  if (s.model == ModelKind::VAR && s.dimred != DimRedKind::SeqPCA)
    fail(ErrorKind::ConfigError, "var runs on spatial PCA scores; use seqpca");
  return s;
}

std::string Scheme::str() const {
  if (model == ModelKind::PWI) return "pwi";
  return lowercase(to_string(repr)) + "/" + std::string(to_string(dimred)) + "/" + std::string(to_string(model));
}

std::string_view to_string(StartPolicy policy) {
  switch (policy) {
    case StartPolicy::TrainingMean: return "training-mean";
    case StartPolicy::Fixed: return "fixed";
    case StartPolicy::Sampled: return "sampled";
  }
  return "?";
}

StartPolicy parse_start_policy(std::string_view text) {
  const std::string key = lowercase(text);
  if (key == "training-mean" || key == "mean") return StartPolicy::TrainingMean;
  if (key == "fixed") return StartPolicy::Fixed;
  if (key == "sampled") return StartPolicy::Sampled;
  fail(ErrorKind::ConfigError, "unknown start policy '" + std::string(text) + "'");
}

namespace {

Eigen::Index choose_mpca_dim(const Eigen::MatrixXd& scatter, const DimSelection& sel) {
  const Eigen::Index full = scatter.rows();
  if (sel.fixed) return std::clamp<Eigen::Index>(*sel.fixed, 1, full);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter, Eigen::EigenvaluesOnly);
  return std::clamp<Eigen::Index>(select_dims(es.eigenvalues().reverse(), sel.threshold), 1, full);
}

}  // namespace

FlatField bundle_encode(const EmulatorBundle& bundle, const MotionSequence& seq) {
  require(seq.length() == bundle.length && seq.bone_count() == bundle.bones, ErrorKind::DimensionMismatch,
          "sequence shape differs from the bundle");
  return flatten_encode(bundle.scheme.repr, seq, bundle.reference);
}

CoeffMatrix bundle_coefficients(const EmulatorBundle& bundle, const MotionSequence& seq) {
  const FlatField field = bundle_encode(bundle, seq);
  if (bundle.scheme.dimred == DimRedKind::SeqPCA && bundle.spatial && bundle.fpca)
    return fpca_project(spatial_project(field.values, *bundle.spatial), *bundle.fpca);
  if (bundle.scheme.dimred == DimRedKind::MPCA && bundle.mpca) return mpca_project(field.values, *bundle.mpca);
  fail(ErrorKind::KindMismatch, "bundle '" + bundle.scheme.str() + "' has no coefficient representation");
}

double bundle_loglik(const EmulatorBundle& bundle, const MotionSequence& seq) {
  const CoeffMatrix a = bundle_coefficients(bundle, seq);
  if (const auto* mvg = std::get_if<MVGModel>(&bundle.model)) return loglik(a, *mvg);
  if (const auto* ig = std::get_if<IGModel>(&bundle.model)) return loglik(a, *ig);
  fail(ErrorKind::KindMismatch, "loglik needs an mvg or ig bundle, got '" + bundle.scheme.str() + "'");
}

namespace {

MotionSequence decode_values(const EmulatorBundle& bundle, Eigen::MatrixXd values, const Posture& start) {
  FlatField field{bundle.scheme.repr, bundle.reference, start, std::move(values),
                  1.0 / static_cast<double>(bundle.length - 1)};
  return flatten_decode(field);
}

}  // namespace

MotionSequence decode_coefficients(const EmulatorBundle& bundle, const CoeffMatrix& coeffs, const Posture& start) {
  if (bundle.scheme.dimred == DimRedKind::SeqPCA && bundle.spatial && bundle.fpca)
    return decode_values(bundle, spatial_reconstruct(fpca_reconstruct(coeffs, *bundle.fpca), *bundle.spatial), start);
  if (bundle.scheme.dimred == DimRedKind::MPCA && bundle.mpca)
    return decode_values(bundle, mpca_reconstruct(coeffs, *bundle.mpca), start);
  fail(ErrorKind::KindMismatch, "bundle '" + bundle.scheme.str() + "' has no coefficient representation");
}

Reduction fit_reduction(std::span<const FlatField> fields, const Scheme& scheme, const DimSelection& spatial,
                        const DimSelection& temporal) {
  require(fields.size() >= 2, ErrorKind::InsufficientData, "fit_reduction: need at least 2 fields");
  std::vector<Eigen::MatrixXd> values;
  values.reserve(fields.size());
  for (const auto& f : fields) {
    require(f.kind == scheme.repr, ErrorKind::KindMismatch,
            "fit_reduction: field kind " + std::string(to_string(f.kind)) + " differs from scheme '" + scheme.str() + "'");
    values.push_back(f.values);
  }
  Reduction r;
  r.kind = scheme.dimred;
  if (scheme.dimred == DimRedKind::MPCA) {
    const Eigen::Index I1 = values.front().rows();
    const Eigen::Index I2 = values.front().cols();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(I1, I2);
    for (const auto& f : values) mean += f;
    mean /= static_cast<double>(values.size());
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(I1, I1);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(I2, I2);
    for (const auto& f : values) {
      const Eigen::MatrixXd c = f - mean;
      s1.noalias() += c * c.transpose();
      s2.noalias() += c.transpose() * c;
    }
    r.mpca = mpca_fit(values, choose_mpca_dim(s1, spatial), choose_mpca_dim(s2, temporal));
    return r;
  }
  require(scheme.dimred == DimRedKind::SeqPCA, ErrorKind::ConfigError,
          "scheme '" + scheme.str() + "' has no dimension reduction");
  r.spatial = spatial_pca_fit(std::span<const Eigen::MatrixXd>(values), spatial);
  require(r.spatial->dims() > 0, ErrorKind::InsufficientData, "fit_reduction: training data has no spatial variance");
  if (scheme.model == ModelKind::VAR) return r;
  std::vector<Eigen::MatrixXd> scores;
  scores.reserve(values.size());
  for (const auto& f : values) scores.push_back(spatial_project(f, *r.spatial));
  r.fpca = fpca_fit(scores, fields.front().dt, temporal);
  return r;
}

CoeffMatrix reduce_field(const Eigen::MatrixXd& values, const Reduction& reduction) {
  if (reduction.mpca) return mpca_project(values, *reduction.mpca);
  require(reduction.spatial.has_value(), ErrorKind::ConfigError, "reduction has no spatial PCA");
  const Eigen::MatrixXd h = spatial_project(values, *reduction.spatial);
  return reduction.fpca ? fpca_project(h, *reduction.fpca) : h;
}

EmulatorBundle fit_bundle_from_fields(std::span<const FlatField> fields, const Reduction& reduction,
                                      const FitOptions& options) {
  require(fields.size() >= 2, ErrorKind::InsufficientData, "fit_bundle: need at least 2 fields");
  require(options.scheme.model != ModelKind::PWI, ErrorKind::ConfigError, "pwi is fitted on sequences, not fields");
  require(reduction.kind == options.scheme.dimred, ErrorKind::ConfigError,
          "reduction kind differs from scheme '" + options.scheme.str() + "'");
  EmulatorBundle bundle;
  bundle.scheme = options.scheme;
  bundle.reference = fields.front().reference;
  bundle.bones = bundle.reference.bone_count();
  bundle.length = fields.front().sequence_length();
  for (const auto& f : fields) {
    require(f.kind == options.scheme.repr, ErrorKind::KindMismatch, "fit_bundle: field kind differs from the scheme");
    require(f.sequence_length() == bundle.length && f.values.rows() == 2 * bundle.bones, ErrorKind::DimensionMismatch,
            "fit_bundle: fields differ in shape");
    require(f.reference == bundle.reference, ErrorKind::ReferenceMismatch, "fit_bundle: fields use different references");
  }
  bundle.spatial = reduction.spatial;
  bundle.fpca = reduction.fpca;
  bundle.mpca = reduction.mpca;

  bundle.start_policy = options.start_policy;
  std::vector<Posture> starts;
  starts.reserve(fields.size());
  for (const auto& f : fields) starts.push_back(f.start);
  switch (options.start_policy) {
    case StartPolicy::TrainingMean: bundle.start = karcher_mean(starts); break;
    case StartPolicy::Fixed:
      require(options.fixed_start.has_value(), ErrorKind::ConfigError, "start policy 'fixed' needs a start posture");
      require(options.fixed_start->bone_count() == bundle.bones, ErrorKind::DimensionMismatch,
              "fixed start posture bone count differs from the data");
      bundle.start = *options.fixed_start;
      break;
    case StartPolicy::Sampled:
      bundle.start = starts.front();
      bundle.start_pool = starts;
      break;
  }

  std::vector<CoeffMatrix> coeffs;
  coeffs.reserve(fields.size());
  for (const auto& f : fields) coeffs.push_back(reduce_field(f.values, reduction));
  switch (options.scheme.model) {
    case ModelKind::VAR:
      if (options.pool_var) {
        bundle.model = fit_var(coeffs, options.var);
      } else {
        const std::size_t pick = derive_seed(options.seed, 0) % coeffs.size();
        bundle.model = fit_var(std::span<const Eigen::MatrixXd>(&coeffs[pick], 1), options.var);
        bundle.provenance["var_sequence"] = std::to_string(pick);
      }
      break;
    case ModelKind::MVG: bundle.model = fit_mvg(coeffs); break;
    case ModelKind::IG: bundle.model = fit_ig(coeffs); break;
    case ModelKind::PWI: break;
  }
  return bundle;
}

EmulatorBundle fit_bundle(std::span<const MotionSequence> aligned, const FitOptions& options) {
  require(aligned.size() >= 2, ErrorKind::InsufficientData, "fit_bundle: need at least 2 sequences");
  for (const auto& s : aligned)
    require(s.length() == aligned.front().length() && s.bone_count() == aligned.front().bone_count(),
            ErrorKind::DimensionMismatch, "fit_bundle: sequences differ in shape");
  if (options.scheme.model == ModelKind::PWI) {
    EmulatorBundle bundle;
    bundle.scheme = options.scheme;
    bundle.length = aligned.front().length();
    bundle.bones = aligned.front().bone_count();
    bundle.model = fit_pwi(aligned, options.pwi_diagonal);
    bundle.reference = std::get<PWIModel>(bundle.model).mean.front();
    bundle.start = bundle.reference;
    return bundle;
  }
  const Posture reference = options.reference ? *options.reference : pooled_reference(aligned);
  std::vector<FlatField> fields(aligned.size());
  parallel_for(aligned.size(), [&](std::size_t m) { fields[m] = flatten_encode(options.scheme.repr, aligned[m], reference); });
  const Reduction reduction = fit_reduction(fields, options.scheme, options.spatial, options.temporal);
  return fit_bundle_from_fields(fields, reduction, options);
}

std::vector<MotionSequence> simulate_sequence(const EmulatorBundle& bundle, std::size_t count, std::uint64_t seed) {
  if (const auto* pwi = std::get_if<PWIModel>(&bundle.model)) return sample_pwi(*pwi, count, seed);
  require(!std::holds_alternative<std::monostate>(bundle.model), ErrorKind::ConfigError, "bundle has no fitted model");

  Eigen::MatrixXd var_factor;
  Eigen::MatrixXd coeff_factor;
  Eigen::VectorXd coeff_sd;
  if (const auto* mvg = std::get_if<MVGModel>(&bundle.model)) {
    coeff_factor = symmetric_sqrt(mvg->covariance + mvg->jitter * Eigen::MatrixXd::Identity(mvg->dim(), mvg->dim()));
  } else if (const auto* ig = std::get_if<IGModel>(&bundle.model)) {
    coeff_sd = (ig->variances.array().max(0.0) + ig->jitter).sqrt();
  }

  std::vector<MotionSequence> out(count);
  parallel_for(count, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    const Posture& start = bundle.start_policy == StartPolicy::Sampled && !bundle.start_pool.empty()
                               ? bundle.start_pool[rng() % bundle.start_pool.size()]
                               : bundle.start;
    if (const auto* var = std::get_if<VARModel>(&bundle.model)) {
      const Eigen::Index L = bundle.scheme.repr == FlatKind::SIEM ? bundle.length : bundle.length - 1;
      const Eigen::MatrixXd h = simulate_var(*var, L, var->initial, rng);
      out[k] = decode_values(bundle, spatial_reconstruct(h, *bundle.spatial), start);
      return;
    }
    CoeffMatrix a;
    if (const auto* mvg = std::get_if<MVGModel>(&bundle.model)) {
      a = unvec(coeff_factor * standard_normal(rng, mvg->dim()), mvg->rows, mvg->cols);
    } else {
      const auto& ig = std::get<IGModel>(bundle.model);
      a = unvec(coeff_sd.cwiseProduct(standard_normal(rng, ig.dim())), ig.rows, ig.cols);
    }
    out[k] = decode_coefficients(bundle, a, start);
  });
  return out;
}

}  // namespace posemu
