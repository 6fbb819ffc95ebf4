#include "posemu/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "posemu/error.hpp"

namespace posemu {

void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

Eigen::Index spectrum_rank(const Eigen::VectorXd& spectrum) {
  if (spectrum.size() == 0) return 0;
  const double top = spectrum.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<Eigen::Index>((spectrum.array() > 1e-12 * top).count());
}

Eigen::Index select_dims(const Eigen::VectorXd& spectrum, double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, ErrorKind::InvalidArgument,
          "select_dims: threshold must lie in (0, 1]");
  const Eigen::VectorXd clipped = spectrum.cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0)) return 0;
  if (threshold == 1.0) return spectrum_rank(clipped);
  double running = 0.0;
  for (Eigen::Index d = 0; d < clipped.size(); ++d) {
    running += clipped(d);
    if (running >= threshold * total) return d + 1;
  }
  return spectrum_rank(clipped);
}

namespace {

// Eigenpairs of a symmetric matrix, descending, signs canonicalized.
void sorted_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  require(es.info() == Eigen::Success, ErrorKind::NoConvergence, "symmetric eigensolver failed");
  values = es.eigenvalues().reverse().cwiseMax(0.0);
  vectors = es.eigenvectors().rowwise().reverse();
  canonicalize_signs(vectors);
}

}  // namespace

SpatialPCA spatial_pca_fit(std::span<const Eigen::MatrixXd> fields, const DimSelection& selection) {
  require(!fields.empty(), ErrorKind::InsufficientData, "spatial_pca_fit: no fields");
  const Eigen::Index D = fields.front().rows();
  Eigen::Index count = 0;
  for (const auto& f : fields) {
    require(f.rows() == D && f.cols() == fields.front().cols(), ErrorKind::DimensionMismatch,
            "spatial_pca_fit: fields differ in shape");
    count += f.cols();
  }
  require(count >= 2, ErrorKind::InsufficientData, "spatial_pca_fit: fewer than 2 pooled columns");

  SpatialPCA pca;
  pca.mean = Eigen::VectorXd::Zero(D);
  for (const auto& f : fields) pca.mean += f.rowwise().sum();
  pca.mean /= static_cast<double>(count);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(D, D);
  for (const auto& f : fields) {
    const Eigen::MatrixXd c = f.colwise() - pca.mean;
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  scatter = scatter.selfadjointView<Eigen::Lower>();
  scatter /= static_cast<double>(count - 1);

  Eigen::MatrixXd vectors;
  sorted_eigen(scatter, pca.eigenvalues, vectors);
  // Centering leaves rounding residue of order eps^2 |x|^2 when all columns agree.
  const double floor = 1e-20 * (pca.mean.squaredNorm() + scatter.trace());
  pca.eigenvalues = (pca.eigenvalues.array() > floor).select(pca.eigenvalues, 0.0);
  const Eigen::Index rank = spectrum_rank(pca.eigenvalues);
  Eigen::Index d1;
  if (selection.fixed) {
    require(*selection.fixed >= 0, ErrorKind::InvalidArgument, "spatial_pca_fit: negative d1");
    d1 = std::min({*selection.fixed, rank, D});
  } else {
    d1 = select_dims(pca.eigenvalues, selection.threshold);
    pca.threshold = selection.threshold;
  }
  pca.basis = vectors.leftCols(d1);
  return pca;
}

SpatialPCA spatial_pca_fit(std::span<const FlatField> fields, const DimSelection& selection) {
  std::vector<Eigen::MatrixXd> values;
  values.reserve(fields.size());
  for (const auto& f : fields) {
    require(f.kind == fields.front().kind, ErrorKind::KindMismatch, "spatial_pca_fit: mixed field kinds");
    values.push_back(f.values);
  }
  return spatial_pca_fit(std::span<const Eigen::MatrixXd>(values), selection);
}

Eigen::MatrixXd spatial_project(const Eigen::MatrixXd& field, const SpatialPCA& pca) {
  require(field.rows() == pca.mean.size(), ErrorKind::DimensionMismatch,
          "spatial_project: field rows differ from the PCA dimension");
  return pca.basis.transpose() * (field.colwise() - pca.mean);
}

Eigen::MatrixXd spatial_reconstruct(const Eigen::MatrixXd& scores, const SpatialPCA& pca) {
  require(scores.rows() == pca.dims(), ErrorKind::DimensionMismatch,
          "spatial_reconstruct: score rows differ from d1");
  Eigen::MatrixXd g = pca.basis * scores;
  g.colwise() += pca.mean;
  return g;
}

FPCABasis fpca_fit(std::span<const Eigen::MatrixXd> scores, double dt, const DimSelection& selection) {
  require(scores.size() >= 2, ErrorKind::InsufficientData, "fpca_fit: need at least 2 score matrices");
  require(dt > 0.0, ErrorKind::InvalidArgument, "fpca_fit: dt must be positive");
  const Eigen::Index d1 = scores.front().rows();
  const Eigen::Index L = scores.front().cols();
  for (const auto& h : scores)
    require(h.rows() == d1 && h.cols() == L, ErrorKind::DimensionMismatch, "fpca_fit: score shapes differ");
  const auto M = static_cast<Eigen::Index>(scores.size());

  FPCABasis out;
  out.dt = dt;
  out.dims.resize(static_cast<std::size_t>(d1));
  std::vector<Eigen::MatrixXd> vectors(static_cast<std::size_t>(d1));
  Eigen::Index d2 = 0;
  for (Eigen::Index i = 0; i < d1; ++i) {
    Eigen::MatrixXd data(L, M);
    for (Eigen::Index m = 0; m < M; ++m) data.col(m) = scores[static_cast<std::size_t>(m)].row(i).transpose();
    auto& comp = out.dims[static_cast<std::size_t>(i)];
    comp.mean = data.rowwise().mean();
    data.colwise() -= comp.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeFullU);
    comp.eigenvalues = Eigen::VectorXd::Zero(L);
    const Eigen::VectorXd& s = svd.singularValues();
    comp.eigenvalues.head(s.size()) = s.array().square() / static_cast<double>(M - 1) * dt;
    vectors[static_cast<std::size_t>(i)] = svd.matrixU();
    canonicalize_signs(vectors[static_cast<std::size_t>(i)]);

    const Eigen::Index wanted = selection.fixed ? std::min(*selection.fixed, L)
                                                : select_dims(comp.eigenvalues, selection.threshold);
    d2 = std::max(d2, wanted);
  }
  if (!selection.fixed) out.threshold = selection.threshold;
  const double scale = 1.0 / std::sqrt(dt);
  for (Eigen::Index i = 0; i < d1; ++i)
    out.dims[static_cast<std::size_t>(i)].basis = vectors[static_cast<std::size_t>(i)].leftCols(d2) * scale;
  return out;
}

CoeffMatrix fpca_project(const Eigen::MatrixXd& scores, const FPCABasis& basis) {
  require(scores.rows() == basis.d1() && scores.cols() == basis.length(), ErrorKind::DimensionMismatch,
          "fpca_project: score matrix shape differs from the basis");
  CoeffMatrix a(basis.d1(), basis.d2());
  for (Eigen::Index i = 0; i < basis.d1(); ++i) {
    const auto& comp = basis.dims[static_cast<std::size_t>(i)];
    const Eigen::VectorXd centred = scores.row(i).transpose() - comp.mean;
    a.row(i) = (comp.basis.transpose() * centred).transpose() * basis.dt;
  }
  return a;
}

Eigen::MatrixXd fpca_reconstruct(const CoeffMatrix& coeffs, const FPCABasis& basis) {
  require(coeffs.rows() == basis.d1() && coeffs.cols() == basis.d2(), ErrorKind::DimensionMismatch,
          "fpca_reconstruct: coefficient shape differs from the basis");
  Eigen::MatrixXd h(basis.d1(), basis.length());
  for (Eigen::Index i = 0; i < basis.d1(); ++i) {
    const auto& comp = basis.dims[static_cast<std::size_t>(i)];
    h.row(i) = (comp.mean + comp.basis * coeffs.row(i).transpose()).transpose();
  }
  return h;
}

namespace {

Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& scatter, Eigen::Index count) {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  sorted_eigen(scatter, values, vectors);
  return vectors.leftCols(count);
}

}  // namespace

MPCAModel mpca_fit(std::span<const Eigen::MatrixXd> tensors, Eigen::Index d1, Eigen::Index d2,
                   const MpcaOptions& options) {
  require(tensors.size() >= 2, ErrorKind::InsufficientData, "mpca_fit: need at least 2 tensors");
  const Eigen::Index I1 = tensors.front().rows();
  const Eigen::Index I2 = tensors.front().cols();
  for (const auto& x : tensors)
    require(x.rows() == I1 && x.cols() == I2, ErrorKind::DimensionMismatch, "mpca_fit: tensor shapes differ");
  require(d1 >= 1 && d1 <= I1 && d2 >= 1 && d2 <= I2, ErrorKind::InvalidArgument,
          "mpca_fit: projection dims out of range");

  MPCAModel model;
  model.mean = Eigen::MatrixXd::Zero(I1, I2);
  for (const auto& x : tensors) model.mean += x;
  model.mean /= static_cast<double>(tensors.size());
  std::vector<Eigen::MatrixXd> centred;
  centred.reserve(tensors.size());
  for (const auto& x : tensors) {
    centred.push_back(x - model.mean);
    model.total_scatter += centred.back().squaredNorm();
  }

  Eigen::MatrixXd u2 = Eigen::MatrixXd::Identity(I2, I2);
  double previous = -1.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(I1, I1);
    for (const auto& x : centred) {
      const Eigen::MatrixXd p = x * u2;
      s1.selfadjointView<Eigen::Lower>().rankUpdate(p);
    }
    s1 = s1.selfadjointView<Eigen::Lower>();
    model.u1 = top_eigenvectors(s1, d1);

    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(I2, I2);
    for (const auto& x : centred) {
      const Eigen::MatrixXd p = x.transpose() * model.u1;
      s2.selfadjointView<Eigen::Lower>().rankUpdate(p);
    }
    s2 = s2.selfadjointView<Eigen::Lower>();
    u2 = top_eigenvectors(s2, d2);
    model.u2 = u2;

    double captured = 0.0;
    for (const auto& x : centred) captured += (model.u1.transpose() * x * u2).squaredNorm();
    model.captured.push_back(captured);
    model.iterations = iter + 1;
    if (previous >= 0.0 && captured - previous < options.tolerance * std::max(model.total_scatter, 1e-300)) {
      model.converged = true;
      break;
    }
    if (model.total_scatter == 0.0 || captured >= model.total_scatter * (1.0 - 1e-15)) {
      model.converged = true;
      break;
    }
    previous = captured;
  }
  return model;
}

CoeffMatrix mpca_project(const Eigen::MatrixXd& tensor, const MPCAModel& model) {
  require(tensor.rows() == model.mean.rows() && tensor.cols() == model.mean.cols(), ErrorKind::DimensionMismatch,
          "mpca_project: tensor shape differs from the model");
  return model.u1.transpose() * (tensor - model.mean) * model.u2;
}

Eigen::MatrixXd mpca_reconstruct(const CoeffMatrix& core, const MPCAModel& model) {
  require(core.rows() == model.u1.cols() && core.cols() == model.u2.cols(), ErrorKind::DimensionMismatch,
          "mpca_reconstruct: core shape differs from the model");
  return model.mean + model.u1 * core * model.u2.transpose();
}

double seq_recon_error(const MotionSequence& original, const MotionSequence& reconstructed) {
  return seq_dist(original, reconstructed);
}

}  // namespace posemu
