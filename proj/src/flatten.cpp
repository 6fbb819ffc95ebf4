#include "posemu/flatten.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>

#include "posemu/error.hpp"

namespace posemu {

std::string_view to_string(FlatKind kind) {
  switch (kind) {
    case FlatKind::STVF: return "stvf";
    case FlatKind::ISTVF: return "istvf";
    case FlatKind::SIEM: return "siem";
    case FlatKind::MTVF: return "mtvf";
  }
  return "?";
}

FlatKind parse_flat_kind(std::string_view text) {
  std::string key;
  for (char c : text)
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "stvf") return FlatKind::STVF;
  if (key == "istvf") return FlatKind::ISTVF;
  if (key == "siem") return FlatKind::SIEM;
  if (key == "mtvf") return FlatKind::MTVF;
  fail(ErrorKind::ConfigError, "unknown flattening kind '" + std::string(text) + "'");
}

namespace {

void require_kind(const FlatField& f, FlatKind expected, const char* op) {
  if (f.kind != expected) {
    std::ostringstream os;
    os << op << " expects " << to_string(expected) << ", got " << to_string(f.kind);
    fail(ErrorKind::KindMismatch, os.str());
  }
}

void require_reference(const MotionSequence& seq, const Posture& reference) {
  require(seq.bone_count() == reference.bone_count(), ErrorKind::DimensionMismatch,
          "reference bone count differs from the sequence");
}

}  // namespace

FlatField stvf_encode(const MotionSequence& seq, const Posture& reference) {
  require_reference(seq, reference);
  const TangentBasis basis(reference);
  FlatField f{FlatKind::STVF, reference, seq[0], Eigen::MatrixXd(basis.dim(), seq.length() - 1), seq.dt()};
  for (Eigen::Index t = 0; t + 1 < seq.length(); ++t) {
    const TangentField step = posture_log(seq[t], seq[t + 1]);
    f.values.col(t) = basis.coords(posture_transport(seq[t], reference, step));
  }
  return f;
}

FlatField istvf_encode(const FlatField& stvf) {
  require_kind(stvf, FlatKind::STVF, "istvf_encode");
  FlatField g = stvf;
  g.kind = FlatKind::ISTVF;
  Eigen::VectorXd running = Eigen::VectorXd::Zero(stvf.values.rows());
  for (Eigen::Index t = 0; t < stvf.values.cols(); ++t) {
    running += stvf.values.col(t);
    g.values.col(t) = running * stvf.dt;
  }
  return g;
}

FlatField istvf_to_stvf(const FlatField& istvf) {
  require_kind(istvf, FlatKind::ISTVF, "istvf_to_stvf");
  FlatField f = istvf;
  f.kind = FlatKind::STVF;
  const double scale = static_cast<double>(istvf.values.cols());  // T - 1
  for (Eigen::Index t = 0; t < istvf.values.cols(); ++t) {
    f.values.col(t) = t == 0 ? Eigen::VectorXd(istvf.values.col(0) * scale)
                             : Eigen::VectorXd((istvf.values.col(t) - istvf.values.col(t - 1)) * scale);
  }
  return f;
}

MotionSequence stvf_decode(const FlatField& stvf) {
  require_kind(stvf, FlatKind::STVF, "stvf_decode");
  require(stvf.start.bone_count() == stvf.reference.bone_count(), ErrorKind::DimensionMismatch,
          "stvf_decode: start posture missing or mismatched");
  const TangentBasis basis(stvf.reference);
  std::vector<Posture> frames;
  frames.reserve(static_cast<std::size_t>(stvf.values.cols() + 1));
  frames.push_back(stvf.start);
  for (Eigen::Index t = 0; t < stvf.values.cols(); ++t) {
    const Posture& current = frames.back();
    const TangentField step = posture_transport(stvf.reference, current, basis.tangent(stvf.values.col(t)));
    frames.push_back(posture_exp(current, step));
  }
  return MotionSequence(std::move(frames));
}

FlatField siem_encode(const MotionSequence& seq, const Posture& reference) {
  require_reference(seq, reference);
  const TangentBasis basis(reference);
  FlatField w{FlatKind::SIEM, reference, seq[0], Eigen::MatrixXd(basis.dim(), seq.length()), seq.dt()};
  for (Eigen::Index t = 0; t < seq.length(); ++t) w.values.col(t) = basis.coords(posture_log(reference, seq[t]));
  return w;
}

MotionSequence siem_decode(const FlatField& siem) {
  require_kind(siem, FlatKind::SIEM, "siem_decode");
  const TangentBasis basis(siem.reference);
  std::vector<Posture> frames;
  frames.reserve(static_cast<std::size_t>(siem.values.cols()));
  for (Eigen::Index t = 0; t < siem.values.cols(); ++t)
    frames.push_back(posture_exp(siem.reference, basis.tangent(siem.values.col(t))));
  return MotionSequence(std::move(frames));
}

FlatField mtvf_encode(const MotionSequence& seq, const Posture& reference) {
  require_reference(seq, reference);
  const TangentBasis basis(reference);
  FlatField f{FlatKind::MTVF, reference, seq[0], Eigen::MatrixXd(basis.dim(), seq.length() - 1), seq.dt()};
  for (Eigen::Index t = 0; t + 1 < seq.length(); ++t) {
    TangentField v = posture_log(seq[t], seq[t + 1]);
    for (Eigen::Index s = t; s > 0; --s) v = posture_transport(seq[s], seq[s - 1], v);
    f.values.col(t) = basis.coords(posture_transport(seq[0], reference, v));
  }
  return f;
}

MotionSequence mtvf_decode(const FlatField& mtvf) {
  require_kind(mtvf, FlatKind::MTVF, "mtvf_decode");
  require(mtvf.start.bone_count() == mtvf.reference.bone_count(), ErrorKind::DimensionMismatch,
          "mtvf_decode: start posture missing or mismatched");
  const TangentBasis basis(mtvf.reference);
  std::vector<Posture> frames;
  frames.reserve(static_cast<std::size_t>(mtvf.values.cols() + 1));
  frames.push_back(mtvf.start);
  for (Eigen::Index t = 0; t < mtvf.values.cols(); ++t) {
    TangentField v = posture_transport(mtvf.reference, frames[0], basis.tangent(mtvf.values.col(t)));
    for (Eigen::Index s = 0; s < t; ++s)
      v = posture_transport(frames[static_cast<std::size_t>(s)], frames[static_cast<std::size_t>(s + 1)], v);
    frames.push_back(posture_exp(frames.back(), v));
  }
  return MotionSequence(std::move(frames));
}

FlatField flatten_encode(FlatKind kind, const MotionSequence& seq, const Posture& reference) {
  switch (kind) {
    case FlatKind::STVF: return stvf_encode(seq, reference);
    case FlatKind::ISTVF: return istvf_encode(stvf_encode(seq, reference));
    case FlatKind::SIEM: return siem_encode(seq, reference);
    case FlatKind::MTVF: return mtvf_encode(seq, reference);
  }
  fail(ErrorKind::KindMismatch, "unknown flattening kind");
}

MotionSequence flatten_decode(const FlatField& field) {
  switch (field.kind) {
    case FlatKind::STVF: return stvf_decode(field);
    case FlatKind::ISTVF: return stvf_decode(istvf_to_stvf(field));
    case FlatKind::SIEM: return siem_decode(field);
    case FlatKind::MTVF: return mtvf_decode(field);
  }
  fail(ErrorKind::KindMismatch, "unknown flattening kind");
}

std::vector<double> recon_error(const MotionSequence& a, const MotionSequence& b) {
  if (a.length() != b.length() || a.bone_count() != b.bone_count())
    fail(ErrorKind::DimensionMismatch, "recon_error: sequence shapes differ");
  std::vector<double> e(static_cast<std::size_t>(a.length()));
  for (Eigen::Index t = 0; t < a.length(); ++t) e[static_cast<std::size_t>(t)] = posture_dist(a[t], b[t]);
  return e;
}

Posture pooled_reference(std::span<const MotionSequence> seqs) {
  require(!seqs.empty(), ErrorKind::InsufficientData, "pooled_reference: no sequences");
  std::vector<Posture> all;
  for (const auto& s : seqs) all.insert(all.end(), s.frames().begin(), s.frames().end());
  return karcher_mean(all);
}

}  // namespace posemu
