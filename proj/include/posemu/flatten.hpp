#pragma once

// Euclidean flattenings of aligned sequences into the tangent space at a
// reference posture, and their inverses.
//
//   STVF   column t = coords(transport_{a(t) -> Y_R}(log_{a(t)} a(t+1)))     L = T-1
//   ISTVF  column t = dt * sum_{s <= t} STVF(s)                              L = T-1
//   SIEM   column t = coords(log_{Y_R} a(t))                                L = T
//   MTVF   like STVF, transported hop by hop a(t) -> ... -> a(0), then -> Y_R
//
// Velocity kinds store per-step displacements (log values, not divided by dt);
// dt travels with the field.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "posemu/geometry.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

enum class FlatKind { STVF, ISTVF, SIEM, MTVF };

std::string_view to_string(FlatKind kind);
FlatKind parse_flat_kind(std::string_view text);

struct FlatField {
  FlatKind kind = FlatKind::SIEM;
  Posture reference;
  Posture start;           // a(0); needed to invert velocity kinds
  Eigen::MatrixXd values;  // 2(n-1) x L
  double dt = 0.0;

  /// Number of frames of the sequence this field encodes.
  Eigen::Index sequence_length() const {
    return kind == FlatKind::SIEM ? values.cols() : values.cols() + 1;
  }
};

FlatField stvf_encode(const MotionSequence& seq, const Posture& reference);
FlatField istvf_encode(const FlatField& stvf);
FlatField istvf_to_stvf(const FlatField& istvf);
MotionSequence stvf_decode(const FlatField& stvf);

FlatField siem_encode(const MotionSequence& seq, const Posture& reference);
MotionSequence siem_decode(const FlatField& siem);

FlatField mtvf_encode(const MotionSequence& seq, const Posture& reference);
MotionSequence mtvf_decode(const FlatField& mtvf);

/// Dispatch on kind. encode(kind = ISTVF) goes through STVF.
FlatField flatten_encode(FlatKind kind, const MotionSequence& seq, const Posture& reference);
MotionSequence flatten_decode(const FlatField& field);

/// Per-frame posture distances d(a(t), b(t)).
std::vector<double> recon_error(const MotionSequence& a, const MotionSequence& b);

/// Karcher mean of all frames of all sequences pooled, the default flattening
/// reference.
Posture pooled_reference(std::span<const MotionSequence> seqs);

}  // namespace posemu
