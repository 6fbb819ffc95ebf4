#pragma once

// Line-delimited JSON file formats. Every sequence file is a run of blocks, each
// a header object followed by one record per frame (or field column). Doubles
// are written in shortest round-trip form, so reading back is bit-exact.
//
//   posemu.raw        header {n, T, parents, label?}        records: n x [x, y, z]
//   posemu.posture    header {bones, T, label?}             records: (n-1) x [x, y, z]
//   posemu.flatfield  header {kind, bones, T, dt, reference, start, label?}
//                                                           records: one column of 2(n-1) values
//   posemu.warp       header {T, cost}                      record: T samples
//
// Bundles are single JSON documents with format "posemu.bundle".

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "posemu/alignment.hpp"
#include "posemu/dimred.hpp"
#include "posemu/flatten.hpp"
#include "posemu/models.hpp"
#include "posemu/skeleton.hpp"

namespace posemu {

inline constexpr int kFormatVersion = 1;

struct RawDataset {
  SkeletonHierarchy hierarchy;
  std::vector<std::vector<RawFrame>> sequences;
  std::vector<int> labels;  // -1 when absent
};

struct PostureDataset {
  std::vector<MotionSequence> sequences;
  std::vector<int> labels;  // -1 when absent
};

struct WarpSet {
  std::vector<WarpFunction> warps;
  std::vector<double> costs;
};

void write_raw(std::ostream& out, const RawDataset& data);
RawDataset read_raw(std::istream& in);

void write_postures(std::ostream& out, const PostureDataset& data);
PostureDataset read_postures(std::istream& in);

void write_flatfields(std::ostream& out, const std::vector<FlatField>& fields, const std::vector<int>& labels = {});
std::vector<FlatField> read_flatfields(std::istream& in, std::vector<int>* labels = nullptr);

void write_warps(std::ostream& out, const WarpSet& warps);
WarpSet read_warps(std::istream& in);

nlohmann::json posture_to_json(const Posture& p);
Posture posture_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // row-major nested arrays
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json reduction_to_json(const Reduction& reduction);
Reduction reduction_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const EmulatorBundle& bundle);
EmulatorBundle bundle_from_json(const nlohmann::json& j);

/// File helpers; failures throw IoError, malformed content FormatError.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
PostureDataset load_postures(const std::filesystem::path& path);
void save_postures(const std::filesystem::path& path, const PostureDataset& data);
EmulatorBundle load_bundle(const std::filesystem::path& path);
void save_bundle(const std::filesystem::path& path, const EmulatorBundle& bundle);

/// 17 significant digits, for CSV output.
std::string format_double(double value);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace posemu
