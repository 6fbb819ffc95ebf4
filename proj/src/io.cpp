#include "posemu/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "posemu/error.hpp"

namespace posemu {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::FormatError, "expected a number array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json optional_number(double x) { return std::isnan(x) ? json(nullptr) : json(x); }
double number_or_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json points_to_json(const Eigen::Matrix3Xd& pts) {
  json a = json::array();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) a.push_back({pts(0, i), pts(1, i), pts(2, i)});
  return a;
}

Eigen::Matrix3Xd points_from_json(const json& j, Eigen::Index expected) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected) {
    std::ostringstream os;
    os << "expected " << expected << " points";
    fail(ErrorKind::FormatError, os.str());
  }
  Eigen::Matrix3Xd pts(3, expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const json& p = j[static_cast<std::size_t>(i)];
    if (!p.is_array() || p.size() != 3) fail(ErrorKind::FormatError, "points must be [x, y, z] triples");
    for (int k = 0; k < 3; ++k) pts(k, i) = p[static_cast<std::size_t>(k)].get<double>();
  }
  return pts;
}

void write_line(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

// Reads non-empty lines as JSON, tracking line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(json& value) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        value = json::parse(line);
      } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, where() + e.what());
      }
      return true;
    }
    return false;
  }

  json require_next(const char* what) {
    json v;
    if (!next(v)) fail(ErrorKind::FormatError, where() + "unexpected end of file, expected " + what);
    return v;
  }

  std::string where() const { return "line " + std::to_string(line_no_) + ": "; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

void check_header(const json& h, const char* format, const LineReader& reader) {
  if (!h.is_object() || !h.contains("format") || h["format"] != format)
    fail(ErrorKind::FormatError, reader.where() + "expected a '" + format + "' header");
  if (!h.contains("version") || h["version"] != kFormatVersion)
    fail(ErrorKind::FormatError, reader.where() + "unsupported format version");
}

template <typename F>
auto with_context(const LineReader& reader, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, reader.where() + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FormatError) throw;
    fail(e.kind(), reader.where() + e.detail());
  }
}

int label_of(const json& h) { return h.contains("label") ? h["label"].get<int>() : -1; }

int label_at(const std::vector<int>& labels, std::size_t i) { return i < labels.size() ? labels[i] : -1; }

}  // namespace

json posture_to_json(const Posture& p) { return points_to_json(p.bones()); }

Posture posture_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::FormatError, "posture must be an array of bones");
  return Posture::checked(points_from_json(j, static_cast<Eigen::Index>(j.size())));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows)
    fail(ErrorKind::FormatError, "matrix row count differs from its header");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_from_json(data[static_cast<std::size_t>(r)]);
    if (row.size() != cols) fail(ErrorKind::FormatError, "matrix column count differs from its header");
    m.row(r) = row.transpose();
  }
  return m;
}

void write_raw(std::ostream& out, const RawDataset& data) {
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto& seq = data.sequences[s];
    json h{{"format", "posemu.raw"},
           {"version", kFormatVersion},
           {"n", data.hierarchy.landmarks()},
           {"T", seq.size()},
           {"parents", data.hierarchy.parents()}};
    if (label_at(data.labels, s) >= 0) h["label"] = data.labels[s];
    write_line(out, h);
    for (const auto& frame : seq) write_line(out, points_to_json(frame));
  }
}

RawDataset read_raw(std::istream& in) {
  RawDataset data;
  LineReader reader(in);
  json h;
  bool first = true;
  while (reader.next(h)) {
    check_header(h, "posemu.raw", reader);
    with_context(reader, [&] {
      auto hierarchy = SkeletonHierarchy::from_parents(h.at("parents").get<std::vector<int>>());
      if (h.at("n").get<int>() != hierarchy.landmarks()) fail(ErrorKind::FormatError, "n differs from the parent array");
      if (first) {
        data.hierarchy = hierarchy;
        first = false;
      } else if (!(hierarchy == data.hierarchy)) {
        fail(ErrorKind::FormatError, "sequences in one file must share a hierarchy");
      }
      return 0;
    });
    const auto T = h.at("T").get<std::size_t>();
    std::vector<RawFrame> frames;
    frames.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      const json rec = reader.require_next("a frame record");
      frames.push_back(with_context(reader, [&] { return points_from_json(rec, data.hierarchy.landmarks()); }));
    }
    data.sequences.push_back(std::move(frames));
    data.labels.push_back(label_of(h));
  }
  return data;
}

void write_postures(std::ostream& out, const PostureDataset& data) {
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto& seq = data.sequences[s];
    json h{{"format", "posemu.posture"}, {"version", kFormatVersion}, {"bones", seq.bone_count()}, {"T", seq.length()}};
    if (label_at(data.labels, s) >= 0) h["label"] = data.labels[s];
    write_line(out, h);
    for (const auto& p : seq.frames()) write_line(out, posture_to_json(p));
  }
}

PostureDataset read_postures(std::istream& in) {
  PostureDataset data;
  LineReader reader(in);
  json h;
  while (reader.next(h)) {
    check_header(h, "posemu.posture", reader);
    const auto bones = with_context(reader, [&] { return h.at("bones").get<Eigen::Index>(); });
    const auto T = with_context(reader, [&] { return h.at("T").get<std::size_t>(); });
    std::vector<Posture> frames;
    frames.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      const json rec = reader.require_next("a posture record");
      frames.push_back(with_context(reader, [&] { return Posture::checked(points_from_json(rec, bones)); }));
    }
    data.sequences.push_back(with_context(reader, [&] { return MotionSequence(std::move(frames)); }));
    data.labels.push_back(label_of(h));
  }
  return data;
}

void write_flatfields(std::ostream& out, const std::vector<FlatField>& fields, const std::vector<int>& labels) {
  for (std::size_t s = 0; s < fields.size(); ++s) {
    const auto& f = fields[s];
    json h{{"format", "posemu.flatfield"},
           {"version", kFormatVersion},
           {"kind", std::string(to_string(f.kind))},
           {"bones", f.reference.bone_count()},
           {"T", f.sequence_length()},
           {"dt", f.dt},
           {"reference", posture_to_json(f.reference)},
           {"start", posture_to_json(f.start)}};
    if (label_at(labels, s) >= 0) h["label"] = labels[s];
    write_line(out, h);
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) write_line(out, vector_to_json(f.values.col(c)));
  }
}

std::vector<FlatField> read_flatfields(std::istream& in, std::vector<int>* labels) {
  std::vector<FlatField> fields;
  LineReader reader(in);
  json h;
  while (reader.next(h)) {
    check_header(h, "posemu.flatfield", reader);
    FlatField f = with_context(reader, [&] {
      FlatField g;
      g.kind = parse_flat_kind(h.at("kind").get<std::string>());
      const auto bones = h.at("bones").get<Eigen::Index>();
      g.reference = Posture::checked(points_from_json(h.at("reference"), bones));
      g.start = Posture::checked(points_from_json(h.at("start"), bones));
      g.dt = h.at("dt").get<double>();
      const auto T = h.at("T").get<Eigen::Index>();
      g.values.resize(2 * bones, g.kind == FlatKind::SIEM ? T : T - 1);
      return g;
    });
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      const json rec = reader.require_next("a field column");
      const Eigen::VectorXd col = with_context(reader, [&] { return vector_from_json(rec); });
      if (col.size() != f.values.rows()) fail(ErrorKind::FormatError, reader.where() + "field column has wrong length");
      f.values.col(c) = col;
    }
    fields.push_back(std::move(f));
    if (labels) labels->push_back(label_of(h));
  }
  return fields;
}

void write_warps(std::ostream& out, const WarpSet& warps) {
  for (std::size_t s = 0; s < warps.warps.size(); ++s) {
    write_line(out, json{{"format", "posemu.warp"},
                         {"version", kFormatVersion},
                         {"T", warps.warps[s].length()},
                         {"cost", s < warps.costs.size() ? warps.costs[s] : 0.0}});
    write_line(out, vector_to_json(warps.warps[s].samples()));
  }
}

WarpSet read_warps(std::istream& in) {
  WarpSet set;
  LineReader reader(in);
  json h;
  while (reader.next(h)) {
    check_header(h, "posemu.warp", reader);
    const json rec = reader.require_next("warp samples");
    set.warps.push_back(with_context(reader, [&] {
      const Eigen::VectorXd s = vector_from_json(rec);
      if (s.size() != h.at("T").get<Eigen::Index>()) fail(ErrorKind::FormatError, "warp length differs from header");
      return WarpFunction(s);
    }));
    set.costs.push_back(with_context(reader, [&] { return h.at("cost").get<double>(); }));
  }
  return set;
}

namespace {

void write_reduction_parts(json& j, const std::optional<SpatialPCA>& spatial, const std::optional<FPCABasis>& fpca,
                           const std::optional<MPCAModel>& mpca) {
  if (spatial) {
    j["spatial"] = {{"mean", vector_to_json(spatial->mean)},
                    {"basis", matrix_to_json(spatial->basis)},
                    {"eigenvalues", vector_to_json(spatial->eigenvalues)},
                    {"threshold", optional_number(spatial->threshold)},
                    {"d1", spatial->dims()}};
  }
  if (fpca) {
    json dims = json::array();
    for (const auto& c : fpca->dims)
      dims.push_back({{"mean", vector_to_json(c.mean)},
                      {"basis", matrix_to_json(c.basis)},
                      {"eigenvalues", vector_to_json(c.eigenvalues)}});
    j["fpca"] = {{"dt", fpca->dt}, {"threshold", optional_number(fpca->threshold)}, {"d2", fpca->d2()},
                 {"dims", dims}};
  }
  if (mpca) {
    j["mpca"] = {{"mean", matrix_to_json(mpca->mean)},
                 {"u1", matrix_to_json(mpca->u1)},
                 {"u2", matrix_to_json(mpca->u2)},
                 {"captured", mpca->captured},
                 {"total_scatter", mpca->total_scatter},
                 {"iterations", mpca->iterations},
                 {"converged", mpca->converged}};
  }
}

void read_reduction_parts(const json& j, std::optional<SpatialPCA>& spatial, std::optional<FPCABasis>& fpca,
                          std::optional<MPCAModel>& mpca) {
  if (j.contains("spatial")) {
    const json& s = j["spatial"];
    spatial = SpatialPCA{vector_from_json(s.at("mean")), matrix_from_json(s.at("basis")),
                         vector_from_json(s.at("eigenvalues")), number_or_nan(s.at("threshold"))};
  }
  if (j.contains("fpca")) {
    const json& f = j["fpca"];
    FPCABasis basis;
    basis.dt = f.at("dt").get<double>();
    basis.threshold = number_or_nan(f.at("threshold"));
    for (const auto& c : f.at("dims"))
      basis.dims.push_back({vector_from_json(c.at("mean")), matrix_from_json(c.at("basis")),
                            vector_from_json(c.at("eigenvalues"))});
    fpca = std::move(basis);
  }
  if (j.contains("mpca")) {
    const json& m = j["mpca"];
    MPCAModel mp;
    mp.mean = matrix_from_json(m.at("mean"));
    mp.u1 = matrix_from_json(m.at("u1"));
    mp.u2 = matrix_from_json(m.at("u2"));
    mp.captured = m.at("captured").get<std::vector<double>>();
    mp.total_scatter = m.at("total_scatter").get<double>();
    mp.iterations = m.at("iterations").get<int>();
    mp.converged = m.at("converged").get<bool>();
    mpca = std::move(mp);
  }
}

}  // namespace

json reduction_to_json(const Reduction& r) {
  json j{{"format", "posemu.reduction"}, {"version", kFormatVersion}, {"kind", std::string(to_string(r.kind))}};
  write_reduction_parts(j, r.spatial, r.fpca, r.mpca);
  return j;
}

Reduction reduction_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "posemu.reduction")
      fail(ErrorKind::FormatError, "expected a 'posemu.reduction' document");
    if (j.at("version") != kFormatVersion) fail(ErrorKind::FormatError, "unsupported reduction version");
    Reduction r;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "seqpca") {
      r.kind = DimRedKind::SeqPCA;
    } else if (kind == "mpca") {
      r.kind = DimRedKind::MPCA;
    } else {
      fail(ErrorKind::FormatError, "unknown reduction kind '" + kind + "'");
    }
    read_reduction_parts(j, r.spatial, r.fpca, r.mpca);
    return r;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, std::string("reduction: ") + e.what());
  }
}

json bundle_to_json(const EmulatorBundle& b) {
  json j{{"format", "posemu.bundle"},
         {"version", kFormatVersion},
         {"scheme", b.scheme.str()},
         {"T", b.length},
         {"bones", b.bones},
         {"reference", posture_to_json(b.reference)},
         {"start_policy", std::string(to_string(b.start_policy))},
         {"start", posture_to_json(b.start)}};
  json pool = json::array();
  for (const auto& p : b.start_pool) pool.push_back(posture_to_json(p));
  j["start_pool"] = pool;
  write_reduction_parts(j, b.spatial, b.fpca, b.mpca);
  json model;
  if (const auto* m = std::get_if<MVGModel>(&b.model)) {
    model = {{"type", "mvg"}, {"rows", m->rows}, {"cols", m->cols}, {"covariance", matrix_to_json(m->covariance)},
             {"jitter", m->jitter}};
  } else if (const auto* m = std::get_if<IGModel>(&b.model)) {
    model = {{"type", "ig"}, {"rows", m->rows}, {"cols", m->cols}, {"variances", vector_to_json(m->variances)},
             {"jitter", m->jitter}};
  } else if (const auto* m = std::get_if<VARModel>(&b.model)) {
    json phi = json::array();
    for (const auto& p : m->phi) phi.push_back(matrix_to_json(p));
    model = {{"type", "var"},       {"order", m->order},
             {"phi", phi},          {"intercept", vector_to_json(m->intercept)},
             {"noise_cov", matrix_to_json(m->noise_cov)}, {"initial", matrix_to_json(m->initial)},
             {"rank", m->rank}};
  } else if (const auto* m = std::get_if<PWIModel>(&b.model)) {
    json mean = json::array();
    json cov = json::array();
    for (const auto& p : m->mean) mean.push_back(posture_to_json(p));
    for (const auto& c : m->covariance) cov.push_back(matrix_to_json(c));
    model = {{"type", "pwi"}, {"diagonal", m->diagonal}, {"mean", mean}, {"covariance", cov}};
  }
  j["model"] = model;
  j["provenance"] = b.provenance;
  return j;
}

EmulatorBundle bundle_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "posemu.bundle")
      fail(ErrorKind::FormatError, "expected a 'posemu.bundle' document");
    if (j.at("version") != kFormatVersion) fail(ErrorKind::FormatError, "unsupported bundle version");
    EmulatorBundle b;
    b.scheme = Scheme::parse(j.at("scheme").get<std::string>());
    b.length = j.at("T").get<Eigen::Index>();
    b.bones = j.at("bones").get<Eigen::Index>();
    b.reference = Posture::checked(points_from_json(j.at("reference"), b.bones));
    b.start_policy = parse_start_policy(j.at("start_policy").get<std::string>());
    b.start = Posture::checked(points_from_json(j.at("start"), b.bones));
    for (const auto& p : j.at("start_pool")) b.start_pool.push_back(Posture::checked(points_from_json(p, b.bones)));
    read_reduction_parts(j, b.spatial, b.fpca, b.mpca);
    const json& m = j.at("model");
    const std::string type = m.is_object() ? m.value("type", "") : "";
    if (type == "mvg") {
      b.model = MVGModel{m.at("rows").get<Eigen::Index>(), m.at("cols").get<Eigen::Index>(),
                         matrix_from_json(m.at("covariance")), m.at("jitter").get<double>()};
    } else if (type == "ig") {
      b.model = IGModel{m.at("rows").get<Eigen::Index>(), m.at("cols").get<Eigen::Index>(),
                        vector_from_json(m.at("variances")), m.at("jitter").get<double>()};
    } else if (type == "var") {
      VARModel v;
      v.order = m.at("order").get<int>();
      for (const auto& p : m.at("phi")) v.phi.push_back(matrix_from_json(p));
      v.intercept = vector_from_json(m.at("intercept"));
      v.noise_cov = matrix_from_json(m.at("noise_cov"));
      v.initial = matrix_from_json(m.at("initial"));
      v.rank = m.at("rank").get<Eigen::Index>();
      b.model = std::move(v);
    } else if (type == "pwi") {
      PWIModel p;
      p.diagonal = m.at("diagonal").get<bool>();
      for (const auto& x : m.at("mean")) p.mean.push_back(Posture::checked(points_from_json(x, b.bones)));
      for (const auto& c : m.at("covariance")) p.covariance.push_back(matrix_from_json(c));
      b.model = std::move(p);
    } else {
      fail(ErrorKind::FormatError, "bundle model type '" + type + "' is not recognized");
    }
    b.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    return b;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, std::string("bundle: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::IoError, "write to '" + path.string() + "' failed");
}

PostureDataset load_postures(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  try {
    return read_postures(in);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.detail());
  }
}

void save_postures(const std::filesystem::path& path, const PostureDataset& data) {
  std::ostringstream out;
  write_postures(out, data);
  write_text(path, out.str());
}

EmulatorBundle load_bundle(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
  return bundle_from_json(j);
}

void save_bundle(const std::filesystem::path& path, const EmulatorBundle& bundle) {
  write_text(path, bundle_to_json(bundle).dump() + "\n");
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string hex(const unsigned char* data, unsigned int size) {
  std::ostringstream os;
  for (unsigned int i = 0; i < size; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return os.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &size, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::IoError, "sha256 failed");
  return hex(digest, size);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

}  // namespace posemu
