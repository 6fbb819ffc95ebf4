#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "posemu/alignment.hpp"
#include "posemu/datagen.hpp"
#include "posemu/error.hpp"
#include "posemu/evaluate.hpp"
#include "posemu/flatten.hpp"
#include "posemu/io.hpp"
#include "posemu/models.hpp"
#include "posemu/pipeline.hpp"
#include "posemu/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace posemu;

namespace {

// Seed streams; every stage derives its generator from the root seed so that
// chained stage runs and `pipeline` agree.
constexpr std::uint64_t kFitStream = 1;
constexpr std::uint64_t kSimulateStream = 2;
constexpr std::uint64_t kTestStream = 3;
constexpr std::uint64_t kQuantizeStream = 4;

const char* kVersion = "posemu 1.0";

struct Common {
  std::string run_dir = "run";
  std::string data_dir;
  std::uint64_t seed = 1;
};

class Run {
 public:
  Run(std::string command, const Common& common) : command_(std::move(command)), common_(common) {}

  fs::path resolve(const std::string& given) const {
    const fs::path p(given);
    if (p.is_relative() && !common_.data_dir.empty()) return fs::path(common_.data_dir) / p;
    return p;
  }

  // Resolves an external input and records its checksum.
  fs::path input(const std::string& given) {
    const fs::path p = resolve(given);
    inputs_.push_back({{"path", given}, {"sha256", sha256_file(p)}});
    return p;
  }

  fs::path artifact_path(const std::string& name) const { return fs::path(common_.run_dir) / name; }

  void write(const std::string& name, const std::string& text) {
    write_text(artifact_path(name), text);
    artifacts_.push_back({{"path", name}, {"sha256", sha256_hex(text)}});
  }

  json& config() { return config_; }
  std::uint64_t seed() const { return common_.seed; }

  // Merges this command's entry into the run directory's manifest.
  void finish() {
    const fs::path path = artifact_path("manifest.json");
    json manifest;
    if (fs::exists(path)) {
      try {
        manifest = json::parse(read_text(path));
      } catch (const json::exception&) {
        manifest = json::object();
      }
    }
    if (!manifest.is_object() || manifest.value("format", "") != "posemu.manifest")
      manifest = {{"format", "posemu.manifest"}, {"version", kFormatVersion}, {"runs", json::object()}};
    manifest["tool"] = kVersion;
    manifest["runs"][command_] = {{"command", command_},
                                  {"seed", common_.seed},
                                  {"config", config_},
                                  {"config_sha256", sha256_hex(config_.dump())},
                                  {"inputs", inputs_},
                                  {"artifacts", artifacts_}};
    write_text(path, manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  Common common_;
  json config_ = json::object();
  json inputs_ = json::array();
  json artifacts_ = json::array();
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--run-dir", common.run_dir, "Output directory")->capture_default_str();
  cmd->add_option("--data-dir", common.data_dir, "Base directory for relative input paths")
      ->envname("POSEMU_DATA_DIR");
  cmd->add_option("--seed", common.seed, "Root seed")->capture_default_str();
}

std::string set_name(const std::string& path) { return fs::path(path).stem().string(); }

// --- file helpers -------------------------------------------------------------

std::string first_format(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  try {
    const json h = json::parse(line);
    if (h.is_object()) return h.value("format", "");
  } catch (const json::exception&) {
  }
  fail(ErrorKind::FormatError, path.string() + ":1: not a posemu sequence file");
}

PostureDataset ingest_raw(const RawDataset& raw, Eigen::Index downsample_to) {
  PostureDataset out;
  out.sequences.resize(raw.sequences.size());
  out.labels = raw.labels;
  parallel_for(raw.sequences.size(), [&](std::size_t i) {
    MotionSequence seq = ingest_sequence(raw.sequences[i], raw.hierarchy);
    out.sequences[i] = downsample_to > 0 ? downsample(seq, downsample_to) : std::move(seq);
  });
  return out;
}

// Posture file, or raw landmark file ingested on the fly.
PostureDataset load_motion(const fs::path& path, Eigen::Index downsample_to) {
  if (first_format(path) == "posemu.raw") {
    std::istringstream in(read_text(path));
    try {
      return ingest_raw(read_raw(in), downsample_to);
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ": " + e.detail());
    }
  }
  PostureDataset data = load_postures(path);
  if (downsample_to > 0)
    for (auto& s : data.sequences) s = downsample(s, downsample_to);
  return data;
}

std::vector<FlatField> load_fields(const fs::path& path, std::vector<int>* labels) {
  std::istringstream in(read_text(path));
  try {
    return read_flatfields(in, labels);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.detail());
  }
}

Reduction load_reduction(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
  return reduction_from_json(j);
}

std::string postures_text(const PostureDataset& data) {
  std::ostringstream out;
  write_postures(out, data);
  return out.str();
}

PostureDataset unlabeled(std::vector<MotionSequence> seqs) {
  PostureDataset d;
  d.labels.assign(seqs.size(), -1);
  d.sequences = std::move(seqs);
  return d;
}

std::pair<std::size_t, std::size_t> parse_split(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      std::size_t used = 0;
      const std::string a = text.substr(0, slash), b = text.substr(slash + 1);
      const unsigned long x = std::stoul(a, &used);
      if (used == a.size()) {
        const unsigned long y = std::stoul(b, &used);
        if (used == b.size()) return {x, y};
      }
    }
  } catch (const std::exception&) {
  }
  fail(ErrorKind::ConfigError, "--split expects <train>/<test>, got '" + text + "'");
}

DimSelection selection(long fixed, double threshold) {
  if (fixed > 0) return DimSelection::fixed_dims(fixed);
  require(threshold > 0.0 && threshold <= 1.0, ErrorKind::ConfigError, "variance threshold must lie in (0, 1]");
  return DimSelection::variance(threshold);
}

json selection_json(long fixed, double threshold) {
  return fixed > 0 ? json{{"fixed", fixed}} : json{{"threshold", threshold}};
}

// --- stages -------------------------------------------------------------------

struct SynthOptions {
  int classes = 5;
  std::size_t per_class = 60;
  int landmarks = 21;
  long frames = 1000;
  long downsample_to = 301;
  double bandwidth = 0.05;
  double amplitude = 0.6;
  double warp_strength = 0.3;
  double noise_scale = 0.05;
  std::string format = "posture";

  json to_json() const {
    return {{"classes", classes},         {"per_class", per_class},   {"landmarks", landmarks},
            {"frames", frames},           {"downsample", downsample_to}, {"bandwidth", bandwidth},
            {"amplitude", amplitude},     {"warp_strength", warp_strength}, {"noise_scale", noise_scale},
            {"format", format}};
  }
};

LabeledDataset synthesize(const SynthOptions& o, std::uint64_t seed) {
  require(o.classes >= 1, ErrorKind::ConfigError, "--classes must be positive");
  MixtureConfig mix;
  for (int c = 0; c < o.classes; ++c) {
    SynthConfig cfg;
    cfg.landmarks = o.landmarks;
    cfg.frames = o.frames;
    cfg.sequences = o.per_class;
    cfg.bandwidth = o.bandwidth;
    cfg.amplitude = o.amplitude;
    cfg.warp_strength = o.warp_strength;
    cfg.noise_scale = o.noise_scale;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(c));
    cfg.validate();
    mix.classes.push_back(cfg);
  }
  if (o.downsample_to > 0) mix.downsample_to = o.downsample_to;
  return gen_mixture(mix);
}

std::string synth_text(const SynthOptions& o, const LabeledDataset& data) {
  std::ostringstream out;
  if (o.format == "raw") {
    RawDataset raw;
    raw.hierarchy = SkeletonHierarchy::default_for(o.landmarks);
    raw.labels = data.labels;
    const Eigen::VectorXd lengths = Eigen::VectorXd::Ones(o.landmarks - 1);
    for (const auto& seq : data.sequences) {
      std::vector<RawFrame> frames;
      for (const auto& p : seq.frames()) frames.push_back(to_raw_frame(p, raw.hierarchy, lengths, Vec3::Zero()));
      raw.sequences.push_back(std::move(frames));
    }
    write_raw(out, raw);
  } else if (o.format == "posture") {
    write_postures(out, {data.sequences, data.labels});
  } else {
    fail(ErrorKind::ConfigError, "--format must be raw or posture");
  }
  return out.str();
}

void stage_align(Run& run, const PostureDataset& data, std::size_t ref_index) {
  require(ref_index < data.sequences.size(), ErrorKind::ConfigError, "--ref-index is out of range");
  const Posture reference = default_alignment_reference(data.sequences);
  AlignmentResult res = align_all(data.sequences, ref_index, reference);
  run.write("aligned.jsonl", postures_text({std::move(res.aligned), data.labels}));
  std::ostringstream warps;
  write_warps(warps, {std::move(res.warps), std::move(res.costs)});
  run.write("warps.jsonl", warps.str());
}

void stage_flatten(Run& run, const PostureDataset& data, FlatKind kind) {
  const Posture reference = pooled_reference(data.sequences);
  std::vector<FlatField> fields(data.sequences.size());
  parallel_for(fields.size(), [&](std::size_t i) { fields[i] = flatten_encode(kind, data.sequences[i], reference); });
  std::ostringstream out;
  write_flatfields(out, fields, data.labels);
  run.write("fields.jsonl", out.str());
}

struct ReduceOptions {
  std::string scheme = "istvf/seqpca/mvg";
  long d1 = 0;
  long d2 = 0;
  double spatial_threshold = 0.90;
  double temporal_threshold = 0.95;

  json to_json() const {
    return {{"scheme", Scheme::parse(scheme).str()},
            {"spatial", selection_json(d1, spatial_threshold)},
            {"temporal", selection_json(d2, temporal_threshold)}};
  }
};

void stage_reduce(Run& run, const std::vector<FlatField>& fields, const ReduceOptions& o) {
  const Scheme scheme = Scheme::parse(o.scheme);
  require(scheme.model != ModelKind::PWI, ErrorKind::ConfigError, "pwi schemes have no reduction stage");
  require(!fields.empty(), ErrorKind::InsufficientData, "no flat fields to reduce");
  require(fields.front().kind == scheme.repr, ErrorKind::KindMismatch,
          "fields are " + std::string(to_string(fields.front().kind)) + " but the scheme expects " +
              std::string(to_string(scheme.repr)));
  const Reduction r =
      fit_reduction(fields, scheme, selection(o.d1, o.spatial_threshold), selection(o.d2, o.temporal_threshold));
  run.write("reduction.json", reduction_to_json(r).dump() + "\n");
}

struct FitFlags {
  std::string scheme = "istvf/seqpca/mvg";
  int var_order = 4;
  bool pool_var = false;
  bool pwi_diagonal = false;
  std::string start_policy = "training-mean";
  long start_index = -1;

  json to_json() const {
    return {{"scheme", Scheme::parse(scheme).str()}, {"var_order", var_order},
            {"pool_var", pool_var},                 {"pwi_diagonal", pwi_diagonal},
            {"start_policy", std::string(to_string(parse_start_policy(start_policy)))},
            {"start_index", start_index}};
  }
};

FitOptions fit_options(const FitFlags& f, std::uint64_t seed) {
  FitOptions o;
  o.scheme = Scheme::parse(f.scheme);
  o.var.order = f.var_order;
  o.pool_var = f.pool_var;
  o.pwi_diagonal = f.pwi_diagonal;
  o.start_policy = parse_start_policy(f.start_policy);
  o.seed = derive_seed(seed, kFitStream);
  return o;
}

Posture start_at(const std::vector<Posture>& starts, const FitFlags& f) {
  require(f.start_index >= 0 && static_cast<std::size_t>(f.start_index) < starts.size(), ErrorKind::ConfigError,
          "the fixed start policy needs --start-index within the training set");
  return starts[static_cast<std::size_t>(f.start_index)];
}

void stage_fit_fields(Run& run, const std::vector<FlatField>& fields, const Reduction& reduction,
                      const FitFlags& f) {
  FitOptions o = fit_options(f, run.seed());
  require(o.scheme.model != ModelKind::PWI, ErrorKind::ConfigError, "pwi schemes are fitted from --input");
  require(!fields.empty() && fields.front().kind == o.scheme.repr, ErrorKind::KindMismatch,
          "fields do not match the scheme's representation");
  if (o.start_policy == StartPolicy::Fixed) {
    std::vector<Posture> starts;
    for (const auto& fld : fields) starts.push_back(fld.start);
    o.fixed_start = start_at(starts, f);
  }
  run.write("bundle.json", bundle_to_json(fit_bundle_from_fields(fields, reduction, o)).dump() + "\n");
}

void stage_fit_pwi(Run& run, const PostureDataset& data, const FitFlags& f) {
  FitOptions o = fit_options(f, run.seed());
  require(o.scheme.model == ModelKind::PWI, ErrorKind::ConfigError, "only pwi schemes are fitted from --input");
  if (o.start_policy == StartPolicy::Fixed) {
    std::vector<Posture> starts;
    for (const auto& s : data.sequences) starts.push_back(s[0]);
    o.fixed_start = start_at(starts, f);
  }
  run.write("bundle.json", bundle_to_json(fit_bundle(data.sequences, o)).dump() + "\n");
}

void stage_simulate(Run& run, const EmulatorBundle& bundle, std::size_t count, const std::string& split) {
  require(count >= 1, ErrorKind::ConfigError, "--count must be positive");
  std::vector<MotionSequence> sims = simulate_sequence(bundle, count, derive_seed(run.seed(), kSimulateStream));
  if (split.empty()) {
    run.write("simulated.jsonl", postures_text(unlabeled(std::move(sims))));
    return;
  }
  const auto [train, test] = parse_split(split);
  require(train + test == count, ErrorKind::ConfigError, "--split must add up to --count");
  std::vector<MotionSequence> a(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(train));
  std::vector<MotionSequence> b(sims.begin() + static_cast<std::ptrdiff_t>(train), sims.end());
  run.write("train.jsonl", postures_text(unlabeled(std::move(a))));
  run.write("test.jsonl", postures_text(unlabeled(std::move(b))));
}

struct TestFlags {
  int n_perm = 999;
  bool exhaustive = false;
  bool distances = false;
};

void stage_two_sample(Run& run, const std::vector<MotionSequence>& a, const std::vector<MotionSequence>& b,
                      const TestFlags& t) {
  require(!a.empty() && !b.empty(), ErrorKind::InsufficientData, "two-sample test needs two non-empty sets");
  std::vector<MotionSequence> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const Eigen::MatrixXd dist = seq_distance_matrix(pooled);
  const std::uint64_t seed = derive_seed(run.seed(), kTestStream);
  const DiscoResult r = t.exhaustive ? disco_exhaustive(dist, a.size()) : disco_test(dist, a.size(), t.n_perm, seed);
  std::ostringstream out;
  out << "statistic,p_value,n_perm,exhaustive,seed,n_a,n_b\n"
      << format_double(r.statistic) << ',' << format_double(r.p_value) << ',' << r.permutations << ','
      << (r.exhaustive ? "true" : "false") << ',' << run.seed() << ',' << a.size() << ',' << b.size() << '\n';
  run.write("two_sample.csv", out.str());
  if (t.distances) {
    std::ostringstream d;
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      for (Eigen::Index j = 0; j < dist.cols(); ++j) d << (j ? "," : "") << format_double(dist(i, j));
      d << '\n';
    }
    run.write("distances.csv", d.str());
  }
}

void stage_roughness(Run& run, const std::vector<std::pair<std::string, std::vector<MotionSequence>>>& sets) {
  std::ostringstream series, summary;
  series << "set,sequence,t,roughness\n";
  summary << "set,count,mean_roughness\n";
  for (const auto& [name, seqs] : sets) {
    std::vector<std::vector<double>> rough(seqs.size());
    parallel_for(seqs.size(), [&](std::size_t i) { rough[i] = roughness(seqs[i]); });
    double total = 0.0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      double sum = 0.0;
      for (std::size_t t = 0; t < rough[i].size(); ++t) {
        series << name << ',' << i << ',' << t << ',' << format_double(rough[i][t]) << '\n';
        sum += rough[i][t];
      }
      total += sum / static_cast<double>(rough[i].size());
    }
    summary << name << ',' << seqs.size() << ','
            << format_double(seqs.empty() ? 0.0 : total / static_cast<double>(seqs.size())) << '\n';
  }
  run.write("roughness.csv", series.str());
  run.write("roughness_summary.csv", summary.str());
}

// --- commands -----------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<MotionSequence>>> load_sets(Run& run,
                                                                           const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, std::vector<MotionSequence>>> sets;
  for (const auto& p : paths) sets.emplace_back(set_name(p), load_motion(run.input(p), 0).sequences);
  return sets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-sequence emulation on the posture manifold"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;

  auto* synth = app.add_subcommand("synth", "Generate synthetic motion classes");
  SynthOptions so;
  add_common(synth, common);
  synth->add_option("--classes", so.classes)->capture_default_str();
  synth->add_option("--per-class", so.per_class)->capture_default_str();
  synth->add_option("--landmarks", so.landmarks)->capture_default_str();
  synth->add_option("--frames", so.frames)->capture_default_str();
  synth->add_option("--downsample", so.downsample_to, "Target length, 0 keeps --frames")->capture_default_str();
  synth->add_option("--bandwidth", so.bandwidth)->capture_default_str();
  synth->add_option("--amplitude", so.amplitude)->capture_default_str();
  synth->add_option("--warp-strength", so.warp_strength)->capture_default_str();
  synth->add_option("--noise-scale", so.noise_scale)->capture_default_str();
  synth->add_option("--format", so.format, "raw or posture")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Convert raw landmarks to postures");
  std::string ingest_input;
  long ingest_target = 0;
  add_common(ingest, common);
  ingest->add_option("--input", ingest_input)->required();
  ingest->add_option("--downsample", ingest_target, "Target length, 0 keeps all frames")->capture_default_str();

  auto* align = app.add_subcommand("align", "Align sequences to a reference sequence");
  std::string align_input;
  std::size_t ref_index = 0;
  add_common(align, common);
  align->add_option("--input", align_input)->required();
  align->add_option("--ref-index", ref_index)->capture_default_str();

  auto* flatten = app.add_subcommand("flatten", "Flatten aligned sequences");
  std::string flatten_input, repr = "istvf";
  add_common(flatten, common);
  flatten->add_option("--input", flatten_input)->required();
  flatten->add_option("--repr", repr, "istvf, siem, stvf or mtvf")->capture_default_str();

  auto* reduce = app.add_subcommand("reduce", "Fit the dimension reduction");
  std::string reduce_input;
  ReduceOptions ro;
  add_common(reduce, common);
  reduce->add_option("--input", reduce_input, "Flat field file")->required();
  reduce->add_option("--scheme", ro.scheme)->capture_default_str();
  reduce->add_option("--d1", ro.d1, "Spatial dimension (overrides the threshold)");
  reduce->add_option("--d2", ro.d2, "Temporal dimension (overrides the threshold)");
  reduce->add_option("--spatial-threshold", ro.spatial_threshold)->capture_default_str();
  reduce->add_option("--temporal-threshold", ro.temporal_threshold)->capture_default_str();

  auto* fit = app.add_subcommand("fit", "Fit an emulator bundle");
  std::string fit_fields, fit_reduction_path, fit_input;
  FitFlags ff;
  add_common(fit, common);
  fit->add_option("--scheme", ff.scheme)->capture_default_str();
  fit->add_option("--fields", fit_fields, "Flat field file (non-pwi schemes)");
  fit->add_option("--reduction", fit_reduction_path, "Reduction file (non-pwi schemes)");
  fit->add_option("--input", fit_input, "Aligned posture file (pwi)");
  fit->add_option("--var-order", ff.var_order)->capture_default_str();
  fit->add_flag("--pool-var", ff.pool_var, "Fit VAR on all sequences");
  fit->add_flag("--pwi-diagonal", ff.pwi_diagonal);
  fit->add_option("--start-policy", ff.start_policy, "training-mean, fixed or sampled")->capture_default_str();
  fit->add_option("--start-index", ff.start_index, "Training sequence whose start is used by the fixed policy");

  auto* simulate = app.add_subcommand("simulate", "Simulate sequences from a bundle");
  std::string sim_bundle, split;
  std::size_t count = 100;
  add_common(simulate, common);
  simulate->add_option("--bundle", sim_bundle)->required();
  simulate->add_option("--count", count)->capture_default_str();
  simulate->add_option("--split", split, "<train>/<test> partition of the simulated set");

  auto* eval = app.add_subcommand("eval", "Evaluate sequences");
  eval->require_subcommand(1);

  auto* two_sample = eval->add_subcommand("two-sample", "DISCO two-sample test");
  std::string ts_a, ts_b;
  TestFlags tf;
  add_common(two_sample, common);
  two_sample->add_option("--a", ts_a)->required();
  two_sample->add_option("--b", ts_b)->required();
  two_sample->add_option("--n-perm", tf.n_perm)->capture_default_str();
  two_sample->add_flag("--exhaustive", tf.exhaustive, "Enumerate every split");
  two_sample->add_flag("--distances", tf.distances, "Also write the pooled distance matrix");

  auto* quantize_cmd = eval->add_subcommand("quantize", "Quantization variability");
  std::string q_train;
  std::vector<std::string> q_inputs;
  int q_k = 0, q_kmax = 15;
  std::size_t q_sample = 2000;
  add_common(quantize_cmd, common);
  quantize_cmd->add_option("--train", q_train, "Training set: cluster sample and mean sequence")->required();
  quantize_cmd->add_option("--input", q_inputs, "Sets to evaluate (defaults to the training set)");
  quantize_cmd->add_option("--k", q_k, "Number of modes, 0 selects by silhouette")->capture_default_str();
  quantize_cmd->add_option("--k-max", q_kmax)->capture_default_str();
  quantize_cmd->add_option("--sample", q_sample, "Frames drawn for clustering")->capture_default_str();

  auto* rough_cmd = eval->add_subcommand("roughness", "Successive-frame distances");
  std::vector<std::string> r_inputs;
  add_common(rough_cmd, common);
  rough_cmd->add_option("--input", r_inputs)->required();

  auto* mds_cmd = eval->add_subcommand("mds", "Classical MDS of pooled sets");
  std::vector<std::string> m_inputs;
  int m_dims = 2;
  add_common(mds_cmd, common);
  mds_cmd->add_option("--input", m_inputs)->required();
  mds_cmd->add_option("--dims", m_dims)->capture_default_str();

  auto* qq_cmd = eval->add_subcommand("qq", "Q-Q data of log-likelihoods");
  std::string qq_bundle, qq_test, qq_sim;
  add_common(qq_cmd, common);
  qq_cmd->add_option("--bundle", qq_bundle, "MVG or IG bundle defining the likelihood")->required();
  qq_cmd->add_option("--test", qq_test)->required();
  qq_cmd->add_option("--sim", qq_sim)->required();

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
  std::string p_input;
  long p_downsample = 0;
  std::size_t p_count = 0;
  ReduceOptions pro;
  FitFlags pff;
  TestFlags ptf;
  SynthOptions pso;
  add_common(pipeline, common);
  pipeline->add_option("--input", p_input, "Raw or posture file; synthesized when absent");
  auto* p_downsample_opt =
      pipeline->add_option("--downsample", p_downsample, "Target length, 0 keeps all frames (301 for synthetic data)")
          ->capture_default_str();
  pipeline->add_option("--ref-index", ref_index)->capture_default_str();
  pipeline->add_option("--scheme", pro.scheme)->capture_default_str();
  pipeline->add_option("--d1", pro.d1);
  pipeline->add_option("--d2", pro.d2);
  pipeline->add_option("--spatial-threshold", pro.spatial_threshold)->capture_default_str();
  pipeline->add_option("--temporal-threshold", pro.temporal_threshold)->capture_default_str();
  pipeline->add_option("--var-order", pff.var_order)->capture_default_str();
  pipeline->add_flag("--pool-var", pff.pool_var);
  pipeline->add_flag("--pwi-diagonal", pff.pwi_diagonal);
  pipeline->add_option("--start-policy", pff.start_policy)->capture_default_str();
  pipeline->add_option("--start-index", pff.start_index);
  pipeline->add_option("--count", p_count, "Simulated sequences, 0 matches the training size")->capture_default_str();
  pipeline->add_option("--n-perm", ptf.n_perm)->capture_default_str();
  pipeline->add_option("--classes", pso.classes, "Synthetic classes when --input is absent")->capture_default_str();
  pipeline->add_option("--per-class", pso.per_class)->capture_default_str();
  pipeline->add_option("--landmarks", pso.landmarks)->capture_default_str();
  pipeline->add_option("--frames", pso.frames)->capture_default_str();

  auto* twolevel = app.add_subcommand("twolevel", "Two-level simulation study");
  std::string tl_input, tl_scheme = "istvf/seqpca/mvg", tl_split = "800/200";
  std::vector<std::string> tl_level_two{"istvf/seqpca/mvg", "pwi"};
  long tl_d1 = 4, tl_d2 = 4;
  double tl_st = 0.90, tl_tt = 0.95;
  std::size_t tl_simulate = 1000, tl_repeats = 10;
  int tl_perm = 999;
  add_common(twolevel, common);
  twolevel->add_option("--input", tl_input, "Aligned posture file; one synthetic class when absent");
  twolevel->add_option("--scheme", tl_scheme, "Level-one scheme (mvg or ig)")->capture_default_str();
  twolevel->add_option("--level-two", tl_level_two)->delimiter(',')->capture_default_str();
  twolevel->add_option("--d1", tl_d1, "0 uses --spatial-threshold")->capture_default_str();
  twolevel->add_option("--d2", tl_d2, "0 uses --temporal-threshold")->capture_default_str();
  twolevel->add_option("--spatial-threshold", tl_st)->capture_default_str();
  twolevel->add_option("--temporal-threshold", tl_tt)->capture_default_str();
  twolevel->add_option("--simulate", tl_simulate)->capture_default_str();
  twolevel->add_option("--split", tl_split)->capture_default_str();
  twolevel->add_option("--repeats", tl_repeats)->capture_default_str();
  twolevel->add_option("--n-perm", tl_perm)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << to_string(ErrorKind::ConfigError) << ": " << msg << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      Run run("synth", common);
      run.config() = so.to_json();
      const LabeledDataset data = synthesize(so, common.seed);
      run.write(so.format == "raw" ? "raw.jsonl" : "postures.jsonl", synth_text(so, data));
      run.finish();
    } else if (ingest->parsed()) {
      Run run("ingest", common);
      run.config() = {{"downsample", ingest_target}};
      const fs::path in = run.input(ingest_input);
      require(first_format(in) == "posemu.raw", ErrorKind::FormatError, in.string() + ": expected a raw file");
      run.write("postures.jsonl", postures_text(load_motion(in, ingest_target)));
      run.finish();
    } else if (align->parsed()) {
      Run run("align", common);
      run.config() = {{"ref_index", ref_index}};
      stage_align(run, load_motion(run.input(align_input), 0), ref_index);
      run.finish();
    } else if (flatten->parsed()) {
      Run run("flatten", common);
      const FlatKind kind = parse_flat_kind(repr);
      run.config() = {{"repr", std::string(to_string(kind))}};
      stage_flatten(run, load_motion(run.input(flatten_input), 0), kind);
      run.finish();
    } else if (reduce->parsed()) {
      Run run("reduce", common);
      run.config() = ro.to_json();
      stage_reduce(run, load_fields(run.input(reduce_input), nullptr), ro);
      run.finish();
    } else if (fit->parsed()) {
      Run run("fit", common);
      run.config() = ff.to_json();
      if (Scheme::parse(ff.scheme).model == ModelKind::PWI) {
        require(!fit_input.empty(), ErrorKind::ConfigError, "pwi schemes need --input");
        stage_fit_pwi(run, load_motion(run.input(fit_input), 0), ff);
      } else {
        require(!fit_fields.empty() && !fit_reduction_path.empty(), ErrorKind::ConfigError,
                "non-pwi schemes need --fields and --reduction");
        const auto fields = load_fields(run.input(fit_fields), nullptr);
        stage_fit_fields(run, fields, load_reduction(run.input(fit_reduction_path)), ff);
      }
      run.finish();
    } else if (simulate->parsed()) {
      Run run("simulate", common);
      run.config() = {{"count", count}, {"split", split}};
      stage_simulate(run, load_bundle(run.input(sim_bundle)), count, split);
      run.finish();
    } else if (two_sample->parsed()) {
      Run run("eval-two-sample", common);
      run.config() = {{"n_perm", tf.n_perm}, {"exhaustive", tf.exhaustive}, {"distances", tf.distances}};
      const auto a = load_motion(run.input(ts_a), 0).sequences;
      const auto b = load_motion(run.input(ts_b), 0).sequences;
      stage_two_sample(run, a, b, tf);
      run.finish();
    } else if (quantize_cmd->parsed()) {
      Run run("eval-quantize", common);
      run.config() = {{"k", q_k}, {"k_max", q_kmax}, {"sample", q_sample}};
      const auto train = load_motion(run.input(q_train), 0).sequences;
      auto sets = q_inputs.empty() ? std::vector<std::pair<std::string, std::vector<MotionSequence>>>{{set_name(q_train), train}}
                                   : load_sets(run, q_inputs);
      const auto sample = sample_postures(train, q_sample, derive_seed(common.seed, kQuantizeStream));
      const Eigen::MatrixXf dist = posture_distance_matrix(sample);
      const int k = q_k > 0 ? q_k : select_k(sample, dist, 2, q_kmax);
      const ClusterModel model = cluster_postures(sample, dist, k);
      const QuantizedSequence reference = quantize(pointwise_mean(train), model);
      std::ostringstream labels, stats;
      labels << "set,sequence,labels\n";
      labels << "mean,0,";
      for (std::size_t t = 0; t < reference.size(); ++t) labels << (t ? " " : "") << reference[t];
      labels << '\n';
      stats << "set,count,k,mean,variance\n";
      for (const auto& [name, seqs] : sets) {
        std::vector<QuantizedSequence> q(seqs.size());
        parallel_for(seqs.size(), [&](std::size_t i) { q[i] = quantize(seqs[i], model); });
        for (std::size_t i = 0; i < q.size(); ++i) {
          labels << name << ',' << i << ',';
          for (std::size_t t = 0; t < q[i].size(); ++t) labels << (t ? " " : "") << q[i][t];
          labels << '\n';
        }
        const VariabilityStats s = variability_stats(q, reference);
        stats << name << ',' << q.size() << ',' << k << ',' << format_double(s.mean) << ','
              << format_double(s.variance) << '\n';
      }
      std::ostringstream modes;
      modes << "mode,sample_index\n";
      for (std::size_t m = 0; m < model.medoids.size(); ++m) modes << m + 1 << ',' << model.medoids[m] << '\n';
      run.write("quantized.csv", labels.str());
      run.write("variability.csv", stats.str());
      run.write("modes.csv", modes.str());
      run.finish();
    } else if (rough_cmd->parsed()) {
      Run run("eval-roughness", common);
      run.config() = json::object();
      stage_roughness(run, load_sets(run, r_inputs));
      run.finish();
    } else if (mds_cmd->parsed()) {
      Run run("eval-mds", common);
      run.config() = {{"dims", m_dims}};
      const auto sets = load_sets(run, m_inputs);
      std::vector<MotionSequence> pooled;
      for (const auto& s : sets) pooled.insert(pooled.end(), s.second.begin(), s.second.end());
      const Eigen::MatrixXd dist = seq_distance_matrix(pooled);
      const Eigen::MatrixXd coords = mds_coords(dist, m_dims);
      std::ostringstream out, d;
      out << "set,sequence";
      for (Eigen::Index c = 0; c < coords.cols(); ++c) out << ",x" << c + 1;
      out << '\n';
      Eigen::Index row = 0;
      for (const auto& [name, seqs] : sets)
        for (std::size_t i = 0; i < seqs.size(); ++i, ++row) {
          out << name << ',' << i;
          for (Eigen::Index c = 0; c < coords.cols(); ++c) out << ',' << format_double(coords(row, c));
          out << '\n';
        }
      for (Eigen::Index i = 0; i < dist.rows(); ++i) {
        for (Eigen::Index j = 0; j < dist.cols(); ++j) d << (j ? "," : "") << format_double(dist(i, j));
        d << '\n';
      }
      run.write("mds.csv", out.str());
      run.write("distances.csv", d.str());
      run.finish();
    } else if (qq_cmd->parsed()) {
      Run run("eval-qq", common);
      run.config() = json::object();
      const EmulatorBundle bundle = load_bundle(run.input(qq_bundle));
      const auto test = load_motion(run.input(qq_test), 0).sequences;
      const auto sim = load_motion(run.input(qq_sim), 0).sequences;
      std::vector<double> lt(test.size()), ls(sim.size());
      parallel_for(test.size(), [&](std::size_t i) { lt[i] = bundle_loglik(bundle, test[i]); });
      parallel_for(sim.size(), [&](std::size_t i) { ls[i] = bundle_loglik(bundle, sim[i]); });
      std::ostringstream out, ll;
      out << "test_quantile,sim_quantile\n";
      for (const auto& [x, y] : qq_data(lt, ls)) out << format_double(x) << ',' << format_double(y) << '\n';
      ll << "set,sequence,loglik\n";
      for (std::size_t i = 0; i < lt.size(); ++i) ll << "test," << i << ',' << format_double(lt[i]) << '\n';
      for (std::size_t i = 0; i < ls.size(); ++i) ll << "sim," << i << ',' << format_double(ls[i]) << '\n';
      run.write("qq.csv", out.str());
      run.write("logliks.csv", ll.str());
      run.finish();
    } else if (pipeline->parsed()) {
      Run run("pipeline", common);
      const Scheme scheme = Scheme::parse(pro.scheme);
      pff.scheme = pro.scheme;
      run.config() = {{"input", p_input},   {"downsample", p_downsample}, {"ref_index", ref_index},
                      {"reduce", pro.to_json()}, {"fit", pff.to_json()}, {"count", p_count},
                      {"n_perm", ptf.n_perm}};
      const auto load_stage = [&](const char* name) { return load_motion(run.artifact_path(name), 0); };
      if (p_input.empty()) {
        pso.format = "posture";
        if (p_downsample_opt->count() > 0) pso.downsample_to = p_downsample;
        run.config()["synth"] = pso.to_json();
        run.write("postures.jsonl", synth_text(pso, synthesize(pso, common.seed)));
      } else {
        run.write("postures.jsonl", postures_text(load_motion(run.input(p_input), p_downsample)));
      }
      stage_align(run, load_stage("postures.jsonl"), ref_index);
      const PostureDataset aligned = load_stage("aligned.jsonl");
      if (scheme.model == ModelKind::PWI) {
        stage_fit_pwi(run, aligned, pff);
      } else {
        stage_flatten(run, aligned, scheme.repr);
        stage_reduce(run, load_fields(run.artifact_path("fields.jsonl"), nullptr), pro);
        stage_fit_fields(run, load_fields(run.artifact_path("fields.jsonl"), nullptr),
                         load_reduction(run.artifact_path("reduction.json")), pff);
      }
      const std::size_t n = p_count > 0 ? p_count : aligned.sequences.size();
      stage_simulate(run, load_bundle(run.artifact_path("bundle.json")), n, "");
      const auto sims = load_stage("simulated.jsonl").sequences;
      stage_two_sample(run, aligned.sequences, sims, ptf);
      stage_roughness(run, {{"aligned", aligned.sequences}, {"simulated", sims}});
      run.finish();
    } else if (twolevel->parsed()) {
      Run run("twolevel", common);
      TwoLevelConfig cfg;
      cfg.level_one.scheme = Scheme::parse(tl_scheme);
      cfg.level_one.spatial = selection(tl_d1, tl_st);
      cfg.level_one.temporal = selection(tl_d2, tl_tt);
      for (const auto& s : tl_level_two) cfg.level_two.push_back(Scheme::parse(s));
      const auto [train, test] = parse_split(tl_split);
      require(train + test == tl_simulate, ErrorKind::ConfigError, "--split must add up to --simulate");
      cfg.simulate = tl_simulate;
      cfg.train = train;
      cfg.repeats = tl_repeats;
      cfg.n_perm = tl_perm;
      cfg.seed = common.seed;
      json schemes = json::array();
      for (const auto& s : cfg.level_two) schemes.push_back(s.str());
      run.config() = {{"input", tl_input},
                      {"scheme", cfg.level_one.scheme.str()},
                      {"level_two", schemes},
                      {"spatial", selection_json(tl_d1, tl_st)},
                      {"temporal", selection_json(tl_d2, tl_tt)},
                      {"simulate", tl_simulate},
                      {"split", tl_split},
                      {"repeats", tl_repeats},
                      {"n_perm", tl_perm}};
      std::vector<MotionSequence> training;
      if (tl_input.empty()) {
        SynthConfig sc;
        sc.seed = common.seed;
        const auto seqs = gen_class(sc);
        training = align_all(seqs, 0, default_alignment_reference(seqs)).aligned;
        run.write("training.jsonl", postures_text(unlabeled(training)));
      } else {
        training = load_motion(run.input(tl_input), 0).sequences;
      }
      const TwoLevelReport report = run_twolevel(training, cfg);
      std::ostringstream table, qq;
      table << "level_one,level_two,median_p,below_fraction,median_shift";
      for (std::size_t r = 0; r < cfg.repeats; ++r) table << ",p" << r + 1;
      table << '\n';
      qq << "level_two,test_quantile,sim_quantile\n";
      for (const auto& row : report.rows) {
        table << report.level_one << ',' << row.scheme << ',' << format_double(row.median_p) << ','
              << format_double(row.below_fraction) << ',' << format_double(row.median_shift);
        for (double p : row.p_values) table << ',' << format_double(p);
        table << '\n';
        for (const auto& [x, y] : row.qq) qq << row.scheme << ',' << format_double(x) << ',' << format_double(y) << '\n';
      }
      run.write("twolevel.csv", table.str());
      run.write("twolevel_qq.csv", qq.str());
      std::cout << table.str();
      run.finish();
    }
  } catch (const Error& e) {
    std::string detail = e.detail();
    for (char& c : detail)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << to_string(e.kind()) << ": " << detail << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << to_string(ErrorKind::IoError) << ": " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << to_string(ErrorKind::FormatError) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
