#include "pbgcn/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "feature store format assumes a little-endian host");

namespace pbgcn {

namespace fs = std::filesystem;

RecordingMeta parse_recording_name(const std::string& filename) {
  // Strip directory and extension.
  std::string stem = filename;
  if (auto slash = stem.find_last_of("/\\"); slash != std::string::npos) {
    stem = stem.substr(slash + 1);
  }
  if (auto dot = stem.find('.'); dot != std::string::npos) stem = stem.substr(0, dot);

  static const std::regex pattern(R"(^S(\d+)C(\d+)P(\d+)R(\d+)A(\d+)$)");
  std::smatch m;
  require(std::regex_match(stem, m, pattern), errc::PatternMismatch,
          "recording name '" + stem + "' does not match S<s>C<c>P<p>R<r>A<a>");
  RecordingMeta meta;
  meta.setup = std::stoi(m[1]);
  meta.camera = std::stoi(m[2]);
  meta.performer = std::stoi(m[3]);
  meta.replication = std::stoi(m[4]);
  int action = std::stoi(m[5]);
  require(action >= 1, errc::PatternMismatch,
          "action id in '" + stem + "' must be >= 1");
  meta.action = action - 1;
  return meta;
}

namespace {

bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip blank lines so trailing newlines do not break parsing.
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

int parse_count(const std::string& line, const char* what) {
  std::istringstream ss(line);
  long long v = 0;
  ss >> v;
  require(!ss.fail(), errc::MalformedHeader,
          std::string("expected ") + what + ", found '" + line + "'");
  std::string rest;
  ss >> rest;
  require(rest.empty(), errc::MalformedHeader,
          std::string("trailing content after ") + what);
  require(v >= 0 && v <= 1'000'000, errc::MalformedHeader,
          std::string(what) + " out of range");
  return static_cast<int>(v);
}

}  // namespace

SkeletonSequence parse_skeleton_file(std::istream& in, int max_bodies) {
  std::string line;
  require(next_line(in, line), errc::MalformedHeader, "empty skeleton file");
  const int frames = parse_count(line, "frame count");
  require(frames >= 1, errc::MalformedHeader, "skeleton file declares zero frames");

  int joints = -1;
  // coords[frame][body slot] gathered first, then packed per body.
  std::vector<std::vector<std::vector<double>>> raw(frames);
  int max_seen = 0;
  for (int t = 0; t < frames; ++t) {
    require(next_line(in, line), errc::MalformedHeader,
            "truncated file: missing body count for frame " + std::to_string(t));
    const int nbodies = parse_count(line, "body count");
    require(nbodies <= max_bodies, errc::TooManyBodies,
            "frame " + std::to_string(t) + " has " + std::to_string(nbodies) +
                " bodies (limit " + std::to_string(max_bodies) + ")");
    max_seen = std::max(max_seen, nbodies);
    raw[t].resize(nbodies);
    for (int b = 0; b < nbodies; ++b) {
      require(next_line(in, line), errc::MalformedHeader,
              "truncated file: missing body info line");
      require(next_line(in, line), errc::MalformedHeader,
              "truncated file: missing joint count");
      const int njoints = parse_count(line, "joint count");
      require(njoints >= 1, errc::MalformedHeader, "body declares zero joints");
      if (joints < 0) {
        joints = njoints;
      } else {
        require(njoints == joints, errc::JointCountMismatch,
                "joint count changed from " + std::to_string(joints) + " to " +
                    std::to_string(njoints));
      }
      auto& block = raw[t][b];
      block.reserve(static_cast<size_t>(njoints) * 3);
      for (int j = 0; j < njoints; ++j) {
        require(next_line(in, line), errc::MalformedHeader,
                "truncated file: missing joint line");
        std::istringstream ss(line);
        for (int k = 0; k < 3; ++k) {
          double v = 0.0;
          ss >> v;
          require(!ss.fail(), errc::MalformedHeader,
                  "joint line '" + line + "' has fewer than three fields");
          require(std::isfinite(v), errc::NonFiniteCoordinate,
                  "non-finite coordinate in joint line '" + line + "'");
          block.push_back(v);
        }
      }
    }
  }
  require(max_seen >= 1, errc::MalformedHeader, "skeleton file contains no bodies");

  SkeletonSequence seq;
  seq.frames = frames;
  seq.joints = joints;
  seq.bodies.assign(max_seen,
                    std::vector<double>(static_cast<size_t>(frames) * joints * 3, 0.0));
  for (int t = 0; t < frames; ++t) {
    for (size_t b = 0; b < raw[t].size(); ++b) {
      std::copy(raw[t][b].begin(), raw[t][b].end(),
                seq.bodies[b].begin() + static_cast<size_t>(t) * joints * 3);
    }
  }
  return seq;
}

SkeletonSequence parse_skeleton_string(const std::string& text, int max_bodies) {
  std::istringstream ss(text);
  return parse_skeleton_file(ss, max_bodies);
}

std::string serialize_skeleton(const SkeletonSequence& seq) {
  std::ostringstream out;
  out << seq.frames << "\n";
  char buf[32];
  for (int t = 0; t < seq.frames; ++t) {
    out << seq.bodies.size() << "\n";
    for (size_t b = 0; b < seq.bodies.size(); ++b) {
      out << "0\n";  // body info line (ignored on parse)
      out << seq.joints << "\n";
      for (int v = 0; v < seq.joints; ++v) {
        for (int k = 0; k < 3; ++k) {
          std::snprintf(buf, sizeof(buf), "%.17g", seq.at(static_cast<int>(b), t, v, k));
          out << buf << (k == 2 ? "\n" : " ");
        }
      }
    }
  }
  return out.str();
}

const char* split_protocol_name(SplitProtocol p) {
  switch (p) {
    case SplitProtocol::CrossSubject: return "cross_subject";
    case SplitProtocol::CrossView: return "cross_view";
    case SplitProtocol::KFoldCrossSample: return "k_fold_cross_sample";
  }
  return "unknown";
}

void SplitSpec::validate() const {
  if (protocol == SplitProtocol::KFoldCrossSample) {
    require(folds >= 2, errc::InvalidSpec, "k-fold split needs folds >= 2");
    require(fold_index >= 0 && fold_index < folds, errc::InvalidSpec,
            "fold_index out of range");
  } else {
    require(!train_ids.empty(), errc::InvalidSpec,
            "cross-subject/cross-view split needs non-empty train_ids");
  }
}

SplitSpec load_split_spec(const config::File& file) {
  const config::Section& s = file.require_section("split");
  s.restrict_keys({"protocol", "train_ids", "folds", "fold_index", "seed"});
  SplitSpec spec;
  const std::string& proto = s.get("protocol").as_str("[split] protocol");
  if (proto == "cross_subject") {
    spec.protocol = SplitProtocol::CrossSubject;
  } else if (proto == "cross_view") {
    spec.protocol = SplitProtocol::CrossView;
  } else if (proto == "k_fold_cross_sample") {
    spec.protocol = SplitProtocol::KFoldCrossSample;
  } else {
    fail(errc::ConfigParseError, "unknown split protocol '" + proto + "'");
  }
  if (s.has("train_ids")) {
    spec.train_ids = s.get("train_ids").as_int_list("[split] train_ids");
  }
  if (s.has("folds")) spec.folds = static_cast<int>(s.get("folds").as_int("[split] folds"));
  if (s.has("fold_index")) {
    spec.fold_index = static_cast<int>(s.get("fold_index").as_int("[split] fold_index"));
  }
  if (s.has("seed")) {
    spec.seed = static_cast<uint64_t>(s.get("seed").as_int("[split] seed"));
  }
  spec.validate();
  return spec;
}

std::pair<std::vector<int>, std::vector<int>> make_split(
    const std::vector<RecordingMeta>& metas, const SplitSpec& spec) {
  spec.validate();
  require(!metas.empty(), errc::EmptyDataset, "cannot split an empty dataset");
  std::vector<int> train, eval;

  if (spec.protocol == SplitProtocol::KFoldCrossSample) {
    std::vector<int> order(metas.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i = 0; i < order.size(); ++i) {
      if (static_cast<int>(i % spec.folds) == spec.fold_index) {
        eval.push_back(order[i]);
      } else {
        train.push_back(order[i]);
      }
    }
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
  } else {
    std::set<int> ids(spec.train_ids.begin(), spec.train_ids.end());
    for (size_t i = 0; i < metas.size(); ++i) {
      const int id = spec.protocol == SplitProtocol::CrossSubject ? metas[i].performer
                                                                  : metas[i].camera;
      if (ids.count(id)) {
        train.push_back(static_cast<int>(i));
      } else {
        eval.push_back(static_cast<int>(i));
      }
    }
  }
  require(!train.empty(), errc::EmptySide, "split leaves the training side empty");
  require(!eval.empty(), errc::EmptySide, "split leaves the evaluation side empty");
  return {std::move(train), std::move(eval)};
}

void SyntheticSpec::validate() const {
  require(classes >= 1, errc::InvalidSpec, "classes must be >= 1");
  require(samples_per_class >= 1, errc::InvalidSpec, "samples_per_class must be >= 1");
  require(frames >= 2, errc::InvalidSpec, "frames must be >= 2");
  require(noise >= 0.0, errc::InvalidSpec, "noise must be non-negative");
  require(amplitude > 0.0, errc::InvalidSpec, "amplitude must be positive");
  require(placement >= 0.0, errc::InvalidSpec, "placement must be non-negative");
}

SyntheticSpec load_synthetic_spec(const config::File& file) {
  const config::Section& s = file.require_section("synthetic");
  s.restrict_keys(
      {"classes", "samples_per_class", "frames", "noise", "seed", "amplitude",
       "placement"});
  SyntheticSpec spec;
  spec.classes = static_cast<int>(s.get("classes").as_int("[synthetic] classes"));
  spec.samples_per_class = static_cast<int>(
      s.get("samples_per_class").as_int("[synthetic] samples_per_class"));
  spec.frames = static_cast<int>(s.get("frames").as_int("[synthetic] frames"));
  if (s.has("noise")) spec.noise = s.get("noise").as_real("[synthetic] noise");
  if (s.has("seed")) {
    spec.seed = static_cast<uint64_t>(s.get("seed").as_int("[synthetic] seed"));
  }
  if (s.has("amplitude")) {
    spec.amplitude = s.get("amplitude").as_real("[synthetic] amplitude");
  }
  if (s.has("placement")) {
    spec.placement = s.get("placement").as_real("[synthetic] placement");
  }
  spec.validate();
  return spec;
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string synth_name(int cls, int sample) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "S001C%03dP%03dR001A%03d", sample % 3 + 1, sample + 1,
                cls + 1);
  return buf;
}

}  // namespace

std::vector<LabeledSequence> generate_synthetic_dataset(const SkeletonGraph& graph,
                                                        const PartitionScheme& scheme,
                                                        const SyntheticSpec& spec) {
  spec.validate();
  const int v_count = graph.num_vertices();
  const int n = scheme.part_count();

  // One base pose shared by every sample; class identity lives in the motion.
  std::mt19937_64 base_rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> base(static_cast<size_t>(v_count) * 3);
  for (auto& v : base) v = unit(base_rng);

  constexpr double kTwoPi = 6.283185307179586;
  std::vector<LabeledSequence> out;
  out.reserve(static_cast<size_t>(spec.classes) * spec.samples_per_class);
  for (int c = 0; c < spec.classes; ++c) {
    const Part& moving = scheme.part(c % n);
    const int axis = c % 3;
    const double freq = 1.0 + 0.7 * c;
    for (int s = 0; s < spec.samples_per_class; ++s) {
      std::mt19937_64 rng(splitmix64(spec.seed ^ (static_cast<uint64_t>(c) * 1000003u +
                                                  static_cast<uint64_t>(s) + 1)));
      std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const double phase = phase_dist(rng);
      double offset[3];
      for (double& o : offset) o = spec.placement * unit(rng);

      SkeletonSequence seq;
      seq.frames = spec.frames;
      seq.joints = v_count;
      seq.bodies.assign(1, std::vector<double>(static_cast<size_t>(spec.frames) *
                                               v_count * 3));
      seq.label = c;
      seq.subject_id = s + 1;
      seq.camera_id = s % 3 + 1;
      seq.action_id = c;
      for (int t = 0; t < spec.frames; ++t) {
        for (int v = 0; v < v_count; ++v) {
          for (int k = 0; k < 3; ++k) {
            seq.at(0, t, v, k) = base[static_cast<size_t>(v) * 3 + k] + offset[k];
          }
        }
        for (int v : moving.vertices) {
          const double local_phase = 0.4 * moving.local_index(v);
          double wave = spec.amplitude *
                        std::sin(kTwoPi * freq * t / spec.frames + phase + local_phase);
          if (spec.noise > 0.0) wave += spec.noise * gauss(rng);
          seq.at(0, t, v, axis) += wave;
        }
      }

      LabeledSequence item;
      item.seq = std::move(seq);
      item.name = synth_name(c, s);
      item.meta = parse_recording_name(item.name);
      out.push_back(std::move(item));
    }
  }
  return out;
}

void write_skeleton_dataset(const std::string& dir,
                            const std::vector<LabeledSequence>& dataset) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, errc::IOError, "cannot create directory '" + dir + "'");
  for (const auto& item : dataset) {
    const std::string path = dir + "/" + item.name + ".skeleton";
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::IOError, "cannot write '" + path + "'");
    out << serialize_skeleton(item.seq);
    require(out.good(), errc::IOError, "failed writing '" + path + "'");
  }
}

DatasetLoad load_skeleton_dataset(const std::string& dir, int max_bodies) {
  require(fs::is_directory(dir), errc::IOError,
          "dataset directory '" + dir + "' does not exist");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".skeleton") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), errc::EmptyDataset,
          "no .skeleton files under '" + dir + "'");

  DatasetLoad load;
  for (const auto& path : files) {
    LabeledSequence item;
    try {
      item.meta = parse_recording_name(path);
      std::ifstream in(path, std::ios::binary);
      require(in.good(), errc::IOError, "cannot open '" + path + "'");
      item.seq = parse_skeleton_file(in, max_bodies);
    } catch (const Error&) {
      ++load.skipped;  // missing or incomplete skeleton data
      continue;
    }
    item.seq.label = item.meta.action;
    item.seq.subject_id = item.meta.performer;
    item.seq.camera_id = item.meta.camera;
    item.seq.action_id = item.meta.action;
    item.name = fs::path(path).stem().string();
    load.samples.push_back(std::move(item));
  }
  require(!load.samples.empty(), errc::EmptyDataset,
          "every skeleton file under '" + dir + "' failed to parse");
  return load;
}

// ---------------------------------------------------------------------------
// Feature store
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kStoreMagic = 0x53464250;  // "PBFS"
constexpr uint32_t kIndexMagic = 0x49464250;  // "PBFI"
constexpr uint32_t kStoreVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), errc::IOError, "feature store truncated");
  return v;
}

}  // namespace

void save_feature_store(const std::string& prefix,
                        const std::vector<LabeledFeature>& features) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  require(bin.good(), errc::IOError, "cannot write '" + prefix + ".bin'");
  put<uint32_t>(bin, kStoreMagic);
  put<uint32_t>(bin, kStoreVersion);
  put<uint64_t>(bin, features.size());

  std::vector<uint64_t> offsets;
  offsets.reserve(features.size());
  for (const auto& item : features) {
    const FeatureTensor& f = item.features;
    offsets.push_back(static_cast<uint64_t>(bin.tellp()));
    put<uint8_t>(bin, static_cast<uint8_t>(f.tag));
    put<int32_t>(bin, item.label);
    put<uint32_t>(bin, static_cast<uint32_t>(f.channels));
    put<uint32_t>(bin, static_cast<uint32_t>(f.frames));
    put<uint32_t>(bin, static_cast<uint32_t>(f.joints));
    put<uint32_t>(bin, static_cast<uint32_t>(f.bodies));
    for (int m = 0; m < f.bodies; ++m) {
      put<uint8_t>(bin, m < static_cast<int>(f.body_valid.size()) ? f.body_valid[m] : 0);
    }
    bin.write(reinterpret_cast<const char*>(f.data.data()),
              static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  }
  require(bin.good(), errc::IOError, "failed writing '" + prefix + ".bin'");

  std::ofstream idx(prefix + ".idx", std::ios::binary);
  require(idx.good(), errc::IOError, "cannot write '" + prefix + ".idx'");
  put<uint32_t>(idx, kIndexMagic);
  put<uint32_t>(idx, kStoreVersion);
  put<uint64_t>(idx, offsets.size());
  for (uint64_t o : offsets) put<uint64_t>(idx, o);
  require(idx.good(), errc::IOError, "failed writing '" + prefix + ".idx'");
}

std::vector<LabeledFeature> load_feature_store(const std::string& prefix) {
  std::ifstream idx(prefix + ".idx", std::ios::binary);
  require(idx.good(), errc::IOError, "cannot open '" + prefix + ".idx'");
  require(take<uint32_t>(idx) == kIndexMagic, errc::MalformedHeader,
          "'" + prefix + ".idx' is not a feature index");
  require(take<uint32_t>(idx) == kStoreVersion, errc::MalformedHeader,
          "unsupported feature store version");
  const uint64_t count = take<uint64_t>(idx);
  std::vector<uint64_t> offsets(count);
  for (auto& o : offsets) o = take<uint64_t>(idx);

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  require(bin.good(), errc::IOError, "cannot open '" + prefix + ".bin'");
  require(take<uint32_t>(bin) == kStoreMagic, errc::MalformedHeader,
          "'" + prefix + ".bin' is not a feature store");
  require(take<uint32_t>(bin) == kStoreVersion, errc::MalformedHeader,
          "unsupported feature store version");
  require(take<uint64_t>(bin) == count, errc::MalformedHeader,
          "feature store and index disagree on record count");

  std::vector<LabeledFeature> out;
  out.reserve(count);
  for (uint64_t o : offsets) {
    bin.seekg(static_cast<std::streamoff>(o));
    require(bin.good(), errc::IOError, "bad offset in feature index");
    LabeledFeature item;
    const auto tag = static_cast<SignalTag>(take<uint8_t>(bin));
    item.label = take<int32_t>(bin);
    const int c = static_cast<int>(take<uint32_t>(bin));
    const int t = static_cast<int>(take<uint32_t>(bin));
    const int v = static_cast<int>(take<uint32_t>(bin));
    const int m = static_cast<int>(take<uint32_t>(bin));
    item.features = FeatureTensor::zeros(tag, c, t, v, m);
    for (int i = 0; i < m; ++i) item.features.body_valid[i] = take<uint8_t>(bin);
    bin.read(reinterpret_cast<char*>(item.features.data.data()),
             static_cast<std::streamsize>(item.features.data.size() * sizeof(double)));
    require(bin.good(), errc::IOError, "feature store truncated");
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace pbgcn
