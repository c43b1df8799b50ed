#ifndef PBGCN_DATAIO_HPP
#define PBGCN_DATAIO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pbgcn/config.hpp"
#include "pbgcn/graph.hpp"
#include "pbgcn/signals.hpp"

namespace pbgcn {

/// Fields parsed from a recording name S<sss>C<ccc>P<ppp>R<rrr>A<aaa>.
/// The action id is 1-based in the name, stored 0-based.
struct RecordingMeta {
  int setup = 0;
  int camera = 0;
  int performer = 0;
  int replication = 0;
  int action = 0;
};

RecordingMeta parse_recording_name(const std::string& filename);

/// Parses the line-oriented skeleton format (see docs/formats.md): frame
/// count, then per frame a body count and per body an info line, a joint
/// count and one "x y z ..." line per joint. Frames with fewer bodies than
/// the file maximum are zero-filled.
SkeletonSequence parse_skeleton_file(std::istream& in, int max_bodies = 4);
SkeletonSequence parse_skeleton_string(const std::string& text, int max_bodies = 4);

/// Inverse of parse_skeleton_file up to formatting; coordinates round-trip
/// exactly (written with 17 significant digits).
std::string serialize_skeleton(const SkeletonSequence& seq);

enum class SplitProtocol { CrossSubject, CrossView, KFoldCrossSample };

const char* split_protocol_name(SplitProtocol p);

struct SplitSpec {
  SplitProtocol protocol = SplitProtocol::CrossSubject;
  std::vector<int> train_ids;  // subjects for CS, cameras for CV
  int folds = 0;
  int fold_index = 0;
  uint64_t seed = 0;

  void validate() const;
};

SplitSpec load_split_spec(const config::File& file);

/// Partitions sample indices into (train, eval); the two sides are disjoint
/// and cover all samples.
std::pair<std::vector<int>, std::vector<int>> make_split(
    const std::vector<RecordingMeta>& metas, const SplitSpec& spec);

struct SyntheticSpec {
  int classes = 4;
  int samples_per_class = 70;
  int frames = 48;
  double noise = 0.0;
  uint64_t seed = 1;
  double amplitude = 0.3;
  double placement = 1.0;  // range of the per-sample constant offset

  void validate() const;
};

SyntheticSpec load_synthetic_spec(const config::File& file);

struct LabeledSequence {
  SkeletonSequence seq;
  RecordingMeta meta;
  std::string name;  // recording name without extension
};

/// Synthetic desk-scale dataset: class c animates the joints of part
/// (c mod n) of the given scheme with a class-specific sinusoidal trajectory
/// (distinct frequency and axis) plus optional Gaussian noise on those
/// joints; all other joints stay static. Each sample gets a constant random
/// placement offset, so class identity is carried purely by which part
/// moves. Deterministic for a fixed seed.
std::vector<LabeledSequence> generate_synthetic_dataset(const SkeletonGraph& graph,
                                                        const PartitionScheme& scheme,
                                                        const SyntheticSpec& spec);

void write_skeleton_dataset(const std::string& dir,
                            const std::vector<LabeledSequence>& dataset);

struct DatasetLoad {
  std::vector<LabeledSequence> samples;
  int skipped = 0;  // files with missing/incomplete skeleton data
};

/// Loads every *.skeleton file under dir (sorted by name). Files that fail
/// to parse are skipped and counted rather than aborting the load.
DatasetLoad load_skeleton_dataset(const std::string& dir, int max_bodies = 4);

struct LabeledFeature {
  FeatureTensor features;
  int label = 0;
};

/// Binary feature store: <prefix>.bin holds one record per sequence (tag,
/// label, shape header, validity flags, raw float64 values), <prefix>.idx
/// holds the record offsets. Byte layout documented in docs/formats.md.
void save_feature_store(const std::string& prefix,
                        const std::vector<LabeledFeature>& features);
std::vector<LabeledFeature> load_feature_store(const std::string& prefix);

}  // namespace pbgcn

#endif
