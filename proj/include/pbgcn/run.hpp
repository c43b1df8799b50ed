#ifndef PBGCN_RUN_HPP
#define PBGCN_RUN_HPP

#include <string>
#include <vector>

#include "pbgcn/config.hpp"
#include "pbgcn/eval.hpp"
#include "pbgcn/training.hpp"

namespace pbgcn {

/// Everything one training/evaluation session needs; loaded from a [run]
/// section plus CLI overrides.
struct RunConfig {
  std::string graph_path;
  std::string scheme_path;  // may be the same file as graph_path
  std::string data_dir;
  std::string split_path;
  std::string out_dir = "runs/out";
  std::string checkpoint_path;  // eval: checkpoint to load

  std::string signal = "dr_dt";
  int tau = 9;
  std::vector<UnitPlanEntry> plan;  // empty selects the default 9-unit plan
  int classes = 0;                  // 0 = infer from the dataset labels
  double self_loop_weight = 1.0;
  int bodies = 1;
  int frames = 64;
  bool share_part_weights = false;
  std::string precision = "double";  // or "single"
  int max_bodies_parse = 4;

  TrainConfig train;
};

RunConfig load_run_config(const config::File& file);

NetworkConfig network_config_from(const RunConfig& cfg);

struct RunOutput {
  TrainResult training;
  double eval_accuracy = 0.0;  // best-val checkpoint on the eval side
  std::string split_name;
  std::string log_csv_path;
  std::string checkpoint_path;
  std::string confusion_csv_path;
  std::string confusion_pgm_path;
};

/// Full pipeline: load topology/scheme/data, split, compute signals, train,
/// persist the best checkpoint, evaluate it and write the confusion
/// artifacts under cfg.out_dir. Deterministic for fixed (seed, config, data).
RunOutput run_training_session(const RunConfig& cfg);

/// Evaluates a saved checkpoint on the eval side of the split; writes the
/// confusion artifacts under cfg.out_dir.
RunOutput run_evaluation(const RunConfig& cfg);

struct AblationCell {
  std::string scheme;
  std::string signal;
  std::string split;
  double accuracy = 0.0;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::string csv;  // scheme,signal,split,accuracy
};

/// Trains every (scheme, signal) cell with the shared seed and protocol.
/// Rows are ordered signal-major to mirror the usual ablation table layout.
AblationResult run_ablation(const RunConfig& base,
                            const std::vector<std::string>& scheme_paths,
                            const std::vector<std::string>& signal_names);

/// Human-readable report: part membership, shared vertices, declared
/// adjacency, cross edges and the eigenvalue range of each part operator.
std::string inspect_graph_report(const SkeletonGraph& graph,
                                 const PartitionScheme& scheme);

/// Loads sequences, harmonizes their length and computes the configured
/// signal for each; labels come from the recording names.
std::vector<LabeledFeature> build_features(const std::vector<LabeledSequence>& samples,
                                           const SkeletonGraph& graph, SignalTag tag,
                                           int frames, int bodies);

}  // namespace pbgcn

#endif
