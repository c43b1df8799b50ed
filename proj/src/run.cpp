#include "pbgcn/run.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pbgcn {

namespace fs = std::filesystem;

RunConfig load_run_config(const config::File& file) {
  const config::Section& s = file.require_section("run");
  s.restrict_keys({"graph", "scheme", "data", "split", "out", "checkpoint", "signal",
                   "tau", "units", "classes", "self_loop_weight", "bodies", "frames",
                   "share_part_weights", "precision", "max_bodies", "base_lr",
                   "decay_factor", "decay_epochs", "epochs", "batch_size", "momentum",
                   "weight_decay", "seed", "threads"});
  RunConfig cfg;
  if (s.has("graph")) cfg.graph_path = s.get("graph").as_str("[run] graph");
  if (s.has("scheme")) cfg.scheme_path = s.get("scheme").as_str("[run] scheme");
  if (s.has("data")) cfg.data_dir = s.get("data").as_str("[run] data");
  if (s.has("split")) cfg.split_path = s.get("split").as_str("[run] split");
  if (s.has("out")) cfg.out_dir = s.get("out").as_str("[run] out");
  if (s.has("checkpoint")) {
    cfg.checkpoint_path = s.get("checkpoint").as_str("[run] checkpoint");
  }
  if (s.has("signal")) cfg.signal = s.get("signal").as_str("[run] signal");
  if (s.has("tau")) cfg.tau = static_cast<int>(s.get("tau").as_int("[run] tau"));
  if (s.has("units")) {
    for (const auto& row : s.get("units").as_list("[run] units")) {
      auto triple = row.as_int_list("[run] units");
      require(triple.size() == 3, errc::ConfigParseError,
              "[run] units entries must be [in, out, stride]");
      cfg.plan.push_back({triple[0], triple[1], triple[2]});
    }
  }
  if (s.has("classes")) {
    cfg.classes = static_cast<int>(s.get("classes").as_int("[run] classes"));
  }
  if (s.has("self_loop_weight")) {
    cfg.self_loop_weight = s.get("self_loop_weight").as_real("[run] self_loop_weight");
  }
  if (s.has("bodies")) {
    cfg.bodies = static_cast<int>(s.get("bodies").as_int("[run] bodies"));
  }
  if (s.has("frames")) {
    cfg.frames = static_cast<int>(s.get("frames").as_int("[run] frames"));
  }
  if (s.has("share_part_weights")) {
    cfg.share_part_weights = s.get("share_part_weights").as_bool("[run] share_part_weights");
  }
  if (s.has("precision")) cfg.precision = s.get("precision").as_str("[run] precision");
  if (s.has("max_bodies")) {
    cfg.max_bodies_parse = static_cast<int>(s.get("max_bodies").as_int("[run] max_bodies"));
  }
  if (s.has("base_lr")) cfg.train.base_lr = s.get("base_lr").as_real("[run] base_lr");
  if (s.has("decay_factor")) {
    cfg.train.decay_factor = s.get("decay_factor").as_real("[run] decay_factor");
  }
  if (s.has("decay_epochs")) {
    cfg.train.decay_epochs = s.get("decay_epochs").as_int_list("[run] decay_epochs");
  }
  if (s.has("epochs")) {
    cfg.train.epochs = static_cast<int>(s.get("epochs").as_int("[run] epochs"));
  }
  if (s.has("batch_size")) {
    cfg.train.batch_size = static_cast<int>(s.get("batch_size").as_int("[run] batch_size"));
  }
  if (s.has("momentum")) cfg.train.momentum = s.get("momentum").as_real("[run] momentum");
  if (s.has("weight_decay")) {
    cfg.train.weight_decay = s.get("weight_decay").as_real("[run] weight_decay");
  }
  if (s.has("seed")) {
    cfg.train.seed = static_cast<uint64_t>(s.get("seed").as_int("[run] seed"));
  }
  if (s.has("threads")) {
    cfg.train.threads = static_cast<int>(s.get("threads").as_int("[run] threads"));
  }
  require(cfg.precision == "double" || cfg.precision == "single", errc::ConfigParseError,
          "[run] precision must be 'double' or 'single'");
  return cfg;
}

NetworkConfig network_config_from(const RunConfig& cfg) {
  NetworkConfig net;
  net.signal = signal_from_name(cfg.signal);
  net.tau = cfg.tau;
  if (!cfg.plan.empty()) net.plan = cfg.plan;
  net.num_classes = cfg.classes;
  net.self_loop_weight = cfg.self_loop_weight;
  net.bodies = cfg.bodies;
  net.frames = cfg.frames;
  net.share_part_weights = cfg.share_part_weights;
  return net;
}

std::vector<LabeledFeature> build_features(const std::vector<LabeledSequence>& samples,
                                           const SkeletonGraph& graph, SignalTag tag,
                                           int frames, int bodies) {
  std::vector<LabeledFeature> out;
  out.reserve(samples.size());
  for (const auto& item : samples) {
    require(item.seq.joints == graph.num_vertices(), errc::ShapeMismatch,
            "sequence '" + item.name + "' has " + std::to_string(item.seq.joints) +
                " joints, topology has " + std::to_string(graph.num_vertices()));
    SkeletonSequence seq = harmonize_sequence_length(item.seq, frames);
    LabeledFeature f;
    f.features = compute_signal(seq, tag, graph.reference_joints(), bodies);
    f.label = item.meta.action;
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

struct LoadedSession {
  SkeletonGraph graph;
  PartitionScheme scheme;
  std::vector<LabeledFeature> train_features;
  std::vector<LabeledFeature> eval_features;
  std::string split_name;
  int classes = 0;
};

PartitionScheme load_scheme_for(const SkeletonGraph& graph, const RunConfig& cfg) {
  require(!cfg.scheme_path.empty(), errc::ConfigParseError,
          "missing partition scheme path");
  auto file = config::parse_file(cfg.scheme_path);
  return build_partition(graph, config::load_partition_spec(file));
}

LoadedSession load_session(const RunConfig& cfg) {
  require(!cfg.graph_path.empty(), errc::ConfigParseError, "missing topology path");
  require(!cfg.data_dir.empty(), errc::ConfigParseError, "missing data directory");
  require(!cfg.split_path.empty(), errc::ConfigParseError, "missing split spec path");

  SkeletonGraph graph = config::load_graph(config::parse_file(cfg.graph_path));
  PartitionScheme scheme = load_scheme_for(graph, cfg);

  DatasetLoad data = load_skeleton_dataset(cfg.data_dir, cfg.max_bodies_parse);
  if (data.skipped > 0) {
    std::cerr << "note: skipped " << data.skipped
              << " file(s) with missing or incomplete skeleton data\n";
  }
  SplitSpec split = load_split_spec(config::parse_file(cfg.split_path));
  std::vector<RecordingMeta> metas;
  metas.reserve(data.samples.size());
  for (const auto& s : data.samples) metas.push_back(s.meta);
  auto [train_idx, eval_idx] = make_split(metas, split);

  int classes = cfg.classes;
  if (classes == 0) {
    for (const auto& s : data.samples) classes = std::max(classes, s.meta.action + 1);
  }
  require(classes >= 1, errc::UnknownClassCount, "cannot infer the class count");

  const SignalTag tag = signal_from_name(cfg.signal);
  std::vector<LabeledSequence> train_samples, eval_samples;
  for (int i : train_idx) train_samples.push_back(data.samples[i]);
  for (int i : eval_idx) eval_samples.push_back(data.samples[i]);

  LoadedSession session{std::move(graph), std::move(scheme), {}, {},
                        split_protocol_name(split.protocol), classes};
  session.train_features =
      build_features(train_samples, session.graph, tag, cfg.frames, cfg.bodies);
  session.eval_features =
      build_features(eval_samples, session.graph, tag, cfg.frames, cfg.bodies);
  return session;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::IOError, "cannot write '" + path + "'");
  out << text;
  require(out.good(), errc::IOError, "failed writing '" + path + "'");
}

template <class S>
RunOutput train_with_precision(const RunConfig& cfg, const LoadedSession& session) {
  NetworkConfig net = network_config_from(cfg);
  net.num_classes = session.classes;
  ModelT<S> model(net, session.graph, session.scheme, cfg.train.seed);
  auto [mean, stddev] = feature_channel_stats(session.train_features);
  model.set_standardization(mean, stddev);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  require(!ec, errc::IOError, "cannot create output directory '" + cfg.out_dir + "'");

  RunOutput out;
  out.split_name = session.split_name;
  out.checkpoint_path = cfg.out_dir + "/best.ckpt";
  out.training = train(model, session.train_features, session.eval_features, cfg.train,
                       out.checkpoint_path);
  out.log_csv_path = cfg.out_dir + "/log.csv";
  write_text(out.log_csv_path, log_csv(out.training.log));

  // Evaluate the persisted best checkpoint, not the final epoch state.
  model.load_checkpoint(out.checkpoint_path);
  EvalResult eval = evaluate(model, session.eval_features);
  out.eval_accuracy = eval.accuracy;
  out.confusion_csv_path = cfg.out_dir + "/confusion.csv";
  out.confusion_pgm_path = cfg.out_dir + "/confusion.pgm";
  render_heatmap(eval.matrix, out.confusion_pgm_path, out.confusion_csv_path);
  return out;
}

template <class S>
RunOutput eval_with_precision(const RunConfig& cfg, const LoadedSession& session) {
  require(!cfg.checkpoint_path.empty(), errc::ConfigParseError,
          "eval needs a checkpoint path");
  NetworkConfig net = network_config_from(cfg);
  net.num_classes = session.classes;
  ModelT<S> model(net, session.graph, session.scheme, cfg.train.seed);
  model.load_checkpoint(cfg.checkpoint_path);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  require(!ec, errc::IOError, "cannot create output directory '" + cfg.out_dir + "'");

  RunOutput out;
  out.split_name = session.split_name;
  out.checkpoint_path = cfg.checkpoint_path;
  EvalResult eval = evaluate(model, session.eval_features);
  out.eval_accuracy = eval.accuracy;
  out.confusion_csv_path = cfg.out_dir + "/confusion.csv";
  out.confusion_pgm_path = cfg.out_dir + "/confusion.pgm";
  render_heatmap(eval.matrix, out.confusion_pgm_path, out.confusion_csv_path);
  return out;
}

}  // namespace

RunOutput run_training_session(const RunConfig& cfg) {
  LoadedSession session = load_session(cfg);
  if (cfg.precision == "single") return train_with_precision<float>(cfg, session);
  return train_with_precision<double>(cfg, session);
}

RunOutput run_evaluation(const RunConfig& cfg) {
  LoadedSession session = load_session(cfg);
  if (cfg.precision == "single") return eval_with_precision<float>(cfg, session);
  return eval_with_precision<double>(cfg, session);
}

AblationResult run_ablation(const RunConfig& base,
                            const std::vector<std::string>& scheme_paths,
                            const std::vector<std::string>& signal_names) {
  require(!scheme_paths.empty() && !signal_names.empty(), errc::InvalidSpec,
          "ablation grid must not be empty");
  AblationResult result;
  std::ostringstream csv;
  csv << "scheme,signal,split,accuracy\n";
  char buf[64];
  for (const auto& signal : signal_names) {
    for (const auto& scheme_path : scheme_paths) {
      RunConfig cell = base;
      cell.scheme_path = scheme_path;
      cell.signal = signal;
      const std::string scheme_name =
          config::load_partition_spec(config::parse_file(scheme_path)).name;
      cell.out_dir = base.out_dir + "/" + scheme_name + "_" + signal;
      RunOutput out = run_training_session(cell);
      result.cells.push_back({scheme_name, signal, out.split_name, out.eval_accuracy});
      std::snprintf(buf, sizeof(buf), "%.17g", out.eval_accuracy);
      csv << scheme_name << "," << signal << "," << out.split_name << "," << buf << "\n";
    }
  }
  result.csv = csv.str();
  return result;
}

std::string inspect_graph_report(const SkeletonGraph& graph,
                                 const PartitionScheme& scheme) {
  std::ostringstream out;
  out << "graph: " << graph.num_vertices() << " vertices, " << graph.edges().size()
      << " edges\n";
  out << "scheme '" << scheme.name() << "': " << scheme.part_count() << " part(s)\n";
  for (int p = 0; p < scheme.part_count(); ++p) {
    const Part& part = scheme.part(p);
    out << "  part " << p << " '" << part.name << "': vertices {";
    for (size_t i = 0; i < part.vertices.size(); ++i) {
      if (i) out << ",";
      out << part.vertices[i];
      if (!graph.joint_names().empty()) {
        out << ":" << graph.joint_names()[part.vertices[i]];
      }
    }
    out << "}, " << part.edges.size() << " edge(s)\n";
    NormalizedAdjacency norm = normalize_adjacency(part, p);
    auto eig = symmetric_eigenvalues(norm.values, norm.size);
    char line[96];
    std::snprintf(line, sizeof(line),
                  "    normalized adjacency spectrum: [%.6f, %.6f]\n", eig.front(),
                  eig.back());
    out << line;
  }
  auto shared = scheme.shared_vertices();
  out << "shared vertices: ";
  if (shared.empty()) {
    out << "none\n";
  } else {
    out << "{";
    for (size_t i = 0; i < shared.size(); ++i) {
      if (i) out << ", ";
      out << shared[i].first << " in parts (";
      for (size_t j = 0; j < shared[i].second.size(); ++j) {
        if (j) out << ",";
        out << shared[i].second[j];
      }
      out << ")";
    }
    out << "}\n";
  }
  out << "declared adjacent pairs: ";
  if (scheme.adjacent_pairs().empty()) {
    out << "none\n";
  } else {
    for (size_t i = 0; i < scheme.adjacent_pairs().size(); ++i) {
      if (i) out << ", ";
      out << "(" << scheme.adjacent_pairs()[i].first << ","
          << scheme.adjacent_pairs()[i].second << ")";
    }
    out << "\n";
  }
  out << "cross-part edges: " << scheme.cross_edges().size() << "\n";
  return out.str();
}

}  // namespace pbgcn
