// Command-line surface: train, eval, ablate, inspect-graph, gen-synth.
// Every subcommand takes a config file plus flag overrides; failures exit
// nonzero with a structured `ERROR <code>: <message>` line on stderr.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "pbgcn/run.hpp"

namespace {

using pbgcn::RunConfig;

struct Overrides {
  std::optional<std::string> graph, scheme, data, split, out, signal, precision,
      checkpoint;
  std::optional<int> epochs, batch_size, frames, bodies, classes, tau, threads;
  std::optional<double> lr;
  std::optional<uint64_t> seed;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--graph", ov.graph, "Topology config file");
  cmd->add_option("--scheme", ov.scheme, "Partition scheme config file");
  cmd->add_option("--data", ov.data, "Dataset directory of .skeleton files");
  cmd->add_option("--split", ov.split, "Split spec file");
  cmd->add_option("--out", ov.out, "Output directory");
  cmd->add_option("--signal", ov.signal, "Vertex signal: jloc, dr, dt, dr_dt");
  cmd->add_option("--precision", ov.precision, "double or single");
  cmd->add_option("--epochs", ov.epochs, "Training epochs");
  cmd->add_option("--batch-size", ov.batch_size, "Mini-batch size");
  cmd->add_option("--frames", ov.frames, "Harmonized sequence length");
  cmd->add_option("--bodies", ov.bodies, "Body slots per sample");
  cmd->add_option("--classes", ov.classes, "Class count (0 = infer)");
  cmd->add_option("--tau", ov.tau, "Temporal kernel size (odd)");
  cmd->add_option("--threads", ov.threads, "Batch shards run in parallel");
  cmd->add_option("--lr", ov.lr, "Base learning rate");
  cmd->add_option("--seed", ov.seed, "Seed for init and shuffling");
}

RunConfig make_run_config(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = pbgcn::load_run_config(pbgcn::config::parse_file(config_path));
  }
  if (ov.graph) cfg.graph_path = *ov.graph;
  if (ov.scheme) cfg.scheme_path = *ov.scheme;
  if (ov.data) cfg.data_dir = *ov.data;
  if (ov.split) cfg.split_path = *ov.split;
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.signal) cfg.signal = *ov.signal;
  if (ov.precision) cfg.precision = *ov.precision;
  if (ov.checkpoint) cfg.checkpoint_path = *ov.checkpoint;
  if (ov.epochs) cfg.train.epochs = *ov.epochs;
  if (ov.batch_size) cfg.train.batch_size = *ov.batch_size;
  if (ov.frames) cfg.frames = *ov.frames;
  if (ov.bodies) cfg.bodies = *ov.bodies;
  if (ov.classes) cfg.classes = *ov.classes;
  if (ov.tau) cfg.tau = *ov.tau;
  if (ov.threads) cfg.train.threads = *ov.threads;
  if (ov.lr) cfg.train.base_lr = *ov.lr;
  if (ov.seed) cfg.train.seed = *ov.seed;
  return cfg;
}

pbgcn::PartitionScheme scheme_from_paths(const pbgcn::SkeletonGraph& graph,
                                         const std::string& graph_path,
                                         const std::string& scheme_path) {
  const std::string path = scheme_path.empty() ? graph_path : scheme_path;
  auto file = pbgcn::config::parse_file(path);
  if (scheme_path.empty() && file.all("part").empty()) {
    // No scheme anywhere: fall back to the whole graph as one part.
    pbgcn::PartitionSpec spec;
    spec.name = "one";
    pbgcn::PartitionSpec::PartSpec part;
    part.name = "body";
    for (int v = 0; v < graph.num_vertices(); ++v) part.vertices.push_back(v);
    spec.parts.push_back(std::move(part));
    return pbgcn::build_partition(graph, spec);
  }
  return pbgcn::build_partition(graph, pbgcn::config::load_partition_spec(file));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Part-based graph convolutional networks for skeleton action recognition"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* train_cmd =
      app.add_subcommand("train", "Train a model and save the best checkpoint");
  train_cmd->add_option("--config", config_path, "Run config file ([run] section)");
  add_override_flags(train_cmd, ov);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the eval split");
  eval_cmd->add_option("--config", config_path, "Run config file ([run] section)");
  eval_cmd->add_option("--checkpoint", ov.checkpoint, "Checkpoint file to load");
  add_override_flags(eval_cmd, ov);

  auto* ablate_cmd = app.add_subcommand("ablate", "Train a scheme x signal grid");
  std::vector<std::string> grid_schemes, grid_signals;
  ablate_cmd->add_option("--config", config_path, "Run config file ([run] section)");
  ablate_cmd->add_option("--schemes", grid_schemes, "Scheme config files")
      ->delimiter(',')
      ->required();
  ablate_cmd->add_option("--signals", grid_signals, "Signals (jloc, dr, dt, dr_dt)")
      ->delimiter(',')
      ->required();
  add_override_flags(ablate_cmd, ov);

  auto* inspect_cmd =
      app.add_subcommand("inspect-graph", "Print partition membership and spectra");
  std::string inspect_graph_path, inspect_scheme_path;
  inspect_cmd->add_option("--graph", inspect_graph_path, "Topology config file")
      ->required();
  inspect_cmd->add_option("--scheme", inspect_scheme_path,
                          "Partition scheme config file (defaults to the graph file)");

  auto* synth_cmd = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  std::string synth_graph, synth_scheme, synth_spec, synth_out;
  synth_cmd->add_option("--graph", synth_graph, "Topology config file")->required();
  synth_cmd->add_option("--scheme", synth_scheme, "Partition scheme config file")
      ->required();
  synth_cmd->add_option("--spec", synth_spec, "Synthetic spec file ([synthetic] section)")
      ->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    const bool unknown = std::string(e.get_name()) == "ExtrasError";
    std::cerr << "ERROR " << (unknown ? "UnknownSubcommand" : "ConfigParseError") << ": "
              << e.what() << "\n";
    return 1;
  }

  try {
    if (train_cmd->parsed()) {
      RunConfig cfg = make_run_config(config_path, ov);
      pbgcn::RunOutput out = pbgcn::run_training_session(cfg);
      std::cout << "trained " << out.training.log.size() << " epoch(s); best val acc "
                << out.training.best_val_acc << " at epoch " << out.training.best_epoch
                << "\n";
      std::cout << "log:        " << out.log_csv_path << "\n"
                << "checkpoint: " << out.checkpoint_path << "\n"
                << "eval acc:   " << out.eval_accuracy << " (" << out.split_name
                << ")\n";
    } else if (eval_cmd->parsed()) {
      RunConfig cfg = make_run_config(config_path, ov);
      pbgcn::require(!cfg.checkpoint_path.empty(), pbgcn::errc::ConfigParseError,
                     "eval needs --checkpoint or a 'checkpoint' config key");
      pbgcn::RunOutput out = pbgcn::run_evaluation(cfg);
      std::cout << "eval acc: " << out.eval_accuracy << " (" << out.split_name << ")\n"
                << "confusion: " << out.confusion_csv_path << ", "
                << out.confusion_pgm_path << "\n";
    } else if (ablate_cmd->parsed()) {
      RunConfig cfg = make_run_config(config_path, ov);
      pbgcn::AblationResult result = pbgcn::run_ablation(cfg, grid_schemes, grid_signals);
      std::filesystem::create_directories(cfg.out_dir);
      const std::string csv_path = cfg.out_dir + "/ablation.csv";
      std::ofstream csv(csv_path, std::ios::binary);
      pbgcn::require(csv.good(), pbgcn::errc::IOError, "cannot write '" + csv_path + "'");
      csv << result.csv;
      std::cout << result.csv << "written: " << csv_path << "\n";
    } else if (inspect_cmd->parsed()) {
      auto graph =
          pbgcn::config::load_graph(pbgcn::config::parse_file(inspect_graph_path));
      auto scheme = scheme_from_paths(graph, inspect_graph_path, inspect_scheme_path);
      std::cout << pbgcn::inspect_graph_report(graph, scheme);
    } else if (synth_cmd->parsed()) {
      auto graph = pbgcn::config::load_graph(pbgcn::config::parse_file(synth_graph));
      auto scheme = pbgcn::build_partition(
          graph,
          pbgcn::config::load_partition_spec(pbgcn::config::parse_file(synth_scheme)));
      auto spec = pbgcn::load_synthetic_spec(pbgcn::config::parse_file(synth_spec));
      auto dataset = pbgcn::generate_synthetic_dataset(graph, scheme, spec);
      pbgcn::write_skeleton_dataset(synth_out, dataset);
      std::cout << "wrote " << dataset.size() << " sequence(s) to " << synth_out << "\n";
    }
  } catch (const pbgcn::Error& e) {
    std::cerr << "ERROR " << e.code_name() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
