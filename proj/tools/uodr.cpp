// SPDX-License-Identifier: Apache-2.0
// Batch entry point: synth, train, ablate, match, eval, da.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include "uodr/config.hpp"
#include "uodr/error.hpp"
#include "uodr/evaluate.hpp"
#include "uodr/kernels.hpp"
#include "uodr/matcher.hpp"
#include "uodr/trainer.hpp"

namespace fs = std::filesystem;
using namespace uodr;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

struct DataDir {
  LabeledDataset source;
  UnlabeledDataset target;
  KnowledgeGraph graph;
  Matrix word_vectors;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir d;
  d.source = load_labeled(join(dir, "source.ds"));
  d.target = load_unlabeled(join(dir, "target.ds"));
  d.graph = load_graph(join(dir, "graph.txt"));
  d.word_vectors = load_matrix(join(dir, "wordvec.mat"));
  return d;
}

// A feature file is either a bare matrix or a dataset file.
Matrix load_features(const std::string& path) {
  try {
    return load_matrix(path);
  } catch (const ParseError&) {
    return std::visit([](const auto& ds) { return ds.features; }, load_dataset(path));
  }
}

ExperimentConfig load_with_overrides(const std::string& path, const std::string& flags,
                                     const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg = load_config(path);
  if (!flags.empty()) cfg.flags = parse_flags(flags);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

void cmd_synth(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  cfg.validate();
  const SynthBenchmark b = generate(cfg.synth);
  make_dir(out);
  save_dataset(join(out, "source.ds"), b.source);
  save_dataset(join(out, "target.ds"), b.target);
  save_graph(join(out, "graph.txt"), b.graph);
  save_matrix(join(out, "wordvec.mat"), b.word_vectors);
  json m;
  m["config_hash"] = config_hash(cfg);
  m["synth_seed"] = cfg.synth.seed;
  m["known_classes"] = b.graph.known_class_count();
  m["total_classes"] = b.graph.total_class_count();
  m["graph_nodes"] = b.graph.num_nodes();
  m["source_instances"] = b.source.features.rows();
  m["target_instances"] = b.target.features.rows();
  m["input_dim"] = b.source.features.cols();
  m["files"] = {"source.ds", "target.ds", "target.ds.eval", "graph.txt", "wordvec.mat"};
  write_text(join(out, "manifest.json"), m.dump(2) + "\n");
}

void cmd_train(const std::string& config, const std::string& data, const std::string& out,
               const std::string& flags, const std::optional<std::uint64_t>& seed) {
  const ExperimentConfig cfg = load_with_overrides(config, flags, seed);
  const DataDir d = load_data_dir(data);
  const bool scored = !d.target.eval_labels.empty();
  EpochObserver observer;
  if (scored) observer = target_evaluator(d.target, d.graph.known_class_count());
  const PipelineResult r =
      run_pipeline(cfg, training_view(d.source, d.target, d.graph, d.word_vectors), observer);

  make_dir(out);
  const std::string hash = config_hash(cfg);
  save_checkpoint(join(out, "checkpoint"), r.state, {hash, cfg.seed});
  write_text(join(out, "history.json"), history_json(r.history).dump(2) + "\n");
  json m = scored ? to_json(accuracy_triple(predict(r.state, d.target.features),
                                            d.target.eval_labels, d.graph.known_class_count()))
                  : json::object();
  m["variant"] = flags_name(cfg.flags);
  m["config_hash"] = hash;
  m["seed"] = cfg.seed;
  write_text(join(out, "metrics.json"), m.dump(2) + "\n");
  std::cout << m.dump() << "\n";
}

void cmd_ablate(const std::string& config, const std::string& data, std::size_t seeds,
                const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  cfg.validate();
  if (seeds == 0) throw ValidationError("ablate: --seeds must be >= 1");
  AblationTable table;
  if (data.empty()) {
    table = run_ablation(cfg, seeds);
  } else {
    const DataDir d = load_data_dir(data);
    if (d.target.eval_labels.empty()) throw ValidationError("ablate: target has no eval labels");
    table = run_ablation(cfg, seeds, d.source, d.target, d.graph, d.word_vectors);
  }
  make_dir(out);
  json j = ablation_json(table);
  j["config_hash"] = config_hash(cfg);
  write_text(join(out, "ablation.json"), j.dump(2) + "\n");
  const std::string text = ablation_text(table);
  write_text(join(out, "ablation.txt"), text);
  std::cout << text;
}

void cmd_match(const std::string& source, const std::string& target, std::size_t folds,
               std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  const MatchedPairs m = match_domains(load_features(source), load_features(target), folds, rng);
  save_pairs(out, m);
  std::printf("%zu pairs, total cost %.6g\n", m.pairs.size(), m.total_cost);
}

void cmd_eval(const std::string& checkpoint, const std::string& data) {
  const ModelState state = load_checkpoint(checkpoint);
  const UnlabeledDataset target = load_unlabeled(join(data, "target.ds"));
  if (target.eval_labels.empty()) throw ValidationError("eval: target has no eval labels");
  if (target.class_count != state.head.total_count()) {
    throw ValidationError("eval: target has " + std::to_string(target.class_count) +
                          " classes but the checkpoint head has " +
                          std::to_string(state.head.total_count()));
  }
  const AccuracyTriple acc =
      accuracy_triple(predict(state, target.features), target.eval_labels, state.head.known_count);
  std::cout << to_json(acc).dump(2) << "\n";
}

void cmd_da(const std::string& config, std::size_t seeds) {
  const ExperimentConfig cfg = load_config(config);
  cfg.validate();
  if (seeds == 0) throw ValidationError("da: --seeds must be >= 1");
  const DaComparison da = run_da_mode(cfg, seeds);
  json j;
  j["seeds"] = seeds;
  j["source_only"] = da.source_only;
  j["sgmd"] = da.sgmd;
  j["source_only_mean"] = da.source_only_mean;
  j["sgmd_mean"] = da.sgmd_mean;
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised open domain recognition experiments"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Kernel threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

  std::string config, data, out, flags, source, target, checkpoint;
  std::optional<std::uint64_t> seed;
  std::uint64_t match_seed = 0;
  std::size_t seeds = 5, folds = 5;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
  synth->add_option("--config", config)->required();
  synth->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "Run the full training pipeline");
  train->add_option("--config", config)->required();
  train->add_option("--data", data)->required();
  train->add_option("--out", out)->required();
  train->add_option("--flags", flags, "Variant, e.g. baseline, lb, lb,sgmd, lb,sgmd,gcn, vb");
  train->add_option("--seed", seed, "Overrides run.seed");

  auto* ablate = app.add_subcommand("ablate", "Train every ablation variant over several seeds");
  ablate->add_option("--config", config)->required();
  ablate->add_option("--data", data, "Fixed data; without it each seed regenerates the benchmark");
  ablate->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  ablate->add_option("--out", out)->required();

  auto* match = app.add_subcommand("match", "Divide-and-conquer matching of two feature sets");
  match->add_option("--source", source)->required();
  match->add_option("--target", target)->required();
  match->add_option("--folds", folds)->check(CLI::PositiveNumber);
  match->add_option("--seed", match_seed);
  match->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a data directory's target set");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data)->required();

  auto* da = app.add_subcommand("da", "Closed-set adaptation: source-only vs SGMD");
  da->add_option("--config", config)->required();
  da->add_option("--seeds", seeds)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_kernel_threads(threads);
    if (*synth) cmd_synth(config, out);
    else if (*train) cmd_train(config, data, out, flags, seed);
    else if (*ablate) cmd_ablate(config, data, seeds, out);
    else if (*match) cmd_match(source, target, folds, match_seed, out);
    else if (*eval) cmd_eval(checkpoint, data);
    else if (*da) cmd_da(config, seeds);
    return kOk;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure in " << e.component() << ": " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    std::cerr << "dimension mismatch: " << e.what() << "\n";
    return kUsage;
  }
}
