// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uodr/config.hpp"
#include "uodr/evaluate.hpp"
#include "uodr/graph.hpp"
#include "uodr/matcher.hpp"
#include "uodr/model.hpp"
#include "uodr/synth.hpp"

namespace uodr {

/// Everything training may look at. Target labels are deliberately absent.
struct TrainingData {
  LabeledDataset source;
  Matrix target_features;
  KnowledgeGraph graph;
  Matrix word_vectors;
};

/// Builds TrainingData from an unlabeled target, dropping its eval labels.
TrainingData training_view(const LabeledDataset& source, const UnlabeledDataset& target,
                           const KnowledgeGraph& graph, const Matrix& word_vectors);

struct LossBreakdown {
  double cls = 0.0;
  double discrepancy = 0.0;
  double balance = 0.0;
  double gcn = 0.0;
  double total = 0.0;
};

/// One joint-training step: a labeled source batch, a target batch for the
/// balance term and row-aligned matched pairs for the discrepancy term.
/// Members a disabled term would read may stay empty.
struct JointBatch {
  Matrix source;
  std::vector<std::size_t> labels;
  Matrix target;
  Matrix pair_source;
  Matrix pair_target;
};

/// Taxonomy inputs of the GCN regularizer.
struct GraphTerms {
  const Matrix* propagation = nullptr;   // D^-1 A
  const Matrix* word_vectors = nullptr;  // N x C
  std::vector<std::size_t> class_nodes;
};

struct JointObjective {
  LossBreakdown loss;
  ParamGrads grads;  // unclipped
  std::size_t pairs = 0;
  std::size_t gated = 0;
};

/// The weighted joint loss of the enabled terms and its gradient with respect
/// to every parameter group. Throws NumericError on a non-finite term.
JointObjective joint_objective(const ModelState& state, const JointBatch& batch,
                               const LossWeights& lw, const AblationFlags& flags,
                               const GraphTerms* graph);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;       // means over the epoch's steps
  double gated_fraction = 0.0;  // gated pairs / matched pairs seen
  std::optional<AccuracyTriple> accuracy;
};

struct TrainHistory {
  double pretrain_accuracy = 0.0;
  double pretrain_loss = 0.0;
  double gcn_init_loss = 0.0;
  double gcn_init_known_mse = 0.0;
  std::size_t matched_pairs = 0;
  std::optional<AccuracyTriple> initial_accuracy;  // before joint training
  std::vector<EpochRecord> epochs;
};

/// Called after the GCN-initialized head is in place and after every epoch
/// with a read-only view of the model.
using EpochObserver = std::function<AccuracyTriple(const ModelState&)>;

struct PipelineResult {
  ModelState state;
  TrainHistory history;
};

/// pretrain -> GCN init -> head init -> matching -> joint training.
/// Throws NumericError naming the component whose loss went non-finite.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const TrainingData& data,
                            const EpochObserver& observer = {});

/// Observer scoring the model on a labeled-for-evaluation target set.
EpochObserver target_evaluator(const UnlabeledDataset& target, std::size_t known_count);

/// Generates the synthetic benchmark from cfg.synth and runs the pipeline
/// with per-epoch evaluation.
PipelineResult run_synthetic(const ExperimentConfig& cfg);

struct VariantSummary {
  std::string name;
  AblationFlags flags;
  std::vector<AccuracyTriple> per_seed;
  AccuracyTriple mean;
  AccuracyTriple stddev;  // population std of each fraction; counts unused
};

struct AblationTable {
  std::vector<VariantSummary> variants;
  std::size_t seeds = 0;
};

/// The fixed variant list: baseline, lb, lb+sgmd, lb+sgmd+gcn, vanilla-balance.
std::vector<std::pair<std::string, AblationFlags>> ablation_variants();

/// Seed i uses run.seed + i. Without fixed data the synthetic benchmark is
/// regenerated per seed with synth.seed + i as well.
AblationTable run_ablation(const ExperimentConfig& base, std::size_t seeds,
                           const std::optional<SynthBenchmark>& fixed_data = std::nullopt);
AblationTable run_ablation(const ExperimentConfig& base, std::size_t seeds,
                           const LabeledDataset& source, const UnlabeledDataset& target,
                           const KnowledgeGraph& graph, const Matrix& word_vectors);

struct DaComparison {
  std::vector<double> source_only;  // target accuracy per seed
  std::vector<double> sgmd;
  double source_only_mean = 0.0;
  double sgmd_mean = 0.0;
};

/// Closed-set adaptation: every class known, balance and GCN terms off.
/// Trains source-only and SGMD-augmented models from the same pretrained
/// start for each seed (synth.seed + i, run.seed + i).
DaComparison run_da_mode(const ExperimentConfig& cfg, std::size_t seeds);

nlohmann::ordered_json history_json(const TrainHistory& history);
nlohmann::ordered_json ablation_json(const AblationTable& table);
std::string ablation_text(const AblationTable& table);

}  // namespace uodr
