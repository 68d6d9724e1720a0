// SPDX-License-Identifier: Apache-2.0
#include "uodr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"
#include "uodr/optim.hpp"

namespace uodr {
namespace {

enum Stream : std::uint64_t {
  kPretrain = 11,
  kGcnInit,
  kMatching,
  kBatches,
};

/// Static inputs of the joint loop. `graph` is null in closed-set
/// adaptation, which has no taxonomy.
struct JointInputs {
  const Matrix& source;
  const std::vector<std::size_t>& labels;
  const Matrix& target;
  const GraphTerms* graph = nullptr;
};

void require_finite(double value, const char* component) {
  if (!std::isfinite(value)) {
    throw NumericError(component, std::string("non-finite ") + component + " loss");
  }
}

bool model_finite(const ModelState& s) {
  if (!s.encoder.weight.all_finite() || !s.encoder.bias.all_finite() ||
      !s.head.weights.all_finite())
    return false;
  for (const Matrix& t : s.gcn.layers)
    if (!t.all_finite()) return false;
  return true;
}

// Encoder gradients of a feature-space gradient, packed as a ParamGrads.
void add_encoder_grads(ParamGrads& into, const Matrix& raw, const Encoder& enc,
                       const Matrix& grad_features) {
  EncoderGrads g = encode_backward(raw, enc, grad_features);
  ParamGrads part;
  part.encoder_weight = std::move(g.weight);
  part.encoder_bias = std::move(g.bias);
  accumulate(into, 1.0, part);
}

// Softmax-cross-entropy over the known rows of the head only, so unknown
// rows receive no gradient from the source labels.
LossTerm classification_term(const ModelState& s, const Matrix& raw,
                             std::span<const std::size_t> labels, double eps) {
  const std::size_t known = s.head.known_count;
  const std::size_t dim = s.head.dim();
  const Matrix known_rows = Matrix::adopt(
      known, dim,
      std::vector<double>(s.head.weights.values().begin(),
                          s.head.weights.values().begin() + static_cast<std::ptrdiff_t>(known * dim)));
  const Matrix features = encode(raw, s.encoder);
  const Matrix probs = softmax_rows(classifier_logits(features, known_rows));
  ProbLoss loss = cls_loss(probs, labels, eps);
  LinearGrads lin = classifier_backward(features, known_rows,
                                        softmax_rows_backward(probs, loss.grad));
  LossTerm term;
  term.value = loss.value;
  term.grads.head = Matrix(s.head.total_count(), dim);
  std::copy(lin.weights.values().begin(), lin.weights.values().end(),
            term.grads.head.values().begin());
  add_encoder_grads(term.grads, raw, s.encoder, lin.features);
  return term;
}

LossTerm balance_term(const ModelState& s, const Matrix& raw, const LossWeights& lw,
                      bool vanilla) {
  const Matrix features = encode(raw, s.encoder);
  const Matrix probs = classifier_responses(features, s.head);
  ProbLoss loss = vanilla
                      ? balance_loss_vanilla(probs, s.head.known_count, lw.epsilon)
                      : limited_balance_loss(probs, s.head.known_count, lw.w, lw.epsilon);
  LinearGrads lin = classifier_backward(features, s.head.weights,
                                        softmax_rows_backward(probs, loss.grad));
  LossTerm term;
  term.value = loss.value;
  term.grads.head = std::move(lin.weights);
  add_encoder_grads(term.grads, raw, s.encoder, lin.features);
  return term;
}

struct DiscrepancyTerm {
  LossTerm term;
  std::size_t gated = 0;
};

DiscrepancyTerm discrepancy_term(const ModelState& s, const Matrix& raw_source,
                                 const Matrix& raw_target, double tau) {
  const Matrix fs = encode(raw_source, s.encoder);
  const Matrix ft = encode(raw_target, s.encoder);
  SgmdLoss loss = sgmd_loss(fs, ft, classifier_responses(fs, s.head),
                            classifier_responses(ft, s.head), tau);
  DiscrepancyTerm out;
  out.term.value = loss.value;
  out.gated = loss.gated;
  // Closed gates contribute nothing, not even an explicit zero.
  if (loss.gated > 0) {
    add_encoder_grads(out.term.grads, raw_source, s.encoder, loss.grad_source);
    add_encoder_grads(out.term.grads, raw_target, s.encoder, loss.grad_target);
  }
  return out;
}

LossTerm gcn_term(const ModelState& s, const GraphTerms& g) {
  GcnRegLoss loss = gcn_reg_loss(*g.propagation, *g.word_vectors, s.gcn, s.head.weights,
                                 g.class_nodes);
  LossTerm term;
  term.value = loss.value;
  term.grads.head = std::move(loss.grad_head);
  term.grads.gcn = std::move(loss.grad_layers);
  return term;
}

struct Velocity {
  Matrix encoder_weight, encoder_bias, head;
  std::vector<Matrix> gcn;

  explicit Velocity(const ModelState& s)
      : encoder_weight(s.encoder.weight.rows(), s.encoder.weight.cols()),
        encoder_bias(1, s.encoder.bias.cols()),
        head(s.head.weights.rows(), s.head.weights.cols()) {
    for (const Matrix& t : s.gcn.layers) gcn.emplace_back(t.rows(), t.cols());
  }
};

// Rescales the gradients that will be applied so their joint L2 norm is at
// most `cap`. Near R = 0 the limited balance slope grows like 1/R^2.
void clip_gradients(ParamGrads& g, double cap, bool include_gcn) {
  if (cap <= 0.0) return;
  double sq = sum_squares(g.encoder_weight) + sum_squares(g.encoder_bias) + sum_squares(g.head);
  if (include_gcn)
    for (const Matrix& m : g.gcn) sq += sum_squares(m);
  const double norm = std::sqrt(sq);
  if (!(norm > cap)) return;
  const double f = cap / norm;
  for (Matrix* m : {&g.encoder_weight, &g.encoder_bias, &g.head}) *m = scale(*m, f);
  for (Matrix& m : g.gcn) m = scale(m, f);
}

void apply_update(ModelState& s, Velocity& v, const ParamGrads& g, double lr,
                  double momentum, bool update_gcn) {
  if (!g.encoder_weight.empty())
    momentum_step(s.encoder.weight, v.encoder_weight, g.encoder_weight, lr, momentum);
  if (!g.encoder_bias.empty())
    momentum_step(s.encoder.bias, v.encoder_bias, g.encoder_bias, lr, momentum);
  if (!g.head.empty()) momentum_step(s.head.weights, v.head, g.head, lr, momentum);
  if (update_gcn) {
    for (std::size_t l = 0; l < g.gcn.size(); ++l) {
      if (!g.gcn[l].empty())
        momentum_step(s.gcn.layers[l], v.gcn[l], g.gcn[l], lr, momentum);
    }
  }
}

MatchedPairs compute_matching(const ModelState& s, const JointInputs& in,
                              std::size_t folds, Rng& rng) {
  return match_domains(encode(in.source, s.encoder), encode(in.target, s.encoder), folds,
                       rng);
}

std::vector<EpochRecord> joint_train(const ExperimentConfig& cfg, const AblationFlags& flags,
                                     const LossWeights& lw, ModelState& state,
                                     const JointInputs& in, Rng& batch_rng, Rng& match_rng,
                                     const EpochObserver& observer,
                                     std::size_t* matched_pairs) {
  const std::size_t n_s = in.source.rows();
  const std::size_t n_t = in.target.rows();
  const std::size_t batch = cfg.joint.batch_size;
  const bool use_balance = flags.enable_lb || flags.vanilla_balance;

  // Pair lookup by source index; SIZE_MAX marks unmatched sources.
  std::vector<std::size_t> partner(n_s, SIZE_MAX);
  auto rematch = [&] {
    MatchedPairs m = compute_matching(state, in, cfg.folds, match_rng);
    std::fill(partner.begin(), partner.end(), SIZE_MAX);
    for (const auto& p : m.pairs) partner[p.source] = p.target;
    if (matched_pairs) *matched_pairs = m.pairs.size();
  };
  if (flags.enable_sgmd) rematch();

  Velocity velocity(state);
  std::vector<EpochRecord> records;
  for (std::size_t epoch = 1; epoch <= cfg.joint.epochs; ++epoch) {
    if (flags.enable_sgmd && cfg.rematch_interval > 0 && epoch > 1 &&
        (epoch - 1) % cfg.rematch_interval == 0) {
      rematch();
    }
    const auto source_order = batch_rng.permutation(n_s);
    const auto target_order = batch_rng.permutation(n_t);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t steps = 0, pairs_seen = 0, gated = 0;

    for (std::size_t start = 0; start < n_s; start += batch, ++steps) {
      const std::size_t len = std::min(batch, n_s - start);
      const std::span<const std::size_t> src_idx(source_order.data() + start, len);
      std::vector<std::size_t> labels, tgt_idx, pair_src, pair_tgt;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = src_idx[k];
        labels.push_back(in.labels[i]);
        tgt_idx.push_back(target_order[(start + k) % n_t]);
        if (partner[i] != SIZE_MAX) {
          pair_src.push_back(i);
          pair_tgt.push_back(partner[i]);
        }
      }

      JointBatch jb{gather_rows(in.source, src_idx), std::move(labels), Matrix(), Matrix(),
                    Matrix()};
      if (use_balance) jb.target = gather_rows(in.target, tgt_idx);
      if (flags.enable_sgmd && !pair_src.empty()) {
        jb.pair_source = gather_rows(in.source, pair_src);
        jb.pair_target = gather_rows(in.target, pair_tgt);
      }
      JointObjective obj = joint_objective(state, jb, lw, flags, in.graph);
      pairs_seen += obj.pairs;
      gated += obj.gated;
      clip_gradients(obj.grads, cfg.joint.clip_norm, flags.enable_gcn);
      apply_update(state, velocity, obj.grads, cfg.joint.learning_rate, cfg.joint.momentum,
                   flags.enable_gcn);

      rec.loss.cls += obj.loss.cls;
      rec.loss.discrepancy += obj.loss.discrepancy;
      rec.loss.balance += obj.loss.balance;
      rec.loss.gcn += obj.loss.gcn;
      rec.loss.total += obj.loss.total;
    }
    if (!model_finite(state)) {
      throw NumericError("parameters", "model parameters became non-finite");
    }
    const double inv = steps ? 1.0 / static_cast<double>(steps) : 0.0;
    rec.loss.cls *= inv;
    rec.loss.discrepancy *= inv;
    rec.loss.balance *= inv;
    rec.loss.gcn *= inv;
    rec.loss.total *= inv;
    rec.gated_fraction =
        pairs_seen ? static_cast<double>(gated) / static_cast<double>(pairs_seen) : 0.0;
    if (observer) rec.accuracy = observer(state);
    records.push_back(rec);
  }
  return records;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double norm = 0.0;
    for (double v : r) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : r) v /= norm;
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

JointObjective joint_objective(const ModelState& state, const JointBatch& batch,
                               const LossWeights& lw, const AblationFlags& flags,
                               const GraphTerms* graph) {
  JointObjective out;
  LossTerm cls = classification_term(state, batch.source, batch.labels, lw.epsilon);
  require_finite(cls.value, "classification");
  LossTerm disc, bal, reg;
  if (flags.enable_sgmd && batch.pair_source.rows() > 0) {
    DiscrepancyTerm d = discrepancy_term(state, batch.pair_source, batch.pair_target, lw.tau);
    require_finite(d.term.value, "discrepancy");
    disc = std::move(d.term);
    out.pairs = batch.pair_source.rows();
    out.gated = d.gated;
  }
  if (flags.enable_lb || flags.vanilla_balance) {
    bal = balance_term(state, batch.target, lw, flags.vanilla_balance);
    require_finite(bal.value, "balance");
  }
  if (flags.enable_gcn) {
    if (!graph) throw ValidationError("joint objective: the gcn term needs a graph");
    reg = gcn_term(state, *graph);
    require_finite(reg.value, "gcn");
  }
  TotalLoss total = total_loss(cls, disc, bal, reg, lw);
  require_finite(total.value, "total");
  out.loss = {cls.value, disc.value, bal.value, reg.value, total.value};
  out.grads = std::move(total.grads);
  return out;
}

TrainingData training_view(const LabeledDataset& source, const UnlabeledDataset& target,
                           const KnowledgeGraph& graph, const Matrix& word_vectors) {
  return {source, target.features, graph, word_vectors};
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const TrainingData& data,
                            const EpochObserver& observer) {
  cfg.validate();
  data.source.validate();
  const KnowledgeGraph& g = data.graph;
  if (data.source.class_count != g.known_class_count()) {
    throw ValidationError("pipeline: source has " + std::to_string(data.source.class_count) +
                          " classes but the graph declares " +
                          std::to_string(g.known_class_count()) + " known");
  }
  if (data.word_vectors.rows() != g.num_nodes()) {
    throw DimensionError("pipeline: word vectors need one row per graph node");
  }
  if (data.target_features.cols() != data.source.features.cols()) {
    throw DimensionError("pipeline: source and target feature dims differ");
  }
  const ReachabilityReport reach = check_reachability(g);
  if (!reach.all_reachable()) {
    std::cerr << "warning: " << reach.unreachable_classes.size()
              << " unknown class(es) unreachable from any known class in the graph\n";
  }

  const Rng root(cfg.seed);
  Rng pretrain_rng = root.derive(kPretrain);
  Rng gcn_rng = root.derive(kGcnInit);
  Rng match_rng = root.derive(kMatching);
  Rng batch_rng = root.derive(kBatches);

  PipelineResult result;
  TrainHistory& h = result.history;

  PretrainResult pre = pretrain_source(data.source, cfg.feature_dim, cfg.pretrain, pretrain_rng);
  require_finite(pre.loss_history.back(), "pretrain");
  h.pretrain_accuracy = pre.train_accuracy;
  h.pretrain_loss = pre.loss_history.back();

  const Matrix targets = cfg.normalize_gcn_targets ? normalize_rows(pre.classifier)
                                                   : pre.classifier;
  GcnInitResult init = train_gcn_init(g, data.word_vectors, targets, cfg.gcn, gcn_rng);
  require_finite(init.loss_history.back(), "gcn_init");
  h.gcn_init_loss = init.loss_history.back();
  h.gcn_init_known_mse = init.known_mse;

  ModelState& state = result.state;
  state.encoder = std::move(pre.encoder);
  state.head = init_head_from_gcn(init.embeddings, g.known_class_count());
  state.gcn = std::move(init.params);
  state.validate();
  if (observer) h.initial_accuracy = observer(state);

  const Matrix propagation = normalized_adjacency(g);
  const GraphTerms graph_terms{&propagation, &data.word_vectors, g.class_to_node()};
  JointInputs in{data.source.features, data.source.labels, data.target_features,
                 &graph_terms};
  const LossWeights lw = cfg.resolved_loss(g.known_class_count(), g.total_class_count());
  h.epochs = joint_train(cfg, cfg.flags, lw, state, in, batch_rng, match_rng, observer,
                         &h.matched_pairs);
  return result;
}

EpochObserver target_evaluator(const UnlabeledDataset& target, std::size_t known_count) {
  return [&target, known_count](const ModelState& s) {
    return accuracy_triple(predict(s, target.features), target.eval_labels, known_count);
  };
}

PipelineResult run_synthetic(const ExperimentConfig& cfg) {
  const SynthBenchmark b = generate(cfg.synth);
  return run_pipeline(cfg, training_view(b.source, b.target, b.graph, b.word_vectors),
                      target_evaluator(b.target, b.graph.known_class_count()));
}

std::vector<std::pair<std::string, AblationFlags>> ablation_variants() {
  return {
      {"baseline", {false, false, false, false}},
      {"lb", {true, false, false, false}},
      {"lb+sgmd", {true, true, false, false}},
      {"lb+sgmd+gcn", {true, true, true, false}},
      {"vanilla-balance", {false, false, false, true}},
  };
}

namespace {

AccuracyTriple mean_triple(const std::vector<AccuracyTriple>& v, bool stddev,
                           const AccuracyTriple& mean) {
  AccuracyTriple out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  for (const auto& t : v) {
    if (stddev) {
      out.known += (t.known - mean.known) * (t.known - mean.known) / n;
      out.unknown += (t.unknown - mean.unknown) * (t.unknown - mean.unknown) / n;
      out.all += (t.all - mean.all) * (t.all - mean.all) / n;
    } else {
      out.known += t.known / n;
      out.unknown += t.unknown / n;
      out.all += t.all / n;
      out.n_known = t.n_known;
      out.n_unknown = t.n_unknown;
    }
  }
  if (stddev) {
    out.known = std::sqrt(out.known);
    out.unknown = std::sqrt(out.unknown);
    out.all = std::sqrt(out.all);
  }
  return out;
}

template <typename DataFor>
AblationTable ablate(const ExperimentConfig& base, std::size_t seeds, DataFor data_for) {
  AblationTable table;
  table.seeds = seeds;
  for (const auto& [name, flags] : ablation_variants()) {
    VariantSummary v;
    v.name = name;
    v.flags = flags;
    table.variants.push_back(v);
  }
  for (std::size_t i = 0; i < seeds; ++i) {
    ExperimentConfig cfg = base;
    cfg.seed = base.seed + i;
    const SynthBenchmark& b = data_for(i);
    const TrainingData view = training_view(b.source, b.target, b.graph, b.word_vectors);
    const EpochObserver observer = target_evaluator(b.target, b.graph.known_class_count());
    for (VariantSummary& v : table.variants) {
      cfg.flags = v.flags;
      PipelineResult r = run_pipeline(cfg, view);
      v.per_seed.push_back(observer(r.state));
    }
  }
  for (VariantSummary& v : table.variants) {
    v.mean = mean_triple(v.per_seed, false, {});
    v.stddev = mean_triple(v.per_seed, true, v.mean);
  }
  return table;
}

}  // namespace

AblationTable run_ablation(const ExperimentConfig& base, std::size_t seeds,
                           const std::optional<SynthBenchmark>& fixed_data) {
  std::optional<SynthBenchmark> current;
  return ablate(base, seeds, [&](std::size_t i) -> const SynthBenchmark& {
    if (fixed_data) return *fixed_data;
    SynthConfig sc = base.synth;
    sc.seed = base.synth.seed + i;
    current = generate(sc);
    return *current;
  });
}

AblationTable run_ablation(const ExperimentConfig& base, std::size_t seeds,
                           const LabeledDataset& source, const UnlabeledDataset& target,
                           const KnowledgeGraph& graph, const Matrix& word_vectors) {
  SynthBenchmark b;
  b.source = source;
  b.target = target;
  b.graph = graph;
  b.word_vectors = word_vectors;
  return run_ablation(base, seeds, std::optional<SynthBenchmark>(std::move(b)));
}

DaComparison run_da_mode(const ExperimentConfig& cfg, std::size_t seeds) {
  DaComparison out;
  for (std::size_t i = 0; i < seeds; ++i) {
    ExperimentConfig run = cfg;
    run.seed = cfg.seed + i;
    run.synth.seed = cfg.synth.seed + i;
    run.synth.known_classes = run.synth.total_classes;
    const DaBenchmark b = generate_symmetric(run.synth);
    const std::size_t classes = b.source.class_count;

    const Rng root(run.seed);
    Rng pretrain_rng = root.derive(kPretrain);
    PretrainResult pre = pretrain_source(b.source, run.feature_dim, run.pretrain, pretrain_rng);
    ModelState start;
    start.encoder = std::move(pre.encoder);
    start.head = ClassifierHead{std::move(pre.classifier), classes};

    LossWeights lw = run.loss;
    lw.w = 0.5;  // unused: no balance term in closed-set mode
    JointInputs in{b.source.features, b.source.labels, b.target.features, nullptr};
    auto score = [&](const ModelState& s) {
      return accuracy_triple(predict(s, b.target.features), b.target.eval_labels, classes).all;
    };
    for (bool with_sgmd : {false, true}) {
      ModelState state = start;
      Rng match_rng = root.derive(kMatching);
      Rng batch_rng = root.derive(kBatches);
      const AblationFlags flags{false, with_sgmd, false, false};
      joint_train(run, flags, lw, state, in, batch_rng, match_rng, {}, nullptr);
      (with_sgmd ? out.sgmd : out.source_only).push_back(score(state));
    }
  }
  out.source_only_mean = mean_of(out.source_only);
  out.sgmd_mean = mean_of(out.sgmd);
  return out;
}

nlohmann::ordered_json history_json(const TrainHistory& h) {
  nlohmann::ordered_json j;
  j["pretrain"] = {{"train_accuracy", h.pretrain_accuracy}, {"final_loss", h.pretrain_loss}};
  j["gcn_init"] = {{"final_loss", h.gcn_init_loss}, {"known_mse", h.gcn_init_known_mse}};
  j["matched_pairs"] = h.matched_pairs;
  if (h.initial_accuracy) j["initial_accuracy"] = to_json(*h.initial_accuracy);
  auto epochs = nlohmann::ordered_json::array();
  for (const EpochRecord& r : h.epochs) {
    nlohmann::ordered_json e;
    e["epoch"] = r.epoch;
    e["loss"] = {{"cls", r.loss.cls},
                 {"sgmd", r.loss.discrepancy},
                 {"balance", r.loss.balance},
                 {"gcn", r.loss.gcn},
                 {"total", r.loss.total}};
    e["gated_fraction"] = r.gated_fraction;
    if (r.accuracy) e["accuracy"] = to_json(*r.accuracy);
    epochs.push_back(e);
  }
  j["epochs"] = epochs;
  return j;
}

nlohmann::ordered_json ablation_json(const AblationTable& table) {
  nlohmann::ordered_json j;
  j["seeds"] = table.seeds;
  auto rows = nlohmann::ordered_json::array();
  for (const VariantSummary& v : table.variants) {
    nlohmann::ordered_json r;
    r["variant"] = v.name;
    r["seeds"] = v.per_seed.size();
    r["mean"] = {{"known", v.mean.known}, {"unknown", v.mean.unknown}, {"all", v.mean.all}};
    r["std"] = {{"known", v.stddev.known}, {"unknown", v.stddev.unknown}, {"all", v.stddev.all}};
    auto per = nlohmann::ordered_json::array();
    for (const auto& t : v.per_seed) per.push_back(to_json(t));
    r["per_seed"] = per;
    rows.push_back(r);
  }
  j["variants"] = rows;
  return j;
}

std::string ablation_text(const AblationTable& table) {
  std::size_t width = 7;
  for (const auto& v : table.variants) width = std::max(width, v.name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %5s %13s %13s %13s\n", static_cast<int>(width), "",
                "seeds", "Known", "Unknown", "All");
  out += buf;
  for (const auto& v : table.variants) {
    std::snprintf(buf, sizeof buf, "%-*s %5zu %6.1f ±%5.1f %6.1f ±%5.1f %6.1f ±%5.1f\n",
                  static_cast<int>(width), v.name.c_str(), v.per_seed.size(),
                  100.0 * v.mean.known, 100.0 * v.stddev.known, 100.0 * v.mean.unknown,
                  100.0 * v.stddev.unknown, 100.0 * v.mean.all, 100.0 * v.stddev.all);
    out += buf;
  }
  return out;
}

}  // namespace uodr
