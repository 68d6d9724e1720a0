// SPDX-License-Identifier: Apache-2.0
#include "uodr/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"
#include "uodr/optim.hpp"

namespace uodr {

namespace fs = std::filesystem;

Encoder init_encoder(std::size_t input_dim, std::size_t output_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Encoder enc{Matrix(input_dim, output_dim), Matrix(1, output_dim)};
  for (double& v : enc.weight.values()) v = rng.uniform(-bound, bound);
  return enc;
}

Matrix encode(const Matrix& raw, const Encoder& enc) {
  if (raw.cols() != enc.input_dim()) {
    throw DimensionError("encode: input has " + std::to_string(raw.cols()) +
                         " columns, encoder expects " + std::to_string(enc.input_dim()));
  }
  return add_row_vector(matmul(raw, enc.weight), enc.bias);
}

EncoderGrads encode_backward(const Matrix& raw, const Encoder& enc,
                             const Matrix& grad_features) {
  if (grad_features.rows() != raw.rows() || grad_features.cols() != enc.output_dim()) {
    throw DimensionError("encode_backward: gradient shape mismatch");
  }
  return {matmul_tn(raw, grad_features), column_sums(grad_features),
          matmul_nt(grad_features, enc.weight)};
}

LinearGrads classifier_backward(const Matrix& features, const Matrix& weights,
                                const Matrix& grad_logits) {
  return {matmul(grad_logits, weights), matmul_tn(grad_logits, features)};
}

void ModelState::validate() const {
  if (encoder.bias.rows() != 1 || encoder.bias.cols() != encoder.output_dim()) {
    throw ValidationError("model: encoder bias must be 1 x M");
  }
  if (head.dim() != encoder.output_dim()) {
    throw ValidationError("model: head dim " + std::to_string(head.dim()) +
                          " != encoder output dim " + std::to_string(encoder.output_dim()));
  }
  if (head.known_count > head.total_count()) {
    throw ValidationError("model: known count exceeds head rows");
  }
  if (!gcn.layers.empty() && gcn.output_dim() != encoder.output_dim()) {
    throw ValidationError("model: GCN output dim must equal the feature dim");
  }
}

ClassifierHead init_head_from_gcn(const Matrix& embeddings, std::size_t known_count) {
  if (!embeddings.all_finite()) throw ValidationError("init_head_from_gcn: non-finite embeddings");
  return ClassifierHead{embeddings, known_count};
}

namespace {

struct BatchLoss {
  double value;
  Matrix grad_weight;
  Matrix grad_bias;
  Matrix grad_classifier;
};

BatchLoss source_batch_loss(const Matrix& raw, std::span<const std::size_t> labels,
                            const Encoder& enc, const Matrix& classifier) {
  const Matrix features = encode(raw, enc);
  const Matrix probs = softmax_rows(classifier_logits(features, classifier));
  ProbLoss loss = cls_loss(probs, labels);
  const Matrix grad_logits = softmax_rows_backward(probs, loss.grad);
  LinearGrads lin = classifier_backward(features, classifier, grad_logits);
  EncoderGrads eg = encode_backward(raw, enc, lin.features);
  return {loss.value, std::move(eg.weight), std::move(eg.bias), std::move(lin.weights)};
}

}  // namespace

PretrainResult pretrain_source(const LabeledDataset& source, std::size_t feature_dim,
                               const PretrainSchedule& schedule, Rng& rng) {
  source.validate();
  if (schedule.batch_size == 0) throw ValidationError("pretrain: batch size must be >= 1");
  const std::size_t n = source.features.rows();
  PretrainResult result;
  result.encoder = init_encoder(source.features.cols(), feature_dim, rng);
  // Zero start: the first steps move W along the class means only, which keeps
  // its rows on the same scale across classes.
  result.classifier = Matrix(source.class_count, feature_dim);

  Matrix vel_w(result.encoder.weight.rows(), result.encoder.weight.cols());
  Matrix vel_b(1, feature_dim);
  Matrix vel_c(result.classifier.rows(), result.classifier.cols());

  auto full_loss = [&] {
    return source_batch_loss(source.features, source.labels, result.encoder,
                             result.classifier)
        .value;
  };
  result.loss_history.push_back(full_loss());
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += schedule.batch_size) {
      const std::size_t end = std::min(n, start + schedule.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::size_t> labels;
      for (std::size_t i : idx) labels.push_back(source.labels[i]);
      BatchLoss b = source_batch_loss(gather_rows(source.features, idx), labels,
                                      result.encoder, result.classifier);
      momentum_step(result.encoder.weight, vel_w, b.grad_weight, schedule.learning_rate,
                    schedule.momentum);
      momentum_step(result.encoder.bias, vel_b, b.grad_bias, schedule.learning_rate,
                    schedule.momentum);
      momentum_step(result.classifier, vel_c, b.grad_classifier, schedule.learning_rate,
                    schedule.momentum);
    }
    result.loss_history.push_back(full_loss());
  }

  const Matrix logits =
      classifier_logits(encode(source.features, result.encoder), result.classifier);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (best == source.labels[i]) ++correct;
  }
  result.train_accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  return result;
}

// ---- checkpoints ---------------------------------------------------------

namespace {

std::string layer_file(std::size_t l) {
  return l == 0 ? "gcn.theta" : "gcn.theta." + std::to_string(l);
}

}  // namespace

void save_checkpoint(const std::string& dir, const ModelState& state,
                     const CheckpointInfo& info) {
  state.validate();
  fs::create_directories(dir);
  const fs::path root(dir);
  save_matrix((root / "encoder.weight").string(), state.encoder.weight);
  save_matrix((root / "encoder.bias").string(), state.encoder.bias);
  save_matrix((root / "head.weights").string(), state.head.weights);
  for (std::size_t l = 0; l < state.gcn.layers.size(); ++l) {
    save_matrix((root / layer_file(l)).string(), state.gcn.layers[l]);
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = "uodr-checkpoint";
  manifest["version"] = 1;
  manifest["input_dim"] = state.encoder.input_dim();
  manifest["feature_dim"] = state.encoder.output_dim();
  manifest["total_classes"] = state.head.total_count();
  manifest["known_classes"] = state.head.known_count;
  manifest["word_dim"] = state.gcn.layers.empty() ? 0 : state.gcn.input_dim();
  manifest["gcn_layers"] = state.gcn.layers.size();
  manifest["activation_slope"] = state.gcn.activation_slope;
  manifest["config_hash"] = info.config_hash;
  manifest["seed"] = info.seed;
  std::ofstream out(root / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

ModelState load_checkpoint(const std::string& dir, CheckpointInfo* info) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("checkpoint manifest missing in " + dir);
  nlohmann::json manifest;
  std::size_t in_dim = 0, feat_dim = 0, total = 0, known = 0, word_dim = 0, layers = 0;
  double slope = 0.0;
  try {
    manifest = nlohmann::json::parse(in);
    if (manifest.at("format").get<std::string>() != "uodr-checkpoint" ||
        manifest.at("version").get<int>() != 1) {
      throw ValidationError("checkpoint manifest: unsupported format");
    }
    in_dim = manifest.at("input_dim").get<std::size_t>();
    feat_dim = manifest.at("feature_dim").get<std::size_t>();
    total = manifest.at("total_classes").get<std::size_t>();
    known = manifest.at("known_classes").get<std::size_t>();
    word_dim = manifest.at("word_dim").get<std::size_t>();
    layers = manifest.at("gcn_layers").get<std::size_t>();
    slope = manifest.at("activation_slope").get<double>();
    if (info) {
      info->config_hash = manifest.at("config_hash").get<std::string>();
      info->seed = manifest.at("seed").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint manifest invalid: ") + e.what());
  }

  ModelState state;
  state.encoder.weight = load_matrix((root / "encoder.weight").string());
  state.encoder.bias = load_matrix((root / "encoder.bias").string());
  state.head.weights = load_matrix((root / "head.weights").string());
  state.head.known_count = known;
  state.gcn.activation_slope = slope;
  for (std::size_t l = 0; l < layers; ++l) {
    state.gcn.layers.push_back(load_matrix((root / layer_file(l)).string()));
  }

  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("checkpoint " + dir + ": " + what + " disagrees with manifest");
  };
  expect(state.encoder.weight.rows() == in_dim && state.encoder.weight.cols() == feat_dim,
         "encoder.weight shape");
  expect(state.head.weights.rows() == total && state.head.weights.cols() == feat_dim,
         "head.weights shape");
  expect(known <= total, "known_classes");
  if (layers > 0) expect(state.gcn.layers.front().rows() == word_dim, "gcn.theta shape");
  state.validate();
  return state;
}

}  // namespace uodr
