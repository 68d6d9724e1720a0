// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uodr/gcn.hpp"
#include "uodr/losses.hpp"
#include "uodr/matrix.hpp"
#include "uodr/rng.hpp"
#include "uodr/synth.hpp"

namespace uodr {

/// Linear feature extractor f = z W + b shared by both domains.
struct Encoder {
  Matrix weight;  // M_in x M
  Matrix bias;    // 1 x M

  std::size_t input_dim() const noexcept { return weight.rows(); }
  std::size_t output_dim() const noexcept { return weight.cols(); }
};

Encoder init_encoder(std::size_t input_dim, std::size_t output_dim, Rng& rng);

Matrix encode(const Matrix& raw, const Encoder& enc);

struct EncoderGrads {
  Matrix weight;
  Matrix bias;
  Matrix input;
};
EncoderGrads encode_backward(const Matrix& raw, const Encoder& enc,
                             const Matrix& grad_features);

/// Backward of logits = F W^T: returns (dF, dW).
struct LinearGrads {
  Matrix features;
  Matrix weights;
};
LinearGrads classifier_backward(const Matrix& features, const Matrix& weights,
                                const Matrix& grad_logits);

/// The trainable bundle. One encoder serves source and target batches.
struct ModelState {
  Encoder encoder;
  ClassifierHead head;
  GcnParams gcn;

  /// Checks the dimension chain M_in -> M -> L_T and GCN output dim == M.
  void validate() const;
};

/// Copies the GCN class embeddings into a fresh head.
ClassifierHead init_head_from_gcn(const Matrix& embeddings, std::size_t known_count);

struct PretrainSchedule {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 1;  // longer pretraining saturates the known logits
  std::size_t batch_size = 32;
};

struct PretrainResult {
  Encoder encoder;
  Matrix classifier;                 // W, L_S x M
  std::vector<double> loss_history;  // full-data loss before training, then per epoch
  double train_accuracy = 0.0;
};

/// Softmax cross-entropy over the known classes only.
PretrainResult pretrain_source(const LabeledDataset& source, std::size_t feature_dim,
                               const PretrainSchedule& schedule, Rng& rng);

/// Checkpoint directory: encoder.weight, encoder.bias, head.weights,
/// gcn.theta (gcn.theta.<l> for deeper layers) and manifest.json.
struct CheckpointInfo {
  std::string config_hash;
  std::uint64_t seed = 0;
};
void save_checkpoint(const std::string& dir, const ModelState& state,
                     const CheckpointInfo& info);
ModelState load_checkpoint(const std::string& dir, CheckpointInfo* info = nullptr);

}  // namespace uodr
