// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uodr/graph.hpp"
#include "uodr/matrix.hpp"
#include "uodr/rng.hpp"

namespace uodr {

/// Weights of the graph convolution stack O = act(P act(... act(P X T0) ...) Tk).
/// With one layer (the default) this is O = act(D^-1 A X theta).
/// The first layer is C x F, later ones F x F; F equals the classifier
/// weight dimension so output rows are classifier weight vectors.
struct GcnParams {
  std::vector<Matrix> layers;
  double activation_slope = 0.2;

  const Matrix& theta() const { return layers.front(); }
  std::size_t input_dim() const { return layers.front().rows(); }
  std::size_t output_dim() const { return layers.back().cols(); }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
GcnParams init_gcn_params(std::size_t word_dim, std::size_t out_dim,
                          std::size_t num_layers, double slope, Rng& rng);

struct GcnForward {
  std::vector<Matrix> propagated;     // P * H_l, the input of layer l
  std::vector<Matrix> pre_activation; // P * H_l * T_l
  Matrix output;
};

GcnForward gcn_forward_cached(const Matrix& P, const Matrix& X,
                              const GcnParams& params);
Matrix gcn_forward(const Matrix& P, const Matrix& X, const GcnParams& params);

/// Gradients wrt every layer given dL/dO.
std::vector<Matrix> gcn_backward(const Matrix& P, const GcnForward& fwd,
                                 const GcnParams& params,
                                 const Matrix& grad_output);

/// (1/2M) sum_i sum_j (O(rows[i], j) - target(i, j))^2 and its gradient wrt O.
struct RowRegression {
  double value = 0.0;
  Matrix grad_output;
};
RowRegression row_regression(const Matrix& O, const Matrix& targets,
                             std::span<const std::size_t> rows);

struct InitLoss {
  double value = 0.0;
  std::vector<Matrix> grad_layers;
};

/// Regression of known-class rows of the GCN output onto the pretrained
/// source classifier W (L_S x M).
InitLoss init_loss(const Matrix& P, const Matrix& X, const GcnParams& params,
                   const Matrix& W, std::span<const std::size_t> known_nodes);

struct GcnRegLoss {
  double value = 0.0;
  std::vector<Matrix> grad_layers;
  Matrix grad_head;
};

/// Ties all L_T class rows of the GCN output to the live classifier head;
/// gradients go to both the GCN weights and the head.
GcnRegLoss gcn_reg_loss(const Matrix& P, const Matrix& X,
                        const GcnParams& params, const Matrix& head,
                        std::span<const std::size_t> class_nodes);

struct GcnSchedule {
  double learning_rate = 0.2;  // 0.3 already diverges on some default-config seeds
  double momentum = 0.9;
  std::size_t steps = 5000;
  std::size_t layers = 1;
  double activation_slope = 0.2;
};

struct GcnInitResult {
  GcnParams params;
  Matrix embeddings;                // L_T x M, class order
  std::vector<double> loss_history; // one entry per step
  double known_mse = 0.0;           // mean squared error of known rows vs W
};

GcnInitResult train_gcn_init(const KnowledgeGraph& g, const Matrix& X,
                             const Matrix& W, const GcnSchedule& schedule,
                             Rng& rng);

/// Rows of O for each class, in class order.
Matrix class_rows(const Matrix& O, const KnowledgeGraph& g);

}  // namespace uodr
