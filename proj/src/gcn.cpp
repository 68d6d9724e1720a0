// SPDX-License-Identifier: Apache-2.0
#include "uodr/gcn.hpp"

#include <cmath>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"
#include "uodr/optim.hpp"

namespace uodr {

GcnParams init_gcn_params(std::size_t word_dim, std::size_t out_dim,
                          std::size_t num_layers, double slope, Rng& rng) {
  if (num_layers == 0) throw ValidationError("gcn: need at least one layer");
  check_slope(slope);
  GcnParams params;
  params.activation_slope = slope;
  std::size_t fan_in = word_dim;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, out_dim);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(w));
    fan_in = out_dim;
  }
  return params;
}

GcnForward gcn_forward_cached(const Matrix& P, const Matrix& X,
                              const GcnParams& params) {
  if (P.rows() != P.cols() || P.rows() != X.rows()) {
    throw DimensionError("gcn_forward: adjacency is " + std::to_string(P.rows()) +
                         "x" + std::to_string(P.cols()) + " but X has " +
                         std::to_string(X.rows()) + " rows");
  }
  GcnForward fwd;
  const Matrix* h = &X;
  for (const Matrix& theta : params.layers) {
    fwd.propagated.push_back(matmul(P, *h));
    fwd.pre_activation.push_back(matmul(fwd.propagated.back(), theta));
    fwd.output = leaky_relu(fwd.pre_activation.back(), params.activation_slope);
    h = &fwd.output;
  }
  return fwd;
}

Matrix gcn_forward(const Matrix& P, const Matrix& X, const GcnParams& params) {
  return gcn_forward_cached(P, X, params).output;
}

std::vector<Matrix> gcn_backward(const Matrix& P, const GcnForward& fwd,
                                 const GcnParams& params,
                                 const Matrix& grad_output) {
  const std::size_t depth = params.layers.size();
  std::vector<Matrix> grads(depth);
  Matrix grad = grad_output;
  for (std::size_t l = depth; l-- > 0;) {
    Matrix grad_pre = hadamard(
        grad, leaky_relu_derivative(fwd.pre_activation[l], params.activation_slope));
    grads[l] = matmul_tn(fwd.propagated[l], grad_pre);
    if (l > 0) {
      // d(P H T)/dH = P^T (.) T^T
      grad = matmul_tn(P, matmul_nt(grad_pre, params.layers[l]));
    }
  }
  return grads;
}

RowRegression row_regression(const Matrix& O, const Matrix& targets,
                             std::span<const std::size_t> rows) {
  if (targets.rows() != rows.size() || targets.cols() != O.cols()) {
    throw DimensionError("gcn regression: targets are " +
                         std::to_string(targets.rows()) + "x" +
                         std::to_string(targets.cols()) + ", expected " +
                         std::to_string(rows.size()) + "x" + std::to_string(O.cols()));
  }
  const double inv_m = 1.0 / static_cast<double>(O.cols());
  RowRegression out;
  out.grad_output = Matrix(O.rows(), O.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= O.rows()) {
      throw DimensionError("gcn regression: node index " + std::to_string(rows[i]) +
                           " out of range");
    }
    for (std::size_t j = 0; j < O.cols(); ++j) {
      const double diff = O(rows[i], j) - targets(i, j);
      out.value += 0.5 * inv_m * diff * diff;
      out.grad_output(rows[i], j) += inv_m * diff;
    }
  }
  return out;
}

InitLoss init_loss(const Matrix& P, const Matrix& X, const GcnParams& params,
                   const Matrix& W, std::span<const std::size_t> known_nodes) {
  GcnForward fwd = gcn_forward_cached(P, X, params);
  RowRegression reg = row_regression(fwd.output, W, known_nodes);
  return {reg.value, gcn_backward(P, fwd, params, reg.grad_output)};
}

GcnRegLoss gcn_reg_loss(const Matrix& P, const Matrix& X,
                        const GcnParams& params, const Matrix& head,
                        std::span<const std::size_t> class_nodes) {
  GcnForward fwd = gcn_forward_cached(P, X, params);
  RowRegression reg = row_regression(fwd.output, head, class_nodes);
  GcnRegLoss out;
  out.value = reg.value;
  out.grad_layers = gcn_backward(P, fwd, params, reg.grad_output);
  // dL/dW_hat(i, j) = (W_hat(i, j) - O(row(i), j)) / M
  out.grad_head = Matrix(head.rows(), head.cols());
  const double inv_m = 1.0 / static_cast<double>(head.cols());
  for (std::size_t i = 0; i < class_nodes.size(); ++i)
    for (std::size_t j = 0; j < head.cols(); ++j)
      out.grad_head(i, j) = inv_m * (head(i, j) - fwd.output(class_nodes[i], j));
  return out;
}

Matrix class_rows(const Matrix& O, const KnowledgeGraph& g) {
  return gather_rows(O, g.class_to_node());
}

GcnInitResult train_gcn_init(const KnowledgeGraph& g, const Matrix& X,
                             const Matrix& W, const GcnSchedule& schedule,
                             Rng& rng) {
  if (X.rows() != g.num_nodes()) {
    throw DimensionError("train_gcn_init: word vectors have " +
                         std::to_string(X.rows()) + " rows for " +
                         std::to_string(g.num_nodes()) + " nodes");
  }
  if (W.rows() != g.known_class_count()) {
    throw DimensionError("train_gcn_init: W must have one row per known class");
  }
  const Matrix P = normalized_adjacency(g);
  const auto known = g.known_nodes();

  GcnInitResult result;
  result.params = init_gcn_params(X.cols(), W.cols(), schedule.layers,
                                  schedule.activation_slope, rng);
  std::vector<Matrix> velocity;
  for (const Matrix& t : result.params.layers) velocity.emplace_back(t.rows(), t.cols());

  result.loss_history.reserve(schedule.steps);
  for (std::size_t step = 0; step < schedule.steps; ++step) {
    InitLoss loss = init_loss(P, X, result.params, W, known);
    result.loss_history.push_back(loss.value);
    for (std::size_t l = 0; l < velocity.size(); ++l) {
      momentum_step(result.params.layers[l], velocity[l], loss.grad_layers[l],
                    schedule.learning_rate, schedule.momentum);
    }
  }

  const Matrix O = gcn_forward(P, X, result.params);
  result.embeddings = class_rows(O, g);
  const Matrix known_rows = gather_rows(O, known);
  result.known_mse =
      W.empty() ? 0.0 : sum_squares(subtract(known_rows, W)) / static_cast<double>(W.size());
  return result;
}

}  // namespace uodr
