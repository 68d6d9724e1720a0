// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uodr/matrix.hpp"

namespace uodr {

/// Classifier over all L_T target classes. Rows 0..known_count-1 are the
/// known (source) classes, the rest the unknown ones. No bias term.
struct ClassifierHead {
  Matrix weights;  // L_T x M
  std::size_t known_count = 0;

  std::size_t total_count() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }
};

struct LossWeights {
  double lambda_d = 0.1;
  double lambda_b = 0.1;
  double lambda_g = 0.5;
  double tau = 0.3;
  double w = 1.0 / 3.0;
  double epsilon = 1e-12;

  /// Throws ValidationError unless weights are finite and >= 0, w in (0,1),
  /// epsilon > 0.
  void validate() const;
};

/// F * W^T.
Matrix classifier_logits(const Matrix& features, const Matrix& weights);
/// softmax_rows(F * W^T).
Matrix classifier_responses(const Matrix& features, const ClassifierHead& head);

/// A scalar loss over a probability matrix and its gradient wrt that matrix.
struct ProbLoss {
  double value = 0.0;
  Matrix grad;
};

/// Mean of -log(max(P(i, y_i), eps)). Labels must index columns of P.
ProbLoss cls_loss(const Matrix& probs, std::span<const std::size_t> labels,
                  double eps = 1e-12);

/// Mean of -log(max(R_i, eps)), R_i the probability mass on columns >= known.
ProbLoss balance_loss_vanilla(const Matrix& probs, std::size_t known,
                              double eps = 1e-12);

/// Mean of R_i + w^2 / R_i with R_i = max(unknown mass, eps).
ProbLoss limited_balance_loss(const Matrix& probs, std::size_t known, double w,
                              double eps = 1e-12);

/// R + w^2 / R for a single instance.
double limited_balance_value(double unknown_mass, double w);
/// d/dR of the above: 1 - w^2 / R^2.
double limited_balance_slope(double unknown_mass, double w);

/// Unknown-class probability mass per row.
std::vector<double> unknown_mass(const Matrix& probs, std::size_t known);

struct SgmdLoss {
  double value = 0.0;
  Matrix grad_source;
  Matrix grad_target;
  std::vector<bool> gate;
  std::size_t gated = 0;
};

/// Semantic-gated matching discrepancy over aligned pair rows:
///   (1/n) sum_i 1(<p_i^s, p_i^t> > tau) * 0.5 ||f_i^s - f_i^t||^2.
/// The gate is a constant for differentiation; no gradient reaches p.
SgmdLoss sgmd_loss(const Matrix& source_features, const Matrix& target_features,
                   const Matrix& source_probs, const Matrix& target_probs,
                   double tau);

/// Gradient of a loss with respect to every trainable parameter group.
/// An empty matrix means "no contribution".
struct ParamGrads {
  Matrix encoder_weight;
  Matrix encoder_bias;
  Matrix head;
  std::vector<Matrix> gcn;
};

/// into += weight * from, skipping empty matrices and zero weights.
void accumulate(ParamGrads& into, double weight, const ParamGrads& from);

struct LossTerm {
  double value = 0.0;
  ParamGrads grads;
};

struct TotalLoss {
  double value = 0.0;
  ParamGrads grads;
};

/// L = L_cls + lambda_d L_d + lambda_b L_b + lambda_g L_gcn, with gradients
/// merged in that fixed order.
TotalLoss total_loss(const LossTerm& cls, const LossTerm& discrepancy,
                     const LossTerm& balance, const LossTerm& gcn,
                     const LossWeights& lw);

}  // namespace uodr
