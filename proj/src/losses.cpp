// SPDX-License-Identifier: Apache-2.0
#include "uodr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"

namespace uodr {

void LossWeights::validate() const {
  for (double v : {lambda_d, lambda_b, lambda_g}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("loss weights must be finite and non-negative");
    }
  }
  if (!std::isfinite(tau)) throw ValidationError("tau must be finite");
  if (!(w > 0.0 && w < 1.0)) throw ValidationError("w must lie strictly inside (0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("epsilon must be positive");
  }
}

Matrix classifier_logits(const Matrix& features, const Matrix& weights) {
  if (features.cols() != weights.cols()) {
    throw DimensionError("classifier: feature dim " + std::to_string(features.cols()) +
                         " vs weight dim " + std::to_string(weights.cols()));
  }
  return matmul_nt(features, weights);
}

Matrix classifier_responses(const Matrix& features, const ClassifierHead& head) {
  return softmax_rows(classifier_logits(features, head.weights));
}

ProbLoss cls_loss(const Matrix& probs, std::span<const std::size_t> labels,
                  double eps) {
  if (labels.size() != probs.rows()) {
    throw DimensionError("cls_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(probs.rows()) + " rows");
  }
  ProbLoss out;
  out.grad = Matrix(probs.rows(), probs.cols());
  if (probs.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.cols()) {
      throw ValidationError("cls_loss: label " + std::to_string(labels[i]) +
                            " out of range for " + std::to_string(probs.cols()) +
                            " classes");
    }
    const double p = probs(i, labels[i]);
    if (p > eps) {
      out.value -= inv_n * std::log(p);
      out.grad(i, labels[i]) = -inv_n / p;
    } else {
      out.value -= inv_n * std::log(eps);
    }
  }
  return out;
}

std::vector<double> unknown_mass(const Matrix& probs, std::size_t known) {
  if (known > probs.cols()) throw DimensionError("unknown_mass: known count exceeds columns");
  std::vector<double> mass(probs.rows(), 0.0);
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (std::size_t j = known; j < probs.cols(); ++j) mass[i] += probs(i, j);
  return mass;
}

namespace {

// Shared shape of both balance losses: mean_i g(max(R_i, eps)).
template <typename Value, typename Slope>
ProbLoss mass_loss(const Matrix& probs, std::size_t known, double eps,
                   Value value, Slope slope) {
  ProbLoss out;
  out.grad = Matrix(probs.rows(), probs.cols());
  if (probs.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  const auto mass = unknown_mass(probs, known);
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const bool clamped = !(mass[i] > eps);
    const double r = clamped ? eps : mass[i];
    out.value += inv_n * value(r);
    if (clamped) continue;
    const double g = inv_n * slope(r);
    for (std::size_t j = known; j < probs.cols(); ++j) out.grad(i, j) = g;
  }
  return out;
}

}  // namespace

ProbLoss balance_loss_vanilla(const Matrix& probs, std::size_t known, double eps) {
  return mass_loss(
      probs, known, eps, [](double r) { return -std::log(r); },
      [](double r) { return -1.0 / r; });
}

double limited_balance_value(double unknown_mass, double w) {
  return unknown_mass + w * w / unknown_mass;
}

double limited_balance_slope(double unknown_mass, double w) {
  return 1.0 - (w * w) / (unknown_mass * unknown_mass);
}

ProbLoss limited_balance_loss(const Matrix& probs, std::size_t known, double w,
                              double eps) {
  if (!(w > 0.0 && w < 1.0)) {
    throw ValidationError("limited_balance_loss: w must lie in (0, 1)");
  }
  return mass_loss(
      probs, known, eps, [w](double r) { return limited_balance_value(r, w); },
      [w](double r) { return limited_balance_slope(r, w); });
}

SgmdLoss sgmd_loss(const Matrix& source_features, const Matrix& target_features,
                   const Matrix& source_probs, const Matrix& target_probs,
                   double tau) {
  if (!source_features.same_shape(target_features) ||
      !source_probs.same_shape(target_probs) ||
      source_probs.rows() != source_features.rows()) {
    throw DimensionError("sgmd_loss: pair rows are not aligned");
  }
  const std::size_t n = source_features.rows();
  SgmdLoss out;
  out.grad_source = Matrix(n, source_features.cols());
  out.grad_target = Matrix(n, source_features.cols());
  out.gate.assign(n, false);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double similarity = 0.0;
    auto ps = source_probs.row(i);
    auto pt = target_probs.row(i);
    for (std::size_t j = 0; j < ps.size(); ++j) similarity += ps[j] * pt[j];
    if (!(similarity > tau)) continue;
    out.gate[i] = true;
    ++out.gated;
    auto fs = source_features.row(i);
    auto ft = target_features.row(i);
    auto gs = out.grad_source.row(i);
    auto gt = out.grad_target.row(i);
    for (std::size_t d = 0; d < fs.size(); ++d) {
      const double diff = fs[d] - ft[d];
      out.value += inv_n * 0.5 * diff * diff;
      gs[d] = inv_n * diff;
      gt[d] = -inv_n * diff;
    }
  }
  return out;
}

namespace {

void accumulate_one(Matrix& into, double weight, const Matrix& from) {
  if (from.empty()) return;
  if (into.empty()) into = Matrix(from.rows(), from.cols());
  axpy(weight, from, into);
}

}  // namespace

void accumulate(ParamGrads& into, double weight, const ParamGrads& from) {
  if (weight == 0.0) return;
  accumulate_one(into.encoder_weight, weight, from.encoder_weight);
  accumulate_one(into.encoder_bias, weight, from.encoder_bias);
  accumulate_one(into.head, weight, from.head);
  if (into.gcn.size() < from.gcn.size()) into.gcn.resize(from.gcn.size());
  for (std::size_t l = 0; l < from.gcn.size(); ++l) {
    accumulate_one(into.gcn[l], weight, from.gcn[l]);
  }
}

TotalLoss total_loss(const LossTerm& cls, const LossTerm& discrepancy,
                     const LossTerm& balance, const LossTerm& gcn,
                     const LossWeights& lw) {
  TotalLoss out;
  out.value = cls.value + lw.lambda_d * discrepancy.value +
              lw.lambda_b * balance.value + lw.lambda_g * gcn.value;
  accumulate(out.grads, 1.0, cls.grads);
  accumulate(out.grads, lw.lambda_d, discrepancy.grads);
  accumulate(out.grads, lw.lambda_b, balance.grads);
  accumulate(out.grads, lw.lambda_g, gcn.grads);
  return out;
}

}  // namespace uodr
