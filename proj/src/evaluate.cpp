// SPDX-License-Identifier: Apache-2.0
#include "uodr/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"

namespace uodr {

std::vector<std::size_t> predict(const ModelState& state, const Matrix& raw_features) {
  const Matrix logits =
      classifier_logits(encode(raw_features, state.encoder), state.head.weights);
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out[i] = best;
  }
  return out;
}

AccuracyTriple accuracy_triple(std::span<const std::size_t> predictions,
                               std::span<const std::size_t> labels,
                               std::size_t known_count) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("accuracy: " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(labels.size()) + " labels");
  }
  std::size_t hit_known = 0, hit_unknown = 0;
  AccuracyTriple acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool hit = predictions[i] == labels[i];
    if (labels[i] < known_count) {
      ++acc.n_known;
      hit_known += hit;
    } else {
      ++acc.n_unknown;
      hit_unknown += hit;
    }
  }
  auto frac = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  acc.known = frac(hit_known, acc.n_known);
  acc.unknown = frac(hit_unknown, acc.n_unknown);
  const std::size_t n = acc.n_known + acc.n_unknown;
  acc.all = n ? (acc.known * static_cast<double>(acc.n_known) +
                 acc.unknown * static_cast<double>(acc.n_unknown)) /
                    static_cast<double>(n)
              : 0.0;
  return acc;
}

nlohmann::ordered_json to_json(const AccuracyTriple& acc) {
  nlohmann::ordered_json j;
  j["known"] = acc.known;
  j["unknown"] = acc.unknown;
  j["all"] = acc.all;
  j["n_known"] = acc.n_known;
  j["n_unknown"] = acc.n_unknown;
  return j;
}

std::string format_accuracy_table(
    const std::vector<std::pair<std::string, AccuracyTriple>>& rows) {
  std::size_t width = 7;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %8s %8s %8s\n", static_cast<int>(width), "",
                "Known", "Unknown", "All");
  out += buf;
  for (const auto& [name, acc] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %8.1f %8.1f %8.1f\n", static_cast<int>(width),
                  name.c_str(), 100.0 * acc.known, 100.0 * acc.unknown, 100.0 * acc.all);
    out += buf;
  }
  return out;
}

}  // namespace uodr
