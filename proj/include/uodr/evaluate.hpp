// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uodr/matrix.hpp"
#include "uodr/model.hpp"

namespace uodr {

/// Micro-averaged top-1 accuracy split by known (label < L_S) and unknown
/// classes. A fraction is 0 when its group is empty.
struct AccuracyTriple {
  double known = 0.0;
  double unknown = 0.0;
  double all = 0.0;
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;

  friend bool operator==(const AccuracyTriple&, const AccuracyTriple&) = default;
};

/// Argmax of the classifier responses, lowest class index on ties.
std::vector<std::size_t> predict(const ModelState& state, const Matrix& raw_features);

AccuracyTriple accuracy_triple(std::span<const std::size_t> predictions,
                               std::span<const std::size_t> labels,
                               std::size_t known_count);

nlohmann::ordered_json to_json(const AccuracyTriple& acc);

/// Fixed-width "Known Unknown All" table, percentages with one decimal.
std::string format_accuracy_table(
    const std::vector<std::pair<std::string, AccuracyTriple>>& rows);

}  // namespace uodr
