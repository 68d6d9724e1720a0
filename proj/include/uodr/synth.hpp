// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "uodr/graph.hpp"
#include "uodr/matrix.hpp"

namespace uodr {

/// Labeled source data. Labels index the `class_count` known classes.
struct LabeledDataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;

  void validate() const;
  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Unlabeled target data. `eval_labels` exists only for scoring; training
/// code receives the feature matrix alone.
struct UnlabeledDataset {
  Matrix features;
  std::vector<std::size_t> eval_labels;  // may be empty when unknown
  std::size_t class_count = 0;

  void validate() const;
  friend bool operator==(const UnlabeledDataset&, const UnlabeledDataset&) = default;
};

struct SynthConfig {
  std::size_t known_classes = 8;
  std::size_t total_classes = 12;
  std::size_t input_dim = 16;
  std::size_t word_dim = 10;
  std::size_t latent_dim = 16;   // dimension of the prototype random walk
  std::size_t source_per_class = 50;
  std::size_t target_per_class = 50;
  std::size_t branching = 3;
  double class_step = 1.0;       // per-coordinate std of a parent->child move
  double feature_noise = 0.8;    // per-coordinate std of instance noise
  double word_noise = 0.7;       // per-coordinate std added to word vectors
  double shift_angle = 0.6;      // rotation angle (radians) per plane
  double shift_translation = 2.0;  // max |coordinate| of the translation
  std::uint64_t seed = 1;

  /// Throws ValidationError. When `symmetric` is set, known == total is
  /// allowed (closed-set adaptation data).
  void validate(bool symmetric = false) const;
};

struct SynthBenchmark {
  LabeledDataset source;
  UnlabeledDataset target;
  KnowledgeGraph graph;
  Matrix word_vectors;  // N x C, one row per graph node
  Matrix prototypes;    // N x M_in, noiseless class/concept centers
  Matrix rotation;      // M_in x M_in, applied to target instances
  Matrix translation;   // 1 x M_in
};

/// Random tree taxonomy with the classes as leaves, prototypes by a random
/// walk down the tree, word vectors as a noisy linear projection of the
/// prototypes, Gaussian source instances for the known classes and affinely
/// shifted target instances for every class.
SynthBenchmark generate(const SynthConfig& cfg);

/// Closed-set variant: every class has source data (known == total); the
/// graph is still built but all classes count as known.
struct DaBenchmark {
  LabeledDataset source;
  UnlabeledDataset target;
};
DaBenchmark generate_symmetric(const SynthConfig& cfg);

/// Dataset file: `n M_in labeled <0|1> classes <count>` header, then per row
/// the label (or `?`) followed by the features. Unlabeled datasets keep
/// their evaluation labels in `<path>.eval`.
void save_dataset(const std::string& path, const LabeledDataset& ds);
void save_dataset(const std::string& path, const UnlabeledDataset& ds);
std::variant<LabeledDataset, UnlabeledDataset> load_dataset(const std::string& path);
LabeledDataset load_labeled(const std::string& path);
UnlabeledDataset load_unlabeled(const std::string& path);

}  // namespace uodr
