// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "uodr/gcn.hpp"
#include "uodr/losses.hpp"
#include "uodr/model.hpp"
#include "uodr/synth.hpp"

namespace uodr {

struct JointSchedule {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double clip_norm = 5.0;  // global gradient-norm cap per step; 0 disables
};

/// Which loss terms take part in joint training.
struct AblationFlags {
  bool enable_lb = true;
  bool enable_sgmd = true;
  bool enable_gcn = true;
  bool vanilla_balance = false;  // replaces the limited balance term
};

struct ExperimentConfig {
  SynthConfig synth;
  std::size_t feature_dim = 16;
  LossWeights loss;
  std::optional<double> balance_prior;  // w; unset means (L_T - L_S) / L_T
  bool normalize_gcn_targets = false;
  PretrainSchedule pretrain;
  GcnSchedule gcn;
  JointSchedule joint;
  std::size_t folds = 5;
  std::size_t rematch_interval = 0;  // epochs between re-matching; 0 = fixed
  std::uint64_t seed = 7;
  AblationFlags flags;

  static ExperimentConfig defaults() { return {}; }

  /// Throws ValidationError on any inconsistent setting.
  void validate() const;

  /// Loss weights with w resolved for the given class counts.
  LossWeights resolved_loss(std::size_t known, std::size_t total) const;
};

/// Flat `section.key = value` text, one key per line, '#' comments. Every
/// key must be present exactly once; unknown keys are rejected.
ExperimentConfig read_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void write_config(std::ostream& out, const ExperimentConfig& cfg);
std::string config_text(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Parses a variant list such as "lb,sgmd" (also "baseline", "vb", "gcn").
AblationFlags parse_flags(const std::string& list);
std::string flags_name(const AblationFlags& flags);

}  // namespace uodr
