// SPDX-License-Identifier: Apache-2.0
#include "uodr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "uodr/error.hpp"

namespace uodr {
namespace {

std::string number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError("config: `" + key + "` expects a number, got `" + text + "`");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("config: `" + key + "` expects a non-negative integer, got `" + text + "`");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ParseError("config: `" + key + "` expects true or false, got `" + text + "`");
}

// One entry per config key, in canonical order.
struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field real(std::string key, T ExperimentConfig::*outer, double T::*member) {
  return {key, [=](const ExperimentConfig& c) { return number(c.*outer.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*outer.*member = parse_double(key, v);
          }};
}

template <typename T>
Field count(std::string key, T ExperimentConfig::*outer, std::size_t T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*outer.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*outer.*member = static_cast<std::size_t>(parse_unsigned(key, v));
          }};
}

Field flag(std::string key, bool AblationFlags::*member) {
  return {key,
          [=](const ExperimentConfig& c) { return std::string(c.flags.*member ? "true" : "false"); },
          [=](ExperimentConfig& c, const std::string& v) { c.flags.*member = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      count("synth.known_classes", &C::synth, &SynthConfig::known_classes),
      count("synth.total_classes", &C::synth, &SynthConfig::total_classes),
      count("synth.input_dim", &C::synth, &SynthConfig::input_dim),
      count("synth.word_dim", &C::synth, &SynthConfig::word_dim),
      count("synth.latent_dim", &C::synth, &SynthConfig::latent_dim),
      count("synth.source_per_class", &C::synth, &SynthConfig::source_per_class),
      count("synth.target_per_class", &C::synth, &SynthConfig::target_per_class),
      count("synth.branching", &C::synth, &SynthConfig::branching),
      real("synth.class_step", &C::synth, &SynthConfig::class_step),
      real("synth.feature_noise", &C::synth, &SynthConfig::feature_noise),
      real("synth.word_noise", &C::synth, &SynthConfig::word_noise),
      real("synth.shift_angle", &C::synth, &SynthConfig::shift_angle),
      real("synth.shift_translation", &C::synth, &SynthConfig::shift_translation),
      {"synth.seed", [](const C& c) { return std::to_string(c.synth.seed); },
       [](C& c, const std::string& v) { c.synth.seed = parse_unsigned("synth.seed", v); }},
      {"model.feature_dim", [](const C& c) { return std::to_string(c.feature_dim); },
       [](C& c, const std::string& v) {
         c.feature_dim = static_cast<std::size_t>(parse_unsigned("model.feature_dim", v));
       }},
      real("loss.lambda_d", &C::loss, &LossWeights::lambda_d),
      real("loss.lambda_b", &C::loss, &LossWeights::lambda_b),
      real("loss.lambda_g", &C::loss, &LossWeights::lambda_g),
      real("loss.tau", &C::loss, &LossWeights::tau),
      {"loss.w",
       [](const C& c) { return c.balance_prior ? number(*c.balance_prior) : std::string("auto"); },
       [](C& c, const std::string& v) {
         if (v == "auto") {
           c.balance_prior.reset();
         } else {
           c.balance_prior = parse_double("loss.w", v);
         }
       }},
      real("loss.epsilon", &C::loss, &LossWeights::epsilon),
      real("pretrain.learning_rate", &C::pretrain, &PretrainSchedule::learning_rate),
      real("pretrain.momentum", &C::pretrain, &PretrainSchedule::momentum),
      count("pretrain.epochs", &C::pretrain, &PretrainSchedule::epochs),
      count("pretrain.batch_size", &C::pretrain, &PretrainSchedule::batch_size),
      real("gcn.learning_rate", &C::gcn, &GcnSchedule::learning_rate),
      real("gcn.momentum", &C::gcn, &GcnSchedule::momentum),
      count("gcn.steps", &C::gcn, &GcnSchedule::steps),
      count("gcn.layers", &C::gcn, &GcnSchedule::layers),
      real("gcn.activation_slope", &C::gcn, &GcnSchedule::activation_slope),
      {"gcn.normalize_targets",
       [](const C& c) { return std::string(c.normalize_gcn_targets ? "true" : "false"); },
       [](C& c, const std::string& v) {
         c.normalize_gcn_targets = parse_bool("gcn.normalize_targets", v);
       }},
      real("joint.learning_rate", &C::joint, &JointSchedule::learning_rate),
      real("joint.momentum", &C::joint, &JointSchedule::momentum),
      count("joint.epochs", &C::joint, &JointSchedule::epochs),
      count("joint.batch_size", &C::joint, &JointSchedule::batch_size),
      real("joint.clip_norm", &C::joint, &JointSchedule::clip_norm),
      {"match.folds", [](const C& c) { return std::to_string(c.folds); },
       [](C& c, const std::string& v) {
         c.folds = static_cast<std::size_t>(parse_unsigned("match.folds", v));
       }},
      {"match.rematch_interval", [](const C& c) { return std::to_string(c.rematch_interval); },
       [](C& c, const std::string& v) {
         c.rematch_interval = static_cast<std::size_t>(parse_unsigned("match.rematch_interval", v));
       }},
      {"run.seed", [](const C& c) { return std::to_string(c.seed); },
       [](C& c, const std::string& v) { c.seed = parse_unsigned("run.seed", v); }},
      flag("flags.enable_lb", &AblationFlags::enable_lb),
      flag("flags.enable_sgmd", &AblationFlags::enable_sgmd),
      flag("flags.enable_gcn", &AblationFlags::enable_gcn),
      flag("flags.vanilla_balance", &AblationFlags::vanilla_balance),
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  synth.validate();
  loss.validate();
  if (balance_prior && !(*balance_prior > 0.0 && *balance_prior < 1.0)) {
    throw ValidationError("config: loss.w must lie strictly inside (0, 1)");
  }
  if (feature_dim == 0) throw ValidationError("config: model.feature_dim must be >= 1");
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("config: ") + key + " must be positive");
    }
  };
  auto momentum_ok = [](double v, const char* key) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw ValidationError(std::string("config: ") + key + " must lie in [0, 1)");
    }
  };
  positive(pretrain.learning_rate, "pretrain.learning_rate");
  positive(gcn.learning_rate, "gcn.learning_rate");
  positive(joint.learning_rate, "joint.learning_rate");
  momentum_ok(pretrain.momentum, "pretrain.momentum");
  momentum_ok(gcn.momentum, "gcn.momentum");
  momentum_ok(joint.momentum, "joint.momentum");
  if (pretrain.epochs == 0 || pretrain.batch_size == 0 || gcn.steps == 0 ||
      gcn.layers == 0 || joint.batch_size == 0) {
    throw ValidationError("config: schedules must be positive");
  }
  if (!(gcn.activation_slope >= 0.0 && gcn.activation_slope <= 1.0)) {
    throw ValidationError("config: gcn.activation_slope must lie in [0, 1]");
  }
  if (!(std::isfinite(joint.clip_norm) && joint.clip_norm >= 0.0)) {
    throw ValidationError("config: joint.clip_norm must be finite and >= 0");
  }
  if (folds == 0) throw ValidationError("config: match.folds must be >= 1");
  if (flags.vanilla_balance && flags.enable_lb) {
    throw ValidationError("config: flags.vanilla_balance excludes flags.enable_lb");
  }
}

LossWeights ExperimentConfig::resolved_loss(std::size_t known, std::size_t total) const {
  LossWeights lw = loss;
  lw.w = balance_prior ? *balance_prior
                       : static_cast<double>(total - known) / static_cast<double>(total);
  return lw;
}

ExperimentConfig read_config(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!values.emplace(key, value).second) {
      throw ParseError("config line " + std::to_string(line_no) + ": duplicate key `" + key + "`");
    }
  }
  ExperimentConfig cfg;
  for (const Field& f : fields()) {
    auto it = values.find(f.key);
    if (it == values.end()) throw ParseError("config: missing key `" + f.key + "`");
    f.set(cfg, it->second);
    values.erase(it);
  }
  if (!values.empty()) {
    throw ParseError("config: unknown key `" + values.begin()->first + "`");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return read_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  std::string section;
  for (const Field& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out << '\n';
      section = s;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  write_config(out, cfg);
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AblationFlags parse_flags(const std::string& list) {
  AblationFlags f{false, false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty() || item == "baseline") continue;
    if (item == "lb") {
      f.enable_lb = true;
    } else if (item == "sgmd") {
      f.enable_sgmd = true;
    } else if (item == "gcn") {
      f.enable_gcn = true;
    } else if (item == "vb" || item == "vanilla") {
      f.vanilla_balance = true;
    } else {
      throw ParseError("unknown flag `" + item + "` (expected lb, sgmd, gcn, vb)");
    }
  }
  if (f.vanilla_balance && f.enable_lb) {
    throw ValidationError("flags: vb (vanilla balance) excludes lb");
  }
  return f;
}

std::string flags_name(const AblationFlags& flags) {
  std::string name;
  auto add = [&](bool on, const char* part) {
    if (!on) return;
    if (!name.empty()) name += '+';
    name += part;
  };
  add(flags.enable_lb, "lb");
  add(flags.vanilla_balance, "vanilla-balance");
  add(flags.enable_sgmd, "sgmd");
  add(flags.enable_gcn, "gcn");
  return name.empty() ? "baseline" : name;
}

}  // namespace uodr
