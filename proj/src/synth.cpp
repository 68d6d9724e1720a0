// SPDX-License-Identifier: Apache-2.0
#include "uodr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"
#include "uodr/rng.hpp"

namespace uodr {
namespace {

enum Stream : std::uint64_t {
  kTree = 1,
  kPrototypes,
  kWords,
  kSource,
  kTarget,
  kShift,
  kEmbed,
};

struct Taxonomy {
  std::vector<std::size_t> parent;  // parent[0] is unused (root)
  std::vector<std::size_t> depth;
  std::vector<std::size_t> leaves;  // node ids, creation order
};

// Grows a tree by repeatedly splitting a random shallowest leaf.
Taxonomy grow_tree(std::size_t leaf_target, std::size_t branching, Rng& rng) {
  Taxonomy t;
  t.parent = {0};
  t.depth = {0};
  std::vector<std::size_t> leaves = {0};
  while (leaves.size() < leaf_target) {
    std::size_t min_depth = SIZE_MAX;
    for (std::size_t l : leaves) min_depth = std::min(min_depth, t.depth[l]);
    std::vector<std::size_t> shallow;
    for (std::size_t i = 0; i < leaves.size(); ++i)
      if (t.depth[leaves[i]] == min_depth) shallow.push_back(i);
    const std::size_t pick = shallow[rng.index(shallow.size())];
    const std::size_t node = leaves[pick];
    leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
    const std::size_t children =
        std::min(branching, leaf_target - leaves.size());
    for (std::size_t c = 0; c < children; ++c) {
      t.parent.push_back(node);
      t.depth.push_back(t.depth[node] + 1);
      leaves.push_back(t.parent.size() - 1);
    }
  }
  std::sort(leaves.begin(), leaves.end());
  t.leaves = leaves;
  return t;
}

Matrix gaussian(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Random orthonormal dim x dim basis (modified Gram-Schmidt over columns).
Matrix random_orthonormal(std::size_t dim, Rng& rng) {
  Matrix q = gaussian(dim, dim, 1.0, rng);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < dim; ++i) q(i, j) -= dot * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < dim; ++i) q(i, j) /= norm;
  }
  return q;
}

// Q B Q^T with B rotating each consecutive coordinate pair by `angle`.
Matrix random_rotation(std::size_t dim, double angle, Rng& rng) {
  const Matrix q = random_orthonormal(dim, rng);
  Matrix b = Matrix::identity(dim);
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t p = 0; p + 1 < dim; p += 2) {
    b(p, p) = c;
    b(p, p + 1) = -s;
    b(p + 1, p) = s;
    b(p + 1, p + 1) = c;
  }
  return matmul_nt(matmul(q, b), q);
}

Matrix sample_rows(const Matrix& prototypes, std::span<const std::size_t> nodes,
                   std::size_t per_class, double noise, Rng& rng) {
  Matrix out(nodes.size() * per_class, prototypes.cols());
  std::size_t r = 0;
  for (std::size_t node : nodes) {
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      for (std::size_t d = 0; d < prototypes.cols(); ++d) {
        out(r, d) = prototypes(node, d) + noise * rng.normal();
      }
    }
  }
  return out;
}

std::vector<std::size_t> repeat_labels(std::size_t classes, std::size_t per_class) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, c);
  return labels;
}

// Shared construction: taxonomy, prototypes, class assignment.
struct Scaffold {
  Taxonomy tree;
  std::vector<std::size_t> class_to_node;
  Matrix prototypes;
};

Scaffold build_scaffold(const SynthConfig& cfg, const Rng& root) {
  Rng tree_rng = root.derive(kTree);
  Scaffold s;
  s.tree = grow_tree(cfg.total_classes, cfg.branching, tree_rng);
  // Random choice of which leaves are known; known classes take the low ids.
  std::vector<std::size_t> leaves = s.tree.leaves;
  tree_rng.shuffle(std::span<std::size_t>(leaves));
  s.class_to_node = leaves;

  // The walk runs in latent_dim coordinates, then an orthonormal embedding
  // places it in input space.
  Rng proto_rng = root.derive(kPrototypes);
  const std::size_t n = s.tree.parent.size();
  Matrix walk(n, cfg.latent_dim);
  for (std::size_t node = 1; node < n; ++node) {
    const std::size_t p = s.tree.parent[node];
    for (std::size_t d = 0; d < cfg.latent_dim; ++d) {
      walk(node, d) = walk(p, d) + cfg.class_step * proto_rng.normal();
    }
  }
  Rng embed_rng = root.derive(kEmbed);
  const Matrix basis = random_orthonormal(cfg.input_dim, embed_rng);
  Matrix embed(cfg.latent_dim, cfg.input_dim);
  for (std::size_t i = 0; i < cfg.latent_dim; ++i)
    for (std::size_t j = 0; j < cfg.input_dim; ++j) embed(i, j) = basis(j, i);
  s.prototypes = matmul(walk, embed);
  return s;
}

Matrix shift_target(const Matrix& x, const Matrix& rotation, const Matrix& translation) {
  return add_row_vector(matmul_nt(x, rotation), translation);
}

std::pair<Matrix, Matrix> make_shift(const SynthConfig& cfg, const Rng& root) {
  Rng shift_rng = root.derive(kShift);
  Matrix rotation = random_rotation(cfg.input_dim, cfg.shift_angle, shift_rng);
  Matrix translation = gaussian(1, cfg.input_dim, 1.0, shift_rng);
  const double peak = max_abs(translation);
  for (double& v : translation.values()) {
    v = peak > 0.0 ? cfg.shift_translation * v / peak : 0.0;
  }
  return {std::move(rotation), std::move(translation)};
}

}  // namespace

void LabeledDataset::validate() const {
  if (labels.size() != features.rows()) {
    throw ValidationError("dataset: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(features.rows()) + " rows");
  }
  for (std::size_t y : labels) {
    if (y >= class_count) {
      throw ValidationError("dataset: label " + std::to_string(y) +
                            " >= class count " + std::to_string(class_count));
    }
  }
}

void UnlabeledDataset::validate() const {
  if (!eval_labels.empty() && eval_labels.size() != features.rows()) {
    throw ValidationError("dataset: " + std::to_string(eval_labels.size()) +
                          " eval labels for " + std::to_string(features.rows()) + " rows");
  }
  for (std::size_t y : eval_labels) {
    if (y >= class_count) {
      throw ValidationError("dataset: eval label " + std::to_string(y) +
                            " >= class count " + std::to_string(class_count));
    }
  }
}

void SynthConfig::validate(bool symmetric) const {
  const bool classes_ok = symmetric ? (known_classes >= 1 && known_classes <= total_classes)
                                    : (known_classes < total_classes);
  if (!classes_ok || known_classes == 0) {
    throw ValidationError("synth: need 0 < known_classes < total_classes");
  }
  if (input_dim == 0 || word_dim == 0) throw ValidationError("synth: dimensions must be >= 1");
  if (latent_dim == 0 || latent_dim > input_dim) {
    throw ValidationError("synth: latent_dim must lie in [1, input_dim]");
  }
  if (source_per_class == 0 || target_per_class == 0) {
    throw ValidationError("synth: per-class counts must be >= 1");
  }
  if (branching < 2) throw ValidationError("synth: branching factor must be >= 2");
  for (double v : {class_step, feature_noise, word_noise, shift_translation}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("synth: scales must be finite and non-negative");
    }
  }
  if (!std::isfinite(shift_angle)) throw ValidationError("synth: shift angle must be finite");
}

SynthBenchmark generate(const SynthConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);
  Scaffold s = build_scaffold(cfg, root);
  const std::size_t n = s.tree.parent.size();

  std::vector<std::string> names(n);
  std::vector<bool> is_leaf(n, false);
  for (std::size_t c = 0; c < s.class_to_node.size(); ++c) {
    names[s.class_to_node[c]] = "class_" + std::to_string(c);
    is_leaf[s.class_to_node[c]] = true;
  }
  std::vector<Edge> edges;
  for (std::size_t node = 0; node < n; ++node) {
    if (!is_leaf[node]) names[node] = "concept_" + std::to_string(node);
    if (node > 0) edges.emplace_back(s.tree.parent[node], node);
  }

  SynthBenchmark b{
      .source = {},
      .target = {},
      .graph = KnowledgeGraph::create(std::move(names), std::move(edges),
                                      s.class_to_node, cfg.known_classes),
      .word_vectors = {},
      .prototypes = s.prototypes,
      .rotation = {},
      .translation = {},
  };

  Rng word_rng = root.derive(kWords);
  const Matrix projection = gaussian(cfg.input_dim, cfg.word_dim,
                                     1.0 / std::sqrt(static_cast<double>(cfg.input_dim)),
                                     word_rng);
  b.word_vectors = add(matmul(s.prototypes, projection),
                       gaussian(n, cfg.word_dim, cfg.word_noise, word_rng));

  Rng source_rng = root.derive(kSource);
  const std::span<const std::size_t> known_nodes(s.class_to_node.data(), cfg.known_classes);
  b.source.features = sample_rows(s.prototypes, known_nodes, cfg.source_per_class,
                                  cfg.feature_noise, source_rng);
  b.source.labels = repeat_labels(cfg.known_classes, cfg.source_per_class);
  b.source.class_count = cfg.known_classes;

  auto [rotation, translation] = make_shift(cfg, root);
  Rng target_rng = root.derive(kTarget);
  b.target.features = shift_target(
      sample_rows(s.prototypes, s.class_to_node, cfg.target_per_class,
                  cfg.feature_noise, target_rng),
      rotation, translation);
  b.target.eval_labels = repeat_labels(cfg.total_classes, cfg.target_per_class);
  b.target.class_count = cfg.total_classes;
  b.rotation = std::move(rotation);
  b.translation = std::move(translation);
  return b;
}

DaBenchmark generate_symmetric(const SynthConfig& cfg) {
  cfg.validate(true);
  const Rng root(cfg.seed);
  Scaffold s = build_scaffold(cfg, root);
  DaBenchmark b;
  Rng source_rng = root.derive(kSource);
  b.source.features = sample_rows(s.prototypes, s.class_to_node, cfg.source_per_class,
                                  cfg.feature_noise, source_rng);
  b.source.labels = repeat_labels(cfg.total_classes, cfg.source_per_class);
  b.source.class_count = cfg.total_classes;
  auto [rotation, translation] = make_shift(cfg, root);
  Rng target_rng = root.derive(kTarget);
  b.target.features = shift_target(
      sample_rows(s.prototypes, s.class_to_node, cfg.target_per_class,
                  cfg.feature_noise, target_rng),
      rotation, translation);
  b.target.eval_labels = repeat_labels(cfg.total_classes, cfg.target_per_class);
  b.target.class_count = cfg.total_classes;
  return b;
}

// ---- dataset files -------------------------------------------------------

namespace {

void write_rows(std::ostream& out, const Matrix& features,
                const std::vector<std::string>& labels) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    out << labels[r];
    for (double v : features.row(r)) out << ' ' << format_double(v);
    out << '\n';
  }
}

struct RawDataset {
  Matrix features;
  std::vector<std::size_t> labels;
  bool labeled = false;
  std::size_t class_count = 0;
};

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw ParseError(path + " line " + std::to_string(line) + ": " + msg);
}

RawDataset read_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  std::istringstream header(line);
  long long n = -1, dim = -1, labeled = -1, classes = -1;
  std::string k1, k2;
  if (!(header >> n >> dim >> k1 >> labeled >> k2 >> classes) || k1 != "labeled" ||
      k2 != "classes" || n < 0 || dim < 0 || (labeled != 0 && labeled != 1) || classes < 0) {
    fail(path, 1, "header must be `n M_in labeled <0|1> classes <count>`");
  }
  RawDataset raw;
  raw.labeled = labeled == 1;
  raw.class_count = static_cast<std::size_t>(classes);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n * dim));
  for (long long r = 0; r < n; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    if (!std::getline(in, line)) fail(path, line_no, "unexpected end of file");
    std::istringstream ls(line);
    std::string label;
    if (!(ls >> label)) fail(path, line_no, "empty row");
    if (raw.labeled) {
      std::size_t pos = 0;
      long long y = -1;
      try {
        y = std::stoll(label, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != label.size() || y < 0) fail(path, line_no, "bad label `" + label + "`");
      if (static_cast<std::size_t>(y) >= raw.class_count) {
        throw ValidationError(path + " line " + std::to_string(line_no) + ": label " +
                              label + " >= class count " + std::to_string(classes));
      }
      raw.labels.push_back(static_cast<std::size_t>(y));
    } else if (label != "?") {
      fail(path, line_no, "unlabeled rows must start with `?`");
    }
    long long count = 0;
    double v = 0;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (!ls.eof() || count != dim) {
      fail(path, line_no, "expected " + std::to_string(dim) + " features, found " +
                              std::to_string(count));
    }
  }
  raw.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(dim),
                        std::move(values));
  return raw;
}

std::vector<std::size_t> read_eval_labels(const std::string& path, std::size_t rows,
                                          std::size_t classes) {
  std::ifstream in(path);
  if (!in) return {};
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  std::istringstream header(line);
  std::string k1, k2;
  long long n = -1, c = -1;
  if (!(header >> k1 >> n >> k2 >> c) || k1 != "n" || k2 != "classes" || n < 0) {
    throw ParseError(path + " line 1: header must be `n <count> classes <count>`");
  }
  if (static_cast<std::size_t>(n) != rows || static_cast<std::size_t>(c) != classes) {
    throw ValidationError(path + ": sidecar does not match its dataset");
  }
  std::vector<std::size_t> labels;
  for (long long i = 0; i < n; ++i) {
    long long y = -1;
    if (!(in >> y) || y < 0) {
      throw ParseError(path + " line " + std::to_string(i + 2) + ": bad label");
    }
    labels.push_back(static_cast<std::size_t>(y));
  }
  return labels;
}

}  // namespace

void save_dataset(const std::string& path, const LabeledDataset& ds) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << ds.features.rows() << ' ' << ds.features.cols() << " labeled 1 classes "
      << ds.class_count << '\n';
  std::vector<std::string> labels;
  for (std::size_t y : ds.labels) labels.push_back(std::to_string(y));
  write_rows(out, ds.features, labels);
}

void save_dataset(const std::string& path, const UnlabeledDataset& ds) {
  ds.validate();
  {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << ds.features.rows() << ' ' << ds.features.cols() << " labeled 0 classes "
        << ds.class_count << '\n';
    write_rows(out, ds.features, std::vector<std::string>(ds.features.rows(), "?"));
  }
  const std::string sidecar = path + ".eval";
  if (ds.eval_labels.empty()) {
    std::filesystem::remove(sidecar);
    return;
  }
  std::ofstream eval(sidecar);
  if (!eval) throw IoError("cannot open for writing: " + sidecar);
  eval << "n " << ds.eval_labels.size() << " classes " << ds.class_count << '\n';
  for (std::size_t y : ds.eval_labels) eval << y << '\n';
}

std::variant<LabeledDataset, UnlabeledDataset> load_dataset(const std::string& path) {
  RawDataset raw = read_raw(path);
  if (raw.labeled) {
    LabeledDataset ds{std::move(raw.features), std::move(raw.labels), raw.class_count};
    ds.validate();
    return ds;
  }
  UnlabeledDataset ds;
  ds.eval_labels = read_eval_labels(path + ".eval", raw.features.rows(), raw.class_count);
  ds.features = std::move(raw.features);
  ds.class_count = raw.class_count;
  ds.validate();
  return ds;
}

LabeledDataset load_labeled(const std::string& path) {
  auto ds = load_dataset(path);
  if (auto* l = std::get_if<LabeledDataset>(&ds)) return std::move(*l);
  throw ValidationError(path + ": expected a labeled dataset");
}

UnlabeledDataset load_unlabeled(const std::string& path) {
  auto ds = load_dataset(path);
  if (auto* u = std::get_if<UnlabeledDataset>(&ds)) return std::move(*u);
  throw ValidationError(path + ": expected an unlabeled dataset");
}

}  // namespace uodr
