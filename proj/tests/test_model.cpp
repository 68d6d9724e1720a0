// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "uodr/error.hpp"
#include "uodr/gradcheck.hpp"
#include "uodr/kernels.hpp"
#include "uodr/model.hpp"

using namespace uodr;
using testing::random_matrix;

TEST_CASE("encoder is affine") {
  Encoder enc{Matrix{{1, 0}, {0, 2}, {1, 1}}, Matrix{{0.5, -1}}};
  CHECK(encode(Matrix{{1, 1, 1}}, enc) == Matrix{{2.5, 2}});
  CHECK_THROWS_AS(encode(Matrix(1, 2), enc), DimensionError);
}

TEST_CASE("encoder backward matches finite differences") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(6), in = 1 + rng.index(5), out = 1 + rng.index(5);
    const Matrix raw = random_matrix(n, in, rng);
    const Encoder enc = init_encoder(in, out, rng);
    const Matrix upstream = random_matrix(n, out, rng);
    // L = <upstream, encode(raw)> + 0.5 ||encode(raw)||^2, a non-linear probe.
    auto loss = [&](const Matrix& x, const Encoder& e) {
      const Matrix f = encode(x, e);
      return sum(hadamard(upstream, f)) + 0.5 * sum_squares(f);
    };
    const Matrix grad_f = add(upstream, encode(raw, enc));
    const EncoderGrads g = encode_backward(raw, enc, grad_f);
    CHECK(grad_check([&](const Matrix& w) { return loss(raw, Encoder{w, enc.bias}); }, enc.weight,
                     g.weight) <= 1e-5);
    CHECK(grad_check([&](const Matrix& b) { return loss(raw, Encoder{enc.weight, b}); }, enc.bias,
                     g.bias) <= 1e-5);
    CHECK(grad_check([&](const Matrix& x) { return loss(x, enc); }, raw, g.input) <= 1e-5);
  }
}

TEST_CASE("classifier backward matches finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix f = random_matrix(4, 3, rng), w = random_matrix(5, 3, rng);
    const Matrix up = random_matrix(4, 5, rng);
    const LinearGrads g = classifier_backward(f, w, up);
    auto loss = [&](const Matrix& ff, const Matrix& ww) { return sum(hadamard(up, classifier_logits(ff, ww))); };
    CHECK(grad_check([&](const Matrix& x) { return loss(x, w); }, f, g.features) <= 1e-5);
    CHECK(grad_check([&](const Matrix& x) { return loss(f, x); }, w, g.weights) <= 1e-5);
  }
}

TEST_CASE("pretraining learns separable source data") {
  Rng rng(3);
  LabeledDataset ds;
  ds.class_count = 3;
  ds.features = Matrix(90, 4);
  const Matrix centers = random_matrix(3, 4, rng, 4.0);
  for (std::size_t i = 0; i < 90; ++i) {
    ds.labels.push_back(i % 3);
    for (std::size_t j = 0; j < 4; ++j) ds.features(i, j) = centers(i % 3, j) + 0.3 * rng.normal();
  }
  PretrainSchedule schedule;
  schedule.epochs = 20;
  Rng a(4), b(4);
  const PretrainResult r = pretrain_source(ds, 6, schedule, a);
  CHECK(r.train_accuracy >= 0.95);
  CHECK(r.loss_history.size() == schedule.epochs + 1);
  CHECK(r.loss_history.back() < r.loss_history.front());
  CHECK(r.classifier.rows() == 3);
  CHECK(r.classifier.cols() == 6);
  const PretrainResult again = pretrain_source(ds, 6, schedule, b);
  CHECK(again.classifier == r.classifier);
  CHECK(again.encoder.weight == r.encoder.weight);
  schedule.batch_size = 0;
  CHECK_THROWS_AS(pretrain_source(ds, 6, schedule, a), ValidationError);
}

TEST_CASE("model state validation") {
  Rng rng(5);
  ModelState s;
  s.encoder = init_encoder(4, 3, rng);
  s.head = ClassifierHead{random_matrix(5, 3, rng), 2};
  s.gcn = init_gcn_params(6, 3, 1, 0.2, rng);
  CHECK_NOTHROW(s.validate());
  ModelState bad = s;
  bad.head.weights = Matrix(5, 4);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.head.known_count = 6;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.gcn = init_gcn_params(6, 2, 1, 0.2, rng);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("checkpoint round-trip") {
  Rng rng(6);
  ModelState s;
  s.encoder = init_encoder(4, 3, rng);
  s.encoder.bias = random_matrix(1, 3, rng);
  s.head = ClassifierHead{random_matrix(5, 3, rng), 2};
  s.gcn = init_gcn_params(6, 3, 2, 0.2, rng);
  testing::TempDir dir("ckpt");
  save_checkpoint(dir.file("c"), s, {"abcd", 17});
  CheckpointInfo info;
  const ModelState back = load_checkpoint(dir.file("c"), &info);
  CHECK(back.encoder.weight == s.encoder.weight);
  CHECK(back.encoder.bias == s.encoder.bias);
  CHECK(back.head.weights == s.head.weights);
  CHECK(back.head.known_count == 2);
  REQUIRE(back.gcn.layers.size() == 2);
  CHECK(back.gcn.layers[1] == s.gcn.layers[1]);
  CHECK(info.config_hash == "abcd");
  CHECK(info.seed == 17);

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing")), IoError);
  // A tampered matrix no longer matches the manifest.
  save_matrix(dir.file("c/head.weights"), Matrix(4, 3));
  CHECK_THROWS_AS(load_checkpoint(dir.file("c")), ValidationError);
  std::ofstream(dir.file("c/manifest.json")) << "{not json";
  CHECK_THROWS_AS(load_checkpoint(dir.file("c")), ValidationError);
}

TEST_CASE("head initialization from embeddings") {
  const ClassifierHead h = init_head_from_gcn(Matrix{{1, 2}, {3, 4}, {5, 6}}, 2);
  CHECK(h.total_count() == 3);
  CHECK(h.known_count == 2);
  CHECK(h.weights(2, 1) == 6);
}
