// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "uodr/error.hpp"
#include "uodr/evaluate.hpp"

using namespace uodr;

TEST_CASE("accuracy triple example") {
  const std::vector<std::size_t> pred{0, 1, 2, 2, 3, 0};
  const std::vector<std::size_t> y{0, 1, 1, 2, 3, 3};
  const AccuracyTriple a = accuracy_triple(pred, y, 2);
  CHECK(a.n_known == 3);
  CHECK(a.n_unknown == 3);
  CHECK(a.known == doctest::Approx(2.0 / 3.0));
  CHECK(a.unknown == doctest::Approx(2.0 / 3.0));
  CHECK(a.all == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("all-class accuracy is micro averaged") {
  const std::vector<std::size_t> pred{0, 0, 0, 1};
  const std::vector<std::size_t> y{0, 0, 0, 2};
  const AccuracyTriple a = accuracy_triple(pred, y, 2);
  CHECK(a.known == 1.0);
  CHECK(a.unknown == 0.0);
  CHECK(a.all == 0.75);
}

TEST_CASE("empty groups score zero") {
  const std::vector<std::size_t> pred{0, 1};
  const std::vector<std::size_t> y{0, 1};
  const AccuracyTriple a = accuracy_triple(pred, y, 2);
  CHECK(a.unknown == 0.0);
  CHECK(a.n_unknown == 0);
  CHECK(a.all == 1.0);
  const std::vector<std::size_t> short_pred{0};
  CHECK_THROWS_AS(accuracy_triple(short_pred, y, 2), DimensionError);
}

TEST_CASE("prediction takes the argmax with the lowest index on ties") {
  ModelState s;
  s.encoder = Encoder{Matrix::identity(2), Matrix(1, 2)};
  s.head = ClassifierHead{Matrix{{1, 0}, {1, 0}, {0, 1}}, 1};
  const auto p = predict(s, Matrix{{1, 0}, {0, 1}, {-1, 0}});
  CHECK(p == std::vector<std::size_t>{0, 2, 2});
}

TEST_CASE("json and table formatting") {
  AccuracyTriple a;
  a.known = 0.5;
  a.unknown = 0.25;
  a.all = 0.4;
  const auto j = to_json(a);
  CHECK(j.dump() == R"({"known":0.5,"unknown":0.25,"all":0.4,"n_known":0,"n_unknown":0})");
  const std::string t = format_accuracy_table({{"baseline", a}});
  CHECK(t.find("Known") != std::string::npos);
  CHECK(t.find("baseline     50.0     25.0     40.0") != std::string::npos);
}
