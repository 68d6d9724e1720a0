// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against their OpenMP versions, plus fold-parallel
// matching at one thread against the default thread count.
// Usage: bench_kernels [reps]
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "uodr/kernels.hpp"
#include "uodr/matcher.hpp"

using namespace uodr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Median wall time in milliseconds.
double time_ms(int reps, const std::function<void()>& f) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

void row(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s %10.2f %10.2f %8.2fx  %s\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, identical ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  Rng rng(1);
  const Matrix a = random_matrix(512, 512, rng), b = random_matrix(512, 512, rng);
  const Matrix fs = random_matrix(2000, 64, rng), ft = random_matrix(2000, 64, rng);
  const Matrix logits = random_matrix(20000, 64, rng);

  std::printf("threads: %d, median of %d runs\n", omp_get_max_threads(), reps);
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  Matrix s, p;
  double ts = time_ms(reps, [&] { s = serial::matmul(a, b); });
  double tp = time_ms(reps, [&] { p = matmul(a, b); });
  row("matmul 512^3", ts, tp, s == p);

  ts = time_ms(reps, [&] { s = serial::matmul_nt(a, b); });
  tp = time_ms(reps, [&] { p = matmul_nt(a, b); });
  row("matmul_nt 512^3", ts, tp, s == p);

  ts = time_ms(reps, [&] { s = serial::matmul_tn(a, b); });
  tp = time_ms(reps, [&] { p = matmul_tn(a, b); });
  row("matmul_tn 512^3", ts, tp, s == p);

  ts = time_ms(reps, [&] { s = serial::pairwise_l1(fs, ft); });
  tp = time_ms(reps, [&] { p = pairwise_l1(fs, ft); });
  row("pairwise_l1 2000x2000x64", ts, tp, s == p);

  ts = time_ms(reps, [&] { s = serial::softmax_rows(logits); });
  tp = time_ms(reps, [&] { p = softmax_rows(logits); });
  row("softmax_rows 20000x64", ts, tp, s == p);

  MatchedPairs m1, mp;
  set_kernel_threads(1);
  ts = time_ms(reps, [&] {
    Rng r(7);
    m1 = match_domains(fs, ft, 5, r);
  });
  set_kernel_threads(0);
  tp = time_ms(reps, [&] {
    Rng r(7);
    mp = match_domains(fs, ft, 5, r);
  });
  row("match_domains 2000, 5 folds", ts, tp, m1 == mp);
  return 0;
}
