// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <vector>

#include "abic/isam.hpp"
#include "abic/rng.hpp"

using namespace abic;

namespace {

Real3 random_qk(int bins, int frames, int dim, std::uint64_t seed, double scale = 1.0) {
  Real3 x(bins, frames, dim);
  Rng rng(seed);
  for (auto& v : x.v) v = scale * rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_SUITE("isam") {

TEST_CASE("zero query/key, causal: running uniform rows") {
  Real3 q(1, 3, 4), k(1, 3, 4);
  auto att = attention_weights(q, k, true);
  CHECK(att.at(0, 0, 0) == 1.0);
  CHECK(att.at(0, 0, 1) == 0.0);
  CHECK(att.at(0, 0, 2) == 0.0);
  CHECK(att.at(0, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(att.at(0, 1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(att.at(0, 1, 2) == 0.0);
  for (int j = 0; j < 3; ++j)
    CHECK(att.at(0, 2, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("zero query/key, non-causal: uniform 1/T") {
  Real3 q(2, 5, 3), k(2, 5, 3);
  auto att = attention_weights(q, k, false);
  for (int f = 0; f < 2; ++f)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        CHECK(att.at(f, i, j) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("D=1 two-frame softmax arithmetic") {
  Real3 q(1, 2, 1), k(1, 2, 1);
  q.at(0, 0, 0) = 1.0;
  q.at(0, 1, 0) = 2.0;
  k.at(0, 0, 0) = 1.0;
  k.at(0, 1, 0) = 0.0;
  auto att = attention_weights(q, k, false);
  // row i=1: logits [2, 0] -> softmax = [e^2, 1]/(e^2+1)
  const double e2 = std::exp(2.0);
  CHECK(att.at(0, 1, 0) == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-12));
  CHECK(att.at(0, 1, 1) == doctest::Approx(1.0 / (e2 + 1.0)).epsilon(1e-12));
  CHECK(att.at(0, 1, 0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(att.at(0, 1, 1) == doctest::Approx(0.1192).epsilon(1e-3));
}

TEST_CASE("rows are stochastic and causal future mass is exactly zero") {
  Rng pick(33);
  for (int rep = 0; rep < 50; ++rep) {
    int bins = 1 + pick.uniform_int(0, 3);
    int frames = 1 + pick.uniform_int(0, 15);
    int dim = 1 + pick.uniform_int(0, 7);
    bool causal = rep % 2 == 0;
    auto q = random_qk(bins, frames, dim, 1000 + rep, 3.0);
    auto k = random_qk(bins, frames, dim, 2000 + rep, 3.0);
    auto att = attention_weights(q, k, causal);
    for (int f = 0; f < bins; ++f)
      for (int i = 0; i < frames; ++i) {
        double row = 0.0;
        for (int j = 0; j < frames; ++j) {
          double v = att.at(f, i, j);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          if (causal && j > i) CHECK(v == 0.0);
          row += v;
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
      }
  }
}

TEST_CASE("frequency independence") {
  auto q = random_qk(3, 6, 4, 10);
  auto k = random_qk(3, 6, 4, 11);
  auto base = attention_weights(q, k, false);
  auto q2 = q;
  auto k2 = k;
  for (int t = 0; t < 6; ++t)
    for (int d = 0; d < 4; ++d) {
      q2.at(2, t, d) += 0.37;
      k2.at(2, t, d) -= 0.11;
    }
  auto perturbed = attention_weights(q2, k2, false);
  for (int f = 0; f < 2; ++f)  // untouched bins bit-identical
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) CHECK(base.at(f, i, j) == perturbed.at(f, i, j));
}

TEST_CASE("causal prefix consistency (streamability)") {
  const int frames = 12;
  auto q = random_qk(2, frames, 3, 42);
  auto k = random_qk(2, frames, 3, 43);
  auto full = attention_weights(q, k, true);
  for (int cut = 1; cut <= frames; cut += 3) {
    Real3 qc(2, cut, 3), kc(2, cut, 3);
    for (int f = 0; f < 2; ++f)
      for (int t = 0; t < cut; ++t)
        for (int d = 0; d < 3; ++d) {
          qc.at(f, t, d) = q.at(f, t, d);
          kc.at(f, t, d) = k.at(f, t, d);
        }
    auto part = attention_weights(qc, kc, true);
    for (int f = 0; f < 2; ++f)
      for (int i = 0; i < cut; ++i)
        for (int j = 0; j < cut; ++j)
          CHECK(std::abs(part.at(f, i, j) - full.at(f, i, j)) <= 1e-12);
  }
}

TEST_CASE("numerically stable at logit magnitude 1e4") {
  Real3 q(1, 2, 1), k(1, 2, 1);
  q.at(0, 0, 0) = 100.0;
  q.at(0, 1, 0) = -100.0;
  k.at(0, 0, 0) = 100.0;
  k.at(0, 1, 0) = -100.0;  // logits up to +-1e4
  auto att = attention_weights(q, k, false);
  for (int i = 0; i < 2; ++i) {
    double row = 0.0;
    for (int j = 0; j < 2; ++j) {
      CHECK(std::isfinite(att.at(0, i, j)));
      row += att.at(0, i, j);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("frame cap guards the quadratic buffer") {
  auto q = random_qk(1, 10, 2, 5);
  auto k = random_qk(1, 10, 2, 6);
  CHECK_THROWS_WITH_AS(attention_weights(q, k, false, 8), doctest::Contains("cap"),
                       InputError);
  CHECK_NOTHROW(attention_weights(q, k, false, 10));
}

TEST_CASE("shape errors") {
  Real3 q(1, 4, 2), k(1, 4, 3);
  CHECK_THROWS_AS(attention_weights(q, k, false), InputError);
  Real3 q0(1, 0, 2), k0(1, 0, 2);
  CHECK_THROWS_AS(attention_weights(q0, k0, false), InputError);
}

}  // TEST_SUITE
