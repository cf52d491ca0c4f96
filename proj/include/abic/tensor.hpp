// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "abic/common.hpp"

namespace abic {

// Dense row-major containers (last index fastest). Kept deliberately thin;
// the domain types in each module wrap these with their own invariants.
template <typename T>
struct Arr2 {
  int d0 = 0, d1 = 0;
  std::vector<T> v;

  Arr2() = default;
  Arr2(int a, int b) : d0(a), d1(b), v(static_cast<size_t>(a) * b) {}

  T& at(int i, int j) { return v[static_cast<size_t>(i) * d1 + j]; }
  const T& at(int i, int j) const { return v[static_cast<size_t>(i) * d1 + j]; }
  size_t size() const { return v.size(); }
};

template <typename T>
struct Arr3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<T> v;

  Arr3() = default;
  Arr3(int a, int b, int c)
      : d0(a), d1(b), d2(c), v(static_cast<size_t>(a) * b * c) {}

  T& at(int i, int j, int k) {
    return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }
  const T& at(int i, int j, int k) const {
    return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }
  size_t size() const { return v.size(); }
};

template <typename T>
struct Arr4 {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<T> v;

  Arr4() = default;
  Arr4(int a, int b, int c, int d)
      : d0(a), d1(b), d2(c), d3(d), v(static_cast<size_t>(a) * b * c * d) {}

  T& at(int i, int j, int k, int l) {
    return v[((static_cast<size_t>(i) * d1 + j) * d2 + k) * d3 + l];
  }
  const T& at(int i, int j, int k, int l) const {
    return v[((static_cast<size_t>(i) * d1 + j) * d2 + k) * d3 + l];
  }
  size_t size() const { return v.size(); }
};

using Real2 = Arr2<double>;
using Real3 = Arr3<double>;
using Cplx2 = Arr2<cplx>;
using Cplx3 = Arr3<cplx>;
using Cplx4 = Arr4<cplx>;

}  // namespace abic
