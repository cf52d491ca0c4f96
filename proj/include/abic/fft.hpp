// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "abic/common.hpp"

namespace abic {

// Mixed-radix Cooley-Tukey DFT for arbitrary composite sizes (frame lengths
// like 320 = 2^6*5 are not powers of two). Prime factors fall back to the
// direct O(p^2) DFT, so any length works; smooth lengths are fast.
class Fft {
 public:
  explicit Fft(int n) : n_(n), twiddle_(static_cast<size_t>(n)) {
    if (n <= 0) throw InputError("fft size must be positive");
    for (int j = 0; j < n; ++j) {
      double a = -2.0 * M_PI * j / n;
      twiddle_[j] = cplx(std::cos(a), std::sin(a));
    }
  }

  int size() const { return n_; }

  // out must not alias in
  void forward(const cplx* in, cplx* out) const { rec(in, out, n_, 1, 1); }

  std::vector<cplx> forward(const std::vector<cplx>& in) const {
    std::vector<cplx> out(in.size());
    forward(in.data(), out.data());
    return out;
  }

  // inverse without the 1/N factor; caller scales where needed
  std::vector<cplx> inverse_unscaled(const std::vector<cplx>& in) const {
    std::vector<cplx> tmp(in.size());
    for (size_t i = 0; i < in.size(); ++i) tmp[i] = std::conj(in[i]);
    std::vector<cplx> out(in.size());
    forward(tmp.data(), out.data());
    for (auto& v : out) v = std::conj(v);
    return out;
  }

  std::vector<cplx> inverse(const std::vector<cplx>& in) const {
    auto out = inverse_unscaled(in);
    double s = 1.0 / n_;
    for (auto& v : out) v *= s;
    return out;
  }

 private:
  static int smallest_factor(int n) {
    for (int p = 2; p * p <= n; ++p)
      if (n % p == 0) return p;
    return n;
  }

  // DFT of in[0], in[stride], ..., length n, twiddle index step tw_step
  void rec(const cplx* in, cplx* out, int n, int stride, int tw_step) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    int p = smallest_factor(n);
    int m = n / p;
    if (p == n) {  // prime: direct DFT
      for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int j = 0; j < n; ++j)
          acc += in[static_cast<long>(j) * stride] *
                 twiddle_[(static_cast<long>(j) * k % n) * tw_step % n_];
        out[k] = acc;
      }
      return;
    }
    for (int q = 0; q < p; ++q)
      rec(in + static_cast<long>(q) * stride, out + static_cast<long>(q) * m, m,
          stride * p, tw_step * p);
    // combine: X[r*m + k2] = sum_q w_n^{q(r*m+k2)} sub_q[k2]
    std::vector<cplx> col(p);
    for (int k2 = 0; k2 < m; ++k2) {
      for (int q = 0; q < p; ++q) col[q] = out[static_cast<long>(q) * m + k2];
      for (int r = 0; r < p; ++r) {
        long k = static_cast<long>(r) * m + k2;
        cplx acc(0.0, 0.0);
        for (int q = 0; q < p; ++q)
          acc += col[q] * twiddle_[(k * q % n) * tw_step % n_];
        out[k] = acc;
      }
    }
  }

  int n_;
  std::vector<cplx> twiddle_;
};

}  // namespace abic
