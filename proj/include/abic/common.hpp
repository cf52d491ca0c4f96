// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace abic {

using cplx = std::complex<double>;

// Error taxonomy mirrors the CLI exit-code contract:
// usage=1, input=2, data/weights=3, numerical=4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Bad audio/config input supplied by the caller.
class InputError : public Error {
 public:
  using Error::Error;
};

// Corrupt or inconsistent data files (weight containers, sidecars).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure at runtime (divergence, non-differentiable probe).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace abic
