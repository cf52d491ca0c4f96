// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <span>

#include "abic/common.hpp"

namespace abic {

inline constexpr double kMetricFloorRel = 1e-8;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Negative SNR in dB: L = -10 log10(|s|^2 / max(|s - s_hat|^2, eps)) with
// eps = 1e-8 |s|^2, capping the objective at -80 dB for a perfect estimate.
inline double snr_loss(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) throw InputError("snr_loss: length mismatch");
  if (estimate.empty()) throw InputError("snr_loss: empty input");
  double ref_energy = detail::dot(reference, reference);
  if (ref_energy <= 0.0) throw InputError("snr_loss: silent reference");
  double err = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    double d = reference[i] - estimate[i];
    err += d * d;
  }
  double floor = kMetricFloorRel * ref_energy;
  return -10.0 * std::log10(ref_energy / std::max(err, floor));
}

// Gradient of snr_loss w.r.t. the estimate; zero in the floored cap region.
inline void snr_loss_grad(std::span<const double> estimate, std::span<const double> reference,
                          std::span<double> grad) {
  double ref_energy = detail::dot(reference, reference);
  double err = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    double d = reference[i] - estimate[i];
    err += d * d;
  }
  double floor = kMetricFloorRel * ref_energy;
  if (err <= floor) {
    for (auto& g : grad) g = 0.0;
    return;
  }
  double c = -20.0 / (std::log(10.0) * err);
  for (size_t i = 0; i < estimate.size(); ++i)
    grad[i] = c * (reference[i] - estimate[i]);
}

// Projection-form SI-SDR in dB with the same relative flooring on the
// residual energy as snr_loss.
inline double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) throw InputError("si_sdr: length mismatch");
  if (estimate.empty()) throw InputError("si_sdr: empty input");
  double ref_energy = detail::dot(reference, reference);
  double est_energy = detail::dot(estimate, estimate);
  if (ref_energy <= 0.0 || est_energy <= 0.0) throw InputError("si_sdr: silent input");
  double alpha = detail::dot(estimate, reference) / ref_energy;
  double target_energy = alpha * alpha * ref_energy;
  if (target_energy <= 0.0) return -80.0;  // estimate orthogonal to reference
  double resid = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    double d = estimate[i] - alpha * reference[i];
    resid += d * d;
  }
  double floor = kMetricFloorRel * target_energy;
  return 10.0 * std::log10(target_energy / std::max(resid, floor));
}

}  // namespace abic
