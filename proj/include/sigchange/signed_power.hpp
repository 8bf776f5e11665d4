#pragma once

// Sign function and the signed power t^[a] = eps(t) |t|^a.

#include <cmath>

#include "sigchange/errors.hpp"

namespace sigchange {

/// +1, 0, -1 for t > 0, t == 0, t < 0.
constexpr int eps(double t) noexcept { return (t > 0.0) - (t < 0.0); }

/// Signed power eps(t)|t|^alpha.
///
/// alpha == 0 is rejected: t^[0] is the sign function, use eps().
/// At t == 0 only alpha > 0 is defined. spow(t, 1) and spow(+-1, alpha) are
/// exact.
inline double spow(double t, double alpha) {
  if (alpha == 0.0) {
    throw DomainError("spow: exponent 0 is not a signed power (use eps)");
  }
  if (t == 0.0) {
    if (alpha < 0.0) {
      throw DomainError("spow: 0 raised to a non-positive exponent");
    }
    return 0.0;
  }
  if (alpha == 1.0 || t == 1.0 || t == -1.0) return t;
  const double magnitude = std::pow(std::fabs(t), alpha);
  return t > 0.0 ? magnitude : -magnitude;
}

/// d/dt spow(t, alpha) = alpha |t|^(alpha-1). Defined at t == 0 only for
/// alpha > 1, where it is 0.
inline double spow_derivative(double t, double alpha) {
  if (alpha == 0.0) {
    throw DomainError("spow_derivative: exponent 0");
  }
  if (t == 0.0) {
    if (alpha > 1.0) return 0.0;
    throw DomainError("spow_derivative: not differentiable at 0 for alpha <= 1");
  }
  if (alpha == 1.0) return 1.0;
  return alpha * std::pow(std::fabs(t), alpha - 1.0);
}

}  // namespace sigchange
