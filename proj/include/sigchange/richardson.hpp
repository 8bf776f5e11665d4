#pragma once

// Richardson extrapolation of step-size dependent estimates A(h) -> A(0),
// Ridders-style: the tableau is grown one row per halved step and the entry
// with the smallest consistency error is kept. Growth stops once the
// diagonal starts to drift, which is where round-off takes over.

#include <cmath>
#include <limits>
#include <vector>

namespace sigchange {

struct Extrapolated {
  double value = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::infinity();

  /// The limit is considered to exist when the tableau settled to within
  /// max(rel * |value|, floor).
  bool settled(double rel, double floor) const {
    return std::isfinite(value) && std::isfinite(error) &&
           error <= std::fmax(rel * std::fabs(value), floor);
  }
};

/// Steps follow h0, h0/ratio, h0/ratio^2, ...; `power` is the exponent of
/// the leading error term (1 for one-sided differences, 2 for central ones).
template <class Estimate>
Extrapolated richardson(Estimate&& estimate, double h0, int levels,
                        int power = 1, double ratio = 2.0) {
  Extrapolated best;
  if (levels <= 0) return best;
  const double step_factor = std::pow(ratio, power);
  std::vector<double> prev;
  std::vector<double> row;
  double h = h0;
  for (int i = 0; i < levels; ++i, h /= ratio) {
    row.assign(static_cast<std::size_t>(i) + 1, 0.0);
    row[0] = estimate(h);
    if (i == 0) {
      best.value = row[0];
    }
    double fac = step_factor;
    for (int j = 1; j <= i; ++j, fac *= step_factor) {
      const auto uj = static_cast<std::size_t>(j);
      row[uj] = row[uj - 1] + (row[uj - 1] - prev[uj - 1]) / (fac - 1.0);
      const double err = std::fmax(std::fabs(row[uj] - row[uj - 1]),
                                   std::fabs(row[uj] - prev[uj - 1]));
      if (err <= best.error) {
        best.error = err;
        best.value = row[uj];
      }
    }
    if (i > 0) {
      const auto ui = static_cast<std::size_t>(i);
      if (std::fabs(row[ui] - prev[ui - 1]) >= 2.0 * best.error) break;
    }
    prev.swap(row);
  }
  return best;
}

}  // namespace sigchange
