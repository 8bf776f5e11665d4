#pragma once

// Singular quadrature of  int_0^t |x|^r psi(x) dx,  the function
//
//   F(lambda, t) = eps(t) |int_0^t |x|^r psi(lambda, x) dx|^(1/(r+1)),
//
// its derivative at t = 0, a finite-difference smoothness probe and the
// Hadamard quotient g(t) = int_0^1 f'(s t) ds  (f(t) = t g(t) when f(0) = 0).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sigchange/errors.hpp"
#include "sigchange/expr.hpp"
#include "sigchange/richardson.hpp"
#include "sigchange/signed_power.hpp"

namespace sigchange {

struct QuadratureOptions {
  double rel_tol = 1e-13;
  // Reported error estimates above this (relative to the L1 norm) are
  // treated as non-convergence.
  double fail_rel = 1e-8;
};

/// int_0^t |x|^r psi(x) dx for r > -1.
///
/// Written as |t|^(r+1) int_0^1 y^r psi(t y) dy and integrated by tanh-sinh
/// quadrature, whose double-exponential node clustering absorbs the
/// algebraic endpoint behaviour y^r. The result carries the sign of t and is
/// exactly odd in t whenever psi is even.
template <class Psi>
double singular_integral(double r, Psi&& psi, double t,
                         const QuadratureOptions& opt = {}) {
  if (!(r > -1.0)) {
    throw DomainError("singular_integral: r must exceed -1, got " +
                      std::to_string(r));
  }
  if (t == 0.0) return 0.0;
  const double sign = t > 0.0 ? 1.0 : -1.0;
  const double a = std::fabs(t);
  auto integrand = [&](double y) {
    const double x = sign * (a * y);
    return r == 0.0 ? psi(x) : std::pow(y, r) * psi(x);
  };
  // The rule extends its abscissa tables lazily, hence one per thread.
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  double error = 0.0;
  double l1 = 0.0;
  const double value = rule.integrate(integrand, 0.0, 1.0, opt.rel_tol, &error, &l1);
  if (!std::isfinite(value) ||
      error > opt.fail_rel * std::fmax(l1, std::numeric_limits<double>::min())) {
    throw QuadratureError("singular_integral did not converge (relative error " +
                          std::to_string(error / l1) + ")");
  }
  return sign * std::pow(a, r + 1.0) * value;
}

/// Variables of a psi expression: l1..ln followed by x.
inline std::vector<std::string> baldomero_variables(std::size_t n_lambda) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n_lambda; ++i) {
    names.push_back("l" + std::to_string(i));
  }
  names.emplace_back("x");
  return names;
}

namespace quad_detail {

inline auto bind_psi(const Expression& psi, std::span<const double> lambda) {
  std::vector<double> values(lambda.begin(), lambda.end());
  values.push_back(0.0);
  if (values.size() != psi.variables().size()) {
    throw MissingBinding("psi expects " +
                         std::to_string(psi.variables().size() - 1) +
                         " lambda values, got " +
                         std::to_string(lambda.size()));
  }
  auto scratch = std::make_shared<std::vector<double>>(std::move(values));
  return [&psi, scratch](double x) {
    scratch->back() = x;
    return psi.eval(*scratch);
  };
}

}  // namespace quad_detail

inline double singular_integral(double r, const Expression& psi,
                                std::span<const double> lambda, double t,
                                const QuadratureOptions& opt = {}) {
  return singular_integral(r, quad_detail::bind_psi(psi, lambda), t, opt);
}

/// r, psi(l1..ln, x) and the lambda box on which psi(lambda, 0) > 0 is
/// required.
struct BaldomeroSpec {
  double r = 1.0;
  Expression psi;
  std::vector<std::pair<double, double>> lambda_box;

  std::size_t lambda_dim() const { return lambda_box.size(); }

  /// Throws DomainError for r <= -1 and PositivityError when psi(lambda, 0)
  /// fails to be positive on a 3^n sample grid of the lambda box.
  void validate() const {
    if (!(r > -1.0)) {
      throw DomainError("the exponent r must exceed -1");
    }
    if (psi.variables().size() != lambda_dim() + 1) {
      throw BadParams("psi must be an expression in l1..ln, x");
    }
    const std::size_t n = lambda_dim();
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) count *= 3;
    std::vector<double> values(n + 1, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t code = k;
      for (std::size_t i = 0; i < n; ++i, code /= 3) {
        const auto [lo, hi] = lambda_box[i];
        values[i] = lo + 0.5 * static_cast<double>(code % 3) * (hi - lo);
      }
      values[n] = 0.0;
      if (!(psi.eval(values) > 0.0)) {
        throw PositivityError("psi(lambda, 0) must be positive on the lambda box");
      }
    }
  }
};

inline BaldomeroSpec make_baldomero_spec(
    double r, std::string_view psi_text,
    std::vector<std::pair<double, double>> lambda_box = {}) {
  BaldomeroSpec spec;
  spec.r = r;
  spec.lambda_box = std::move(lambda_box);
  spec.psi = Expression::parse(psi_text, baldomero_variables(spec.lambda_box.size()));
  spec.validate();
  return spec;
}

/// F(lambda, t) = eps(t) |int_0^t |x|^r psi dx|^(1/(r+1)); F(lambda, 0) = 0.
inline double baldomero_F(const BaldomeroSpec& spec,
                          std::span<const double> lambda, double t,
                          const QuadratureOptions& opt = {}) {
  if (t == 0.0) return 0.0;
  const double integral = singular_integral(spec.r, spec.psi, lambda, t, opt);
  return eps(t) * std::pow(std::fabs(integral), 1.0 / (spec.r + 1.0));
}

/// (r+1)^(-1/(r+1)) psi(lambda, 0)^(1/(r+1)).
inline double f_prime_zero_formula(const BaldomeroSpec& spec,
                                   std::span<const double> lambda) {
  const double psi0 = quad_detail::bind_psi(spec.psi, lambda)(0.0);
  if (!(psi0 > 0.0)) {
    throw PositivityError("psi(lambda, 0) must be positive, got " +
                          std::to_string(psi0));
  }
  const double beta = 1.0 / (spec.r + 1.0);
  return std::pow(spec.r + 1.0, -beta) * std::pow(psi0, beta);
}

/// Analytic dF/dt for t != 0, the closed formula at t = 0.
inline double baldomero_F_derivative(const BaldomeroSpec& spec,
                                     std::span<const double> lambda, double t,
                                     const QuadratureOptions& opt = {}) {
  if (t == 0.0) return f_prime_zero_formula(spec, lambda);
  const double beta = 1.0 / (spec.r + 1.0);
  const double integral = singular_integral(spec.r, spec.psi, lambda, t, opt);
  const double psi_t = quad_detail::bind_psi(spec.psi, lambda)(t);
  return beta * std::pow(std::fabs(integral), beta - 1.0) *
         std::pow(std::fabs(t), spec.r) * psi_t;
}

// ---------------------------------------------------------------------------
// Smoothness probe
// ---------------------------------------------------------------------------

struct StepLadder {
  double h0 = 0.05;
  int levels = 12;
};

struct ProbeTolerance {
  double rel = 1e-3;
  double floor = 1e-7;
};

struct OrderEstimate {
  int order = 0;
  Extrapolated left;
  Extrapolated right;
  double richardson_error = 0.0;  // max of the two one-sided errors
  bool left_exists = false;
  bool right_exists = false;
  bool agree = false;
};

struct SmoothnessReport {
  double t0 = 0.0;
  bool continuous = false;
  std::vector<OrderEstimate> orders;
  /// Largest k such that orders 1..k all agree; 0 means continuous only,
  /// -1 means the one-sided limits of f itself disagree.
  int verdict = -1;
};

namespace quad_detail {

inline double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace quad_detail

/// One-sided k-th derivative estimate at t0 by a forward (side = +1) or
/// backward (side = -1) difference of order k, extrapolated over the ladder.
template <class F>
Extrapolated one_sided_derivative(F&& f, double t0, int order, int side,
                                  const StepLadder& ladder) {
  const double f0 = f(t0);
  auto estimate = [&](double h) {
    double sum = 0.0;
    for (int i = 0; i <= order; ++i) {
      const double fi = i == 0 ? f0 : f(t0 + side * i * h);
      // forward:  sum (-1)^(k-i) C(k,i) f(t0 + i h)
      // backward: sum (-1)^i     C(k,i) f(t0 - i h)
      const int parity = side > 0 ? (order - i) : i;
      const double sgn = (parity % 2 == 0) ? 1.0 : -1.0;
      sum += sgn * quad_detail::binomial(order, i) * fi;
    }
    return sum / std::pow(h, order);
  };
  return richardson(estimate, ladder.h0, ladder.levels, 1);
}

/// Numerical C^q classification of f at t0 from one-sided derivative
/// estimates of orders 1..max_order (max_order <= 4).
template <class F>
SmoothnessReport smoothness_probe(F&& f, double t0, int max_order,
                                  const StepLadder& ladder = {},
                                  const ProbeTolerance& tol = {}) {
  if (max_order < 1 || max_order > 4) {
    throw BadParams("smoothness_probe: max_order must be in 1..4");
  }
  SmoothnessReport report;
  report.t0 = t0;

  auto wrapped = [&](double t) {
    const double v = f(t);
    if (!std::isfinite(v)) {
      throw EvaluationError("probe function returned a non-finite value");
    }
    return v;
  };

  const double f0 = wrapped(t0);
  auto close = [&](double a, double b) {
    return std::fabs(a - b) <=
           std::fmax(tol.rel * 0.5 * std::fabs(a + b), tol.floor);
  };
  // |f(t0 + side h) - f(t0)| must either reach the floor or keep shrinking
  // geometrically down the ladder; a jump leaves it flat.
  auto continuous_side = [&](int side) {
    std::vector<double> d;
    double h = ladder.h0;
    for (int k = 0; k < ladder.levels; ++k, h *= 0.5) {
      d.push_back(std::fabs(wrapped(t0 + side * h) - f0));
    }
    const double last = d.back();
    if (last <= std::fmax(tol.rel * std::fabs(f0), tol.floor)) return true;
    const std::size_t n = d.size();
    return n >= 5 && last <= 0.8 * d[n - 4] && d[n - 2] <= 0.8 * d[n - 5];
  };
  report.continuous = continuous_side(-1) && continuous_side(+1);

  bool all_agree = report.continuous;
  report.verdict = report.continuous ? 0 : -1;
  for (int k = 1; k <= max_order; ++k) {
    OrderEstimate est;
    est.order = k;
    est.left = one_sided_derivative(wrapped, t0, k, -1, ladder);
    est.right = one_sided_derivative(wrapped, t0, k, +1, ladder);
    est.richardson_error = std::fmax(est.left.error, est.right.error);
    est.left_exists = est.left.settled(tol.rel, tol.floor);
    est.right_exists = est.right.settled(tol.rel, tol.floor);
    est.agree = est.left_exists && est.right_exists &&
                close(est.left.value, est.right.value);
    all_agree = all_agree && est.agree;
    if (all_agree) report.verdict = k;
    report.orders.push_back(est);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Hadamard quotient
// ---------------------------------------------------------------------------

/// Central-difference f'(t), extrapolated.
template <class F>
double central_derivative(F&& f, double t, double h0 = 1e-2, int levels = 10) {
  return richardson([&](double h) { return (f(t + h) - f(t - h)) / (2.0 * h); },
                    h0, levels, 2)
      .value;
}

/// g(t) = int_0^1 f'(s t) ds for f with f(0) = 0, so that f(t) = t g(t).
/// g(0) is the estimate of f'(0).
template <class F>
double hadamard_quotient(F&& f, double t) {
  if (t == 0.0) return central_derivative(f, 0.0);
  auto integrand = [&](double s) { return central_derivative(f, s * t); };
  const double g =
      boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, 1.0);
  if (!std::isfinite(g)) throw QuadratureError("hadamard_quotient failed");
  return g;
}

}  // namespace sigchange
