#pragma once

// Built-in example spaces: the Kossowski form, ESP-form spaces
// diag(g_ii, hbar * spow(x_m, 1/alpha)), the two-dimensional "discussion1"
// matrix, the normal form, a seeded smooth distortion of the normal form, and
// flat Euclidean space.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sigchange/errors.hpp"
#include "sigchange/expr.hpp"
#include "sigchange/metric.hpp"

namespace sigchange {

/// Named string parameters; numeric values are parsed on access.
using SpaceParams = std::map<std::string, std::string>;

struct SpaceDescriptor {
  std::string name;
  MetricField metric;
  std::map<std::string, VectorField> fields;
  std::optional<Expression> sigma;
  std::string notes;

  const VectorField& field(const std::string& key) const {
    const auto it = fields.find(key);
    if (it == fields.end()) throw BadParams("space '" + name + "' has no field named '" + key + "'");
    return it->second;
  }
};

namespace catalog_detail {

inline double number(const SpaceParams& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  if (it == p.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw BadParams("parameter '" + key + "' is not a number: '" + it->second + "'");
  }
}

inline std::size_t dimension(const SpaceParams& p, std::size_t fallback = 2) {
  const double m = number(p, "m", static_cast<double>(fallback));
  if (m < 2 || m > 6 || m != std::floor(m)) throw BadParams("m must be an integer in 2..6");
  return static_cast<std::size_t>(m);
}

inline double positive_alpha(const SpaceParams& p) {
  const double alpha = number(p, "alpha", 1.0);
  if (!(alpha > 0.0)) throw BadParams("alpha must be positive");
  return alpha;
}

inline std::string text(const SpaceParams& p, const std::string& key, std::string fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline void reject_unknown(const SpaceParams& p, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : p) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw BadParams("unknown parameter '" + key + "'");
  }
}

inline Box cube(std::size_t m, double half) {
  return Box{std::vector<std::pair<double, double>>(m, {-half, half})};
}

/// Symbolic determinant by cofactor expansion along the first column.
inline Expression det(const std::vector<std::vector<Expression>>& a, std::vector<std::size_t> rows,
                      std::size_t col) {
  if (rows.size() == 1) return a[rows[0]][col];
  std::optional<Expression> sum;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::vector<std::size_t> rest = rows;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
    Expression term = a[rows[k]][col] * det(a, rest, col + 1);
    if (k % 2 == 1) term = -term;
    sum = sum ? *sum + term : term;
  }
  return *sum;
}

inline Expression minor_det(const std::vector<std::vector<Expression>>& a, std::size_t skip_row,
                            std::size_t skip_col) {
  std::vector<std::vector<Expression>> sub;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i == skip_row) continue;
    sub.emplace_back();
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j != skip_col) sub.back().push_back(a[i][j]);
    }
  }
  if (sub.empty()) return Expression::constant(1.0, a[0][0].variable_list());
  std::vector<std::size_t> rows(sub.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return det(sub, rows, 0);
}

}  // namespace catalog_detail

/// Seeded map y(x) used by "distorted_normal":
///   y_i = x_i + a sin(k x_m + phase_i)              (i < m)
///   y_m = (x_m + bend sin(x_1)) (1 + a cos(k x_1 + phase_m))
/// Phases are uniform in [0, 2 pi) from mt19937_64(seed).
struct Distortion {
  std::size_t m = 2;
  double amplitude = 0.1;
  double frequency = 1.0;
  double bend = 0.0;
  std::uint64_t seed = 1;

  std::vector<double> phases() const {
    std::mt19937_64 rng(seed);
    std::vector<double> out;
    // Explicit 53-bit conversion keeps phases identical across standard
    // library implementations.
    for (std::size_t i = 0; i < m; ++i) {
      out.push_back(2.0 * std::numbers::pi * static_cast<double>(rng() >> 11) * 0x1.0p-53);
    }
    return out;
  }

  std::vector<Expression> map() const {
    const auto vars = std::make_shared<const std::vector<std::string>>(coordinate_names(m));
    const auto phase = phases();
    auto x = [&](std::size_t i) { return Expression::variable("x" + std::to_string(i + 1), vars); };
    auto c = [&](double v) { return Expression::constant(v, vars); };
    std::vector<Expression> y;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      y.push_back(x(i) + amplitude * sin(frequency * x(m - 1) + c(phase[i])));
    }
    Expression base = x(m - 1);
    if (bend != 0.0) base = base + bend * sin(x(0));
    y.push_back(base * (1.0 + amplitude * cos(frequency * x(0) + c(phase[m - 1]))));
    return y;
  }
};

inline SpaceDescriptor builtin_space(std::string_view name, const SpaceParams& params = {}) {
  using namespace catalog_detail;
  const std::string key(name);
  if (key == "kossowski") {
    reject_unknown(params, {"m"});
    const std::size_t m = dimension(params);
    const auto names = coordinate_names(m);
    std::vector<std::vector<Expression>> g(m, std::vector<Expression>(m, Expression(0.0, names)));
    for (std::size_t i = 0; i + 1 < m; ++i) g[i][i] = Expression(1.0, names);
    g[m - 1][m - 1] = Expression::parse("-x" + std::to_string(m), names);
    const Expression sigma = Expression::parse("x" + std::to_string(m), names);
    return {key, MetricField(1.0, g, cube(m, 1.0), sigma),
            {{"rho", VectorField::coordinate(m, m - 1)}}, sigma,
            "Kossowski form: flat g_ij with g_mm = -x_m."};
  }
  if (key == "esp" || key == "normal_form") {
    if (key == "esp") {
      reject_unknown(params, {"m", "alpha", "hbar", "gii"});
    } else {
      reject_unknown(params, {"m", "alpha"});
    }
    const std::size_t m = dimension(params);
    const double alpha = positive_alpha(params);
    const auto names = coordinate_names(m);
    const Expression hbar = Expression::parse(text(params, "hbar", "1"), names);
    const Expression gii = Expression::parse(text(params, "gii", "1"), names);
    std::vector<std::vector<Expression>> g(m, std::vector<Expression>(m, Expression(0.0, names)));
    for (std::size_t i = 0; i + 1 < m; ++i) g[i][i] = gii;
    const Expression xm = Expression::variable("x" + std::to_string(m), hbar.variable_list());
    const Expression weight = spow(xm, 1.0 / alpha);
    g[m - 1][m - 1] = hbar.constant_value() == 1.0 ? weight : hbar * weight;
    const Expression sigma = Expression::parse("x" + std::to_string(m), names);
    return {key, MetricField(alpha, g, cube(m, 1.0), sigma),
            {{"rho", VectorField::coordinate(m, m - 1)}}, sigma,
            key == "esp" ? "Special form diag(g_ii, hbar * spow(x_m, 1/alpha))."
                         : "Normal form diag(1, ..., 1, spow(x_m, 1/alpha))."};
  }
  if (key == "discussion1") {
    reject_unknown(params, {});
    const auto names = coordinate_names(2);
    const auto g = std::vector<std::vector<Expression>>{
        {Expression::parse("1", names), Expression::parse("spow(x2, 0.5)", names)},
        {Expression::parse("spow(x2, 0.5)", names), Expression::parse("2*x2", names)}};
    const Expression sigma = Expression::parse("x2", names);
    return {key, MetricField(1.0, g, cube(2, 1.0), sigma),
            {{"rho", VectorField::coordinate(2, 1)}}, sigma,
            "Matrix [[1, y^[1/2]], [y^[1/2], 2y]]; det = 2y - |y| is not C1 across y = 0."};
  }
  if (key == "distorted_normal") {
    reject_unknown(params, {"m", "alpha", "amplitude", "frequency", "seed", "bend"});
    Distortion d;
    d.m = dimension(params);
    const double alpha = positive_alpha(params);
    d.amplitude = number(params, "amplitude", 0.1);
    d.frequency = number(params, "frequency", 1.0);
    d.bend = number(params, "bend", 0.0);
    const double seed = number(params, "seed", 1.0);
    if (d.amplitude < 0.0 || d.amplitude > 0.3) throw BadParams("amplitude must be in [0, 0.3]");
    if (!(d.frequency > 0.0) || d.frequency > 3.0) throw BadParams("frequency must be in (0, 3]");
    if (d.amplitude * d.frequency > 0.5) throw BadParams("amplitude * frequency must not exceed 0.5");
    if (std::fabs(d.bend) > 0.3) throw BadParams("bend must be in [-0.3, 0.3]");
    if (seed < 0 || seed != std::floor(seed)) throw BadParams("seed must be a non-negative integer");
    d.seed = static_cast<std::uint64_t>(seed);
    const std::size_t m = d.m;
    const auto y = d.map();
    std::vector<std::vector<Expression>> jac(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) jac[i].push_back(y[i].differentiate(j));
    }
    const Expression weight = spow(y[m - 1], 1.0 / alpha);
    std::vector<std::vector<Expression>> g(m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (b < a) {
          g[a].push_back(g[b][a]);
          continue;
        }
        Expression sum = weight * (jac[m - 1][a] * jac[m - 1][b]);
        for (std::size_t i = 0; i + 1 < m; ++i) sum = sum + jac[i][a] * jac[i][b];
        g[a].push_back(sum);
      }
    }
    // rho = J^{-1} e_m: the normal form's d/dy_m in x coordinates.
    std::vector<std::size_t> rows(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = i;
    const Expression det_j = det(jac, rows, 0);
    std::vector<Expression> rho;
    for (std::size_t a = 0; a < m; ++a) {
      Expression cof = minor_det(jac, m - 1, a);
      if ((a + m - 1) % 2 == 1) cof = -cof;
      rho.push_back(cof / det_j);
    }
    return {key, MetricField(alpha, g, cube(m, 1.0), y[m - 1]),
            {{"rho", VectorField(rho)}}, y[m - 1],
            "Normal form pulled back through a seeded smooth diffeomorphism; rho is the pulled-back d/dy_m."};
  }
  if (key == "euclidean") {
    reject_unknown(params, {"m"});
    const std::size_t m = dimension(params);
    const auto names = coordinate_names(m);
    std::vector<std::vector<Expression>> g(m, std::vector<Expression>(m, Expression(0.0, names)));
    for (std::size_t i = 0; i < m; ++i) g[i][i] = Expression(1.0, names);
    const Expression sigma = Expression::parse("x" + std::to_string(m), names);
    return {key, MetricField(1.0, g, cube(m, 1.0), sigma),
            {{"rho", VectorField::coordinate(m, m - 1)}}, sigma, "Flat Euclidean metric (no Sigma)."};
  }
  throw UnknownSpace("unknown builtin space '" + key + "'");
}

inline std::vector<std::string> builtin_space_names() {
  return {"kossowski", "esp", "discussion1", "normal_form", "distorted_normal", "euclidean"};
}

}  // namespace sigchange
