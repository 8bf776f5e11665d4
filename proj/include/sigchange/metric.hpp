#pragma once

// Degenerate metric fields g_ab(x) given by expressions in x1..xm, the
// singular locus Sigma = {det g = 0}, radical directions, the alpha
// transversality test, Christoffel symbols off Sigma, and the field
// G = grad(sigma) / <grad sigma, grad sigma>.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "sigchange/errors.hpp"
#include "sigchange/expr.hpp"
#include "sigchange/linalg.hpp"
#include "sigchange/richardson.hpp"
#include "sigchange/signed_power.hpp"

namespace sigchange {

/// Axis-aligned box [lo_i, hi_i].
struct Box {
  std::vector<std::pair<double, double>> bounds;

  std::size_t dim() const { return bounds.size(); }

  bool contains(const Vec& x, double slack = 0.0) const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const double xi = x[static_cast<Eigen::Index>(i)];
      if (!(xi >= bounds[i].first - slack && xi <= bounds[i].second + slack)) return false;
    }
    return true;
  }

  /// max(1, max |bound|); the unit for absolute tolerances.
  double scale() const {
    double s = 1.0;
    for (const auto& [lo, hi] : bounds) s = std::max({s, std::fabs(lo), std::fabs(hi)});
    return s;
  }

  Vec center() const {
    Vec c(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
      c[static_cast<Eigen::Index>(i)] = 0.5 * (bounds[i].first + bounds[i].second);
    }
    return c;
  }
};

namespace metric_detail {

inline std::span<const double> span_of(const Vec& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}

inline void require_coordinates(const Expression& e, std::size_t m, const char* what) {
  if (e.variables() != coordinate_names(m)) {
    throw BadParams(std::string(what) + " must be an expression in x1..x" + std::to_string(m));
  }
}

}  // namespace metric_detail

/// m component expressions in x1..xm with their symbolic Jacobian.
class VectorField {
 public:
  VectorField() = default;

  explicit VectorField(std::vector<Expression> components) : comps_(std::move(components)) {
    const std::size_t m = comps_.size();
    if (m == 0) throw BadParams("vector field needs at least one component");
    jac_.resize(m);
    for (std::size_t a = 0; a < m; ++a) {
      metric_detail::require_coordinates(comps_[a], m, "vector field component");
      for (std::size_t b = 0; b < m; ++b) jac_[a].push_back(comps_[a].differentiate(b));
    }
  }

  static VectorField parse(const std::vector<std::string>& texts) {
    std::vector<Expression> comps;
    for (const auto& t : texts) comps.push_back(Expression::parse(t, coordinate_names(texts.size())));
    return VectorField(std::move(comps));
  }

  /// The constant field e_axis (axis is zero-based).
  static VectorField coordinate(std::size_t m, std::size_t axis) {
    const auto names = coordinate_names(m);
    std::vector<Expression> comps;
    for (std::size_t i = 0; i < m; ++i) comps.emplace_back(i == axis ? 1.0 : 0.0, names);
    return VectorField(std::move(comps));
  }

  /// factor * X, for a scalar expression in the same coordinates.
  VectorField scaled(const Expression& factor) const {
    std::vector<Expression> comps;
    for (const auto& c : comps_) comps.push_back(factor * c);
    return VectorField(std::move(comps));
  }

  std::size_t dim() const { return comps_.size(); }
  const Expression& component(std::size_t a) const { return comps_.at(a); }
  const std::vector<Expression>& components() const { return comps_; }

  Vec operator()(const Vec& x) const {
    Vec v(static_cast<Eigen::Index>(dim()));
    for (std::size_t a = 0; a < dim(); ++a) {
      v[static_cast<Eigen::Index>(a)] = comps_[a].eval(metric_detail::span_of(x));
    }
    return v;
  }

  /// J(a, b) = d X^a / d x_b.
  Mat jacobian(const Vec& x) const {
    const auto m = static_cast<Eigen::Index>(dim());
    Mat j(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        j(a, b) = jac_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].eval(
            metric_detail::span_of(x));
      }
    }
    return j;
  }

 private:
  std::vector<Expression> comps_;
  std::vector<std::vector<Expression>> jac_;
};

/// Symmetric m x m field of expressions with exponent alpha and domain box.
/// Entry derivatives are precomputed symbolically.
class MetricField {
 public:
  MetricField(double alpha, std::vector<std::vector<Expression>> entries, Box domain,
              std::optional<Expression> sigma_hint = std::nullopt)
      : alpha_(alpha), entries_(std::move(entries)), domain_(std::move(domain)),
        sigma_hint_(std::move(sigma_hint)) {
    const std::size_t m = entries_.size();
    if (m < 2) throw BadParams("metric dimension must be at least 2");
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw BadParams("alpha must be positive");
    if (domain_.dim() != m) throw BadParams("domain box must have one interval per coordinate");
    for (const auto& [lo, hi] : domain_.bounds) {
      if (!(lo < hi)) throw BadParams("domain intervals must satisfy lo < hi");
    }
    for (std::size_t a = 0; a < m; ++a) {
      if (entries_[a].size() != m) throw BadParams("metric entries must form a square array");
      for (std::size_t b = 0; b < m; ++b) {
        metric_detail::require_coordinates(entries_[a][b], m, "metric entry");
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (!(entries_[a][b] == entries_[b][a])) {
          throw BadParams("metric entries must be symmetric: g" + std::to_string(a + 1) +
                          std::to_string(b + 1) + " differs from g" + std::to_string(b + 1) +
                          std::to_string(a + 1));
        }
      }
    }
    if (sigma_hint_) metric_detail::require_coordinates(*sigma_hint_, m, "sigma");
    d_entries_.resize(m);
    for (std::size_t c = 0; c < m; ++c) {
      d_entries_[c].resize(m);
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          d_entries_[c][a].push_back(b < a ? d_entries_[c][b][a] : entries_[a][b].differentiate(c));
        }
      }
    }
  }

  static MetricField parse(double alpha, const std::vector<std::vector<std::string>>& entries,
                           Box domain, const std::optional<std::string>& sigma = std::nullopt) {
    const auto names = coordinate_names(entries.size());
    std::vector<std::vector<Expression>> parsed(entries.size());
    for (std::size_t a = 0; a < entries.size(); ++a) {
      for (const auto& text : entries[a]) parsed[a].push_back(Expression::parse(text, names));
    }
    std::optional<Expression> hint;
    if (sigma) hint = Expression::parse(*sigma, names);
    return MetricField(alpha, std::move(parsed), std::move(domain), std::move(hint));
  }

  std::size_t dim() const { return entries_.size(); }
  double alpha() const { return alpha_; }
  const Box& domain() const { return domain_; }
  const Expression& entry(std::size_t a, std::size_t b) const { return entries_.at(a).at(b); }
  const std::vector<std::vector<Expression>>& entries() const { return entries_; }
  const std::optional<Expression>& sigma_hint() const { return sigma_hint_; }

  /// d g_ab / d x_c.
  const Expression& entry_derivative(std::size_t c, std::size_t a, std::size_t b) const {
    return d_entries_.at(c).at(a).at(b);
  }

  /// Guard for all inverse-metric work: 1e-8 times the domain scale.
  double default_det_floor() const { return 1e-8 * domain_.scale(); }

  MetricField with_alpha(double alpha) const {
    MetricField copy = *this;
    if (!(alpha > 0.0)) throw BadParams("alpha must be positive");
    copy.alpha_ = alpha;
    return copy;
  }

 private:
  double alpha_;
  std::vector<std::vector<Expression>> entries_;
  Box domain_;
  std::optional<Expression> sigma_hint_;
  std::vector<std::vector<std::vector<Expression>>> d_entries_;
};

inline Mat eval_metric(const MetricField& M, const Vec& x) {
  const auto m = static_cast<Eigen::Index>(M.dim());
  Mat g(m, m);
  const auto xs = metric_detail::span_of(x);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) {
      g(a, b) = M.entry(static_cast<std::size_t>(a), static_cast<std::size_t>(b)).eval(xs);
      g(b, a) = g(a, b);
    }
  }
  return g;
}

inline double det_at(const MetricField& M, const Vec& x) { return determinant(eval_metric(M, x)); }

inline double inner(const MetricField& M, const Vec& x, const Vec& u, const Vec& v) {
  return u.dot(eval_metric(M, x) * v);
}

namespace metric_detail {

inline double max_abs(const Mat& g) { return g.cwiseAbs().maxCoeff(); }

/// Scale of det g near x: max(1, max |g_ab|)^(m-1).
inline double det_scale(const Mat& g) {
  return std::pow(std::max(1.0, max_abs(g)), static_cast<double>(g.rows() - 1));
}

}  // namespace metric_detail

/// Point on Sigma along seed + t * direction, t in [-1, 1] clipped to the
/// domain. The sign change nearest to the seed is bracketed by a 64-step scan
/// each way and refined with TOMS 748 to full precision.
inline Vec locate_sigma(const MetricField& M, const Vec& seed, const Vec& direction) {
  auto f = [&](double t) { return det_at(M, seed + t * direction); };
  const double f0 = f(0.0);
  const double tol = 1e-12 * metric_detail::det_scale(eval_metric(M, seed));
  if (std::fabs(f0) <= tol) return seed;

  double t_lo = -1.0;
  double t_hi = 1.0;
  const Box& box = M.domain();
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double d = direction[ii];
    if (d == 0.0) continue;
    const double a = (box.bounds[i].first - seed[ii]) / d;
    const double b = (box.bounds[i].second - seed[ii]) / d;
    t_lo = std::max(t_lo, std::min(a, b));
    t_hi = std::min(t_hi, std::max(a, b));
  }
  constexpr int kScan = 64;
  std::optional<std::pair<double, double>> bracket;
  double fa = 0.0;
  double fb = 0.0;
  for (int side : {+1, -1}) {
    const double end = side > 0 ? t_hi : t_lo;
    if (side > 0 ? end <= 0.0 : end >= 0.0) continue;
    double prev_t = 0.0;
    double prev_f = f0;
    for (int k = 1; k <= kScan; ++k) {
      const double t = end * k / kScan;
      const double ft = f(t);
      if (ft == 0.0) return seed + t * direction;
      if ((ft > 0.0) != (prev_f > 0.0)) {
        if (!bracket || std::fabs(t) < std::max(std::fabs(bracket->first), std::fabs(bracket->second))) {
          bracket = std::minmax(prev_t, t);
          fa = prev_t < t ? prev_f : ft;
          fb = prev_t < t ? ft : prev_f;
        }
        break;
      }
      prev_t = t;
      prev_f = ft;
    }
  }
  if (!bracket) throw NoBracket("det does not change sign along the search segment");
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      f, bracket->first, bracket->second, fa, fb, boost::math::tools::eps_tolerance<double>(52),
      iters);
  const double t = 0.5 * (root.first + root.second);
  return seed + t * direction;
}

namespace metric_detail {

/// Central-difference gradient of spow(det g, alpha), the candidate simple
/// equation of Sigma.
inline Vec sigma_normal(const MetricField& M, const Vec& p, double h = 1e-6) {
  const auto m = static_cast<Eigen::Index>(M.dim());
  Vec grad(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vec e = Vec::Zero(m);
    e[i] = h;
    grad[i] = (spow(det_at(M, p + e), M.alpha()) - spow(det_at(M, p - e), M.alpha())) / (2.0 * h);
  }
  return grad;
}

}  // namespace metric_detail

struct RadicalDirection {
  Vec direction;     // unit kernel vector, last nonzero component positive
  Vec sigma_normal;  // gradient of spow(det, alpha) at p
  double cos_angle = 0.0;  // |<direction, normal>| / |normal|
  bool transverse = false;
  double smallest_eigenvalue = 0.0;
  double second_eigenvalue = 0.0;
};

/// Kernel direction of g_p for p on Sigma. Corank above one is an error.
inline RadicalDirection radical_direction(const MetricField& M, const Vec& p) {
  const Mat g = eval_metric(M, p);
  Eigen::SelfAdjointEigenSolver<Mat> solver(g);
  if (solver.info() != Eigen::Success) throw RankError("eigen-decomposition failed");
  const Vec& lambda = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(lambda.size()));
  for (Eigen::Index i = 0; i < lambda.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return std::fabs(lambda[a]) < std::fabs(lambda[b]); });
  RadicalDirection out;
  out.smallest_eigenvalue = lambda[order[0]];
  out.second_eigenvalue = lambda[order[1]];
  const double scale = std::max(1.0, metric_detail::max_abs(g));
  if (std::fabs(out.second_eigenvalue) <= 1e-8 * scale ||
      std::fabs(out.second_eigenvalue) < 1e3 * std::fabs(out.smallest_eigenvalue)) {
    throw RankError("metric is not of corank one at the given point (eigenvalues " +
                    std::to_string(out.smallest_eigenvalue) + ", " +
                    std::to_string(out.second_eigenvalue) + ")");
  }
  Vec v = solver.eigenvectors().col(order[0]).normalized();
  for (Eigen::Index i = v.size() - 1; i >= 0; --i) {
    if (std::fabs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      break;
    }
  }
  out.direction = v;
  out.sigma_normal = metric_detail::sigma_normal(M, p);
  const double nn = out.sigma_normal.norm();
  out.cos_angle = nn > 0.0 ? std::fabs(v.dot(out.sigma_normal)) / nn : 0.0;
  out.transverse = out.cos_angle > 1e-6;
  return out;
}

struct TransversalityOptions {
  std::optional<double> alpha;  // exponent to test; defaults to the metric's
  double h0 = 1e-2;
  int levels = 11;
  double rel_tol = 1e-3;
  double nonzero = 1e-6;  // relative to the determinant scale
};

struct TransversalityReport {
  Vec point;
  Vec direction;
  double alpha = 0.0;
  double det_value = 0.0;
  Extrapolated left;
  Extrapolated right;
  bool left_exists = false;
  bool right_exists = false;
  bool extension_c1 = false;
  bool differential_nonzero = false;
  bool pass = false;
  std::string reason;
};

/// One-sided slopes of spow(det g(p + t n), alpha) along the radical
/// direction n. Pass iff both exist, agree, and are nonzero.
inline TransversalityReport transversality_report(const MetricField& M, const Vec& p,
                                                  const TransversalityOptions& opt = {}) {
  TransversalityReport rep;
  rep.point = p;
  rep.alpha = opt.alpha.value_or(M.alpha());
  rep.det_value = det_at(M, p);
  rep.direction = radical_direction(M, p).direction;
  const Mat g = eval_metric(M, p);
  const double scale =
      std::pow(std::max(1.0, metric_detail::max_abs(g)), static_cast<double>(M.dim() - 1) * rep.alpha);
  auto f = [&](double t) { return spow(det_at(M, p + t * rep.direction), rep.alpha); };
  const double f0 = f(0.0);
  auto slope = [&](int side) {
    return richardson([&](double h) { return (f(side * h) - f0) / (side * h); }, opt.h0, opt.levels, 1);
  };
  rep.left = slope(-1);
  rep.right = slope(+1);
  const double floor = 1e-7 * scale;
  rep.left_exists = rep.left.settled(opt.rel_tol, floor);
  rep.right_exists = rep.right.settled(opt.rel_tol, floor);
  const double mean = 0.5 * (rep.left.value + rep.right.value);
  rep.extension_c1 = rep.left_exists && rep.right_exists &&
                     std::fabs(rep.left.value - rep.right.value) <=
                         std::max(opt.rel_tol * std::fabs(mean), floor);
  rep.differential_nonzero = rep.extension_c1 && std::fabs(mean) > opt.nonzero * scale;
  rep.pass = rep.extension_c1 && rep.differential_nonzero;
  if (!rep.left_exists || !rep.right_exists) {
    rep.reason = "one-sided derivative does not exist (extension not C1)";
  } else if (!rep.extension_c1) {
    rep.reason = "one-sided derivatives disagree (extension not C1)";
  } else if (!rep.differential_nonzero) {
    rep.reason = "differential vanishes on Sigma";
  }
  return rep;
}

/// Gamma^a_bc at one point, stored as data[(a * m + b) * m + c].
struct Christoffel {
  std::size_t m = 0;
  std::vector<double> data;

  double operator()(std::size_t a, std::size_t b, std::size_t c) const { return data[(a * m + b) * m + c]; }

  /// Gamma^a_bc u^b v^c.
  Vec contract(const Vec& u, const Vec& v) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        for (std::size_t c = 0; c < m; ++c) {
          s += (*this)(a, b, c) * u[static_cast<Eigen::Index>(b)] * v[static_cast<Eigen::Index>(c)];
        }
      }
      out[static_cast<Eigen::Index>(a)] = s;
    }
    return out;
  }
};

/// Levi-Civita symbols; refuses to evaluate within det_floor of Sigma.
/// A negative det_floor selects the metric's default.
inline Christoffel christoffel(const MetricField& M, const Vec& x, double det_floor = -1.0) {
  if (det_floor < 0.0) det_floor = M.default_det_floor();
  const Mat g = eval_metric(M, x);
  const double det = determinant(g);
  if (!(std::fabs(det) > det_floor)) {
    throw NearSingular("Christoffel symbols requested within det_floor of Sigma (|det| = " +
                       std::to_string(std::fabs(det)) + ")");
  }
  const std::size_t m = M.dim();
  const auto xs = metric_detail::span_of(x);
  // dg[c](a, b) = d_c g_ab
  std::vector<Mat> dg(m, Mat(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)));
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a; b < m; ++b) {
        const double v = M.entry_derivative(c, a, b).eval(xs);
        dg[c](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
        dg[c](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
      }
    }
  }
  const Mat ginv = Eigen::PartialPivLU<Mat>(g).inverse();
  Christoffel out;
  out.m = m;
  out.data.assign(m * m * m, 0.0);
  for (std::size_t b = 0; b < m; ++b) {
    for (std::size_t c = b; c < m; ++c) {
      // lowered: Gamma_dbc = (d_b g_dc + d_c g_db - d_d g_bc) / 2
      Vec lowered(static_cast<Eigen::Index>(m));
      for (std::size_t d = 0; d < m; ++d) {
        const auto di = static_cast<Eigen::Index>(d);
        const auto bi = static_cast<Eigen::Index>(b);
        const auto ci = static_cast<Eigen::Index>(c);
        lowered[di] = 0.5 * (dg[b](di, ci) + dg[c](di, bi) - dg[d](bi, ci));
      }
      const Vec raised = ginv * lowered;
      for (std::size_t a = 0; a < m; ++a) {
        out.data[(a * m + b) * m + c] = raised[static_cast<Eigen::Index>(a)];
        out.data[(a * m + c) * m + b] = raised[static_cast<Eigen::Index>(a)];
      }
    }
  }
  return out;
}

struct ExtensionReport {
  Vec point;
  Vec direction;
  Vec left;
  Vec right;
  double left_error = 0.0;
  double right_error = 0.0;
  bool exists = false;
  bool agree = false;
  bool pass = false;
};

/// G = g^{-1} d sigma / (d sigma^T g^{-1} d sigma), defined off Sigma, with
/// an extended evaluator that bridges the det_floor band.
class GradSigmaField {
 public:
  GradSigmaField(MetricField M, Expression sigma, double det_floor = -1.0)
      : M_(std::move(M)), sigma_(std::move(sigma)),
        floor_(det_floor < 0.0 ? M_.default_det_floor() : det_floor) {
    metric_detail::require_coordinates(sigma_, M_.dim(), "sigma");
    for (std::size_t i = 0; i < M_.dim(); ++i) dsigma_.push_back(sigma_.differentiate(i));
  }

  const MetricField& metric() const { return M_; }
  const Expression& sigma() const { return sigma_; }
  double det_floor() const { return floor_; }

  Vec dsigma(const Vec& x) const {
    Vec d(static_cast<Eigen::Index>(M_.dim()));
    for (std::size_t i = 0; i < M_.dim(); ++i) {
      d[static_cast<Eigen::Index>(i)] = dsigma_[i].eval(metric_detail::span_of(x));
    }
    return d;
  }

  Vec operator()(const Vec& x) const {
    const Mat g = eval_metric(M_, x);
    const double det = determinant(g);
    if (!(std::fabs(det) > floor_)) {
      throw NearSingular("G^sigma requested within det_floor of Sigma");
    }
    const Vec ds = dsigma(x);
    const Mat ginv = Eigen::PartialPivLU<Mat>(g).inverse();
    const Vec grad = ginv * ds;
    const double q = ds.dot(grad);
    if (!(std::fabs(q) > 1e-12 * ds.squaredNorm() * ginv.cwiseAbs().maxCoeff())) {
      throw ZeroGradient("<grad sigma, grad sigma> vanishes off Sigma");
    }
    return grad / q;
  }

  /// Inside the det_floor band the value is the mean of G at x +- delta e,
  /// e the Euclidean unit normal of the sigma level set, with delta doubled
  /// until both ends clear the band.
  Vec extended(const Vec& x) const {
    if (std::fabs(det_at(M_, x)) > floor_) return (*this)(x);
    const Vec ds = dsigma(x);
    if (ds.norm() == 0.0) throw ZeroGradient("d sigma vanishes");
    const Vec e = ds.normalized();
    double delta = 1e-7 * M_.domain().scale();
    for (int k = 0; k < 60; ++k, delta *= 2.0) {
      const Vec a = x + delta * e;
      const Vec b = x - delta * e;
      if (std::fabs(det_at(M_, a)) > floor_ && std::fabs(det_at(M_, b)) > floor_) {
        return 0.5 * ((*this)(a) + (*this)(b));
      }
    }
    throw NearSingular("could not leave the det_floor band around Sigma");
  }

  /// One-sided limits of G at p along +-e by Richardson extrapolation over
  /// h = h0 2^-k, restricted to steps that clear the det_floor band.
  ExtensionReport extension_check(const Vec& p, double h0 = 1e-2, int levels = 11,
                                  double rel_tol = 1e-3, double floor = 1e-7) const {
    ExtensionReport rep;
    rep.point = p;
    const Vec ds = dsigma(p);
    if (ds.norm() == 0.0) return rep;
    rep.direction = ds.normalized();
    int usable = 0;
    for (double h = h0; usable < levels; h *= 0.5, ++usable) {
      if (!(std::fabs(det_at(M_, p + h * rep.direction)) > floor_) ||
          !(std::fabs(det_at(M_, p - h * rep.direction)) > floor_)) {
        break;
      }
    }
    if (usable < 3) return rep;
    const auto m = static_cast<Eigen::Index>(M_.dim());
    rep.left = Vec(m);
    rep.right = Vec(m);
    bool exists = true;
    bool agree = true;
    try {
      for (Eigen::Index i = 0; i < m; ++i) {
        for (int side : {-1, +1}) {
          const auto lim = richardson(
              [&](double h) { return (*this)(Vec(p + side * h * rep.direction))[i]; }, h0, usable, 1);
          (side < 0 ? rep.left : rep.right)[i] = lim.value;
          double& err = side < 0 ? rep.left_error : rep.right_error;
          err = std::max(err, lim.error);
          exists = exists && lim.settled(rel_tol, floor);
        }
        agree = agree && std::fabs(rep.left[i] - rep.right[i]) <=
                             std::max(rel_tol * 0.5 * std::fabs(rep.left[i] + rep.right[i]), floor);
      }
    } catch (const ZeroGradient&) {
      return rep;
    }
    rep.exists = exists;
    rep.agree = exists && agree;
    rep.pass = rep.agree;
    return rep;
  }

 private:
  MetricField M_;
  Expression sigma_;
  double floor_;
  std::vector<Expression> dsigma_;
};

inline GradSigmaField grad_sigma_field(const MetricField& M, const Expression& sigma,
                                       double det_floor = -1.0) {
  return GradSigmaField(M, sigma, det_floor);
}

struct SignatureReport {
  std::size_t samples = 0;
  std::size_t skipped = 0;  // within det_floor of Sigma
  std::size_t mismatches = 0;
  std::vector<Vec> bad_points;
  bool pass = false;
};

/// Lorentz signature (exactly one negative eigenvalue) where det < 0, no
/// negative eigenvalue where det > 0, on cell centres of an n^m grid.
inline SignatureReport signature_check(const MetricField& M, int per_axis = 10) {
  const std::size_t m = M.dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) total *= static_cast<std::size_t>(per_axis);
  SignatureReport rep;
  const double floor = M.default_det_floor();
  Vec x(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t code = k;
    for (std::size_t i = 0; i < m; ++i, code /= static_cast<std::size_t>(per_axis)) {
      const auto [lo, hi] = M.domain().bounds[i];
      x[static_cast<Eigen::Index>(i)] =
          lo + (static_cast<double>(code % static_cast<std::size_t>(per_axis)) + 0.5) * (hi - lo) / per_axis;
    }
    ++rep.samples;
    const Mat g = eval_metric(M, x);
    const double det = determinant(g);
    if (std::fabs(det) <= floor) {
      ++rep.skipped;
      continue;
    }
    const Vec lambda = Eigen::SelfAdjointEigenSolver<Mat>(g, Eigen::EigenvaluesOnly).eigenvalues();
    const auto negatives = (lambda.array() < 0.0).count();
    const bool ok = det < 0.0 ? negatives == 1 : negatives == 0;
    if (!ok) {
      ++rep.mismatches;
      rep.bad_points.push_back(x);
    }
  }
  rep.pass = rep.mismatches == 0;
  return rep;
}

struct InducedMetricReport {
  Mat induced;
  double min_eigenvalue = 0.0;
  bool positive_definite = false;
};

/// g restricted to T_p Sigma, the orthogonal complement of the gradient of
/// spow(det, alpha).
inline InducedMetricReport induced_metric_check(const MetricField& M, const Vec& p) {
  const Vec normal = metric_detail::sigma_normal(M, p);
  const auto m = static_cast<Eigen::Index>(M.dim());
  InducedMetricReport rep;
  if (normal.norm() == 0.0) return rep;
  const Mat q = Eigen::HouseholderQR<Mat>(normal.normalized()).householderQ() * Mat::Identity(m, m);
  const Mat tangent = q.rightCols(m - 1);
  rep.induced = tangent.transpose() * eval_metric(M, p) * tangent;
  rep.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Mat>(rep.induced, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  rep.positive_definite = rep.min_eigenvalue > 0.0;
  return rep;
}

/// Points of Sigma found along the last axis from a per-axis grid over the
/// remaining coordinates (cell centres); columns that do not cross Sigma are
/// skipped.
inline std::vector<Vec> sigma_samples(const MetricField& M, int per_axis) {
  const std::size_t m = M.dim();
  const Box& box = M.domain();
  std::size_t total = 1;
  for (std::size_t i = 0; i + 1 < m; ++i) total *= static_cast<std::size_t>(per_axis);
  const auto last = static_cast<Eigen::Index>(m - 1);
  const auto [lo, hi] = box.bounds.back();
  Vec direction = Vec::Zero(static_cast<Eigen::Index>(m));
  direction[last] = 0.5 * (hi - lo);
  std::vector<Vec> out;
  for (std::size_t k = 0; k < total; ++k) {
    Vec seed = box.center();
    std::size_t code = k;
    for (std::size_t i = 0; i + 1 < m; ++i, code /= static_cast<std::size_t>(per_axis)) {
      const auto [a, b] = box.bounds[i];
      seed[static_cast<Eigen::Index>(i)] =
          a + (static_cast<double>(code % static_cast<std::size_t>(per_axis)) + 0.5) * (b - a) / per_axis;
    }
    try {
      out.push_back(locate_sigma(M, seed, direction));
    } catch (const NoBracket&) {
    }
  }
  return out;
}

}  // namespace sigchange
