#pragma once

// Normal coordinates around Sigma from a radical geodesic field rho.
//
// Along the rho-line gamma through u in Sigma_0 the speed factors as
//   <gamma', gamma'>(t) = spow(t, 1/alpha) psi(u, t)^2,   psi > 0,
// and the alpha-parameter
//   s(u, t) = spow((1 + r) int_0^t |tau|^r psi(u, tau) dtau, 1/(1 + r)),
//   r = 1/(2 alpha),
// satisfies <d gamma/ds, d gamma/ds> = spow(s, 1/alpha). The chart
// (u, s) -> gamma_u(t(s)) then carries g to diag(g_ij, spow(s, 1/alpha))
// when rho is geodesic; verify_normal_chart measures exactly that.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sigchange/errors.hpp"
#include "sigchange/geodesic.hpp"
#include "sigchange/linalg.hpp"
#include "sigchange/metric.hpp"
#include "sigchange/quad_smooth.hpp"
#include "sigchange/richardson.hpp"
#include "sigchange/signed_power.hpp"

namespace sigchange {

/// s(t) = spow((1 + r) int_0^t |tau|^r psi(tau) dtau, 1/(1 + r)), r = 1/(2 alpha);
/// equal to (1 + r)^(1/(1 + r)) times the function F of quad_smooth.
template <class Psi>
double alpha_parameterize(Psi&& psi, double alpha, double t) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  if (t == 0.0) return 0.0;
  const double r = 1.0 / (2.0 * alpha);
  return spow((1.0 + r) * singular_integral(r, psi, t), 1.0 / (1.0 + r));
}

struct RadicalLineOptions {
  double tau_small = 1e-3;   // psi is bridged by a cubic inside |t| < tau
  double flow_tol = 1e-12;
  double max_step = 2e-3;    // flow-line knot spacing
};

/// One integral line of rho through p0 with its psi, s(t) and t(s).
///
/// The flow line is a cubic between knots, so the integral of |t|^r psi is
/// tabulated knot by knot with a fixed Gauss rule; next to t = 0 the
/// cubic bridge of psi carries the |t|^r singularity.
class RadicalLine {
 public:
  RadicalLine(const MetricField& M, const VectorField& rho, const Vec& p0, double epsilon,
              const RadicalLineOptions& opt = {})
      : M_(&M), flow_(rho, p0, -epsilon, epsilon, opt.flow_tol, opt.max_step, &M.domain()),
        epsilon_(epsilon), r_(1.0 / (2.0 * M.alpha())) {
    const auto& knots = flow_.knots();
    zero_ = static_cast<std::size_t>(std::find(knots.begin(), knots.end(), 0.0) - knots.begin());
    const double first = std::min(knots[zero_ + 1], -knots[zero_ - 1]);
    tau_ = std::min(opt.tau_small, 0.25 * first);
    const double nodes[4] = {-2 * tau_, -tau_, tau_, 2 * tau_};
    for (int k = 0; k < 4; ++k) {
      bridge_t_[k] = nodes[k];
      bridge_v_[k] = raw_psi(nodes[k]);
    }
    psi0_ = bridge(0.0);
    if (!(psi0_ > 0.0)) throw NonPositivePsi("psi(u, 0) is not positive");
    cumulative_.assign(knots.size(), 0.0);
    for (std::size_t k = zero_ + 1; k < knots.size(); ++k) {
      cumulative_[k] = cumulative_[k - 1] + segment(knots[k - 1], knots[k]);
    }
    for (std::size_t k = zero_; k-- > 0;) cumulative_[k] = cumulative_[k + 1] - segment(knots[k], knots[k + 1]);
    s_max_ = s_from_integral(cumulative_.back());
    s_min_ = s_from_integral(cumulative_.front());
  }

  const FlowLine& flow() const { return flow_; }
  double epsilon() const { return epsilon_; }
  double s_min() const { return s_min_; }
  double s_max() const { return s_max_; }

  /// <rho, rho> at gamma(t).
  double speed2(double t) const {
    const Vec x = flow_.position(t);
    const Vec v = flow_.field()(x);
    return inner(*M_, x, v, v);
  }

  double psi(double t) const { return std::fabs(t) < tau_ ? bridge(t) : raw_psi(t); }

  /// int_0^t |tau|^r psi(tau) dtau.
  double integral(double t) const {
    if (t == 0.0) return 0.0;
    const auto& knots = flow_.knots();
    if (t < knots.front() || t > knots.back()) {
      throw DomainError("integral requested outside the line at t = " + std::to_string(t));
    }
    if (t > 0.0) {
      auto k = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
      return cumulative_[k] + segment(knots[k], t);
    }
    const auto k = static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), t) - knots.begin());
    return cumulative_[k] - segment(t, knots[k]);
  }

  double s_of_t(double t) const { return s_from_integral(integral(t)); }

  /// ds/dt = |t|^r psi(t) / |s|^r; psi(0)^(1/(1+r)) at t = 0.
  double ds_dt(double t) const {
    if (t == 0.0) return std::pow(psi0_, 1.0 / (1.0 + r_));
    const double s = s_of_t(t);
    return std::pow(std::fabs(t), r_) * psi(t) / std::pow(std::fabs(s), r_);
  }

  /// Inverse of s_of_t by safeguarded Newton iteration.
  double t_of_s(double s) const {
    if (s == 0.0) return 0.0;
    if (s > s_max_ || s < s_min_) {
      throw DomainError("s = " + std::to_string(s) + " outside the range covered by the line");
    }
    double lo = s > 0.0 ? 0.0 : flow_.t_min();
    double hi = s > 0.0 ? flow_.t_max() : 0.0;
    double t = std::clamp(s / ds_dt(0.0), lo, hi);
    for (int iter = 0; iter < 100; ++iter) {
      const double f = s_of_t(t) - s;
      if (f == 0.0) return t;
      if (f > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      double next = t - f / ds_dt(t);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::fabs(next - t) <= 1e-15 * std::max(1e-3, std::fabs(t))) return next;
      t = next;
    }
    return t;
  }

  Vec position_at_s(double s) const { return flow_.position(t_of_s(s)); }

  /// d gamma / ds = rho / (ds/dt).
  Vec velocity_wrt_s(double s) const {
    const double t = t_of_s(s);
    return flow_.velocity(t) / ds_dt(t);
  }

 private:
  double raw_psi(double t) const {
    const double q = static_cast<double>(eps(t)) * speed2(t);
    if (!(q > 0.0)) {
      throw NonPositivePsi("eps(t) <rho, rho> is not positive at t = " + std::to_string(t));
    }
    return std::sqrt(q) * std::pow(std::fabs(t), -r_);
  }

  /// Cubic through psi at -2 tau, -tau, tau, 2 tau.
  double bridge(double t) const {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      double w = 1.0;
      for (int j = 0; j < 4; ++j) {
        if (j != i) w *= (t - bridge_t_[j]) / (bridge_t_[i] - bridge_t_[j]);
      }
      sum += w * bridge_v_[i];
    }
    return sum;
  }

  /// int_a^b |tau|^r psi for a <= b within one knot interval.
  double segment(double a, double b) const {
    if (a >= b) return 0.0;
    if (a < 0.0 && b > 0.0) return segment(a, 0.0) + segment(0.0, b);
    if (b <= tau_ && a >= -tau_) {
      auto bridged = [this](double x) { return bridge(x); };
      return singular_integral(r_, bridged, b) - singular_integral(r_, bridged, a);
    }
    if (a >= 0.0 && a < tau_) return segment(a, tau_) + segment(tau_, b);
    if (b <= 0.0 && b > -tau_) return segment(a, -tau_) + segment(-tau_, b);
    // eps(t) <rho, rho> = |t|^(2r) psi^2; the |t|^r factor needs the
    // longer rule only within a few knots of Sigma.
    auto f = [this](double x) { return std::sqrt(static_cast<double>(eps(x)) * speed2(x)); };
    if (std::min(std::fabs(a), std::fabs(b)) < 16 * tau_) {
      return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
    }
    return boost::math::quadrature::gauss<double, 5>::integrate(f, a, b);
  }

  double s_from_integral(double integral) const {
    return spow((1.0 + r_) * integral, 1.0 / (1.0 + r_));
  }

  const MetricField* M_;
  FlowLine flow_;
  double epsilon_;
  double r_;
  std::size_t zero_ = 0;
  double tau_ = 0.0;
  double bridge_t_[4] = {};
  double bridge_v_[4] = {};
  double psi0_ = 0.0;
  std::vector<double> cumulative_;  // integral from 0 to each knot
  double s_min_ = 0.0;
  double s_max_ = 0.0;
};

/// psi(u, t) at the requested t along the rho-line through p0.
inline std::vector<double> extract_psi(const MetricField& M, const VectorField& rho, const Vec& p0,
                                       const std::vector<double>& t_ladder, const RadicalLineOptions& opt = {}) {
  double extent = 0.0;
  for (double t : t_ladder) extent = std::max(extent, std::fabs(t));
  const RadicalLine line(M, rho, p0, std::max(extent, 1e-2), opt);
  std::vector<double> out;
  for (double t : t_ladder) out.push_back(line.psi(t));
  return out;
}

/// Arclength x~(t) = int_0^t sqrt|<gamma', gamma'>| along a one-sided flow
/// line, at each requested t (all of one sign).
inline std::vector<double> arclength_reparam(const MetricField& M, const FlowLine& line,
                                             const std::vector<double>& t_values) {
  int sign = 0;
  for (double t : t_values) {
    const int st = eps(t);
    if (st != 0 && sign != 0 && st != sign) throw SignError("arclength needs a one-sided parameter range");
    if (st != 0) sign = st;
  }
  auto speed2 = [&](double t) {
    const Vec x = line.position(t);
    const Vec v = line.field()(x);
    return inner(M, x, v, v);
  };
  double end = 0.0;
  for (double t : t_values) end = std::fabs(t) > std::fabs(end) ? t : end;
  int speed_sign = 0;
  for (int k = 1; k <= 64; ++k) {
    const double q = speed2(end * k / 64.0);
    const int sq = q > 0.0 ? 1 : (q < 0.0 ? -1 : 0);
    if (sq != 0 && speed_sign != 0 && sq != speed_sign) {
      throw SignError("<gamma', gamma'> changes sign along the one-sided trace");
    }
    if (sq != 0) speed_sign = sq;
  }
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  std::vector<double> out;
  for (double t : t_values) {
    if (t == 0.0) {
      out.push_back(0.0);
      continue;
    }
    const double a = std::fabs(t);
    const double v = rule.integrate([&](double y) { return std::sqrt(std::fabs(speed2(std::copysign(a * y, t)))); },
                                    0.0, 1.0, 1e-13);
    out.push_back(a * v);
  }
  return out;
}

/// Arclength along a sampled one-sided trace: the points are interpolated by
/// cubic Hermite segments and sqrt|<v, v>| is integrated on each segment.
inline std::vector<double> arclength_reparam(const MetricField& M, const GeodesicTrace& trace) {
  const std::size_t n = trace.size();
  if (n == 0) return {};
  int sign = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double q = inner(M, trace.points[k], trace.velocities[k], trace.velocities[k]);
    const int sq = q > 0.0 ? 1 : (q < 0.0 ? -1 : 0);
    if (sq != 0 && sign != 0 && sq != sign) throw SignError("<gamma', gamma'> changes sign along the trace");
    if (sq != 0) sign = sq;
  }
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  std::vector<double> out{0.0};
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = trace.params[k + 1] - trace.params[k];
    const Vec &p0 = trace.points[k], &p1 = trace.points[k + 1];
    const Vec &v0 = trace.velocities[k], &v1 = trace.velocities[k + 1];
    auto speed = [&](double s) {
      const double s2 = s * s;
      const Vec x = (2 * s2 * s - 3 * s2 + 1) * p0 + (s2 * s - 2 * s2 + s) * h * v0 + (-2 * s2 * s + 3 * s2) * p1 +
                    (s2 * s - s2) * h * v1;
      const Vec v = ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * h * v0 + (-6 * s2 + 6 * s) * p1 +
                     (3 * s2 - 2 * s) * h * v1) / h;
      return std::sqrt(std::fabs(inner(M, x, v, v)));
    };
    out.push_back(out.back() + std::fabs(h) * rule.integrate(speed, 0.0, 1.0, 1e-13));
  }
  return out;
}

struct NormalChartConfig {
  std::optional<Vec> center;  // Sigma_0 patch centre (first m - 1 coordinates)
  double half_width = 0.5;
  double epsilon = 0.6;
  std::size_t grid = 5;       // Sigma_0 samples per axis for the base chart and checks
  std::size_t t_samples = 9;
  double geodesic_tol = 1e-6; // max pregeodesic residual / |rho|^2 off Sigma
  double geodesic_band = 0.05;
  double radical_tol = 1e-6;  // sine of the angle between rho and the kernel
  RadicalLineOptions line;
};

/// Normal chart (u, s) -> x built from a radical geodesic field. Lines are
/// built on demand per u and cached.
class ChartTransform {
 public:
  ChartTransform(MetricField M, VectorField rho, bool flipped, SigmaPatch patch, FlowChart base,
                 NormalChartConfig config)
      : M_(std::make_shared<const MetricField>(std::move(M))), rho_(std::move(rho)), flipped_(flipped),
        patch_(std::move(patch)), base_(std::move(base)), config_(std::move(config)) {}

  const MetricField& metric() const { return *M_; }
  /// The oriented field actually used (rho or -rho).
  const VectorField& field() const { return rho_; }
  bool flipped() const { return flipped_; }
  double alpha() const { return M_->alpha(); }
  double r() const { return 1.0 / (2.0 * M_->alpha()); }
  const SigmaPatch& patch() const { return patch_; }
  const FlowChart& base_chart() const { return base_; }
  const NormalChartConfig& config() const { return config_; }
  std::size_t dim() const { return M_->dim(); }

  const RadicalLine& line(const Vec& u) const {
    const std::vector<double> key(u.data(), u.data() + u.size());
    std::lock_guard<std::mutex> lock(*mutex_);
    auto it = cache_->find(key);
    if (it == cache_->end()) {
      auto line = std::make_shared<const RadicalLine>(*M_, rho_, patch_.embed(u), config_.epsilon, config_.line);
      it = cache_->emplace(key, std::move(line)).first;
    }
    return *it->second;
  }

  /// x(u, s).
  Vec to_original(const Vec& y) const {
    const auto k = static_cast<Eigen::Index>(dim() - 1);
    return line(y.head(k)).position_at_s(y[k]);
  }

  /// (u, s) of x via the base chart inverse.
  Vec to_normal(const Vec& x) const {
    const auto [u, t] = base_.inverse(x);
    Vec y(static_cast<Eigen::Index>(dim()));
    y.head(u.size()) = u;
    y[u.size()] = line(u).s_of_t(t);
    return y;
  }

  /// Columns d x / d u_i (central differences, step h) and d x / d s.
  Mat jacobian(const Vec& y, double h = 1e-4) const {
    const auto k = static_cast<Eigen::Index>(dim() - 1);
    const Vec u = y.head(k);
    const double s = y[k];
    Mat d(static_cast<Eigen::Index>(dim()), k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      Vec e = Vec::Zero(k);
      e[i] = h;
      d.col(i) = (line(u + e).position_at_s(s) - line(u - e).position_at_s(s)) / (2 * h);
    }
    d.col(k) = line(u).velocity_wrt_s(s);
    return d;
  }

  /// g~ = D^T g D at new coordinates y = (u, s).
  Mat pullback_metric(const Vec& y, double h = 1e-4) const {
    const Mat d = jacobian(y, h);
    return d.transpose() * eval_metric(*M_, to_original(y)) * d;
  }

  /// Common s-range [lo, hi] covered by the lines at the given u samples.
  std::pair<double, double> s_range(const std::vector<Vec>& us) const {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const Vec& u : us) {
      lo = std::max(lo, line(u).s_min());
      hi = std::min(hi, line(u).s_max());
    }
    return {lo, hi};
  }

  /// psi, s and ds/dt on the base chart grid: [u index][t index].
  std::vector<std::vector<double>> psi_samples() const { return on_grid([](const RadicalLine& l, double t) { return l.psi(t); }); }
  std::vector<std::vector<double>> s_samples() const { return on_grid([](const RadicalLine& l, double t) { return l.s_of_t(t); }); }
  std::vector<std::vector<double>> ds_dt_samples() const { return on_grid([](const RadicalLine& l, double t) { return l.ds_dt(t); }); }

 private:
  template <class F>
  std::vector<std::vector<double>> on_grid(F&& f) const {
    std::vector<std::vector<double>> out;
    for (const Vec& u : base_.sigma_grid()) {
      const RadicalLine& l = line(u);
      std::vector<double> row;
      for (double t : base_.t_grid()) row.push_back(f(l, t));
      out.push_back(std::move(row));
    }
    return out;
  }

  std::shared_ptr<const MetricField> M_;
  VectorField rho_;
  bool flipped_;
  SigmaPatch patch_;
  FlowChart base_;
  NormalChartConfig config_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::map<std::vector<double>, std::shared_ptr<const RadicalLine>>> cache_ =
      std::make_shared<std::map<std::vector<double>, std::shared_ptr<const RadicalLine>>>();
};

namespace normal_detail {

/// n points per axis on the cube center +- half_width.
inline std::vector<Vec> cube_grid(const Vec& center, double half_width, std::size_t n) {
  n = std::max<std::size_t>(n, 2);
  const auto k = center.size();
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < k; ++i) total *= n;
  std::vector<Vec> out;
  for (std::size_t c = 0; c < total; ++c) {
    Vec u(k);
    std::size_t code = c;
    for (Eigen::Index i = 0; i < k; ++i, code /= n) {
      u[i] = center[i] - half_width + 2.0 * half_width * static_cast<double>(code % n) / static_cast<double>(n - 1);
    }
    out.push_back(u);
  }
  return out;
}

inline Vec patch_center(const MetricField& M, const NormalChartConfig& config) {
  if (config.center) return *config.center;
  const Vec c = M.domain().center();
  return c.head(c.size() - 1);
}

/// phi(t) = spow(<rho, rho>(gamma(t)), alpha) must have equal, nonzero
/// one-sided slopes at t = 0.
inline void check_simple(const MetricField& M, const FlowLine& line, const Vec& p) {
  auto phi = [&](double t) {
    const Vec x = line.position(t);
    const Vec v = line.field()(x);
    return spow(inner(M, x, v, v), M.alpha());
  };
  const double phi0 = phi(0.0);
  const double h0 = std::min(1e-2, 0.1 * line.t_max());
  auto slope = [&](int side) {
    return richardson([&](double h) { return (phi(side * h) - phi0) / (side * h); }, h0, 8, 1);
  };
  const auto left = slope(-1);
  const auto right = slope(+1);
  const bool ok = left.settled(1e-3, 1e-9) && right.settled(1e-3, 1e-9) &&
                  std::fabs(left.value - right.value) <= 1e-3 * std::fabs(left.value + right.value) &&
                  std::fabs(left.value + right.value) > 1e-8;
  if (!ok) {
    std::ostringstream os;
    os << "spow(<rho, rho>, alpha) is not a simple equation along the rho-line through "
       << geodesic_detail::describe(p) << " (one-sided slopes " << left.value << ", " << right.value << ")";
    throw NotSimpleEquation(os.str());
  }
}

}  // namespace normal_detail

/// Normal chart for the radical field rho over a patch of Sigma.
inline ChartTransform build_normal_chart(const MetricField& M, const VectorField& rho,
                                         const NormalChartConfig& config = {}) {
  if (rho.dim() != M.dim()) throw BadParams("field dimension does not match the metric");
  const Vec center = normal_detail::patch_center(M, config);
  SigmaPatch patch = SigmaPatch::located(M, center, config.half_width);

  FlowChartOptions fopt;
  fopt.grid = config.grid;
  fopt.t_samples = config.t_samples;
  fopt.tol = config.line.flow_tol;

  // rho must span the kernel of g on Sigma_0.
  for (const Vec& u : normal_detail::cube_grid(patch.center, patch.half_width, config.grid)) {
    const Vec p = patch.embed(u);
    const Vec v = rho(p);
    const Vec k = radical_direction(M, p).direction;
    const double sine = std::sqrt(std::max(0.0, 1.0 - std::pow(v.dot(k) / v.norm(), 2)));
    if (!(v.norm() > 0.0) || sine > config.radical_tol) {
      throw NotRadicalField("field is not radical at " + geodesic_detail::describe(p));
    }
  }

  // Orientation: <rho, rho> must be positive for t > 0.
  const FlowLine probe(rho, patch.embed(center), -config.epsilon, config.epsilon, config.line.flow_tol, 1e-3,
                       &M.domain());
  const double t_probe = 0.25 * config.epsilon;
  const Vec xp = probe.position(t_probe);
  const bool flip = inner(M, xp, rho(xp), rho(xp)) < 0.0;
  const VectorField oriented = flip ? rho.scaled(Expression::constant(-1.0, rho.component(0).variable_list())) : rho;
  FlowChart base(oriented, patch, config.epsilon, fopt, &M.domain());

  // Integral lines must be geodesic lines off Sigma, and simple at Sigma.
  for (const Vec& u : base.sigma_grid()) {
    const Vec p = patch.embed(u);
    const FlowLine line(oriented, p, -config.epsilon, config.epsilon, config.line.flow_tol, 1e-3, &M.domain());
    normal_detail::check_simple(M, line, p);
    for (int side : {-1, +1}) {
      const double a = side * config.geodesic_band * config.epsilon;
      const auto trace = integrate_flow(oriented, line.position(a), a, side * config.epsilon,
                                        FlowOptions{config.line.flow_tol, 41}, &M.domain());
      const auto res = pregeodesic_residual(M, trace);
      for (std::size_t k = 0; k < res.size(); ++k) {
        const double scale = std::max(1.0, trace.velocities[k].squaredNorm());
        if (res[k] > config.geodesic_tol * scale) {
          std::ostringstream os;
          os << "integral line of rho is not a geodesic line: pregeodesic residual " << res[k] << " at "
             << geodesic_detail::describe(trace.points[k]);
          throw NotGeodesicField(os.str());
        }
      }
    }
  }
  return ChartTransform(M, oriented, flip, patch, std::move(base), config);
}

struct VerifyOptions {
  std::size_t grid = 7;        // samples per axis in u and per side in s
  double tol = 1e-4;
  double band_floor = 0.05;
  double s_max = 0.5;
  double fd_step = 1e-4;
  std::optional<double> alpha; // exponent for the expected g~_mm; default the metric's
};

struct NormalChartReport {
  std::vector<Vec> grid;        // new coordinates evaluated off Sigma
  double gmm_error = 0.0;
  double gim_error = 0.0;       // includes the one-sided limits on Sigma
  double gim_sigma_error = 0.0; // the one-sided limits alone
  bool gij_posdef = false;
  double gij_min_eigenvalue = 0.0;
  double band = 0.0;
  double alpha = 0.0;
  bool pass = false;
  std::string details;
};

/// Checks g~_mm = spow(s, 1/alpha), g~_im = 0 (off the band and, by
/// quadratic extrapolation from both sides, on Sigma) and g~_ij > 0 on Sigma.
inline NormalChartReport verify_normal_chart(const ChartTransform& ct, const VerifyOptions& opt = {}) {
  NormalChartReport rep;
  const std::size_t m = ct.dim();
  const auto k = static_cast<Eigen::Index>(m - 1);
  rep.alpha = opt.alpha.value_or(ct.alpha());
  rep.band = opt.band_floor * ct.metric().domain().scale();

  const std::vector<Vec> us =
      normal_detail::cube_grid(ct.patch().center, 0.8 * ct.patch().half_width, opt.grid);
  const auto [lo, hi] = ct.s_range(us);
  const double s_hi = std::min(opt.s_max, 0.95 * hi);
  const double s_lo = std::max(-opt.s_max, 0.95 * lo);
  if (!(s_hi > 3 * rep.band) || !(s_lo < -3 * rep.band)) {
    rep.details = "s-range covered by the lines is too short for verification";
    return rep;
  }
  const std::size_t ns = std::max<std::size_t>(opt.grid, 2);
  rep.gij_posdef = true;
  rep.gij_min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const Vec& u : us) {
    for (int side : {-1, +1}) {
      const double end = side > 0 ? s_hi : -s_lo;
      for (std::size_t j = 0; j < ns; ++j) {
        const double s = side * (rep.band + (end - rep.band) * static_cast<double>(j) / static_cast<double>(ns - 1));
        Vec y(static_cast<Eigen::Index>(m));
        y << u, s;
        const Mat g = ct.pullback_metric(y, opt.fd_step);
        rep.grid.push_back(y);
        rep.gmm_error = std::max(rep.gmm_error, std::fabs(g(k, k) - spow(s, 1.0 / rep.alpha)));
        for (Eigen::Index i = 0; i < k; ++i) rep.gim_error = std::max(rep.gim_error, std::fabs(g(i, k)));
      }
      // g~_im on Sigma: quadratic through s = side * {b, 2b, 3b}.
      std::vector<Vec> vals;
      for (int q = 1; q <= 3; ++q) {
        Vec y(static_cast<Eigen::Index>(m));
        y << u, side * q * rep.band;
        vals.push_back(ct.pullback_metric(y, opt.fd_step).col(k).head(k));
      }
      const Vec limit = 3.0 * vals[0] - 3.0 * vals[1] + vals[2];
      rep.gim_sigma_error = std::max(rep.gim_sigma_error, limit.cwiseAbs().maxCoeff());
    }
    // g~_ij on Sigma: the metric on the tangent vectors of Sigma_0.
    const Mat t = ct.patch().tangents(u);
    const Mat gij = t.transpose() * eval_metric(ct.metric(), ct.patch().embed(u)) * t;
    const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(gij, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    rep.gij_min_eigenvalue = std::min(rep.gij_min_eigenvalue, min_eig);
    rep.gij_posdef = rep.gij_posdef && min_eig > 0.0;
  }
  rep.gim_error = std::max(rep.gim_error, rep.gim_sigma_error);
  rep.pass = rep.gmm_error <= opt.tol && rep.gim_error <= opt.tol && rep.gij_posdef;
  std::ostringstream os;
  os << "gmm_error " << rep.gmm_error << ", gim_error " << rep.gim_error << ", min eig(g_ij) on Sigma "
     << rep.gij_min_eigenvalue;
  rep.details = os.str();
  return rep;
}

struct SynchronizationReport {
  std::vector<Vec> points;     // Sigma samples
  std::vector<double> deviations;  // max |sigma(flow_t(p)) - t| per sample
  double max_deviation = 0.0;
  bool extension_ok = false;
  bool pass = false;
  std::string details;
};

/// Flows the extended G^sigma from each Sigma sample over [t_min, t_max]
/// and records |sigma(flow_t(p)) - t|.
inline SynchronizationReport synchronization_check(const MetricField& M, const Expression& sigma,
                                                   const std::vector<Vec>& points, double t_min, double t_max,
                                                   double tol = 1e-6, std::size_t samples = 21) {
  SynchronizationReport rep;
  rep.points = points;
  const GradSigmaField G(M, sigma);
  rep.extension_ok = true;
  for (const Vec& p : points) {
    if (!G.extension_check(p).pass) {
      rep.extension_ok = false;
      rep.details = "G^sigma does not extend across Sigma at " + geodesic_detail::describe(p);
      return rep;
    }
  }
  auto field = [&](const Vec& x) { return G.extended(x); };
  for (const Vec& p : points) {
    double worst = 0.0;
    for (double end : {t_min, t_max}) {
      if (end == 0.0) continue;
      const auto trace = integrate_field(field, p, 0.0, end, FlowOptions{1e-12, samples}, &M.domain());
      for (std::size_t k = 0; k < trace.size(); ++k) {
        const double value = sigma.eval(std::span<const double>(trace.points[k].data(), M.dim()));
        worst = std::max(worst, std::fabs(value - trace.params[k]));
      }
    }
    rep.deviations.push_back(worst);
    rep.max_deviation = std::max(rep.max_deviation, worst);
  }
  rep.pass = rep.max_deviation <= tol;
  std::ostringstream os;
  os << "max |sigma(flow_t(p)) - t| = " << rep.max_deviation;
  rep.details = os.str();
  return rep;
}

}  // namespace sigchange
