#pragma once

// Flows of vector fields, flow-box charts over a patch of Sigma, geodesics
// off Sigma and the pregeodesic residual (the part of the geodesic equation
// orthogonal to the velocity, which vanishes iff the image is a geodesic
// line under some parameterization).

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "sigchange/errors.hpp"
#include "sigchange/linalg.hpp"
#include "sigchange/metric.hpp"

namespace sigchange {

enum class TraceStatus { Completed, HaltedNearSigma };

struct GeodesicTrace {
  std::vector<double> params;
  std::vector<Vec> points;
  std::vector<Vec> velocities;
  /// Second derivatives when the integrator knows them; empty otherwise.
  std::vector<Vec> accelerations;
  /// <v, v>; empty when no metric was attached.
  std::vector<double> speed2;
  /// Pregeodesic residual norms; nullopt within det_floor of Sigma.
  std::vector<std::optional<double>> residuals;
  TraceStatus status = TraceStatus::Completed;
  std::optional<double> halt_param;
  std::optional<Vec> halt_point;

  std::size_t size() const { return params.size(); }
};

struct FlowOptions {
  double tol = 1e-12;
  std::size_t samples = 101;
};

namespace geodesic_detail {

using State = std::vector<double>;

inline std::string describe(const Vec& x) {
  std::ostringstream os;
  os << std::setprecision(17) << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

inline std::vector<double> uniform(double t0, double t1, std::size_t n) {
  if (n < 2) throw BadParams("at least two samples are required");
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = k + 1 == n ? t1 : t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return t;
}

/// Dormand-Prince 5(4) with dense output, observed at `times` (monotone,
/// either direction). Integrator breakdown becomes StepFailure; library
/// errors propagate unchanged.
template <class Rhs, class Observer>
void integrate_dense(Rhs&& rhs, State state, const std::vector<double>& times, double tol,
                     Observer&& observer) {
  namespace odeint = boost::numeric::odeint;
  if (times.size() < 2) {
    observer(state, times.front());
    return;
  }
  auto stepper = odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State>());
  const double dt = (times.back() - times.front()) / 64.0;
  auto guarded = [&](const State& s, double t) {
    for (double v : s) {
      if (!std::isfinite(v)) throw StepFailure("solution became non-finite at t = " + std::to_string(t));
    }
    observer(s, t);
  };
  try {
    odeint::integrate_times(stepper, rhs, state, times.begin(), times.end(), dt, guarded);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw StepFailure(std::string("integrator failed: ") + e.what());
  }
}

inline Vec to_vec(const State& s, std::size_t offset, std::size_t n) {
  Vec v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = s[offset + i];
  return v;
}

inline void check_domain(const Box* domain, const Vec& x, double t) {
  if (domain != nullptr && !domain->contains(x, 1e-9 * domain->scale())) {
    throw DomainExit("trajectory left the domain at t = " + std::to_string(t) + ", x = " + describe(x));
  }
}

}  // namespace geodesic_detail

/// Solution of x' = X(x), x(t0) = p0, sampled at `samples` uniform params of
/// [t0, t1]. Accelerations are DX . X.
inline GeodesicTrace integrate_flow(const VectorField& X, const Vec& p0, double t0, double t1,
                                    const FlowOptions& opt = {}, const Box* domain = nullptr) {
  using geodesic_detail::State;
  const std::size_t m = X.dim();
  if (static_cast<std::size_t>(p0.size()) != m) throw BadParams("start point has wrong dimension");
  geodesic_detail::check_domain(domain, p0, t0);
  GeodesicTrace trace;
  auto rhs = [&](const State& s, State& ds, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    geodesic_detail::check_domain(domain, x, t);
    const Vec v = X(x);
    ds.assign(v.data(), v.data() + m);
  };
  auto observer = [&](const State& s, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    geodesic_detail::check_domain(domain, x, t);
    const Vec v = X(x);
    trace.params.push_back(t);
    trace.points.push_back(x);
    trace.velocities.push_back(v);
    trace.accelerations.push_back(X.jacobian(x) * v);
  };
  geodesic_detail::integrate_dense(rhs, State(p0.data(), p0.data() + m),
                                   geodesic_detail::uniform(t0, t1, opt.samples), opt.tol, observer);
  return trace;
}

/// Flow of an arbitrary field callable Vec -> Vec (no accelerations).
template <class Field>
GeodesicTrace integrate_field(Field&& field, const Vec& p0, double t0, double t1,
                              const FlowOptions& opt = {}, const Box* domain = nullptr) {
  using geodesic_detail::State;
  const auto m = static_cast<std::size_t>(p0.size());
  geodesic_detail::check_domain(domain, p0, t0);
  GeodesicTrace trace;
  auto rhs = [&](const State& s, State& ds, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    geodesic_detail::check_domain(domain, x, t);
    const Vec v = field(x);
    ds.assign(v.data(), v.data() + m);
  };
  auto observer = [&](const State& s, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    trace.params.push_back(t);
    trace.points.push_back(x);
    trace.velocities.push_back(field(x));
  };
  geodesic_detail::integrate_dense(rhs, State(p0.data(), p0.data() + m),
                                   geodesic_detail::uniform(t0, t1, opt.samples), opt.tol, observer);
  return trace;
}

/// The flow line of X through p0 over [t_min, t_max] (t_min <= 0 <= t_max),
/// stored on a uniform grid containing t = 0 and evaluated by cubic Hermite
/// interpolation; velocities are X at the interpolated point.
class FlowLine {
 public:
  FlowLine(const VectorField& X, const Vec& p0, double t_min, double t_max, double tol = 1e-12,
           double max_step = 1e-3, const Box* domain = nullptr)
      : X_(X), t_min_(t_min), t_max_(t_max) {
    if (!(t_min <= 0.0 && 0.0 <= t_max && t_min < t_max)) {
      throw BadParams("flow line interval must contain 0");
    }
    const std::size_t m = X.dim();
    auto side = [&](double end) {
      std::vector<double> times{0.0};
      if (end != 0.0) {
        const auto n = static_cast<std::size_t>(std::ceil(std::fabs(end) / max_step));
        times = geodesic_detail::uniform(0.0, end, std::max<std::size_t>(n, 2) + 1);
      }
      std::vector<Vec> pts;
      auto rhs = [&](const geodesic_detail::State& s, geodesic_detail::State& ds, double t) {
        const Vec x = geodesic_detail::to_vec(s, 0, m);
        geodesic_detail::check_domain(domain, x, t);
        const Vec v = X(x);
        ds.assign(v.data(), v.data() + m);
      };
      auto obs = [&](const geodesic_detail::State& s, double) { pts.push_back(geodesic_detail::to_vec(s, 0, m)); };
      geodesic_detail::integrate_dense(rhs, geodesic_detail::State(p0.data(), p0.data() + m), times, tol, obs);
      return std::make_pair(times, pts);
    };
    auto [tn, pn] = side(t_min);
    auto [tp, pp] = side(t_max);
    for (std::size_t k = tn.size(); k-- > 1;) {
      times_.push_back(tn[k]);
      points_.push_back(pn[k]);
    }
    for (std::size_t k = 0; k < tp.size(); ++k) {
      times_.push_back(tp[k]);
      points_.push_back(pp[k]);
    }
    for (const Vec& x : points_) velocities_.push_back(X(x));
  }

  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  const VectorField& field() const { return X_; }
  /// Interpolation knots; the interpolant is a cubic between neighbours.
  const std::vector<double>& knots() const { return times_; }

  Vec position(double t) const {
    if (t < t_min_ || t > t_max_) {
      throw DomainError("flow line evaluated outside its interval at t = " + std::to_string(t));
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    if (k + 1 >= times_.size()) k = times_.size() - 2;
    const double h = times_[k + 1] - times_[k];
    const double s = (t - times_[k]) / h;
    if (s == 0.0) return points_[k];
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * points_[k] + (s3 - 2 * s2 + s) * h * velocities_[k] +
           (-2 * s3 + 3 * s2) * points_[k + 1] + (s3 - s2) * h * velocities_[k + 1];
  }

  Vec velocity(double t) const { return X_(position(t)); }

 private:
  VectorField X_;
  double t_min_;
  double t_max_;
  std::vector<double> times_;
  std::vector<Vec> points_;
  std::vector<Vec> velocities_;
};

/// A parameterized patch Sigma_0 of the singular hypersurface,
/// u in the cube center +- half_width (dimension m - 1).
struct SigmaPatch {
  std::function<Vec(const Vec&)> embed;
  Vec center;
  double half_width = 0.5;

  std::size_t dim() const { return static_cast<std::size_t>(center.size()); }

  /// {x_m = level} with u = (x_1, ..., x_{m-1}).
  static SigmaPatch coordinate_plane(std::size_t m, double level, const Vec& center, double half_width) {
    SigmaPatch p;
    p.center = center;
    p.half_width = half_width;
    p.embed = [m, level](const Vec& u) {
      Vec x(static_cast<Eigen::Index>(m));
      x.head(static_cast<Eigen::Index>(m - 1)) = u;
      x[static_cast<Eigen::Index>(m - 1)] = level;
      return x;
    };
    return p;
  }

  /// Sigma located along the last axis above u = (x_1, ..., x_{m-1}), so the
  /// first m - 1 coordinates of embed(u) equal u.
  static SigmaPatch located(const MetricField& M, const Vec& center, double half_width) {
    SigmaPatch p;
    p.center = center;
    p.half_width = half_width;
    const auto m = static_cast<Eigen::Index>(M.dim());
    const auto [lo, hi] = M.domain().bounds.back();
    p.embed = [M, m, lo = lo, hi = hi](const Vec& u) {
      Vec seed(m);
      seed.head(m - 1) = u;
      seed[m - 1] = 0.5 * (lo + hi);
      Vec dir = Vec::Zero(m);
      dir[m - 1] = 0.5 * (hi - lo);
      return locate_sigma(M, seed, dir);
    };
    return p;
  }

  /// Tangent vectors d embed / d u_i by central differences.
  Mat tangents(const Vec& u, double h = 1e-6) const {
    const Vec x0 = embed(u);
    Mat t(x0.size(), center.size());
    for (Eigen::Index i = 0; i < center.size(); ++i) {
      Vec e = Vec::Zero(center.size());
      e[i] = h;
      t.col(i) = (embed(u + e) - embed(u - e)) / (2 * h);
    }
    return t;
  }
};

struct FlowChartOptions {
  double tol = 1e-12;
  std::size_t grid = 9;        // Sigma_0 samples per axis
  std::size_t t_samples = 9;   // transversal samples (odd keeps t = 0)
  double transverse_tol = 1e-6;
};

/// Psi(u, t) = flow_t(embed(u)) sampled on grid(u) x t_grid, with an inverse
/// x -> (u, t) by nearest sample and Newton refinement.
class FlowChart {
 public:
  FlowChart(const VectorField& X, SigmaPatch patch, double epsilon, const FlowChartOptions& opt = {},
            const Box* domain = nullptr)
      : X_(X), patch_(std::move(patch)), epsilon_(epsilon), opt_(opt), domain_(domain ? std::optional<Box>(*domain) : std::nullopt) {
    if (!(epsilon > 0.0)) throw BadParams("epsilon must be positive");
    const std::size_t k = patch_.dim();
    const std::size_t n = opt.grid;
    if (n < 2 || opt.t_samples < 2) throw BadParams("flow chart grid needs at least two samples per axis");
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) total *= n;
    for (std::size_t c = 0; c < total; ++c) {
      Vec u(static_cast<Eigen::Index>(k));
      std::size_t code = c;
      for (std::size_t i = 0; i < k; ++i, code /= n) {
        u[static_cast<Eigen::Index>(i)] = patch_.center[static_cast<Eigen::Index>(i)] - patch_.half_width +
                                          2.0 * patch_.half_width * static_cast<double>(code % n) / static_cast<double>(n - 1);
      }
      sigma_grid_.push_back(u);
    }
    t_grid_ = geodesic_detail::uniform(-epsilon, epsilon, opt.t_samples);
    if (opt.t_samples % 2 == 1) t_grid_[opt.t_samples / 2] = 0.0;

    for (const Vec& u : sigma_grid_) check_transverse(u);

    for (const Vec& u : sigma_grid_) {
      const FlowLine line(X_, patch_.embed(u), -epsilon, epsilon, opt.tol, 1e-3, domain_ ? &*domain_ : nullptr);
      std::vector<Vec> row;
      for (double t : t_grid_) row.push_back(line.position(t));
      map_.push_back(std::move(row));
    }
    for (std::size_t iu = 0; iu < sigma_grid_.size(); ++iu) {
      std::vector<Mat> row;
      for (std::size_t it = 0; it < t_grid_.size(); ++it) row.push_back(jacobian(sigma_grid_[iu], t_grid_[it]));
      jacobians_.push_back(std::move(row));
    }
    check_fold();
    check_injective();
  }

  const std::vector<Vec>& sigma_grid() const { return sigma_grid_; }
  const std::vector<double>& t_grid() const { return t_grid_; }
  const std::vector<std::vector<Vec>>& map() const { return map_; }
  const std::vector<std::vector<Mat>>& jacobians() const { return jacobians_; }
  const SigmaPatch& patch() const { return patch_; }
  double epsilon() const { return epsilon_; }

  /// Psi(u, t) for arbitrary u in the patch and |t| <= epsilon.
  Vec psi(const Vec& u, double t) const {
    const Vec p = patch_.embed(u);
    if (t == 0.0) return p;
    const auto trace = integrate_flow(X_, p, 0.0, t, FlowOptions{opt_.tol, 2}, domain_ ? &*domain_ : nullptr);
    return trace.points.back();
  }

  /// d Psi / d(u, t): tangent columns by central differences, X in the last.
  Mat jacobian(const Vec& u, double t, double h = 1e-5) const {
    const auto k = static_cast<Eigen::Index>(patch_.dim());
    const Vec x = psi(u, t);
    Mat j(x.size(), k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      Vec e = Vec::Zero(k);
      e[i] = h;
      j.col(i) = (psi(u + e, t) - psi(u - e, t)) / (2 * h);
    }
    j.col(k) = X_(x);
    return j;
  }

  /// (u, t) with Psi(u, t) = x.
  std::pair<Vec, double> inverse(const Vec& x, double tol = 1e-13, int max_iter = 30) const {
    std::size_t best_u = 0;
    std::size_t best_t = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t iu = 0; iu < map_.size(); ++iu) {
      for (std::size_t it = 0; it < t_grid_.size(); ++it) {
        const double d = (map_[iu][it] - x).norm();
        if (d < best) {
          best = d;
          best_u = iu;
          best_t = it;
        }
      }
    }
    const auto k = static_cast<Eigen::Index>(patch_.dim());
    Vec z(k + 1);
    z.head(k) = sigma_grid_[best_u];
    z[k] = t_grid_[best_t];
    for (int iter = 0; iter < max_iter; ++iter) {
      const Vec r = psi(z.head(k), z[k]) - x;
      if (r.norm() <= tol * std::max(1.0, x.norm())) break;
      const Vec step = Eigen::PartialPivLU<Mat>(jacobian(z.head(k), z[k])).solve(r);
      z -= step;
      if (std::fabs(z[k]) > epsilon_) z[k] = std::copysign(epsilon_, z[k]);
      if (step.norm() <= 1e-15) break;
    }
    return {z.head(k), z[k]};
  }

 private:
  void check_transverse(const Vec& u) const {
    const Mat tangents = patch_.tangents(u);
    const Vec x = patch_.embed(u);
    Mat frame(x.size(), tangents.cols() + 1);
    frame << tangents, X_(x);
    double norms = 1.0;
    for (Eigen::Index i = 0; i < frame.cols(); ++i) norms *= frame.col(i).norm();
    const double d = norms > 0.0 ? std::fabs(determinant(frame)) / norms : 0.0;
    if (!(d > opt_.transverse_tol)) {
      throw NotTransverse("field is tangent to Sigma at " + geodesic_detail::describe(x));
    }
  }

  void check_fold() const {
    int sign = 0;
    for (const auto& row : jacobians_) {
      for (const Mat& j : row) {
        const double d = determinant(j);
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) {
          throw FoldDetected("flow chart Jacobian changes sign; reduce epsilon");
        }
        sign = s;
      }
    }
  }

  void check_injective() const {
    std::vector<const Vec*> all;
    for (const auto& row : map_) {
      for (const Vec& x : row) all.push_back(&x);
    }
    double scale = 1.0;
    for (const Vec* x : all) scale = std::max(scale, x->cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        if ((*all[i] - *all[j]).norm() <= 1e-9 * scale) {
          throw FoldDetected("flow chart maps two grid samples to the same point");
        }
      }
    }
  }

  VectorField X_;
  SigmaPatch patch_;
  double epsilon_;
  FlowChartOptions opt_;
  std::optional<Box> domain_;
  std::vector<Vec> sigma_grid_;
  std::vector<double> t_grid_;
  std::vector<std::vector<Vec>> map_;
  std::vector<std::vector<Mat>> jacobians_;
};

inline FlowChart flow_chart(const VectorField& X, const SigmaPatch& patch, double epsilon,
                            const FlowChartOptions& opt = {}, const Box* domain = nullptr) {
  return FlowChart(X, patch, epsilon, opt, domain);
}

struct GeodesicOptions {
  double tol = 1e-10;
  std::size_t samples = 101;
  double det_floor = -1.0;  // negative: the metric's default
};

namespace geodesic_detail {

struct Halt {
  double t;
  Vec x;
};

}  // namespace geodesic_detail

/// Pregeodesic residual norm at one sample: |r - (r.v / v.v) v| with
/// r = a + Gamma(v, v). A negative det_floor selects the metric's default.
inline double pregeodesic_residual_at(const MetricField& M, const Vec& x, const Vec& v, const Vec& a,
                                      double det_floor = -1.0) {
  const Vec r = a + christoffel(M, x, det_floor).contract(v, v);
  const double vv = v.squaredNorm();
  if (vv == 0.0) return r.norm();
  return (r - (r.dot(v) / vv) * v).norm();
}

namespace geodesic_detail {

/// Second derivatives of the points by finite differences of the velocities
/// (second order, non-uniform spacing allowed).
inline std::vector<Vec> fd_accelerations(const GeodesicTrace& tr) {
  const std::size_t n = tr.size();
  std::vector<Vec> acc(n);
  if (n < 3) throw BadParams("finite-difference accelerations need at least three samples");
  const auto& t = tr.params;
  const auto& v = tr.velocities;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = k == 0 ? 1 : (k == n - 1 ? n - 2 : k);
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    // Derivative of the quadratic through (i-1, i, i+1) evaluated at t[k].
    const double x = t[k] - t[i];
    const Vec d01 = (v[i] - v[i - 1]) / h0;
    const Vec d12 = (v[i + 1] - v[i]) / h1;
    const Vec second = (d12 - d01) / (h0 + h1);  // half the second derivative
    acc[k] = (h0 * d12 + h1 * d01) / (h0 + h1) + 2.0 * x * second;
  }
  return acc;
}

}  // namespace geodesic_detail

/// Per-sample pregeodesic residual norms. Samples within det_floor of Sigma
/// raise NearSingular.
inline std::vector<double> pregeodesic_residual(const MetricField& M, const GeodesicTrace& trace,
                                                double det_floor = -1.0) {
  const auto acc = trace.accelerations.size() == trace.size() ? trace.accelerations
                                                              : geodesic_detail::fd_accelerations(trace);
  std::vector<double> out;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out.push_back(pregeodesic_residual_at(M, trace.points[k], trace.velocities[k], acc[k], det_floor));
  }
  return out;
}

/// Fills speed2 and the residual column; guarded samples get no residual.
inline void annotate(const MetricField& M, GeodesicTrace& trace, double det_floor = -1.0) {
  if (det_floor < 0.0) det_floor = M.default_det_floor();
  const auto acc = trace.accelerations.size() == trace.size() || trace.size() < 3
                       ? trace.accelerations
                       : geodesic_detail::fd_accelerations(trace);
  trace.speed2.clear();
  trace.residuals.clear();
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const Vec& x = trace.points[k];
    trace.speed2.push_back(inner(M, x, trace.velocities[k], trace.velocities[k]));
    if (acc.size() == trace.size() && std::fabs(det_at(M, x)) > det_floor) {
      trace.residuals.push_back(pregeodesic_residual_at(M, x, trace.velocities[k], acc[k], det_floor));
    } else {
      trace.residuals.push_back(std::nullopt);
    }
  }
}

/// x'' = -Gamma(x)(x', x') from (x0, v0) over [t0, t1]. Integration halts
/// cleanly (status HaltedNearSigma) once |det g| <= det_floor.
inline GeodesicTrace integrate_geodesic(const MetricField& M, const Vec& x0, const Vec& v0, double t0,
                                        double t1, const GeodesicOptions& opt = {}) {
  using geodesic_detail::State;
  const std::size_t m = M.dim();
  if (static_cast<std::size_t>(x0.size()) != m || static_cast<std::size_t>(v0.size()) != m) {
    throw BadParams("start point and velocity must have the metric's dimension");
  }
  const double floor = opt.det_floor < 0.0 ? M.default_det_floor() : opt.det_floor;
  const Box& box = M.domain();
  GeodesicTrace trace;
  geodesic_detail::check_domain(&box, x0, t0);
  if (!(std::fabs(det_at(M, x0)) > floor)) {
    trace.status = TraceStatus::HaltedNearSigma;
    trace.halt_param = t0;
    trace.halt_point = x0;
    return trace;
  }
  auto accel = [&](const Vec& x, const Vec& v, double t) -> Vec {
    geodesic_detail::check_domain(&box, x, t);
    if (!(std::fabs(det_at(M, x)) > floor)) throw geodesic_detail::Halt{t, x};
    return -christoffel(M, x, floor).contract(v, v);
  };
  auto rhs = [&](const State& s, State& ds, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    const Vec v = geodesic_detail::to_vec(s, m, m);
    const Vec a = accel(x, v, t);
    ds.resize(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
      ds[i] = v[static_cast<Eigen::Index>(i)];
      ds[m + i] = a[static_cast<Eigen::Index>(i)];
    }
  };
  auto observer = [&](const State& s, double t) {
    const Vec x = geodesic_detail::to_vec(s, 0, m);
    const Vec v = geodesic_detail::to_vec(s, m, m);
    const Vec a = accel(x, v, t);
    trace.params.push_back(t);
    trace.points.push_back(x);
    trace.velocities.push_back(v);
    trace.accelerations.push_back(a);
  };
  State start(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    start[i] = x0[static_cast<Eigen::Index>(i)];
    start[m + i] = v0[static_cast<Eigen::Index>(i)];
  }
  try {
    // A tenth of the requested tolerance per step keeps the drift of <v, v>
    // under 10 tol per unit parameter.
    geodesic_detail::integrate_dense(rhs, start, geodesic_detail::uniform(t0, t1, opt.samples),
                                     0.1 * opt.tol, observer);
  } catch (const geodesic_detail::Halt& h) {
    trace.status = TraceStatus::HaltedNearSigma;
    trace.halt_param = h.t;
    trace.halt_point = h.x;
  }
  annotate(M, trace, floor);
  return trace;
}

/// CSV with columns t, x1..xm, v1..vm, speed2, residual (17 significant
/// digits; empty residual cells within the det_floor band).
inline void write_trace_csv(std::ostream& os, const GeodesicTrace& trace) {
  const std::size_t m = trace.points.empty() ? 0 : static_cast<std::size_t>(trace.points.front().size());
  os << "t";
  for (std::size_t i = 1; i <= m; ++i) os << ",x" << i;
  for (std::size_t i = 1; i <= m; ++i) os << ",v" << i;
  os << ",speed2,residual\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < trace.size(); ++k) {
    num(trace.params[k]);
    for (std::size_t i = 0; i < m; ++i) os << ',', num(trace.points[k][static_cast<Eigen::Index>(i)]);
    for (std::size_t i = 0; i < m; ++i) os << ',', num(trace.velocities[k][static_cast<Eigen::Index>(i)]);
    os << ',';
    if (k < trace.speed2.size()) num(trace.speed2[k]);
    os << ',';
    if (k < trace.residuals.size() && trace.residuals[k]) num(*trace.residuals[k]);
    os << '\n';
  }
}

}  // namespace sigchange
