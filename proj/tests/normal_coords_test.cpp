#include "sigchange/normal_coords.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "sigchange/catalog.hpp"

namespace sigchange {
namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

TEST(AlphaParameterize, UnitPsiIsIdentity) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double t : {-0.7, -0.01, 0.0, 0.3, 1.0}) {
      EXPECT_NEAR(alpha_parameterize([](double) { return 1.0; }, alpha, t), t, 1e-13) << alpha << " " << t;
    }
  }
}

TEST(AlphaParameterize, ConstantPsiScales) {
  const double c = 3.0;
  for (double alpha : {0.5, 1.0, 2.0}) {
    const double r = 1.0 / (2.0 * alpha);
    for (double t : {-0.4, 0.25}) {
      EXPECT_NEAR(alpha_parameterize([c](double) { return c; }, alpha, t), std::pow(c, 1.0 / (1.0 + r)) * t, 1e-13);
    }
  }
}

TEST(AlphaParameterize, MatchesScaledBaldomeroF) {
  // s = (1 + r)^(1/(1 + r)) F(t).
  auto psi = [](double t) { return 1.0 + 0.5 * t + t * t; };
  for (double alpha : {0.5, 2.0}) {
    const double r = 1.0 / (2.0 * alpha);
    for (double t : {-0.5, 0.8}) {
      const double F = spow(singular_integral(r, psi, t), 1.0 / (1.0 + r));
      EXPECT_NEAR(alpha_parameterize(psi, alpha, t), std::pow(1.0 + r, 1.0 / (1.0 + r)) * F, 1e-13);
    }
  }
}

TEST(ExtractPsi, NormalFormUnit) {
  for (const char* alpha : {"0.5", "1", "2"}) {
    const auto s = builtin_space("normal_form", {{"m", "2"}, {"alpha", alpha}});
    const auto psi = extract_psi(s.metric, s.field("rho"), v2(0.1, 0.0), {-0.5, -0.1, 0.0, 0.02, 0.4});
    for (double p : psi) EXPECT_NEAR(p, 1.0, 1e-10) << alpha;
  }
}

TEST(ExtractPsi, ConstantHbar) {
  const auto s = builtin_space("esp", {{"m", "2"}, {"alpha", "1"}, {"hbar", "4"}});
  for (double p : extract_psi(s.metric, s.field("rho"), v2(0.0, 0.0), {-0.3, 0.0, 0.3})) EXPECT_NEAR(p, 2.0, 1e-10);
}

TEST(ExtractPsi, DoubledField) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto s = builtin_space("normal_form", {{"m", "2"}, {"alpha", std::to_string(alpha)}});
    const VectorField rho = VectorField::parse({"0", "2"});
    const double expected = 2.0 * std::pow(2.0, 1.0 / (2.0 * alpha));
    for (double p : extract_psi(s.metric, rho, v2(0.0, 0.0), {-0.2, 0.0, 0.1, 0.4})) {
      EXPECT_NEAR(p, expected, 1e-9) << alpha;
    }
  }
}

TEST(ExtractPsi, NonPositivePsi) {
  // <rho, rho> = -spow(t, 1) has the wrong sign on both sides.
  const auto s = builtin_space("kossowski", {{"m", "2"}});
  EXPECT_THROW(extract_psi(s.metric, s.field("rho"), v2(0.0, 0.0), {0.1}), NonPositivePsi);
}

TEST(Arclength, FlowLineExamples) {
  const auto flat = builtin_space("euclidean", {{"m", "2"}});
  const FlowLine unit(VectorField::coordinate(2, 1), v2(0.0, 0.0), 0.0, 1.0);
  const auto a = arclength_reparam(flat.metric, unit, {0.25, 0.5, 1.0});
  EXPECT_NEAR(a[0], 0.25, 1e-12);
  EXPECT_NEAR(a[2], 1.0, 1e-12);

  // g_mm = x_m on the Riemann side: (2/3) t^(3/2).
  const auto riemann = MetricField::parse(1.0, {{"1", "0"}, {"0", "x2"}}, Box{{{-1, 1}, {-1, 1}}});
  const auto b = arclength_reparam(riemann, unit, {0.1, 0.5, 1.0});
  for (std::size_t k = 0; k < 3; ++k) {
    const double t = std::vector<double>{0.1, 0.5, 1.0}[k];
    EXPECT_NEAR(b[k], 2.0 / 3.0 * std::pow(t, 1.5), 1e-11);
  }

  const auto four = MetricField::parse(1.0, {{"1", "0"}, {"0", "4"}}, Box{{{-1, 1}, {-1, 1}}});
  EXPECT_NEAR(arclength_reparam(four, unit, {0.6})[0], 1.2, 1e-12);
}

TEST(Arclength, TraceVersionAndSignError) {
  const auto riemann = MetricField::parse(1.0, {{"1", "0"}, {"0", "x2"}}, Box{{{-1, 1}, {-1, 1}}});
  const auto trace = integrate_flow(VectorField::coordinate(2, 1), v2(0.0, 0.0), 0.0, 1.0, FlowOptions{1e-12, 41});
  const auto x = arclength_reparam(riemann, trace);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    EXPECT_NEAR(x[k], 2.0 / 3.0 * std::pow(trace.params[k], 1.5), 1e-10);
    if (k > 0) {
      EXPECT_GT(x[k], x[k - 1]);
    }
  }
  const auto across = integrate_flow(VectorField::coordinate(2, 1), v2(0.0, -0.5), 0.0, 1.0);
  EXPECT_THROW(arclength_reparam(riemann, across), SignError);
  const FlowLine line(VectorField::coordinate(2, 1), v2(0.0, -0.5), 0.0, 1.0);
  EXPECT_THROW(arclength_reparam(riemann, line, {1.0}), SignError);
}

TEST(RadicalLine, Invariants) {
  const auto s = builtin_space("distorted_normal", {{"alpha", "2"}, {"seed", "4"}, {"amplitude", "0.2"}});
  const VectorField rho = s.field("rho");
  const Vec p = SigmaPatch::located(s.metric, Vec::Constant(1, 0.1), 0.5).embed(Vec::Constant(1, 0.1));
  const RadicalLine line(s.metric, rho, p, 0.6);
  const double r = 0.25;
  // ds/dt at 0 from psi(0) and from a difference quotient of s.
  EXPECT_NEAR(line.ds_dt(0.0), std::pow(line.psi(0.0), 1.0 / (1.0 + r)), 1e-12);
  const double h = 1e-5;
  EXPECT_NEAR((line.s_of_t(h) - line.s_of_t(-h)) / (2 * h), line.ds_dt(0.0), 1e-4);
  double prev = -1e9;
  for (int k = -20; k <= 20; ++k) {
    const double t = 0.029 * k;
    const double st = line.s_of_t(t);
    EXPECT_GT(st, prev);
    prev = st;
    EXPECT_NEAR(line.t_of_s(st), t, 1e-12);
  }
  EXPECT_EQ(line.s_of_t(0.0), 0.0);
  // Speed squared in s equals spow(s, 1/alpha).
  for (double sv : {-0.5, -0.2, -0.05, 0.05, 0.3, 0.5}) {
    const Vec x = line.position_at_s(sv);
    const Vec v = line.velocity_wrt_s(sv);
    EXPECT_NEAR(inner(s.metric, x, v, v), spow(sv, 0.5), 1e-6) << sv;
  }
}

TEST(NormalChart, IdentityOnNormalForm) {
  for (const auto& [m, alpha] : std::vector<std::pair<const char*, const char*>>{{"2", "0.5"}, {"3", "1"}, {"2", "2"}}) {
    const auto s = builtin_space("normal_form", {{"m", m}, {"alpha", alpha}});
    const auto ct = build_normal_chart(s.metric, s.field("rho"));
    EXPECT_FALSE(ct.flipped());
    for (const auto& row : ct.psi_samples()) {
      for (double p : row) EXPECT_NEAR(p, 1.0, 1e-12);
    }
    const auto& tg = ct.base_chart().t_grid();
    const auto ss = ct.s_samples();
    for (const auto& row : ss) {
      for (std::size_t k = 0; k < tg.size(); ++k) EXPECT_NEAR(row[k], tg[k], 1e-12);
    }
    const auto rep = verify_normal_chart(ct);
    EXPECT_TRUE(rep.pass) << rep.details;
    EXPECT_LE(rep.gmm_error, 1e-12) << alpha;
    EXPECT_LE(rep.gim_error, 1e-12) << alpha;
    EXPECT_TRUE(rep.gij_posdef);
  }
}

TEST(NormalChart, WrongAlphaFailsOnGmm) {
  const auto s = builtin_space("normal_form", {{"m", "2"}, {"alpha", "1"}});
  const auto ct = build_normal_chart(s.metric, s.field("rho"));
  VerifyOptions opt;
  opt.alpha = 2.0;
  const auto rep = verify_normal_chart(ct, opt);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.gmm_error, 1e-2);
  EXPECT_LE(rep.gim_error, 1e-10);
}

TEST(NormalChart, QuadraticStretchRoundTrip) {
  // Normal form pushed through (x1, x2) -> (x1, x2 (1 + x1^2/4)), rho pushed forward.
  const Box box{{{-1, 1}, {-1, 1}}};
  for (double alpha : {0.5, 1.0, 2.0}) {
    const std::string a = std::to_string(1.0 / alpha);
    // In the pushed coordinates y2 = x2 / (1 + y1^2 / 4) is the normal coordinate.
    const std::string c = "(1 + x1^2/4)";
    const std::string w = "spow(x2/" + c + ", " + a + ")";
    const std::string dy = "(-x2*x1/2/" + c + "^2)";  // d(x2 / c) / d x1
    const auto M = MetricField::parse(alpha,
                                      {{"1 + " + w + "*" + dy + "^2", w + "*" + dy + "/" + c},
                                       {w + "*" + dy + "/" + c, w + "/" + c + "^2"}},
                                      box);
    const VectorField rho = VectorField::parse({"0", c});
    const auto ct = build_normal_chart(M, rho);
    const auto rep = verify_normal_chart(ct);
    EXPECT_TRUE(rep.pass) << alpha << ": " << rep.details;
    for (const Vec& y : rep.grid) {
      const Vec back = ct.to_normal(ct.to_original(y));
      EXPECT_LE((back - y).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(NormalChart, DistortedRoundTripAndRescaledField) {
  int seed = 0;
  for (double alpha : {0.5, 1.0, 2.0}) {
    const SpaceParams p{{"alpha", std::to_string(alpha)}, {"seed", std::to_string(seed++)}, {"amplitude", "0.15"},
                        {"bend", "0.1"}};
    const auto s = builtin_space("distorted_normal", p);
    const VectorField rho = s.field("rho");
    const auto rep = verify_normal_chart(build_normal_chart(s.metric, rho));
    EXPECT_TRUE(rep.pass) << alpha << ": " << rep.details;
    const VectorField scaled = rho.scaled(Expression::parse("exp(0.4*x1 - 0.3*x2)", coordinate_names(2)));
    const auto rep2 = verify_normal_chart(build_normal_chart(s.metric, scaled));
    EXPECT_TRUE(rep2.pass) << alpha << ": " << rep2.details;
  }
}

TEST(NormalChart, OrientationFlip) {
  const auto s = builtin_space("normal_form", {{"m", "2"}, {"alpha", "1"}});
  const auto ct = build_normal_chart(s.metric, VectorField::parse({"0", "-1"}));
  EXPECT_TRUE(ct.flipped());
  EXPECT_TRUE(verify_normal_chart(ct).pass);
}

TEST(NormalChart, NegativeControls) {
  const auto esp = builtin_space("esp", {{"m", "2"}, {"alpha", "1"}, {"hbar", "1 + 0.5*x1"}});
  EXPECT_THROW(build_normal_chart(esp.metric, esp.field("rho")), NotGeodesicField);

  const auto nf = builtin_space("normal_form", {{"m", "2"}, {"alpha", "1"}});
  EXPECT_THROW(build_normal_chart(nf.metric, VectorField::parse({"1", "1"})), NotRadicalField);

  // Velocity vanishing to second order: spow(<rho, rho>, alpha) has zero slope.
  EXPECT_THROW(build_normal_chart(nf.metric, VectorField::parse({"0", "x2"})), Error);
}

TEST(NormalChart, Discussion1FailsVerification) {
  const auto s = builtin_space("discussion1");
  bool failed = false;
  try {
    failed = !verify_normal_chart(build_normal_chart(s.metric, s.field("rho"))).pass;
  } catch (const Error&) {
    failed = true;
  }
  EXPECT_TRUE(failed);
}

TEST(Synchronization, NormalFormAndEuclidean) {
  for (const char* name : {"normal_form", "euclidean"}) {
    const auto s = builtin_space(name, {{"m", "2"}});
    const Expression sigma = Expression::parse("x2", coordinate_names(2));
    std::vector<Vec> pts;
    for (int k = 0; k < 10; ++k) pts.push_back(v2(-0.9 + 0.2 * k, 0.0));
    const auto rep = synchronization_check(s.metric, sigma, pts, -0.5, 0.5);
    EXPECT_TRUE(rep.extension_ok);
    EXPECT_TRUE(rep.pass) << rep.details;
    EXPECT_LE(rep.max_deviation, 1e-6);
  }
}

TEST(Synchronization, DistortedSigma) {
  const auto s = builtin_space("distorted_normal", {{"alpha", "1"}, {"seed", "7"}, {"amplitude", "0.1"}});
  const auto pts = sigma_samples(s.metric, 4);
  const auto rep = synchronization_check(s.metric, *s.sigma, pts, -0.3, 0.3);
  EXPECT_TRUE(rep.pass) << rep.details;
}

TEST(Synchronization, CubedSigmaFailsExtension) {
  const auto s = builtin_space("normal_form", {{"m", "2"}});
  const auto rep = synchronization_check(s.metric, Expression::parse("x2^3", coordinate_names(2)), {v2(0, 0)}, -0.5,
                                         0.5);
  EXPECT_FALSE(rep.extension_ok);
  EXPECT_FALSE(rep.pass);
}

}  // namespace
}  // namespace sigchange
