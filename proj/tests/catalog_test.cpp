#include "sigchange/catalog.hpp"

#include <gtest/gtest.h>

namespace sigchange {
namespace {

TEST(Catalog, Kossowski) {
  const auto s = builtin_space("kossowski", {{"m", "2"}});
  EXPECT_EQ(s.metric.alpha(), 1.0);
  EXPECT_EQ(s.metric.entry(0, 0), Expression::parse("1", coordinate_names(2)));
  EXPECT_EQ(s.metric.entry(0, 1), Expression::parse("0", coordinate_names(2)));
  EXPECT_EQ(s.metric.entry(1, 1), Expression::parse("-x2", coordinate_names(2)));
  EXPECT_EQ(*s.sigma, Expression::parse("x2", coordinate_names(2)));
  const Vec rho = s.field("rho")(Vec::Zero(2));
  EXPECT_EQ(rho, (Vec(2) << 0, 1).finished());
}

TEST(Catalog, Discussion1) {
  const auto s = builtin_space("discussion1");
  const auto names = coordinate_names(2);
  EXPECT_EQ(s.metric.entry(0, 1), Expression::parse("spow(x2, 1/2)", names));
  EXPECT_EQ(s.metric.entry(1, 1), Expression::parse("2*x2", names));
  EXPECT_EQ(s.metric.alpha(), 1.0);
}

TEST(Catalog, NormalForm) {
  const auto s = builtin_space("normal_form", {{"m", "2"}, {"alpha", "2"}});
  const auto names = coordinate_names(2);
  EXPECT_EQ(s.metric.entry(0, 0), Expression::parse("1", names));
  EXPECT_EQ(s.metric.entry(1, 1), Expression::parse("spow(x2, 0.5)", names));
  EXPECT_EQ(s.metric.alpha(), 2.0);
}

TEST(Catalog, Errors) {
  EXPECT_THROW(builtin_space("schwarzschild"), UnknownSpace);
  EXPECT_THROW(builtin_space("normal_form", {{"alpha", "0"}}), BadParams);
  EXPECT_THROW(builtin_space("normal_form", {{"alpha", "-1"}}), BadParams);
  EXPECT_THROW(builtin_space("kossowski", {{"m", "1"}}), BadParams);
  EXPECT_THROW(builtin_space("kossowski", {{"m", "two"}}), BadParams);
  EXPECT_THROW(builtin_space("kossowski", {{"alpha", "2"}}), BadParams);
  EXPECT_THROW(builtin_space("distorted_normal", {{"amplitude", "0.3"}, {"frequency", "3"}}), BadParams);
}

TEST(Catalog, DistortedNormalIsPullback) {
  // g(x) = J^T diag(1, spow(y_m, 1/alpha)) J evaluated against a numeric
  // Jacobian of the distortion map.
  for (int seed = 0; seed < 3; ++seed) {
    const SpaceParams p{{"alpha", "2"}, {"seed", std::to_string(seed)}, {"amplitude", "0.2"}, {"bend", "0.1"}};
    const auto s = builtin_space("distorted_normal", p);
    Distortion d;
    d.amplitude = 0.2;
    d.bend = 0.1;
    d.seed = static_cast<std::uint64_t>(seed);
    const auto y = d.map();
    const Vec x = (Vec(2) << 0.3, -0.2).finished();
    auto ymap = [&](const Vec& z) {
      const std::span<const double> zs(z.data(), 2);
      return (Vec(2) << y[0].eval(zs), y[1].eval(zs)).finished();
    };
    Mat J(2, 2);
    for (int j = 0; j < 2; ++j) {
      Vec e = Vec::Zero(2);
      e[j] = 1e-6;
      J.col(j) = (ymap(x + e) - ymap(x - e)) / 2e-6;
    }
    Mat n = Mat::Identity(2, 2);
    n(1, 1) = spow(ymap(x)[1], 0.5);
    const Mat expected = J.transpose() * n * J;
    EXPECT_LE((eval_metric(s.metric, x) - expected).cwiseAbs().maxCoeff(), 1e-8);
    // rho maps to e_m under the distortion.
    const Vec image = J * s.field("rho")(x);
    EXPECT_NEAR(image[0], 0.0, 1e-8);
    EXPECT_NEAR(image[1], 1.0, 1e-8);
  }
}

TEST(Catalog, DistortionPhasesAreReproducible) {
  Distortion a;
  a.seed = 42;
  Distortion b = a;
  EXPECT_EQ(a.phases(), b.phases());
  b.seed = 43;
  EXPECT_NE(a.phases(), b.phases());
}

TEST(Catalog, TransversalityVerdicts) {
  for (const auto& name : {"kossowski", "esp", "normal_form", "distorted_normal"}) {
    const auto s = builtin_space(name);
    const auto points = sigma_samples(s.metric, 4);
    ASSERT_FALSE(points.empty()) << name;
    for (const Vec& p : points) EXPECT_TRUE(transversality_report(s.metric, p).pass) << name;
  }
  const auto d1 = builtin_space("discussion1");
  for (const Vec& p : sigma_samples(d1.metric, 4)) {
    const auto rep = transversality_report(d1.metric, p);
    EXPECT_FALSE(rep.pass);
    EXPECT_NEAR(rep.left.value, 3.0, 1e-3);
    EXPECT_NEAR(rep.right.value, 1.0, 1e-3);
  }
}

TEST(Catalog, AllNamesConstruct) {
  for (const auto& name : builtin_space_names()) {
    const auto s = builtin_space(name);
    EXPECT_EQ(s.name, name);
    EXPECT_TRUE(s.fields.contains("rho"));
    EXPECT_FALSE(s.notes.empty());
  }
}

}  // namespace
}  // namespace sigchange
