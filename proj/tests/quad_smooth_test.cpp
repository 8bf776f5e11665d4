#include "sigchange/quad_smooth.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace sigchange {
namespace {

const std::vector<double> kNoLambda;

double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::fmax(std::fabs(b), 1e-300);
}

TEST(SingularIntegral, ClosedForms) {
  auto one = [](double) { return 1.0; };
  EXPECT_NEAR(singular_integral(0.5, one, 1.0), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(singular_integral(0.5, one, -1.0), -2.0 / 3.0, 1e-14);
  EXPECT_NEAR(singular_integral(1.0, [](double x) { return 1.0 + x; }, 1.0),
              5.0 / 6.0, 1e-14);
  EXPECT_EQ(singular_integral(0.5, one, 0.0), 0.0);
}

TEST(SingularIntegral, AgainstAntiderivatives) {
  // int_0^t |x|^(1/2) (1 + x) dx, both signs of t.
  auto exact = [](double t) {
    const double a = std::fabs(t);
    return t > 0 ? (2.0 / 3.0) * std::pow(a, 1.5) + 0.4 * std::pow(a, 2.5)
                 : -((2.0 / 3.0) * std::pow(a, 1.5) - 0.4 * std::pow(a, 2.5));
  };
  for (double t : {-0.9, -0.3, -1e-3, 2e-4, 0.25, 0.8}) {
    const double got = singular_integral(0.5, [](double x) { return 1.0 + x; }, t);
    EXPECT_LE(rel_diff(got, exact(t)), 1e-12) << t;
  }
  // int_0^1 x^2 e^x dx = e - 2
  EXPECT_LE(rel_diff(singular_integral(2.0, [](double x) { return std::exp(x); }, 1.0),
                     std::exp(1.0) - 2.0),
            1e-12);
  // r < 0: int_0^t |x|^(-1/2) dx = 2 sqrt(t)
  EXPECT_LE(rel_diff(singular_integral(-0.5, [](double) { return 1.0; }, 0.49), 1.4),
            1e-12);
}

TEST(SingularIntegral, ExpressionOverload) {
  const auto psi = Expression::parse("1 + x", baldomero_variables(0));
  EXPECT_NEAR(singular_integral(1.0, psi, kNoLambda, 1.0), 5.0 / 6.0, 1e-14);
  const auto psi_l = Expression::parse("l1 + x", baldomero_variables(1));
  const std::vector<double> lambda{2.0};
  // int_0^1 x (2 + x) dx = 1 + 1/3
  EXPECT_NEAR(singular_integral(1.0, psi_l, lambda, 1.0), 4.0 / 3.0, 1e-14);
  EXPECT_THROW(singular_integral(1.0, psi_l, kNoLambda, 1.0), MissingBinding);
}

TEST(SingularIntegral, RejectsDivergentExponent) {
  auto one = [](double) { return 1.0; };
  EXPECT_THROW(singular_integral(-1.0, one, 1.0), DomainError);
  EXPECT_THROW(singular_integral(-2.0, one, 1.0), DomainError);
}

TEST(SingularIntegral, OddForEvenPsi) {
  const std::function<double(double)> psis[] = {
      [](double x) { return std::cos(x); },
      [](double x) { return 1.0 + x * x; },
      [](double x) { return std::exp(-x * x); },
  };
  for (const auto& psi : psis) {
    for (double r : {0.25, 0.5, 1.0, 2.0, 3.0}) {
      for (double t : {0.01, 0.3, 0.9}) {
        const double a = singular_integral(r, psi, t);
        const double b = singular_integral(r, psi, -t);
        EXPECT_LE(std::fabs(a + b), 1e-12 * std::fabs(a)) << r << " " << t;
      }
    }
  }
}

TEST(Baldomero, FExamples) {
  const auto flat = make_baldomero_spec(1.0, "1");
  EXPECT_NEAR(baldomero_F(flat, kNoLambda, 0.5), std::sqrt(0.125), 1e-14);
  EXPECT_EQ(baldomero_F(flat, kNoLambda, 0.0), 0.0);
  const auto lin = make_baldomero_spec(1.0, "1 + x");
  EXPECT_NEAR(baldomero_F(lin, kNoLambda, 1.0), std::sqrt(5.0 / 6.0), 1e-13);
}

TEST(Baldomero, SpecValidation) {
  EXPECT_THROW(make_baldomero_spec(-1.0, "1"), DomainError);
  EXPECT_THROW(make_baldomero_spec(1.0, "x - 1"), PositivityError);
  EXPECT_THROW(make_baldomero_spec(1.0, "l1 + x", {{-1.0, 1.0}}), PositivityError);
  EXPECT_NO_THROW(make_baldomero_spec(1.0, "l1 + x", {{0.5, 1.0}}));
}

TEST(Baldomero, FPrimeZeroFormula) {
  EXPECT_NEAR(f_prime_zero_formula(make_baldomero_spec(1.0, "1"), kNoLambda),
              1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f_prime_zero_formula(make_baldomero_spec(1.0, "4 + x"), kNoLambda),
              std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f_prime_zero_formula(make_baldomero_spec(0.0, "1"), kNoLambda), 1.0,
              1e-15);
  BaldomeroSpec bad;
  bad.r = 1.0;
  bad.psi = Expression::parse("x - 1", baldomero_variables(0));
  EXPECT_THROW(f_prime_zero_formula(bad, kNoLambda), PositivityError);
}

TEST(Baldomero, FormulaMatchesForwardDifferences) {
  // Plain forward differences on F, independent of the probe machinery.
  for (const char* psi : {"1", "4 + x", "1 + 0.3*sin(x)", "exp(x)"}) {
    for (double r : {0.25, 1.0, 3.0}) {
      const auto spec = make_baldomero_spec(r, psi);
      const double h = 1e-7;
      const double fd = baldomero_F(spec, kNoLambda, h) / h;
      EXPECT_LE(rel_diff(fd, f_prime_zero_formula(spec, kNoLambda)), 1e-5)
          << psi << " r=" << r;
    }
  }
}

TEST(Baldomero, DerivativeMatchesCentralDifferences) {
  const auto spec = make_baldomero_spec(0.5, "1 + 0.3*sin(x)");
  for (double t : {-0.4, -0.05, 0.1, 0.3}) {
    const double h = 1e-5;
    const double fd = (baldomero_F(spec, kNoLambda, t + h) -
                       baldomero_F(spec, kNoLambda, t - h)) / (2 * h);
    EXPECT_LE(rel_diff(baldomero_F_derivative(spec, kNoLambda, t), fd), 1e-7) << t;
  }
}

TEST(Baldomero, StrictlyIncreasing) {
  const auto spec = make_baldomero_spec(0.75, "2 + cos(3*x)");
  double prev = baldomero_F(spec, kNoLambda, -0.5);
  for (int i = 1; i <= 100; ++i) {
    const double t = -0.5 + i * 0.01;
    const double cur = baldomero_F(spec, kNoLambda, t);
    EXPECT_GT(cur, prev) << t;
    prev = cur;
  }
}

TEST(SmoothnessProbe, TAbsTIsExactlyC1) {
  const auto rep = smoothness_probe([](double t) { return t * std::fabs(t); }, 0.0, 2);
  ASSERT_EQ(rep.orders.size(), 2u);
  EXPECT_TRUE(rep.orders[0].agree);
  EXPECT_NEAR(rep.orders[0].left.value, 0.0, 1e-9);
  EXPECT_NEAR(rep.orders[0].right.value, 0.0, 1e-9);
  EXPECT_FALSE(rep.orders[1].agree);
  EXPECT_NEAR(rep.orders[1].left.value, -2.0, 1e-8);
  EXPECT_NEAR(rep.orders[1].right.value, 2.0, 1e-8);
  EXPECT_EQ(rep.verdict, 1);
}

TEST(SmoothnessProbe, LinearBaldomeroIsAtLeastC3) {
  const auto spec = make_baldomero_spec(1.0, "1");
  const auto rep = smoothness_probe(
      [&](double t) { return baldomero_F(spec, kNoLambda, t); }, 0.0, 3);
  EXPECT_NEAR(rep.orders[0].left.value, 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(rep.orders[0].right.value, 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_GE(rep.verdict, 3);
}

TEST(SmoothnessProbe, WrongExponentIsOnlyContinuous) {
  // eps(t) |int_0^t |x| dx|^(1/3) = eps(t) (t^2/2)^(1/3): f' ~ |t|^(-1/3).
  auto f = [](double t) {
    const double integral = singular_integral(1.0, [](double) { return 1.0; }, t);
    return eps(t) * std::pow(std::fabs(integral), 1.0 / 3.0);
  };
  const auto rep = smoothness_probe(f, 0.0, 3);
  EXPECT_TRUE(rep.continuous);
  EXPECT_FALSE(rep.orders[0].agree);
  EXPECT_EQ(rep.verdict, 0);
}

TEST(SmoothnessProbe, JumpIsDiscontinuous) {
  const auto rep = smoothness_probe([](double t) { return t < 0 ? 0.0 : 1.0; }, 0.0, 1);
  EXPECT_FALSE(rep.continuous);
  EXPECT_EQ(rep.verdict, -1);
}

TEST(SmoothnessProbe, RejectsBadOrder) {
  auto f = [](double t) { return t; };
  EXPECT_THROW(smoothness_probe(f, 0.0, 0), BadParams);
  EXPECT_THROW(smoothness_probe(f, 0.0, 5), BadParams);
}

TEST(SmoothnessProbe, SmoothInLambda) {
  // Spot check of lambda-smoothness: lambda -> F(lambda, t0) at interior points.
  const auto spec = make_baldomero_spec(0.5, "l1 + x", {{0.5, 2.0}});
  for (double l : {0.75, 1.25}) {
    auto g = [&](double lam) {
      const std::vector<double> lambda{lam};
      return baldomero_F(spec, lambda, 0.3);
    };
    EXPECT_GE(smoothness_probe(g, l, 3, StepLadder{0.05, 12}).verdict, 3);
  }
}

TEST(HadamardQuotient, Examples) {
  auto sine = [](double t) { return std::sin(t); };
  EXPECT_NEAR(hadamard_quotient(sine, 1.0), std::sin(1.0), 1e-10);
  EXPECT_NEAR(hadamard_quotient(sine, 0.0), 1.0, 1e-10);
  auto square = [](double t) { return t * t; };
  for (double t : {-0.7, 0.2, 1.3}) EXPECT_NEAR(hadamard_quotient(square, t), t, 1e-10);
}

TEST(HadamardQuotient, ReconstructsCorpus) {
  const std::function<double(double)> corpus[] = {
      [](double t) { return std::sin(t); },
      [](double t) { return t * t; },
      [](double t) { return std::expm1(t); },
      [](double t) { return std::log1p(t); },
      [](double t) { return t * std::cos(t); },
      [](double t) { return std::sinh(2 * t); },
      [](double t) { return std::atan(t) + t * t * t; },
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(corpus) - 1);
  for (int i = 0; i < 100; ++i) {
    const auto& f = corpus[pick(rng)];
    const double t = dist(rng);
    const double g = hadamard_quotient(f, t);
    EXPECT_LE(std::fabs(t * g - f(t)), 1e-8 * std::fabs(f(t))) << i << " t=" << t;
  }
}

}  // namespace
}  // namespace sigchange
