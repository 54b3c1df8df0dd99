#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tunnel_time/numerics.hpp"

using namespace tunnel_time;

TEST(Quadrature, Polynomial) {
  const auto r = integrate([](double x) { return x * x * x - 2.0 * x; }, -1.0, 2.0);
  EXPECT_NEAR(r.value, 15.0 / 4.0 - 3.0, 1e-13);
  EXPECT_LE(r.error_estimate, 1e-9);
}

TEST(Quadrature, InverseSqrtBothEnds) {
  // integral of 1/sqrt(x(1-x)) over [0, 1]
  const auto r = integrate([](double x) { return 1.0 / std::sqrt(x * (1.0 - x)); }, 0.0, 1.0, {},
                           Endpoints::InvSqrtBoth);
  EXPECT_NEAR(r.value, std::numbers::pi, 1e-10);
}

TEST(Quadrature, InverseSqrtOneEnd) {
  const auto lo = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 4.0, {}, Endpoints::InvSqrtLower);
  EXPECT_NEAR(lo.value, 4.0, 1e-10);
  const auto hi = integrate([](double x) { return 1.0 / std::sqrt(1.0 - x); }, 0.0, 1.0, {}, Endpoints::InvSqrtUpper);
  EXPECT_NEAR(hi.value, 2.0, 1e-10);
}

TEST(Quadrature, ComplexIntegrand) {
  const auto r = integrate_complex([](double x) { return std::exp(std::complex<double>(0.0, x)); }, 0.0,
                                   std::numbers::pi);
  EXPECT_NEAR(r.value.real(), 0.0, 1e-12);
  EXPECT_NEAR(r.value.imag(), 2.0, 1e-12);
}

TEST(Quadrature, SpecExamples) {
  EXPECT_NEAR(integrate([](double) { return 1.0; }, 0.0, 2.0).value, 2.0, 1e-12);
  EXPECT_NEAR(integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, {}, Endpoints::InvSqrtLower).value, 2.0,
              1e-9);
  EXPECT_NEAR(integrate([](double x) { return std::exp(x * x); }, 0.0, 3.0).value, 1444.545, 0.01);
}

TEST(Quadrature, RejectsReversedLimits) {
  EXPECT_THROW(integrate([](double x) { return x; }, 1.0, 0.0), Error);
}

TEST(Quadrature, RejectsNonFiniteLimits) {
  EXPECT_THROW(integrate([](double) { return 1.0; }, 0.0, INFINITY), Error);
}

TEST(Quadrature, ReportsNonFiniteIntegrand) {
  try {
    integrate([](double x) { return x > 0.5 ? NAN : 1.0; }, 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFinite);
  }
}

TEST(Tolerance, Validation) {
  Tolerance t;
  t.rel = -1.0;
  EXPECT_THROW(t.validate(), Error);
}

TEST(EndpointMap, RoundTrip) {
  for (auto kind : {Endpoints::Regular, Endpoints::InvSqrtLower, Endpoints::InvSqrtUpper, Endpoints::InvSqrtBoth}) {
    const EndpointMap m(-1.5, 2.5, kind);
    for (double u : {0.0, 0.1, 0.37, 0.5, 0.83, 1.0}) {
      EXPECT_NEAR(m.u(m.x(u)), u, 1e-12);
    }
    EXPECT_DOUBLE_EQ(m.x(0.0), -1.5);
    EXPECT_DOUBLE_EQ(m.x(1.0), 2.5);
  }
}

TEST(EndpointMap, DistancesFromEnds) {
  const EndpointMap m(1.0, 3.0, Endpoints::InvSqrtBoth);
  for (double u : {1e-6, 0.2, 0.9}) {
    EXPECT_NEAR(m.from_lo(u), m.x(u) - 1.0, 1e-14);
    EXPECT_NEAR(m.from_hi(u), 3.0 - m.x(u), 1e-14);
  }
}

TEST(Roots, Bracketed) {
  const double r = find_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0);
  EXPECT_NEAR(r, 0.7390851332151607, 1e-12);
}

TEST(Roots, NoSignChange) {
  try {
    find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoSignChange);
  }
}

TEST(Roots, InvertMonotone) {
  auto g = [](double x) { return x * x * x + x; };
  const double x = invert_monotone(g, 10.0, 0.0, 3.0);
  EXPECT_NEAR(g(x), 10.0, 1e-10);
  try {
    invert_monotone(g, 100.0, 0.0, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TargetOutOfRange);
  }
}

TEST(Slope, PowerLaw) {
  std::vector<double> x, y;
  for (int i = 1; i <= 6; ++i) {
    x.push_back(i * 0.1);
    y.push_back(3.0 * std::pow(i * 0.1, 2.5));
  }
  EXPECT_NEAR(loglog_slope(x, y), 2.5, 1e-12);
}
