#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tunnel_time/phases.hpp"

using namespace tunnel_time;

namespace {

const Potential kEckart = Potential::eckart(40.0, 2.0);
const double kAbsT = std::numbers::pi * 2.0 * std::sqrt(1.0 / 40.0);

TurningPoints tp() { return turning_points(kEckart, 20.0, 1.0); }

ScatterSetup at_exit() { return {kEckart, 20.0, 1.0, {tp().upper, 0.0}, std::nullopt}; }

Perturbation barrier_step(double w0, Envelope e) {
  return Perturbation(SpatialProfile::step(w0, tp().lower, tp().upper), std::move(e));
}

// integral of exp(u^2) over [0, 3]
double erfi_integral() {
  Tolerance t;
  t.rel = 1e-13;
  return integrate([](double u) { return std::exp(u * u); }, 0.0, 3.0, t).value;
}

}  // namespace

TEST(Action, Examples) {
  const ScatterSetup free{Potential::free(), 2.0, 1.0, {4.0, 0.0}, std::nullopt};
  EXPECT_NEAR(s0(free, 0.0).value.real(), 8.0, 1e-12);
  const ScatterSetup rect{Potential::rectangular(4.0, 0.0, 3.0), 2.0, 1.0, {3.0, 0.0}, std::nullopt};
  const auto a = s0(rect);
  EXPECT_NEAR(a.value.imag(), 6.0, 1e-12);
  EXPECT_NEAR(a.value.real(), 0.0, 1e-12);
  Tolerance tight;
  tight.rel = 1e-13;
  EXPECT_NEAR(s0(at_exit()).value.imag(), s0(at_exit(), std::nullopt, tight).value.imag(), 1e-9);
}

TEST(S1, ConstantEnvelopeAllowed) {
  const ScatterSetup s{kEckart, 50.0, 1.0, {2.0, 0.0}, std::nullopt};
  const double T = traversal_time_allowed(s, -2.0, 2.0).value.real();
  const auto r = s1(s, Perturbation(SpatialProfile::step(0.1, -2.0, 2.0), ConstantEnvelope{2.0}));
  EXPECT_NEAR(r.s1.real(), -0.1 * 2.0 * T, 1e-10);
  EXPECT_NEAR(r.s1.imag(), 0.0, 1e-14);
}

TEST(S1, ConstantEnvelopeForbidden) {
  const auto r = s1(at_exit(), barrier_step(0.1, ConstantEnvelope{1.0}));
  EXPECT_NEAR(r.s1.imag(), 0.1 * kAbsT, 1e-10);
  EXPECT_NEAR(r.s1.real(), 0.0, 1e-10);
}

TEST(S1, SinglePulseForbidden) {
  const double dt = kAbsT / 3.0;
  GaussianTrain g;
  g.pulses.push_back({0, 1.0, 0.0, dt});
  const auto r = s1(at_exit(), barrier_step(0.1, g));
  EXPECT_NEAR(r.s1.imag(), 0.1 * dt * erfi_integral(), 1e-8 * r.s1.imag());
  EXPECT_NEAR(r.s1.imag(), 47.8365, 1e-3);
}

TEST(S1, RoutesAgree) {
  const auto train = GaussianTrain::uniform(-2, 2, 1.0, kAbsT, kAbsT / 3.0);
  const auto p = barrier_step(0.1, train);
  const Trajectory tr = trajectory(at_exit());
  const auto a = s1(tr, p, Route::Contour);
  const auto b = s1(tr, p, Route::HamiltonJacobi);
  EXPECT_NEAR(std::abs(a.s1 - b.s1) / std::abs(a.s1), 0.0, 1e-8);
  const auto h = barrier_step(0.1, HarmonicEnvelope{0.7, 0.3});
  EXPECT_NEAR(std::abs(s1(tr, h, Route::Contour).s1 - s1(tr, h, Route::HamiltonJacobi).s1), 0.0, 1e-9);
}

TEST(S1, PerPulseTermsAddUp) {
  const auto p = barrier_step(0.1, GaussianTrain::uniform(-3, 3, 1.0, kAbsT, kAbsT / 3.0));
  const Trajectory tr = trajectory(at_exit());
  const auto total = s1(tr, p);
  ScaledComplex sum;
  for (const auto& t : s1_per_pulse(tr, p)) sum += t.s1;
  EXPECT_NEAR(std::abs(sum.value() - total.s1) / std::abs(total.s1), 0.0, 1e-12);
}

TEST(S1, LinearInAmplitude) {
  const Trajectory tr = trajectory(at_exit());
  const Envelope e = HarmonicEnvelope{1.3, 0.0};
  const cplx a = s1(tr, barrier_step(0.1, e)).s1;
  const cplx b = s1(tr, barrier_step(0.3, e)).s1;
  EXPECT_NEAR(std::abs(b - 3.0 * a), 0.0, 1e-12);
}

TEST(S1, ScaledComplexSurvivesOverflow) {
  // exp(|T|^2/dt^2) with dt = |T|/30 overflows a double.
  const double dt = kAbsT / 30.0;
  GaussianTrain g;
  g.pulses.push_back({0, 1.0, 0.0, dt});
  const auto r = s1(at_exit(), barrier_step(0.1, g));
  EXPECT_TRUE(std::isfinite(r.s1_scaled.log_abs()));
  EXPECT_GT(r.s1_scaled.log_abs(), 800.0);
  ScaledComplex x{cplx(2.0, 0.0), 1000.0}, y{cplx(1.0, 0.0), 999.0};
  EXPECT_NEAR(abs_ratio(y, x), std::exp(-1.0) / 2.0, 1e-13);
  x += y;
  EXPECT_NEAR(x.log_abs(), 1000.0 + std::log(2.0 + std::exp(-1.0)), 1e-12);
}

TEST(Table, RatiosAndSymmetry) {
  const auto f = forbidden_pulse_scenario(kEckart, 20.0, 1.0, 0.1, -3, 3);
  const auto a = allowed_pulse_scenario(kEckart, 50.0, 1.0, -2.0, 2.0, 0.1, -3, 3);
  EXPECT_NEAR(f.period, kAbsT, 1e-10);
  EXPECT_NEAR(f.width, kAbsT / 3.0, 1e-10);
  const auto rows = pulse_ratio_table(a, f);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[3].n, 0);
  EXPECT_EQ(rows[3].ratio_allowed, 1.0);
  EXPECT_EQ(rows[3].ratio_forbidden, 1.0);
  EXPECT_NEAR(rows[2].ratio_allowed, 1.0, 1e-10);              // n = -1
  EXPECT_NEAR(rows[4].ratio_allowed / 2.2091e-5, 1.0, 1e-3);   // n = 1
  EXPECT_NEAR(rows[4].ratio_forbidden / 8.1417e-5, 1.0, 1e-3);
  EXPECT_NEAR(rows[5].ratio_forbidden / 9.6324e-17, 1.0, 1e-3);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(rows[3 + k].ratio_forbidden / rows[3 - k].ratio_forbidden, 1.0, 1e-8);
  }
  EXPECT_THROW(forbidden_pulse_scenario(kEckart, 50.0, 1.0, 0.1, -1, 1), Error);
}

TEST(Density, Examples) {
  const Trajectory tr = trajectory(at_exit());
  const auto zero = density(tr, barrier_step(0.0, ConstantEnvelope{1.0}));
  EXPECT_DOUBLE_EQ(zero.ratio, 1.0);
  const auto r = density(tr, barrier_step(0.5, ConstantEnvelope{1.0}));
  EXPECT_NEAR(r.ratio, std::exp(-kAbsT), 1e-9);
  EXPECT_NEAR(r.ratio, 0.37029, 1e-5);
  EXPECT_NEAR(r.rho / r.rho0, r.ratio, 1e-14);
}

TEST(Current, Examples) {
  const ScatterSetup s{kEckart, 50.0, 1.0, {2.0, 0.0}, std::nullopt};
  const Trajectory tr = trajectory(s);
  const auto w = SpatialProfile::step(0.1, -2.0, 2.0);
  EXPECT_EQ(current_correction(tr, Perturbation(w, ConstantEnvelope{3.0})).delta_j, 0.0);
  EXPECT_EQ(current_correction(tr, Perturbation(SpatialProfile::step(0.0, -2.0, 2.0), HarmonicEnvelope{1.0, 0.0}))
                .delta_j,
            0.0);
  const double T = traversal_time_allowed(s, -2.0, 2.0).value.real();
  const double p2 = std::norm(momentum(s, 2.0));
  const double om = 0.3;
  const double dj = current_correction(tr, Perturbation(w, HarmonicEnvelope{om, 0.0})).delta_j;
  EXPECT_NEAR(dj, 0.1 * (1.0 - std::cos(om * T)) / p2, 1e-12);
  EXPECT_THROW(current_correction(trajectory(at_exit()), barrier_step(0.1, ConstantEnvelope{1.0})), Error);
}

TEST(Current, SmoothProfileWorkTerm) {
  // For a smooth bump that vanishes at both ends only the work term remains;
  // with Omega constant the work is the potential difference, zero.
  const ScatterSetup s{Potential::free(), 2.0, 1.0, {5.0, 0.0}, -5.0};
  auto f = [](double x) { return 0.2 * std::pow(std::sin(std::numbers::pi * x / 4.0), 2); };
  auto df = [](double x) { return 0.2 * std::numbers::pi / 4.0 * std::sin(std::numbers::pi * x / 2.0); };
  const SpatialProfile bump(SmoothProfile{f, df}, 0.0, 4.0);
  const Trajectory tr = trajectory(s);
  EXPECT_NEAR(current_correction(tr, Perturbation(bump, ConstantEnvelope{1.0})).delta_j, 0.0, 1e-12);
  const auto r = current_correction(tr, Perturbation(bump, HarmonicEnvelope{0.5, 0.0}));
  EXPECT_NEAR(r.boundary_term, 0.0, 1e-15);
  EXPECT_NE(r.work_term, 0.0);
}

TEST(Adiabatic, ConstantEnvelopeIsExact) {
  const ScatterSetup s{kEckart, 50.0, 1.0, {2.0, 0.0}, std::nullopt};
  const auto r = adiabatic_expansion(trajectory(s),
                                     Perturbation(SpatialProfile::step(0.1, -2.0, 2.0), ConstantEnvelope{1.0}));
  EXPECT_NEAR(std::abs(r.second), 0.0, 0.0);
  EXPECT_NEAR(r.first_term_error(), 0.0, 1e-10);
}

TEST(Adiabatic, HarmonicClosedForms) {
  const ScatterSetup s{kEckart, 50.0, 1.0, {2.0, 0.0}, std::nullopt};
  const double T = traversal_time_allowed(s, -2.0, 2.0).value.real();
  const double om = 0.2;
  const auto al = adiabatic_expansion(trajectory(s),
                                      Perturbation(SpatialProfile::step(0.1, -2.0, 2.0), HarmonicEnvelope{om, 0.0}));
  EXPECT_NEAR(al.exact.real(), -0.1 / om * std::sin(om * T), 1e-10);
  const auto fb = adiabatic_expansion(trajectory(at_exit()), barrier_step(0.1, HarmonicEnvelope{om, 0.0}));
  EXPECT_NEAR(fb.exact.imag(), 0.1 / om * std::sinh(om * kAbsT), 1e-10);
  EXPECT_NEAR(fb.first.imag(), 0.1 * kAbsT, 1e-10);
  EXPECT_LT(fb.first_term_error(), 0.01);
}

TEST(Adiabatic, NeedsStep) {
  const ScatterSetup s{Potential::free(), 2.0, 1.0, {5.0, 0.0}, -5.0};
  auto f = [](double x) { return 0.1 * x * (4.0 - x); };
  const SpatialProfile w(SmoothProfile{f, nullptr}, 0.0, 4.0);
  EXPECT_THROW(adiabatic_expansion(trajectory(s), Perturbation(w, ConstantEnvelope{1.0})), Error);
}

TEST(Validity, DeepPerturbativeRegimePasses) {
  const ScatterSetup s{kEckart, 50.0, 1.0, {2.0, 0.0}, std::nullopt};
  const auto r = validity_report(trajectory(s), Perturbation(SpatialProfile::step(0.03, -2.0, 2.0),
                                                              HarmonicEnvelope{0.01, 0.0}));
  EXPECT_TRUE(r.flags.empty());
  EXPECT_NE(r.find("rate_ok"), nullptr);
  EXPECT_EQ(r.find("pulse_width_ok"), nullptr);
}

TEST(Validity, TableScenarioMargins) {
  const auto f = forbidden_pulse_scenario(kEckart, 20.0, 1.0, 0.1, -3, 3);
  const auto r = validity_report(trajectory(f.setup), f.perturbation);
  const auto* pw = r.find("pulse_width_ok");
  ASSERT_NE(pw, nullptr);
  EXPECT_TRUE(pw->ok);
  EXPECT_NEAR(pw->ratio, (2.0 / r.action) * 3.0, 1e-12);
  EXPECT_GT(pw->margin(), 0.0);
  // w0 = 0.1 makes |S1| large for this schedule
  EXPECT_FALSE(r.find("S1_order")->ok);
}

TEST(Validity, NarrowPulsesRaisePulseWidth) {
  const auto f = forbidden_pulse_scenario(kEckart, 20.0, 1.0, 1e-12, -1, 1, 12.0);
  const auto r = validity_report(trajectory(f.setup), f.perturbation);
  EXPECT_FALSE(r.find("pulse_width_ok")->ok);
}

TEST(Validity, StraddlingRegionIsFlagged) {
  const ScatterSetup s{kEckart, 20.0, 1.0, {tp().upper + 1.0, 0.0}, std::nullopt};
  const auto r = validity_report(trajectory(s), Perturbation(SpatialProfile::step(1e-3, 0.0, tp().upper + 0.5),
                                                              ConstantEnvelope{1.0}));
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "region_inside_segment"), r.flags.end());
}
