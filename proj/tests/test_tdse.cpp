#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "tunnel_time/tdse.hpp"

using namespace tunnel_time;

namespace {

TdseRun free_run() {
  TdseRun r;
  r.grid = {-60.0, 60.0, 1024, 0.01, 5.0};
  r.packet = {-20.0, 4.0, 3.0};
  r.potential = Potential::free();
  r.x_probe = 10.0;
  r.x_cut = 0.0;
  r.record_stride = 50;
  return r;
}

double mean_x(const TdseRun& r) {
  double n = 0.0, s = 0.0;
  for (std::size_t i = 0; i < r.grid.n_points; ++i) {
    n += std::norm(r.psi[i]);
    s += std::norm(r.psi[i]) * r.grid.x(i);
  }
  return s / n;
}

}  // namespace

TEST(Tdse, FreePacketMovesAtGroupVelocity) {
  const TdseRun done = propagate(free_run());
  EXPECT_NEAR(mean_x(done), -20.0 + 4.0 * 5.0, 1e-4 * 20.0);
  EXPECT_NEAR(done.records.back().norm_total, 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(done.t_final, 5.0);
  EXPECT_EQ(done.records.front().t, 0.0);
}

TEST(Tdse, Deterministic) {
  const TdseRun a = propagate(free_run());
  const TdseRun b = propagate(free_run());
  ASSERT_EQ(a.psi.size(), b.psi.size());
  for (std::size_t i = 0; i < a.psi.size(); ++i) ASSERT_EQ(a.psi[i], b.psi[i]);
  EXPECT_EQ(transmitted_observables(a).norm_band, transmitted_observables(b).norm_band);
}

TEST(Tdse, UnitaryWithTimeDependentW) {
  TdseRun r = free_run();
  r.perturbation = Perturbation(SpatialProfile::step(0.5, 0.0, 8.0), HarmonicEnvelope{2.0, 0.1});
  const TdseRun done = propagate(r);
  EXPECT_NEAR(done.records.back().norm_total, 1.0, 1e-8);
}

TEST(Tdse, CurrentMatchesPlaneWaveLimit) {
  TdseRun r = free_run();
  r.packet.sigma_x = 6.0;
  r.grid = {-100.0, 80.0, 2048, 0.01, 7.5};
  r.x_probe = 10.0;
  const TdseRun done = propagate(r);
  const auto& rec = done.records.back();
  EXPECT_NEAR(rec.current_probe / (4.0 * rec.density_probe), 1.0, 0.02);
}

TEST(Tdse, ResumeEqualsSingleRun) {
  TdseRun whole = free_run();
  TdseRun half = free_run();
  half.grid.t_max = 2.5;
  TdseRun mid = propagate(half);
  mid.grid.t_max = 5.0;
  const TdseRun resumed = propagate(mid);
  const TdseRun direct = propagate(whole);
  double diff = 0.0;
  for (std::size_t i = 0; i < direct.psi.size(); ++i) diff = std::max(diff, std::abs(direct.psi[i] - resumed.psi[i]));
  EXPECT_LT(diff, 1e-12);
}

TEST(Tdse, ValidationErrors) {
  TdseRun r = free_run();
  r.grid.n_points = 1000;
  EXPECT_THROW(validate(r), Error);
  r = free_run();
  r.grid.n_points = 64;
  try {
    validate(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::GridTooCoarse);
  }
  r = free_run();
  r.grid.t_max = 50.0;
  try {
    validate(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DomainTooSmall);
  }
  r = free_run();
  r.potential = Potential::rectangular(1.0, -15.0, -14.0);
  EXPECT_THROW(validate(r), Error);
}

TEST(Tdse, ProbeMustBeDownstream) {
  TdseRun r = free_run();
  r.perturbation = Perturbation(SpatialProfile::step(0.1, 0.0, 15.0), ConstantEnvelope{1.0});
  const TdseRun done = propagate(r);
  try {
    transmitted_observables(done);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProbeInsideBarrier);
  }
}

TEST(Tdse, ComparisonOfIdenticalRuns) {
  const TdseRun a = propagate(free_run());
  const auto c = compare_semiclassical(a, a, 0.0);
  EXPECT_EQ(c.log_ratio, 0.0);
  EXPECT_EQ(c.rel_error, 0.0);
  TdseRun other = free_run();
  other.grid.dt = 0.005;
  try {
    compare_semiclassical(a, propagate(other), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MismatchedRuns);
  }
}

TEST(Tdse, RectangularClosedForm) {
  // E = V/2: 1 / (1 + V^2 sinh^2(kappa w) / (4 E (V - E)))
  const double t = rectangular_transmission(4.0, 1.0, 2.0, 1.0);
  EXPECT_NEAR(t, 1.0 / (1.0 + 16.0 * std::pow(std::sinh(2.0), 2) / 16.0), 1e-15);
  EXPECT_NEAR(rectangular_transmission(4.0, 1.0, 4.0 + std::pow(std::numbers::pi, 2) / 2.0, 1.0), 1.0, 1e-12);
  WavePacket wp{-100.0, 2.0, 1.0 / (2.0 * 0.001 * 2.0)};
  EXPECT_NEAR(rectangular_transmission_smeared(4.0, 1.0, wp, 1.0), t, 1e-4 * t);
}

TEST(Tdse, SnapshotRoundTrip) {
  const TdseRun done = propagate(free_run());
  const std::string path = ::testing::TempDir() + "tt_snapshot.bin";
  write_snapshot(path, done);
  const Snapshot s = read_snapshot(path);
  EXPECT_EQ(s.grid.n_points, done.grid.n_points);
  EXPECT_EQ(s.grid.x_min, done.grid.x_min);
  EXPECT_EQ(s.t_final, done.t_final);
  ASSERT_EQ(s.psi.size(), done.psi.size());
  for (std::size_t i = 0; i < s.psi.size(); ++i) ASSERT_EQ(s.psi[i], done.psi[i]);
  std::remove(path.c_str());
  EXPECT_THROW(read_snapshot(path), Error);
}
