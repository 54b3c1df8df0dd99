#ifndef TUNNEL_TIME_TDSE_HPP
#define TUNNEL_TIME_TDSE_HPP

// Split-operator propagation of a Gaussian packet through V(x) + W(x,t) on a
// periodic grid, used as an independent check of the semiclassical phases.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tunnel_time/error.hpp"
#include "tunnel_time/perturbation.hpp"
#include "tunnel_time/potential.hpp"

namespace tunnel_time {

struct Grid {
  double x_min = -330.0;
  double x_max = 150.0;
  std::size_t n_points = 8192;
  double dt = 0.004;
  double t_max = 30.0;

  double dx() const { return (x_max - x_min) / double(n_points); }
  double x(std::size_t i) const { return x_min + dx() * double(i); }
  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

  void validate() const {
    require(x_max > x_min, Errc::InvalidArgument, "grid needs x_max > x_min");
    require(n_points >= 16 && (n_points & (n_points - 1)) == 0, Errc::InvalidArgument,
            "grid point count must be a power of two");
    require(dt > 0.0 && t_max > 0.0, Errc::InvalidArgument, "grid needs dt > 0 and t_max > 0");
  }
};

struct WavePacket {
  double x0 = -90.0;
  double p0 = std::sqrt(40.0);
  double sigma_x = 50.0;

  double sigma_p() const { return 1.0 / (2.0 * sigma_x); }
};

struct TdseRecord {
  double t;
  double norm_transmitted;  // integral of |psi|^2 for x > x_cut
  double density_probe;
  double current_probe;
  double norm_total;
};

struct TdseRun {
  Grid grid;
  WavePacket packet;
  Potential potential;
  std::optional<Perturbation> perturbation;
  double mass = 1.0;
  double x_probe = 60.0;
  double x_cut = 30.0;
  std::size_t record_stride = 50;

  std::vector<TdseRecord> records;
  std::vector<std::complex<double>> psi;  // state at t_max once propagated
  double t_final = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// One forward/backward plan pair on a private buffer.
class FftPair {
 public:
  explicit FftPair(std::size_t n) : buf_(n) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
    fwd_ = fftw_plan_dft_1d(int(n), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(int(n), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;
  ~FftPair() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  std::vector<std::complex<double>>& data() { return buf_; }
  void forward() { fftw_execute(fwd_); }
  void backward() {
    fftw_execute(bwd_);
    const double s = 1.0 / double(buf_.size());
    for (auto& v : buf_) v *= s;
  }

 private:
  std::vector<std::complex<double>> buf_;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

inline std::vector<double> wavenumbers(const Grid& g) {
  const std::size_t n = g.n_points;
  const double dk = 2.0 * std::numbers::pi / (g.x_max - g.x_min);
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = dk * (i < n / 2 ? double(i) : double(i) - double(n));
  return k;
}

// Cell-averaged sample on [x - dx/2, x + dx/2] so that jumps of a step enter
// with their fractional overlap.
inline double cell_average(double x, double dx, double lo, double hi) {
  const double l = std::max(x - 0.5 * dx, lo);
  const double r = std::min(x + 0.5 * dx, hi);
  return r > l ? (r - l) / dx : 0.0;
}

inline std::vector<double> sample_potential(const Potential& pot, const Grid& g) {
  std::vector<double> v(g.n_points);
  const double dx = g.dx();
  const auto* rect = std::get_if<RectangularShape>(&pot.shape());
  for (std::size_t i = 0; i < g.n_points; ++i) {
    const double x = g.x(i);
    v[i] = rect ? rect->height * cell_average(x, dx, rect->left, rect->right) : pot.evaluate_or_zero(x);
  }
  return v;
}

inline std::vector<double> sample_profile(const SpatialProfile& w, const Grid& g) {
  std::vector<double> out(g.n_points, 0.0);
  const double dx = g.dx();
  for (std::size_t i = 0; i < g.n_points; ++i) {
    const double x = g.x(i);
    if (w.is_step()) {
      out[i] = w.value(x) * cell_average(x, dx, w.a(), w.b());
    } else if (w.contains(x)) {
      out[i] = w.value(x);
    }
  }
  return out;
}

}  // namespace detail

/// Checks grid resolution, step size and boundary padding for a run.
inline void validate(const TdseRun& run) {
  const Grid& g = run.grid;
  g.validate();
  const WavePacket& wp = run.packet;
  require(run.mass > 0.0, Errc::InvalidArgument, "mass must be positive");
  require(wp.p0 > 0.0 && wp.sigma_x > 0.0, Errc::InvalidArgument, "packet needs p0 > 0 and sigma_x > 0");
  require(run.record_stride >= 1, Errc::InvalidArgument, "record stride must be >= 1");
  const double p_max = wp.p0 + 6.0 * wp.sigma_p();
  if (g.dx() > 2.0 * std::numbers::pi / (8.0 * p_max)) {
    throw Error(Errc::GridTooCoarse, "dx = " + std::to_string(g.dx()) + " does not resolve the wavelength at p = " +
                                         std::to_string(p_max));
  }
  double wmax = 0.0;
  if (run.perturbation) {
    double amp = amplitude_bound(run.perturbation->temporal());
    if (!std::isfinite(amp)) amp = 1.0;
    wmax = run.perturbation->spatial().max_abs() * amp;
  }
  const double vmax = std::max(0.0, run.potential.max_value()) + wmax;
  if (g.dt * (vmax + p_max * p_max / (2.0 * run.mass)) > 1.0) {
    throw Error(Errc::GridTooCoarse, "dt too large for the potential and kinetic energy scales");
  }
  const double reach = 6.0 * wp.sigma_x + wp.p0 * g.t_max / run.mass;
  if (wp.x0 - reach < g.x_min || wp.x0 + reach > g.x_max) {
    throw Error(Errc::DomainTooSmall, "domain must extend " + std::to_string(reach) + " either side of x0");
  }
  const Interval sup = run.potential.support();
  double upstream = sup.lo;
  if (std::holds_alternative<FreeShape>(run.potential.shape())) upstream = std::numeric_limits<double>::infinity();
  if (run.perturbation) upstream = std::min(upstream, run.perturbation->spatial().a());
  require(wp.x0 + 6.0 * wp.sigma_x <= upstream, Errc::InvalidArgument,
          "initial packet overlaps the barrier or the perturbation region");
}

namespace detail {

// Band-limited value and derivative at x from the spectrum of psi.
inline std::pair<std::complex<double>, std::complex<double>> spectral_probe(
    const std::vector<std::complex<double>>& spec, const std::vector<double>& k, const Grid& g, double x) {
  std::complex<double> v{}, d{};
  const double s = x - g.x_min;
  const std::size_t n = spec.size();
  for (std::size_t i = 0; i < n; ++i) {
    // The Nyquist mode is dropped; it carries no resolved physics.
    if (i == n / 2) continue;
    const std::complex<double> e = spec[i] * std::polar(1.0, k[i] * s);
    v += e;
    d += std::complex<double>(0.0, k[i]) * e;
  }
  const double inv = 1.0 / double(n);
  return {v * inv, d * inv};
}

}  // namespace detail

/// Runs the split-operator scheme to t_max, appending records every
/// record_stride steps and at the final time.
inline TdseRun propagate(TdseRun run) {
  validate(run);
  const Grid& g = run.grid;
  const std::size_t n = g.n_points;
  const double dx = g.dx();
  const auto k = detail::wavenumbers(g);
  const auto v = detail::sample_potential(run.potential, g);
  std::vector<double> w;
  const Envelope* env = nullptr;
  bool static_w = true;
  if (run.perturbation) {
    w = detail::sample_profile(run.perturbation->spatial(), g);
    env = &run.perturbation->temporal();
    static_w = std::holds_alternative<ConstantEnvelope>(*env);
  }

  detail::FftPair fft(n);
  auto& psi = fft.data();
  // A run that already carries a state resumes from it at t_final.
  const bool resume = !run.psi.empty();
  const double t0 = resume ? run.t_final : 0.0;
  if (resume) {
    require(run.psi.size() == n, Errc::InvalidArgument, "stored state does not match the grid");
    require(t0 < g.t_max, Errc::InvalidArgument, "stored state is already at t_max");
    psi = run.psi;
  } else {
    const WavePacket& wp = run.packet;
    const double s2 = wp.sigma_x * wp.sigma_x;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g.x(i), d = x - wp.x0;
      psi[i] = std::polar(std::exp(-d * d / (4.0 * s2)), wp.p0 * x);
      norm += std::norm(psi[i]);
    }
    const double c = 1.0 / std::sqrt(norm * dx);
    for (auto& z : psi) z *= c;
  }

  std::vector<std::complex<double>> kinetic(n), half(n);
  for (std::size_t i = 0; i < n; ++i) kinetic[i] = std::polar(1.0, -k[i] * k[i] * g.dt / (2.0 * run.mass));
  auto fill_half = [&](double t_mid) {
    const double om = env ? omega(*env, t_mid).real() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vt = v[i] + (env ? w[i] * om : 0.0);
      half[i] = std::polar(1.0, -vt * g.dt / 2.0);
    }
  };
  if (static_w) fill_half(0.0);

  std::vector<std::complex<double>> scratch(n);
  detail::FftPair probe_fft(n);
  auto record = [&](double t) {
    TdseRecord r{t, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::norm(psi[i]) * dx;
      r.norm_total += p;
      if (g.x(i) > run.x_cut) r.norm_transmitted += p;
    }
    probe_fft.data() = psi;
    probe_fft.forward();
    const auto [val, der] = detail::spectral_probe(probe_fft.data(), k, g, run.x_probe);
    r.density_probe = std::norm(val);
    r.current_probe = std::imag(std::conj(val) * der) / run.mass;
    run.records.push_back(r);
  };

  const std::size_t steps = static_cast<std::size_t>(std::llround((g.t_max - t0) / g.dt));
  if (!resume) record(0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + double(s) * g.dt;
    if (!static_w) fill_half(t + 0.5 * g.dt);
    for (std::size_t i = 0; i < n; ++i) psi[i] *= half[i];
    fft.forward();
    for (std::size_t i = 0; i < n; ++i) psi[i] *= kinetic[i];
    fft.backward();
    for (std::size_t i = 0; i < n; ++i) psi[i] *= half[i];
    if ((s + 1) % run.record_stride == 0 || s + 1 == steps) record(t0 + double(s + 1) * g.dt);
  }
  run.t_final = t0 + double(steps) * g.dt;

  const double drift = std::abs(run.records.back().norm_total - 1.0);
  if (drift > 1e-6) {
    throw Error(Errc::StabilityViolation, "norm drifted by " + std::to_string(drift));
  }
  run.psi = psi;
  return run;
}

struct TransmittedObservables {
  double norm_transmitted;  // position cut x > x_cut at t_final
  double norm_band;         // spectral weight with k > 0 and |k - p0| < 8 sigma_p
  std::vector<double> t;
  std::vector<double> density_probe;
  std::vector<double> current_probe;
};

inline constexpr double kBandHalfWidth = 8.0;

/// Transmitted weight and probe series of a completed run.
inline TransmittedObservables transmitted_observables(const TdseRun& run, std::optional<double> x_probe = std::nullopt) {
  require(!run.psi.empty(), Errc::InvalidArgument, "run has not been propagated");
  const double xp = x_probe.value_or(run.x_probe);
  const Interval sup = run.potential.support();
  double downstream = std::holds_alternative<FreeShape>(run.potential.shape()) ? -std::numeric_limits<double>::infinity()
                                                                               : sup.hi;
  if (run.perturbation) downstream = std::max(downstream, run.perturbation->spatial().b());
  if (xp <= downstream) throw Error(Errc::ProbeInsideBarrier, "probe must lie downstream of barrier and region");

  TransmittedObservables out{};
  const Grid& g = run.grid;
  const double dx = g.dx();
  for (std::size_t i = 0; i < g.n_points; ++i) {
    if (g.x(i) > run.x_cut) out.norm_transmitted += std::norm(run.psi[i]) * dx;
  }
  detail::FftPair fft(g.n_points);
  fft.data() = run.psi;
  fft.forward();
  const auto k = detail::wavenumbers(g);
  const double dk = k[1] - k[0];
  const double sp = run.packet.sigma_p();
  for (std::size_t i = 0; i < g.n_points; ++i) {
    if (k[i] > 0.0 && std::abs(k[i] - run.packet.p0) < kBandHalfWidth * sp) {
      out.norm_band += std::norm(fft.data()[i] * dx) * dk / (2.0 * std::numbers::pi);
    }
  }
  if (xp == run.x_probe) {
    for (const auto& r : run.records) {
      out.t.push_back(r.t);
      out.density_probe.push_back(r.density_probe);
      out.current_probe.push_back(r.current_probe);
    }
  } else {
    // Only the final state is available for a probe other than the recorded one.
    const auto [val, der] = detail::spectral_probe(fft.data(), k, g, xp);
    out.t.push_back(run.t_final);
    out.density_probe.push_back(std::norm(val));
    out.current_probe.push_back(std::imag(std::conj(val) * der) / run.mass);
  }
  return out;
}

struct TdseComparison {
  double norm_unperturbed;
  double norm_perturbed;
  double log_ratio;   // ln(norm_perturbed / norm_unperturbed)
  double predicted;   // -2 Im S1
  double abs_error;
  double rel_error;   // abs_error / |predicted|; 0 when both vanish
  double smearing;    // spread of the prediction over +-sigma_p, if supplied
  std::optional<double> current_modulation;  // relative current change at the probe, final time
};

inline void require_matching(const TdseRun& a, const TdseRun& b) {
  const bool same = a.grid.x_min == b.grid.x_min && a.grid.x_max == b.grid.x_max &&
                    a.grid.n_points == b.grid.n_points && a.grid.dt == b.grid.dt && a.grid.t_max == b.grid.t_max &&
                    a.packet.x0 == b.packet.x0 && a.packet.p0 == b.packet.p0 &&
                    a.packet.sigma_x == b.packet.sigma_x && a.mass == b.mass && a.x_probe == b.x_probe;
  if (!same) throw Error(Errc::MismatchedRuns, "runs do not share grid and packet");
  require(!a.psi.empty() && !b.psi.empty(), Errc::InvalidArgument, "both runs must be propagated");
}

/// Log-ratio of transmitted weights against -2 Im S1 of the prediction.
inline TdseComparison compare_semiclassical(const TdseRun& unperturbed, const TdseRun& perturbed,
                                            double predicted_im_s1, double smearing = 0.0) {
  require_matching(unperturbed, perturbed);
  const auto a = transmitted_observables(unperturbed);
  const auto b = transmitted_observables(perturbed);
  TdseComparison c{};
  c.norm_unperturbed = a.norm_band;
  c.norm_perturbed = b.norm_band;
  c.log_ratio = std::log(b.norm_band / a.norm_band);
  c.predicted = -2.0 * predicted_im_s1;
  c.abs_error = std::abs(c.log_ratio - c.predicted);
  c.rel_error = c.predicted == 0.0 ? (c.abs_error == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                   : c.abs_error / std::abs(c.predicted);
  c.smearing = smearing;
  const double j0 = a.current_probe.back();
  if (j0 != 0.0) c.current_modulation = b.current_probe.back() / j0 - 1.0;
  return c;
}

/// Closed-form transmission probability of a rectangular barrier.
inline double rectangular_transmission(double height, double width, double energy, double mass) {
  require(height > 0.0 && width > 0.0 && energy > 0.0 && mass > 0.0, Errc::InvalidArgument,
          "rectangular transmission needs positive parameters");
  const double v2 = height * height;
  if (energy < height) {
    const double s = std::sinh(std::sqrt(2.0 * mass * (height - energy)) * width);
    return 1.0 / (1.0 + v2 * s * s / (4.0 * energy * (height - energy)));
  }
  if (energy == height) return 1.0 / (1.0 + mass * width * width * height / 2.0);
  const double s = std::sin(std::sqrt(2.0 * mass * (energy - height)) * width);
  return 1.0 / (1.0 + v2 * s * s / (4.0 * energy * (energy - height)));
}

/// |t(E)|^2 averaged over the packet's Gaussian momentum distribution.
inline double rectangular_transmission_smeared(double height, double width, const WavePacket& wp, double mass) {
  const double sp = wp.sigma_p();
  double num = 0.0, den = 0.0;
  constexpr int n = 801;
  for (int i = 0; i < n; ++i) {
    const double p = wp.p0 + sp * (-8.0 + 16.0 * i / (n - 1));
    if (p <= 0.0) continue;
    const double g = std::exp(-(p - wp.p0) * (p - wp.p0) / (2.0 * sp * sp));
    num += g * rectangular_transmission(height, width, p * p / (2.0 * mass), mass);
    den += g;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Output

/// Snapshot layout: 8-byte magic "TTPSI001", then float64 x_min, x_max,
/// n_points, dt, t_max, t_final, mass, followed by n_points float64 real parts
/// and n_points float64 imaginary parts, all little-endian as in memory.
inline void write_snapshot(const std::string& path, const TdseRun& run) {
  require(!run.psi.empty(), Errc::InvalidArgument, "run has not been propagated");
  std::ofstream os(path, std::ios::binary);
  require(os.good(), Errc::InvalidArgument, "cannot write snapshot " + path);
  os.write("TTPSI001", 8);
  const double header[7] = {run.grid.x_min, run.grid.x_max, double(run.grid.n_points), run.grid.dt,
                            run.grid.t_max, run.t_final,    run.mass};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  for (const auto& z : run.psi) {
    const double re = z.real();
    os.write(reinterpret_cast<const char*>(&re), sizeof re);
  }
  for (const auto& z : run.psi) {
    const double im = z.imag();
    os.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
}

struct Snapshot {
  Grid grid;
  double t_final;
  double mass;
  std::vector<std::complex<double>> psi;
};

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::InvalidArgument, "cannot open snapshot " + path);
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, "TTPSI001", 8) == 0, Errc::InvalidArgument, "not a snapshot file");
  double h[7];
  is.read(reinterpret_cast<char*>(h), sizeof h);
  Snapshot s{{h[0], h[1], static_cast<std::size_t>(h[2]), h[3], h[4]}, h[5], h[6], {}};
  std::vector<double> re(s.grid.n_points), im(s.grid.n_points);
  is.read(reinterpret_cast<char*>(re.data()), std::streamsize(re.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(im.data()), std::streamsize(im.size() * sizeof(double)));
  require(is.good(), Errc::InvalidArgument, "truncated snapshot");
  s.psi.resize(s.grid.n_points);
  for (std::size_t i = 0; i < s.psi.size(); ++i) s.psi[i] = {re[i], im[i]};
  return s;
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_TDSE_HPP
