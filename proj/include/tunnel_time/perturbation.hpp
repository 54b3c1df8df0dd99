#ifndef TUNNEL_TIME_PERTURBATION_HPP
#define TUNNEL_TIME_PERTURBATION_HPP

// Separable weak perturbation W(x, t) = w(x) theta_ab(x) Omega(t). Every
// built-in envelope is an entire function with real coefficients, so it can
// be evaluated anywhere in the complex time plane.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "tunnel_time/error.hpp"

namespace tunnel_time {

using cplx = std::complex<double>;

struct ConstantProfile {
  double value;
};

/// Smooth w(x). `slope` may be left empty; a central difference is used then.
struct SmoothProfile {
  std::function<double(double)> value;
  std::function<double(double)> slope;
};

class SpatialProfile {
 public:
  SpatialProfile(ConstantProfile c, double a, double b) : kind_(c), a_(a), b_(b) { check(); }
  SpatialProfile(SmoothProfile s, double a, double b) : kind_(std::move(s)), a_(a), b_(b) { check(); }

  static SpatialProfile step(double w0, double a, double b) { return SpatialProfile(ConstantProfile{w0}, a, b); }

  double a() const { return a_; }
  double b() const { return b_; }
  bool is_step() const { return std::holds_alternative<ConstantProfile>(kind_); }
  const std::variant<ConstantProfile, SmoothProfile>& kind() const { return kind_; }

  bool contains(double x) const { return x >= a_ && x <= b_; }

  /// w(x), ignoring the theta_ab window.
  double value(double x) const {
    if (const auto* c = std::get_if<ConstantProfile>(&kind_)) return c->value;
    return std::get<SmoothProfile>(kind_).value(x);
  }

  double slope(double x) const {
    if (is_step()) return 0.0;
    const auto& s = std::get<SmoothProfile>(kind_);
    if (s.slope) return s.slope(x);
    const double h = 1e-5 * std::max(1.0, b_ - a_);
    return (s.value(x + h) - s.value(x - h)) / (2.0 * h);
  }

  /// max |w| over [a,b], sampled for smooth profiles.
  double max_abs() const {
    if (const auto* c = std::get_if<ConstantProfile>(&kind_)) return std::abs(c->value);
    double m = 0.0;
    constexpr int n = 512;
    for (int i = 0; i <= n; ++i) m = std::max(m, std::abs(value(a_ + (b_ - a_) * i / n)));
    return m;
  }

 private:
  void check() const {
    require(std::isfinite(a_) && std::isfinite(b_) && a_ < b_, Errc::InvalidArgument, "perturbation region needs a < b");
    if (const auto* c = std::get_if<ConstantProfile>(&kind_)) {
      require(std::isfinite(c->value), Errc::InvalidArgument, "step height must be finite");
    } else {
      require(static_cast<bool>(std::get<SmoothProfile>(kind_).value), Errc::InvalidArgument,
              "smooth profile needs a callable");
    }
  }

  std::variant<ConstantProfile, SmoothProfile> kind_;
  double a_, b_;
};

struct ConstantEnvelope {
  double value = 1.0;
};

/// cos(omega tau + phase).
struct HarmonicEnvelope {
  double frequency = 0.0;
  double phase = 0.0;
};

struct GaussianPulse {
  int label = 0;           // pulse index n
  double amplitude = 1.0;  // beta_n
  double center = 0.0;     // n T
  double width = 1.0;      // Delta t
};

struct GaussianTrain {
  std::vector<GaussianPulse> pulses;

  /// Pulses n = first..last with equal amplitude, centred at offset + n*period.
  static GaussianTrain uniform(int first, int last, double amplitude, double period, double width,
                               double offset = 0.0) {
    GaussianTrain t;
    for (int n = first; n <= last; ++n) t.pulses.push_back({n, amplitude, offset + n * period, width});
    return t;
  }
};

/// User envelope. Off the real axis it is only evaluated when
/// `complex_extension` declares the callable analytic there.
struct CustomEnvelope {
  std::function<cplx(cplx)> function;
  bool complex_extension = false;
  double time_scale = std::numeric_limits<double>::infinity();
};

using Envelope = std::variant<ConstantEnvelope, HarmonicEnvelope, GaussianTrain, CustomEnvelope>;

inline void validate(const Envelope& env) {
  if (const auto* h = std::get_if<HarmonicEnvelope>(&env)) {
    require(h->frequency >= 0.0 && std::isfinite(h->frequency), Errc::InvalidArgument, "harmonic frequency must be >= 0");
  } else if (const auto* g = std::get_if<GaussianTrain>(&env)) {
    require(!g->pulses.empty(), Errc::InvalidArgument, "Gaussian train has no pulses");
    for (std::size_t i = 0; i < g->pulses.size(); ++i) {
      require(g->pulses[i].width > 0.0, Errc::InvalidArgument, "pulse width must be > 0");
      if (i > 0) {
        require(g->pulses[i].center > g->pulses[i - 1].center, Errc::InvalidArgument,
                "pulse centres must be strictly increasing");
      }
    }
  } else if (const auto* c = std::get_if<CustomEnvelope>(&env)) {
    require(static_cast<bool>(c->function), Errc::InvalidArgument, "custom envelope needs a callable");
  }
}

inline cplx gaussian_pulse(const GaussianPulse& p, cplx tau) {
  const cplx s = (tau - p.center) / p.width;
  return p.amplitude * std::exp(-s * s);
}

/// Omega(tau) for complex tau.
inline cplx omega(const Envelope& env, cplx tau) {
  return std::visit(
      [&](const auto& e) -> cplx {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ConstantEnvelope>) {
          return e.value;
        } else if constexpr (std::is_same_v<E, HarmonicEnvelope>) {
          return std::cos(e.frequency * tau + e.phase);
        } else if constexpr (std::is_same_v<E, GaussianTrain>) {
          cplx sum = 0.0;
          for (const auto& p : e.pulses) sum += gaussian_pulse(p, tau);
          return sum;
        } else {
          if (tau.imag() != 0.0 && !e.complex_extension) {
            throw Error(Errc::ComplexExtensionUnavailable, "custom envelope evaluated off the real axis");
          }
          return e.function(tau);
        }
      },
      env);
}

/// Omega(t1) - Omega(t0), without cancellation for harmonic envelopes.
inline cplx omega_difference(const Envelope& env, cplx t1, cplx t0) {
  if (const auto* h = std::get_if<HarmonicEnvelope>(&env)) {
    const cplx mean = h->frequency * (t1 + t0) / 2.0 + h->phase;
    return -2.0 * std::sin(mean) * std::sin(h->frequency * (t1 - t0) / 2.0);
  }
  return omega(env, t1) - omega(env, t0);
}

/// d^order Omega / d tau^order, order in {0, 1, 2}.
inline cplx omega_derivative(const Envelope& env, cplx tau, int order) {
  require(order >= 0 && order <= 2, Errc::InvalidArgument, "derivative order must be 0, 1 or 2");
  if (order == 0) return omega(env, tau);
  return std::visit(
      [&](const auto& e) -> cplx {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ConstantEnvelope>) {
          return 0.0;
        } else if constexpr (std::is_same_v<E, HarmonicEnvelope>) {
          const cplx arg = e.frequency * tau + e.phase;
          return order == 1 ? -e.frequency * std::sin(arg) : -e.frequency * e.frequency * std::cos(arg);
        } else if constexpr (std::is_same_v<E, GaussianTrain>) {
          cplx sum = 0.0;
          for (const auto& p : e.pulses) {
            const cplx s = (tau - p.center) / p.width;
            const cplx g = gaussian_pulse(p, tau);
            sum += order == 1 ? g * (-2.0 * s / p.width) : g * (4.0 * s * s - 2.0) / (p.width * p.width);
          }
          return sum;
        } else {
          const double h = std::isfinite(e.time_scale) ? 1e-4 * e.time_scale : 1e-4 * std::max(1.0, std::abs(tau));
          const cplx fp = omega(env, tau + h);
          const cplx fm = omega(env, tau - h);
          if (order == 1) return (fp - fm) / (2.0 * h);
          return (fp - 2.0 * omega(env, tau) + fm) / (h * h);
        }
      },
      env);
}

/// Characteristic time over which Omega changes; infinite for static envelopes.
inline double time_scale(const Envelope& env) {
  return std::visit(
      [](const auto& e) -> double {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ConstantEnvelope>) {
          return std::numeric_limits<double>::infinity();
        } else if constexpr (std::is_same_v<E, HarmonicEnvelope>) {
          return e.frequency > 0.0 ? 1.0 / e.frequency : std::numeric_limits<double>::infinity();
        } else if constexpr (std::is_same_v<E, GaussianTrain>) {
          double w = std::numeric_limits<double>::infinity();
          for (const auto& p : e.pulses) w = std::min(w, p.width);
          return w;
        } else {
          return e.time_scale;
        }
      },
      env);
}

/// Upper bound of |Omega| on the real axis.
inline double amplitude_bound(const Envelope& env) {
  return std::visit(
      [](const auto& e) -> double {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ConstantEnvelope>) {
          return std::abs(e.value);
        } else if constexpr (std::is_same_v<E, HarmonicEnvelope>) {
          return 1.0;
        } else if constexpr (std::is_same_v<E, GaussianTrain>) {
          double m = 0.0;
          for (const auto& p : e.pulses) m = std::max(m, std::abs(p.amplitude));
          return m;
        } else {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      env);
}

class Perturbation {
 public:
  Perturbation(SpatialProfile spatial, Envelope temporal) : spatial_(std::move(spatial)), temporal_(std::move(temporal)) {
    validate(temporal_);
  }

  const SpatialProfile& spatial() const { return spatial_; }
  const Envelope& temporal() const { return temporal_; }

  /// W(x, tau); zero outside [a,b] for every tau.
  cplx evaluate(double x, cplx tau) const {
    if (!spatial_.contains(x)) return 0.0;
    return spatial_.value(x) * omega(temporal_, tau);
  }

  /// Same perturbation with a different envelope.
  Perturbation with_envelope(Envelope env) const { return Perturbation(spatial_, std::move(env)); }

 private:
  SpatialProfile spatial_;
  Envelope temporal_;
};

inline cplx evaluate_W(const Perturbation& p, double x, cplx tau) { return p.evaluate(x, tau); }

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_PERTURBATION_HPP
