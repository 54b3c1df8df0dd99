#ifndef TUNNEL_TIME_IO_HPP
#define TUNNEL_TIME_IO_HPP

// Text output shared by the CLI and tests. Numbers are written with 12
// significant digits, '.' as decimal separator and '\n' line endings.

#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tunnel_time/kinematics.hpp"
#include "tunnel_time/phases.hpp"
#include "tunnel_time/tdse.hpp"

namespace tunnel_time {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// JSON number rounded to 12 significant digits; non-finite values become
/// strings because JSON has no literal for them.
inline nlohmann::json jnum(double v) {
  if (!std::isfinite(v)) return fmt(v);
  return nlohmann::json::parse(fmt(v));
}

inline nlohmann::json jcplx(cplx z) { return {{"re", jnum(z.real())}, {"im", jnum(z.imag())}}; }

inline nlohmann::json jscaled(const ScaledComplex& s) {
  return {{"mantissa", jcplx(s.mantissa)}, {"log_scale", jnum(s.log_scale)}, {"log_abs", jnum(s.log_abs())}};
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(fmt(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

inline void write_table_csv(std::ostream& os, const std::vector<PulseRatioRow>& rows) {
  CsvWriter w(os);
  w.header({"n", "ratio_allowed", "ratio_forbidden"});
  for (const auto& r : rows) w.row_strings({std::to_string(r.n), fmt(r.ratio_allowed), fmt(r.ratio_forbidden)});
}

inline nlohmann::json table_json(const std::vector<PulseRatioRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"n", r.n},
                   {"ratio_allowed", jnum(r.ratio_allowed)},
                   {"ratio_forbidden", jnum(r.ratio_forbidden)},
                   {"s1_allowed", jscaled(r.s1_allowed)},
                   {"s1_forbidden", jscaled(r.s1_forbidden)}});
  }
  return out;
}

/// Samples each contour segment at equal steps of its own length.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int samples_per_segment = 100) {
  CsvWriter w(os);
  w.header({"re_tau", "im_tau", "x"});
  const auto& segs = tr.contour().segments;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const auto& sg = segs[k];
    if (sg.start == sg.end) continue;
    for (int i = 0; i <= samples_per_segment; ++i) {
      if (i == 0 && k > 0) continue;  // shared corner
      const cplx tau = sg.start + (sg.end - sg.start) * (double(i) / samples_per_segment);
      double x;
      if (i == 0) {
        x = sg.x_range.lo;
      } else if (i == samples_per_segment) {
        x = sg.x_range.hi;
      } else {
        x = tr.position_at(tau);
      }
      w.row({tau.real(), tau.imag(), x});
    }
  }
}

inline void write_records_csv(std::ostream& os, const TdseRun& run) {
  CsvWriter w(os);
  w.header({"t", "norm_T", "density_probe", "current_probe"});
  for (const auto& r : run.records) w.row({r.t, r.norm_transmitted, r.density_probe, r.current_probe});
}

inline nlohmann::json validity_json(const ValidityReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"ratio", jnum(c.ratio)}, {"limit", jnum(c.limit)}, {"ok", c.ok},
                      {"margin", jnum(c.margin())}});
  }
  return {{"regime", to_string(r.regime)},
          {"action", jnum(r.action)},
          {"s1_modulus", jnum(r.s1_modulus)},
          {"s2_estimate", jnum(r.s2_estimate)},
          {"adiabatic_ratio", jnum(r.adiabatic_ratio)},
          {"checks", checks},
          {"flags", r.flags}};
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_IO_HPP
