#ifndef TUNNEL_TIME_ERROR_HPP
#define TUNNEL_TIME_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace tunnel_time {

enum class Errc {
  InvalidArgument,
  NonConvergence,
  NonFinite,
  NoSignChange,
  TargetOutOfRange,
  ExtrapolationOutsideTable,
  DiscontinuityPoint,
  DegenerateEnergy,
  ComplexExtensionUnavailable,
  ClassicallyForbiddenInside,
  RegionOutsideDomain,
  NotForbidden,
  StabilityViolation,
  GridTooCoarse,
  DomainTooSmall,
  ProbeInsideBarrier,
  MismatchedRuns,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NoSignChange: return "NoSignChange";
    case Errc::TargetOutOfRange: return "TargetOutOfRange";
    case Errc::ExtrapolationOutsideTable: return "ExtrapolationOutsideTable";
    case Errc::DiscontinuityPoint: return "DiscontinuityPoint";
    case Errc::DegenerateEnergy: return "DegenerateEnergy";
    case Errc::ComplexExtensionUnavailable: return "ComplexExtensionUnavailable";
    case Errc::ClassicallyForbiddenInside: return "ClassicallyForbiddenInside";
    case Errc::RegionOutsideDomain: return "RegionOutsideDomain";
    case Errc::NotForbidden: return "NotForbidden";
    case Errc::StabilityViolation: return "StabilityViolation";
    case Errc::GridTooCoarse: return "GridTooCoarse";
    case Errc::DomainTooSmall: return "DomainTooSmall";
    case Errc::ProbeInsideBarrier: return "ProbeInsideBarrier";
    case Errc::MismatchedRuns: return "MismatchedRuns";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers which
/// precondition or numerical failure occurred.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_ERROR_HPP
