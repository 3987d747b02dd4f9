#pragma once

#include <stdexcept>
#include <string>

namespace qpbs {

enum class Errc {
  invalid_argument,
  in_band_without_branch,
  no_symmetric_root,
  merged_into_continuum,
  band_ambiguous,
  pole_hit,
  degenerate_residue,
  incomplete_pair,
  band_incomplete,
  not_converged,
  sector_too_large,
  sector_drift,
  window_too_small,
  fit_failure,
  io_error,
};

inline const char* to_string(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::in_band_without_branch: return "in-band without branch request";
    case Errc::no_symmetric_root: return "no symmetric root";
    case Errc::merged_into_continuum: return "undefined: anti-symmetric state merged into continuum";
    case Errc::band_ambiguous: return "band identification ambiguous";
    case Errc::pole_hit: return "evaluated at a two-particle pole";
    case Errc::degenerate_residue: return "pole too close to a denominator";
    case Errc::incomplete_pair: return "doublon pair incomplete";
    case Errc::band_incomplete: return "band incomplete";
    case Errc::not_converged: return "not converged";
    case Errc::sector_too_large: return "sector too large";
    case Errc::sector_drift: return "excitation sector drift";
    case Errc::window_too_small: return "window too small";
    case Errc::fit_failure: return "fit failure";
    case Errc::io_error: return "i/o error";
  }
  return "unknown";
}

// All library failures are reported through this type; `code()` identifies the
// failure class, `what()` carries the detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code) {}
  explicit Error(Errc code) : Error(code, "") {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(Errc::invalid_argument, what);
}

}  // namespace qpbs
