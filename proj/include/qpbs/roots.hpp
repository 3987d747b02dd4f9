#pragma once

// Bracketed 1D root finding. Every caller in this library works with functions
// that are monotone between known poles, so plain bisection is sufficient and
// never leaves its bracket.

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace qpbs::roots {

// Bisects f on [lo, hi] down to adjacent doubles. Requires f(lo) and f(hi) of
// opposite sign (zero at an end point is accepted). Returns the end point with
// the smaller |f|.
template <class F>
double bisect(F&& f, double lo, double hi, double flo, double fhi) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return std::abs(flo) <= std::abs(fhi) ? lo : hi;
}

template <class F>
double bisect(F&& f, double lo, double hi) {
  return bisect(f, lo, hi, f(lo), f(hi));
}

// Scans `probes` (sorted ascending) for the first sign change of f and bisects
// it. Returns nullopt when f keeps one sign on every probe.
template <class F>
std::optional<double> first_sign_change(F&& f, const std::vector<double>& probes) {
  if (probes.size() < 2) return std::nullopt;
  double x0 = probes.front();
  double f0 = f(x0);
  for (std::size_t i = 1; i < probes.size(); ++i) {
    const double x1 = probes[i];
    const double f1 = f(x1);
    if (f0 == 0.0) return x0;
    if ((f0 < 0.0) != (f1 < 0.0) || f1 == 0.0) return bisect(f, x0, x1, f0, f1);
    x0 = x1;
    f0 = f1;
  }
  return std::nullopt;
}

// Log-spaced probes approaching `edge` from below, starting at `edge - span`.
inline std::vector<double> log_probes_below(double edge, double span, double closest, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  const double a = std::log(span);
  const double b = std::log(closest);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(edge - std::exp(a + (b - a) * t));
  }
  return out;
}

// Log-spaced probes leaving `edge` upward, ascending from `edge + closest`
// to `edge + span`.
inline std::vector<double> log_probes_above(double edge, double span, double closest, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  const double a = std::log(closest);
  const double b = std::log(span);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(edge + std::exp(a + (b - a) * t));
  }
  return out;
}

}  // namespace qpbs::roots
