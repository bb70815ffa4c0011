#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace multidescent {

/// 12 significant digits, shortest form ("%.12g").
inline std::string format_sig12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Number formatting for JSON reports: fixed with 12 decimals when that
/// keeps at least 12 significant digits, scientific otherwise.
inline std::string format_report_number(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[64];
  const double ax = std::abs(x);
  if (ax == 0.0 || (ax >= 0.1 && ax < 1e15))
    std::snprintf(buf, sizeof buf, "%.12f", x);
  else
    std::snprintf(buf, sizeof buf, "%.11e", x);
  return buf;
}

}  // namespace multidescent
