#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace mvmdp {

// Rounded to 12 significant digits, so serialized output does not depend on shortest-float formatting.
inline double sig12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline std::string fmt12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace mvmdp
