#pragma once

#include <charconv>
#include <string>

namespace omegaflow {

// Shortest round-trip decimal form, locale independent; inf/nan spelled out.
inline std::string fmt_num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace omegaflow
