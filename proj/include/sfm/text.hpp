#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sfm {

/// Shortest decimal form that parses back to the same double.
std::string format_real(double v);
double parse_real(const std::string& s);

/// FNV-1a 64-bit hash, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::string_view bytes);

}  // namespace sfm
