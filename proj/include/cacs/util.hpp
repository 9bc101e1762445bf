#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cacs {

std::string base64_encode(std::span<const std::uint8_t> data);

// Throws CacsError(InvalidRequest) on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Least-squares fit y = a + b*x. Returns {intercept, slope, r_squared}.
struct LinearFit {
  double intercept = 0;
  double slope = 0;
  double r_squared = 0;
};
LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace cacs
