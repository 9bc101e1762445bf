#include "doctest.h"

#include <string>
#include <vector>

#include "cacs/errors.hpp"
#include "cacs/rng.hpp"
#include "cacs/util.hpp"

using namespace cacs;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("base64 matches the RFC 4648 vectors") {
  CHECK(base64_encode(bytes("")) == "");
  CHECK(base64_encode(bytes("f")) == "Zg==");
  CHECK(base64_encode(bytes("fo")) == "Zm8=");
  CHECK(base64_encode(bytes("foo")) == "Zm9v");
  CHECK(base64_encode(bytes("foob")) == "Zm9vYg==");
  CHECK(base64_encode(bytes("fooba")) == "Zm9vYmE=");
  CHECK(base64_encode(bytes("foobar")) == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYmFy") == bytes("foobar"));
  CHECK(base64_decode("Zg==") == bytes("f"));
  CHECK(base64_decode("") == bytes(""));
}

TEST_CASE("base64 round-trips random binary buffers") {
  SplitMix64 r(31337);
  for (int len : {1, 2, 3, 63, 64, 65, 1000}) {
    std::vector<std::uint8_t> buf(len);
    for (auto& b : buf) b = static_cast<std::uint8_t>(r.next());
    CHECK(base64_decode(base64_encode(buf)) == buf);
  }
}

TEST_CASE("base64_decode rejects malformed input") {
  for (const char* bad : {"Zg", "Zg=", "Z===", "====", "Zm9v!A==", "=Zg=", "Zg==Zg=="}) {
    try {
      base64_decode(bad);
      FAIL("expected InvalidRequest for ", bad);
    } catch (const CacsError& e) {
      CHECK(e.code() == ErrorCode::InvalidRequest);
    }
  }
}

TEST_CASE("linear_fit recovers an exact line") {
  LinearFit f = linear_fit({0, 1, 2, 3, 4}, {2, 5, 8, 11, 14});
  CHECK(f.slope == doctest::Approx(3.0));
  CHECK(f.intercept == doctest::Approx(2.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}

TEST_CASE("linear_fit on scattered points") {
  LinearFit f = linear_fit({1, 2, 3, 4}, {1, 2, 2, 3});
  CHECK(f.slope == doctest::Approx(0.6));
  CHECK(f.intercept == doctest::Approx(0.5));
  CHECK(f.r_squared == doctest::Approx(0.9));
}

TEST_CASE("linear_fit degenerate inputs") {
  CHECK(linear_fit({}, {}).r_squared == 0.0);
  CHECK(linear_fit({1, 1, 1}, {1, 2, 3}).slope == 0.0);
  // Horizontal line: the fit is exact.
  CHECK(linear_fit({1, 2, 3}, {5, 5, 5}).r_squared == doctest::Approx(1.0));
}
