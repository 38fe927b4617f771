#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tabgrpo {

enum class ErrorCode {
  kSchemaMismatch,
  kRaggedRow,
  kLabel,
  kConfig,
  kEmptySplit,
  kLookup,
  kDecode,
  kContract,
  kIo,
  kNonFinite,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::kContract, what);
}

using Rng = std::mt19937_64;

// Uniform draw in [0, 1) with 53 bits, independent of the standard library's
// distribution implementations so sequences match across toolchains.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; one draw per call.
double standard_normal(Rng& rng);

// Fisher-Yates with uniform01, portable across standard libraries.
template <typename It>
void portable_shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(uniform01(rng) * static_cast<double>(i + 1));
    using std::swap;
    swap(first[i], first[j]);
  }
}

// ASCII lowercase plus trimming of spaces, tabs and newlines.
std::string normalize_label(std::string_view text);
std::string to_lower_ascii(std::string_view text);
std::string_view trim(std::string_view text);

}  // namespace tabgrpo
