#include "tabgrpo/common.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

namespace tabgrpo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchemaMismatch: return "schema mismatch";
    case ErrorCode::kRaggedRow: return "ragged row";
    case ErrorCode::kLabel: return "label error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kEmptySplit: return "empty split";
    case ErrorCode::kLookup: return "lookup error";
    case ErrorCode::kDecode: return "decode error";
    case ErrorCode::kContract: return "contract error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kNonFinite: return "non-finite value";
  }
  return "unknown error";
}

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kSpace);
  return text.substr(first, last - first + 1);
}

std::string normalize_label(std::string_view text) { return to_lower_ascii(trim(text)); }

}  // namespace tabgrpo
