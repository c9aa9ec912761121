#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace edre {

// Four-point clarity scale, ordered least clear to most clear. The ordinal
// values are part of the persisted formats; do not reorder.
enum class Clarity : uint8_t {
  Unclear = 0,
  SomewhatUnclear = 1,
  SomewhatClear = 2,
  Clear = 3,
};

inline constexpr int kClarityCount = 4;

inline constexpr Clarity kAllClarity[kClarityCount] = {
    Clarity::Unclear, Clarity::SomewhatUnclear, Clarity::SomewhatClear, Clarity::Clear};

// A review needs an example-based explanation when it was judged on the
// unclear half of the scale.
inline bool needs_explanation(Clarity c) {
  return c == Clarity::Unclear || c == Clarity::SomewhatUnclear;
}

inline const char* to_string(Clarity c) {
  switch (c) {
    case Clarity::Unclear: return "unclear";
    case Clarity::SomewhatUnclear: return "somewhat_unclear";
    case Clarity::SomewhatClear: return "somewhat_clear";
    case Clarity::Clear: return "clear";
  }
  return "unclear";
}

// Case-insensitive parse of the label strings used by the label CSV and the
// corpus JSONL files.
std::optional<Clarity> clarity_from_string(std::string_view s);

}  // namespace edre
