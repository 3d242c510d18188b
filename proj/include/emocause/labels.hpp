#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace emocause {

// The seven target emotions in their fixed index order.
enum class Emotion : std::size_t {
  anger = 0,
  disgust,
  fear,
  joy,
  sadness,
  negative_surprise,
  positive_surprise,
};

inline constexpr std::size_t kNumEmotions = 7;

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "disgust", "fear", "joy", "sadness", "negative surprise", "positive surprise"};

std::string_view emotion_name(std::size_t index);
// Accepts the canonical names plus underscore/hyphen spellings
// ("negative_surprise"), case-insensitively. Anything else -> nullopt.
std::optional<std::size_t> parse_emotion(std::string_view label);

// Cause tags in index order {I-cause, O, B-cause}.
enum class CauseTag : int { inside = 0, outside = 1, begin = 2 };

inline constexpr std::size_t kNumCauseTags = 3;
inline constexpr int kTagInside = 0;
inline constexpr int kTagOutside = 1;
inline constexpr int kTagBegin = 2;
// Marks positions excluded from the tagging loss and evaluation.
inline constexpr int kIgnoreTag = -1;

inline constexpr std::array<std::string_view, kNumCauseTags> kCauseTagNames = {"I-cause", "O", "B-cause"};

}  // namespace emocause
