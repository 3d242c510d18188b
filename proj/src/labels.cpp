#include "emocause/labels.hpp"

#include <cctype>

#include "emocause/error.hpp"

namespace emocause {

std::string_view emotion_name(std::size_t index) {
  if (index >= kNumEmotions) throw ConfigError("emotion index " + std::to_string(index) + " out of range");
  return kEmotionNames[index];
}

std::optional<std::size_t> parse_emotion(std::string_view label) {
  std::string norm;
  for (char ch : label) {
    const auto c = static_cast<unsigned char>(ch);
    norm.push_back(ch == '_' || ch == '-' ? ' ' : static_cast<char>(std::tolower(c)));
  }
  while (!norm.empty() && norm.back() == ' ') norm.pop_back();
  while (!norm.empty() && norm.front() == ' ') norm.erase(norm.begin());
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (norm == kEmotionNames[i]) return i;
  }
  return std::nullopt;
}

}  // namespace emocause
