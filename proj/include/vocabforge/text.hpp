#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vocabforge {

// Normalization rule "nfkc_ws": Unicode NFKC followed by whitespace
// collapsing (runs of whitespace become a single space, ends trimmed).
// The rule id is recorded in tokenizer model files.
inline constexpr const char* kNormalizationRule = "nfkc_ws";

std::string normalize(std::string_view text);

// Splits UTF-8 text into codepoint-sized chunks. Invalid bytes are kept
// as single-byte chunks so segmentation never loses input.
std::vector<std::string> split_codepoints(std::string_view text);

size_t count_codepoints(std::string_view text);

}  // namespace vocabforge
