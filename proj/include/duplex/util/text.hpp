#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace duplex::text {

/// Byte ranges of the UTF-8 code points in `s`. Invalid lead bytes are
/// treated as single-byte code points.
std::vector<std::string_view> utf8_codepoints(std::string_view s);

/// True for code points in the CJK unified ideograph blocks.
bool is_cjk(std::string_view codepoint);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Whitespace-separated tokens as views into `s`.
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace duplex::text
