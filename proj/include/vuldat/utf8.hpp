#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vuldat::utf8 {

/// Returns the byte offset of the first invalid sequence, or nullopt when the
/// whole input is well-formed UTF-8 (no overlongs, no surrogates, <= U+10FFFF).
std::optional<std::size_t> find_invalid(std::string_view text);

/// Decodes well-formed UTF-8. Throws EncodingError on the first bad sequence.
std::vector<char32_t> decode(std::string_view text);

void append(std::string& out, char32_t cp);

}  // namespace vuldat::utf8
