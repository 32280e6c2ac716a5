#pragma once

#include <string>
#include <string_view>

namespace csc {

// Decodes UTF-8 into codepoints. Throws DataError on malformed input,
// naming the byte offset.
std::u32string utf8_decode(std::string_view s);

std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t cp);

}  // namespace csc
