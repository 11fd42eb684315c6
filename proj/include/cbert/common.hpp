// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cbert {

// Error taxonomy. The CLI maps FormatError/ConfigError (and plain Error) to
// exit code 2 and ShapeError/NumericError to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

// Decodes a UTF-8 string into codepoints. Malformed bytes raise FormatError.
std::vector<uint32_t> utf8_decode(std::string_view text);

// Encodes a single codepoint as UTF-8.
std::string utf8_encode(uint32_t cp);

// Encodes a codepoint sequence as UTF-8.
std::string utf8_encode(const std::vector<uint32_t>& cps);

// Shortest decimal form of `v` that parses back to exactly the same double.
std::string format_double(double v);

// "U+4E50" -> 0x4E50. Raises FormatError on anything else.
uint32_t parse_codepoint_label(std::string_view token);

std::string codepoint_label(uint32_t cp);

// Splits on a single delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view line, char delim);

std::string strip(std::string_view s);

bool ends_with(std::string_view s, std::string_view suffix);

}  // namespace cbert
