#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sshdecoy {

// Raw byte streams are carried in std::string; it owns arbitrary bytes
// (including NUL) and interoperates with the regex and parsing code.
using Bytes = std::string;
using ByteView = std::string_view;

inline bool starts_with(ByteView s, ByteView prefix) { return s.substr(0, prefix.size()) == prefix; }
inline bool ends_with(ByteView s, ByteView suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// LF -> CRLF, leaving existing CRLF pairs alone (what a PTY with onlcr does).
Bytes to_crlf(ByteView text);
// CRLF -> LF.
Bytes from_crlf(ByteView text);

std::string hex_encode(ByteView data);
// Throws std::invalid_argument on odd length or non-hex characters.
Bytes hex_decode(std::string_view hex);

// POSIX single-quote quoting for building shell commands.
std::string shell_quote(std::string_view word);

}  // namespace sshdecoy
