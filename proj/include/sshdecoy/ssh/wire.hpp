#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy::ssh {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SSH binary encodings (byte, boolean, uint32, uint64, string, mpint, name-list).
class Writer {
public:
    Writer& byte(std::uint8_t v);
    Writer& boolean(bool v) { return byte(v ? 1 : 0); }
    Writer& u32(std::uint32_t v);
    Writer& u64(std::uint64_t v);
    Writer& string(ByteView s);
    Writer& mpint(ByteView unsigned_be);
    Writer& name_list(const std::vector<std::string>& names);
    Writer& raw(ByteView s);

    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    std::uint8_t byte();
    bool boolean() { return byte() != 0; }
    std::uint32_t u32();
    std::uint64_t u64();
    Bytes string();
    std::vector<std::string> name_list();
    ByteView rest() const { return data_.substr(pos_); }
    bool done() const { return pos_ >= data_.size(); }

private:
    void need(std::size_t n) const;
    ByteView data_;
    std::size_t pos_ = 0;
};

std::vector<std::string> split_names(std::string_view list);
std::string join_names(const std::vector<std::string>& names);

}  // namespace sshdecoy::ssh
