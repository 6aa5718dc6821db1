#include "sshdecoy/ssh/wire.hpp"

namespace sshdecoy::ssh {

Writer& Writer::byte(std::uint8_t v) {
    buf_ += static_cast<char>(v);
    return *this;
}

Writer& Writer::u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf_ += static_cast<char>((v >> s) & 0xFF);
    return *this;
}

Writer& Writer::u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) buf_ += static_cast<char>((v >> s) & 0xFF);
    return *this;
}

Writer& Writer::string(ByteView s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
    return *this;
}

Writer& Writer::mpint(ByteView v) {
    std::size_t i = 0;
    while (i < v.size() && v[i] == 0) ++i;
    Bytes body(v.substr(i));
    if (!body.empty() && (static_cast<unsigned char>(body[0]) & 0x80)) body.insert(body.begin(), '\0');
    return string(body);
}

Writer& Writer::name_list(const std::vector<std::string>& names) { return string(join_names(names)); }

Writer& Writer::raw(ByteView s) {
    buf_.append(s);
    return *this;
}

void Reader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ProtocolError("truncated message");
}

std::uint8_t Reader::byte() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_++]);
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_++]);
    return v;
}

Bytes Reader::string() {
    const std::uint32_t n = u32();
    need(n);
    Bytes s(data_.substr(pos_, n));
    pos_ += n;
    return s;
}

std::vector<std::string> Reader::name_list() { return split_names(string()); }

std::vector<std::string> split_names(std::string_view list) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < list.size()) {
        auto j = list.find(',', i);
        if (j == std::string_view::npos) j = list.size();
        out.emplace_back(list.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
    return out;
}

}  // namespace sshdecoy::ssh
