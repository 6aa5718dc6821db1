#include "sshdecoy/terminal_codec.hpp"

#include <algorithm>

namespace sshdecoy {

const char* to_string(KeyKind kind) {
    switch (kind) {
    case KeyKind::Printable: return "Printable";
    case KeyKind::Backspace: return "Backspace";
    case KeyKind::Delete: return "Delete";
    case KeyKind::CursorLeft: return "CursorLeft";
    case KeyKind::CursorRight: return "CursorRight";
    case KeyKind::Home: return "Home";
    case KeyKind::End: return "End";
    case KeyKind::Enter: return "Enter";
    case KeyKind::Tab: return "Tab";
    case KeyKind::Up: return "Up";
    case KeyKind::Down: return "Down";
    case KeyKind::Interrupt: return "Interrupt";
    case KeyKind::Other: return "Other";
    }
    return "?";
}

namespace {

constexpr char kEsc = 0x1B;

KeyEvent make(KeyKind kind, ByteView raw, char32_t ch = 0) {
    return KeyEvent{kind, ch, Bytes(raw)};
}

KeyKind csi_kind(std::string_view params, char final) {
    if (params.empty()) {
        switch (final) {
        case 'A': return KeyKind::Up;
        case 'B': return KeyKind::Down;
        case 'C': return KeyKind::CursorRight;
        case 'D': return KeyKind::CursorLeft;
        case 'H': return KeyKind::Home;
        case 'F': return KeyKind::End;
        default: return KeyKind::Other;
        }
    }
    if (final == '~') {
        if (params == "3") return KeyKind::Delete;
        if (params == "1" || params == "7") return KeyKind::Home;
        if (params == "4" || params == "8") return KeyKind::End;
    }
    return KeyKind::Other;
}

KeyKind ss3_kind(char final) {
    switch (final) {
    case 'A': return KeyKind::Up;
    case 'B': return KeyKind::Down;
    case 'C': return KeyKind::CursorRight;
    case 'D': return KeyKind::CursorLeft;
    case 'H': return KeyKind::Home;
    case 'F': return KeyKind::End;
    default: return KeyKind::Other;
    }
}

std::size_t utf8_length(unsigned char lead) {
    if (lead >= 0xC2 && lead <= 0xDF) return 2;
    if (lead >= 0xE0 && lead <= 0xEF) return 3;
    if (lead >= 0xF0 && lead <= 0xF4) return 4;
    return 0;
}

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Decodes one event from the front of `s` (non-empty). Returns the consumed
// length, or 0 when more input is needed to decide.
std::size_t decode_one(ByteView s, KeyEvent& out) {
    const auto c = static_cast<unsigned char>(s[0]);
    switch (c) {
    case 0x08:
    case 0x7F: out = make(KeyKind::Backspace, s.substr(0, 1)); return 1;
    case 0x0D:
    case 0x0A: out = make(KeyKind::Enter, s.substr(0, 1)); return 1;
    case 0x09: out = make(KeyKind::Tab, s.substr(0, 1)); return 1;
    case 0x03: out = make(KeyKind::Interrupt, s.substr(0, 1)); return 1;
    default: break;
    }
    if (c == kEsc) {
        if (s.size() < 2) return 0;
        const char second = s[1];
        if (second == '[') {
            std::size_t i = 2;
            while (i < s.size() && s[i] >= 0x30 && s[i] <= 0x3F) ++i;
            const std::size_t params_end = i;
            while (i < s.size() && s[i] >= 0x20 && s[i] <= 0x2F) ++i;
            if (i == s.size()) return 0;
            const char final = s[i];
            if (final >= 0x40 && final <= 0x7E) {
                KeyKind kind = KeyKind::Other;
                if (params_end == i)  // no intermediates
                    kind = csi_kind(s.substr(2, params_end - 2), final);
                out = make(kind, s.substr(0, i + 1));
                return i + 1;
            }
            // Malformed: release what was gathered so far.
            out = make(KeyKind::Other, s.substr(0, i));
            return i;
        }
        if (second == 'O') {
            if (s.size() < 3) return 0;
            const char final = s[2];
            if (final >= 0x20 && final <= 0x7E) {
                out = make(ss3_kind(final), s.substr(0, 3));
                return 3;
            }
            out = make(KeyKind::Other, s.substr(0, 2));
            return 2;
        }
        if (second >= 0x20 && second <= 0x7E) {
            out = make(KeyKind::Other, s.substr(0, 2));
            return 2;
        }
        out = make(KeyKind::Other, s.substr(0, 1));
        return 1;
    }
    if (c < 0x20) {
        out = make(KeyKind::Other, s.substr(0, 1));
        return 1;
    }
    if (c < 0x80) {
        out = make(KeyKind::Printable, s.substr(0, 1), c);
        return 1;
    }
    const std::size_t len = utf8_length(c);
    if (len == 0) {
        out = make(KeyKind::Other, s.substr(0, 1));
        return 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        if (k >= s.size()) return 0;
        if (!is_continuation(static_cast<unsigned char>(s[k]))) {
            out = make(KeyKind::Other, s.substr(0, 1));
            return 1;
        }
    }
    const std::u32string cp = utf8_decode(s.substr(0, len));
    if (cp.size() != 1 || cp[0] == 0xFFFD) {
        out = make(KeyKind::Other, s.substr(0, 1));
        return 1;
    }
    out = make(KeyKind::Printable, s.substr(0, len), cp[0]);
    return len;
}

}  // namespace

std::vector<KeyEvent> KeyTokenizer::feed(ByteView bytes) {
    pending_.append(bytes);
    std::vector<KeyEvent> events;
    std::size_t pos = 0;
    while (pos < pending_.size()) {
        KeyEvent ev;
        const std::size_t used = decode_one(ByteView(pending_).substr(pos), ev);
        if (used == 0) {
            if (pending_.size() - pos > kMaxPending) {
                events.push_back(make(KeyKind::Other, ByteView(pending_).substr(pos, kMaxPending)));
                pos += kMaxPending;
                continue;
            }
            break;
        }
        events.push_back(std::move(ev));
        pos += used;
    }
    pending_.erase(0, pos);
    return events;
}

std::vector<KeyEvent> KeyTokenizer::flush() {
    std::vector<KeyEvent> events;
    if (!pending_.empty())
        events.push_back(make(KeyKind::Other, pending_));
    pending_.clear();
    return events;
}

Bytes KeyTokenizer::take_pending() {
    Bytes out;
    out.swap(pending_);
    return out;
}

std::vector<KeyEvent> tokenize(ByteView raw) {
    KeyTokenizer tok;
    auto events = tok.feed(raw);
    auto rest = tok.flush();
    events.insert(events.end(), rest.begin(), rest.end());
    return events;
}

Bytes serialize(const std::vector<KeyEvent>& events) {
    Bytes out;
    for (const auto& ev : events) out += ev.raw;
    return out;
}

// --- UTF-8 ----------------------------------------------------------------

std::u32string utf8_decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        const std::size_t len = c < 0x80 ? 1 : utf8_length(c);
        if (len == 0 || i + len > text.size()) {
            out += char32_t{0xFFFD};
            ++i;
            continue;
        }
        char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if (!is_continuation(cc)) { ok = false; break; }
            cp = (cp << 6) | (cc & 0x3F);
        }
        const bool overlong = (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
        if (!ok || overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            out += char32_t{0xFFFD};
            ++i;
            continue;
        }
        out += cp;
        i += len;
    }
    return out;
}

std::string utf8_encode(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t cp : text) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }
    return out;
}

// --- LineBuffer -----------------------------------------------------------

LineBuffer LineBuffer::with_cursor(std::string_view line, std::size_t cursor) {
    const std::u32string cps = utf8_decode(line);
    cursor = std::min(cursor, cps.size());
    std::u32string right(cps.begin() + static_cast<std::ptrdiff_t>(cursor), cps.end());
    std::reverse(right.begin(), right.end());
    return LineBuffer(cps.substr(0, cursor), std::move(right));
}

std::u32string LineBuffer::rendered() const {
    std::u32string out = left_;
    out.append(right_.rbegin(), right_.rend());
    return out;
}

std::string LineBuffer::text() const { return utf8_encode(rendered()); }
std::string LineBuffer::left_text() const { return utf8_encode(left_); }

void LineBuffer::apply(const KeyEvent& event) {
    switch (event.kind) {
    case KeyKind::Printable:
        left_.push_back(event.ch);
        break;
    case KeyKind::Backspace:
        if (!left_.empty()) left_.pop_back();
        break;
    case KeyKind::Delete:
        if (!right_.empty()) right_.pop_back();
        break;
    case KeyKind::CursorLeft:
        if (!left_.empty()) {
            right_.push_back(left_.back());
            left_.pop_back();
        }
        break;
    case KeyKind::CursorRight:
        if (!right_.empty()) {
            left_.push_back(right_.back());
            right_.pop_back();
        }
        break;
    case KeyKind::Home:
        while (!left_.empty()) {
            right_.push_back(left_.back());
            left_.pop_back();
        }
        break;
    case KeyKind::End:
        while (!right_.empty()) {
            left_.push_back(right_.back());
            right_.pop_back();
        }
        break;
    default:
        break;
    }
}

void LineBuffer::insert(std::u32string_view text) { left_.append(text); }

void LineBuffer::clear() {
    left_.clear();
    right_.clear();
}

LineBuffer apply(LineBuffer buffer, const KeyEvent& event) {
    buffer.apply(event);
    return buffer;
}

std::string commit(LineBuffer& buffer) {
    std::string line = buffer.text();
    buffer.clear();
    return line;
}

// --- styles ---------------------------------------------------------------

std::string StyledText::plain() const {
    std::string out;
    for (const auto& run : runs) out += run.text;
    return out;
}

namespace {

bool is_reset(std::string_view params) {
    return params.empty() || params.find_first_not_of('0') == std::string_view::npos;
}

// Length of a complete CSI sequence starting at s[0] == ESC, s[1] == '['; 0 if
// incomplete, npos if malformed.
std::size_t csi_length(ByteView s) {
    std::size_t i = 2;
    while (i < s.size() && s[i] >= 0x20 && s[i] <= 0x3F) ++i;
    if (i == s.size()) return 0;
    if (s[i] >= 0x40 && s[i] <= 0x7E) return i + 1;
    return std::string_view::npos;
}

void append_run(std::vector<StyleRun>& runs, std::string_view text, const std::optional<std::string>& style) {
    if (text.empty()) return;
    if (!runs.empty() && runs.back().style == style) {
        runs.back().text += text;
        return;
    }
    runs.push_back(StyleRun{std::string(text), style});
}

}  // namespace

StyledText strip_styles(ByteView styled) {
    StyledText out;
    std::optional<std::string> style;
    std::string text;
    std::size_t i = 0;
    while (i < styled.size()) {
        if (styled[i] != kEsc) {
            text += styled[i++];
            continue;
        }
        if (i + 1 >= styled.size()) {
            out.pending.assign(styled.substr(i));
            break;
        }
        if (styled[i + 1] != '[') {
            text += styled[i++];
            continue;
        }
        const std::size_t len = csi_length(styled.substr(i));
        if (len == 0) {
            out.pending.assign(styled.substr(i));
            break;
        }
        if (len == std::string_view::npos || styled[i + len - 1] != 'm') {
            const std::size_t take = len == std::string_view::npos ? 2 : len;
            text.append(styled.substr(i, take));
            i += take;
            continue;
        }
        const std::string_view params = styled.substr(i + 2, len - 3);
        append_run(out.runs, text, style);
        text.clear();
        if (is_reset(params))
            style.reset();
        else if (style)
            *style += ";" + std::string(params);
        else
            style = std::string(params);
        i += len;
    }
    append_run(out.runs, text, style);
    return out;
}

Bytes restyle(const std::vector<StyleRun>& runs) {
    Bytes out;
    for (const auto& run : runs) {
        if (run.style) {
            out += "\x1b[";
            out += *run.style;
            out += 'm';
            out += run.text;
            out += "\x1b[0m";
        } else {
            out += run.text;
        }
    }
    return out;
}

Bytes restyle(const StyledText& text) {
    Bytes out = restyle(text.runs);
    out += text.pending;
    return out;
}

StrippedText strip_escapes(ByteView raw) {
    StrippedText out;
    out.text.reserve(raw.size());
    out.offsets.reserve(raw.size() + 1);
    std::size_t i = 0;
    while (i < raw.size()) {
        const char c = raw[i];
        if (c == 0x07) {
            ++i;
            continue;
        }
        if (c != kEsc) {
            out.text += c;
            out.offsets.push_back(i);
            ++i;
            continue;
        }
        if (i + 1 >= raw.size()) break;
        const char kind = raw[i + 1];
        if (kind == '[') {
            std::size_t len = csi_length(raw.substr(i));
            if (len == 0) break;
            i += len == std::string_view::npos ? 2 : len;
        } else if (kind == ']' || kind == 'P' || kind == '_' || kind == '^') {
            // String sequence terminated by BEL or ST.
            std::size_t j = i + 2;
            while (j < raw.size() && raw[j] != 0x07 && !(raw[j] == kEsc && j + 1 < raw.size() && raw[j + 1] == '\\'))
                ++j;
            if (j >= raw.size()) break;
            i = raw[j] == 0x07 ? j + 1 : j + 2;
        } else if (kind == 'O' || kind == '(' || kind == ')') {
            i += 3;
        } else {
            i += 2;
        }
    }
    out.offsets.push_back(raw.size());
    return out;
}

// --- LineRenderer -----------------------------------------------------------

void LineRenderer::reset() {
    line_.clear();
    col_ = 0;
    reliable_ = true;
    pending_.clear();
}

std::string LineRenderer::text() const {
    std::u32string trimmed = line_;
    while (!trimmed.empty() && trimmed.back() == U' ') trimmed.pop_back();
    return utf8_encode(trimmed);
}

void LineRenderer::put(char32_t ch) {
    if (col_ < line_.size())
        line_[col_] = ch;
    else {
        line_.resize(col_, U' ');
        line_.push_back(ch);
    }
    ++col_;
}

void LineRenderer::csi(std::string_view params, char final) {
    if (final == 'm') return;
    if (!params.empty() && (params[0] == '?' || params[0] == '>')) return;  // mode toggles
    std::size_t n = 1;
    if (!params.empty()) {
        if (params.find_first_not_of("0123456789") != std::string_view::npos) {
            reliable_ = false;
            return;
        }
        n = std::stoul(std::string(params));
        if (n == 0) n = 1;
    }
    switch (final) {
    case 'C': col_ += n; break;
    case 'D': col_ = n > col_ ? 0 : col_ - n; break;
    case 'G': col_ = n - 1; break;
    case 'K':
        if (params.empty() || params == "0") {
            if (col_ < line_.size()) line_.resize(col_);
        } else {
            reliable_ = false;
        }
        break;
    case 'P':
        if (col_ < line_.size()) line_.erase(col_, std::min(n, line_.size() - col_));
        break;
    case '@':
        if (col_ < line_.size()) line_.insert(col_, n, U' ');
        break;
    default:
        reliable_ = false;
        break;
    }
}

void LineRenderer::feed(ByteView bytes) {
    pending_.append(bytes);
    const Bytes data = std::move(pending_);
    pending_.clear();
    std::size_t i = 0;
    while (i < data.size()) {
        const auto c = static_cast<unsigned char>(data[i]);
        if (c == kEsc) {
            if (i + 1 >= data.size()) {
                pending_ = data.substr(i);
                return;
            }
            if (data[i + 1] == '[') {
                const std::size_t len = csi_length(ByteView(data).substr(i));
                if (len == 0) {
                    pending_ = data.substr(i);
                    return;
                }
                if (len == std::string_view::npos) {
                    reliable_ = false;
                    i += 2;
                    continue;
                }
                csi(ByteView(data).substr(i + 2, len - 3), data[i + len - 1]);
                i += len;
                continue;
            }
            if (data[i + 1] == ']') {
                std::size_t j = i + 2;
                while (j < data.size() && data[j] != 0x07 && data[j] != kEsc) ++j;
                if (j >= data.size()) {
                    pending_ = data.substr(i);
                    return;
                }
                i = data[j] == 0x07 ? j + 1 : std::min(data.size(), j + 2);
                continue;
            }
            reliable_ = false;
            i += 2;
            continue;
        }
        if (c == '\r') {
            col_ = 0;
            ++i;
            continue;
        }
        if (c == 0x08) {
            if (col_ > 0) --col_;
            ++i;
            continue;
        }
        if (c == 0x07) {
            ++i;
            continue;
        }
        if (c < 0x20 || c == 0x7F) {
            reliable_ = false;
            ++i;
            continue;
        }
        if (c < 0x80) {
            put(c);
            ++i;
            continue;
        }
        const std::size_t len = utf8_length(c);
        if (len == 0) {
            reliable_ = false;
            ++i;
            continue;
        }
        if (i + len > data.size()) {
            pending_ = data.substr(i);
            return;
        }
        const std::u32string cp = utf8_decode(ByteView(data).substr(i, len));
        for (char32_t ch : cp) put(ch);
        i += len;
    }
}

}  // namespace sshdecoy
