#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

enum class KeyKind {
    Printable,
    Backspace,
    Delete,
    CursorLeft,
    CursorRight,
    Home,
    End,
    Enter,
    Tab,
    Up,
    Down,
    Interrupt,
    Other,
};

const char* to_string(KeyKind kind);

// One decoded keystroke. `raw` always holds the exact input bytes the event
// was decoded from, so concatenating `raw` over a token list reproduces the
// input.
struct KeyEvent {
    KeyKind kind = KeyKind::Other;
    char32_t ch = 0;  // code point, Printable only
    Bytes raw;

    bool operator==(const KeyEvent&) const = default;
};

// Incremental decoder for the client -> host keystroke stream. Escape and
// UTF-8 sequences split across reads are held back until they complete; a
// partial sequence that grows past kMaxPending bytes is released as Other.
class KeyTokenizer {
public:
    static constexpr std::size_t kMaxPending = 16;

    std::vector<KeyEvent> feed(ByteView bytes);
    // Releases any held partial sequence as a single Other event.
    std::vector<KeyEvent> flush();
    // Drops the held partial sequence and returns its bytes.
    Bytes take_pending();
    const Bytes& pending() const { return pending_; }

private:
    Bytes pending_;
};

std::vector<KeyEvent> tokenize(ByteView raw);
Bytes serialize(const std::vector<KeyEvent>& events);

// The line being edited, split at the cursor. `right` is a stack whose back
// is the character immediately right of the cursor, so the rendered line is
// left followed by right reversed.
class LineBuffer {
public:
    LineBuffer() = default;
    LineBuffer(std::u32string left, std::u32string right_stack)
        : left_(std::move(left)), right_(std::move(right_stack)) {}

    // Builds a buffer showing `line` (UTF-8) with the cursor at code point `cursor`.
    static LineBuffer with_cursor(std::string_view line, std::size_t cursor);

    const std::u32string& left() const { return left_; }
    const std::u32string& right() const { return right_; }
    std::size_t cursor() const { return left_.size(); }
    bool empty() const { return left_.empty() && right_.empty(); }

    std::u32string rendered() const;
    std::string text() const;  // rendered line as UTF-8
    std::string left_text() const;

    // Applies a line-editing event. Session-level events (Enter, Tab, Up,
    // Down, Interrupt, Other) leave the buffer unchanged.
    void apply(const KeyEvent& event);
    void insert(std::u32string_view text);
    void clear();

    bool operator==(const LineBuffer&) const = default;

private:
    std::u32string left_;
    std::u32string right_;
};

LineBuffer apply(LineBuffer buffer, const KeyEvent& event);
// Returns the rendered line and resets the buffer.
std::string commit(LineBuffer& buffer);

std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);

// --- host output styling -------------------------------------------------

struct StyleRun {
    std::string text;
    std::optional<std::string> style;  // SGR parameters, e.g. "01;34"

    bool operator==(const StyleRun&) const = default;
};

struct StyledText {
    std::vector<StyleRun> runs;
    Bytes pending;  // truncated escape sequence at the end of the input

    std::string plain() const;
    bool operator==(const StyledText&) const = default;
};

// Splits SGR (ESC [ ... m) sequences out of `styled`. Other escape sequences
// stay in the run text verbatim. Adjacent runs with equal style are merged
// and empty runs are dropped.
StyledText strip_styles(ByteView styled);
// Serializes runs: styled runs become ESC[<style>m text ESC[0m.
Bytes restyle(const StyledText& text);
Bytes restyle(const std::vector<StyleRun>& runs);

// Plain text with every escape sequence and BEL removed, plus the raw offset
// of each remaining character. offsets.size() == text.size() + 1; the last
// entry is the raw length.
struct StrippedText {
    std::string text;
    std::vector<std::size_t> offsets;
};

StrippedText strip_escapes(ByteView raw);

// Renders one terminal line from host output: printable characters overwrite
// at the cursor, and the cursor-motion and erase controls readline uses while
// editing are honored. Anything else (line feeds, unknown sequences) marks
// the rendering as unreliable.
class LineRenderer {
public:
    void feed(ByteView bytes);
    void reset();
    bool reliable() const { return reliable_; }
    std::string text() const;

private:
    void put(char32_t ch);
    void csi(std::string_view params, char final);

    std::u32string line_;
    std::size_t col_ = 0;
    bool reliable_ = true;
    Bytes pending_;
};

}  // namespace sshdecoy
