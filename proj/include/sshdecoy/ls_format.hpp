#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

// Name ordering used by the host's ls. C is bytewise; Locale approximates
// glibc UTF-8 locales (alphanumerics compared case-insensitively first,
// punctuation ignored, then lower case before upper case, then bytes).
enum class Collation { C, Locale };

const char* to_string(Collation c);
bool collation_less(Collation c, std::string_view a, std::string_view b);
// Picks the collation under which `names` (in host order) are sorted. When
// both or neither fit, returns `fallback`.
Collation detect_collation(const std::vector<std::string>& names, Collation fallback);

enum class LsFormat { Columns, OnePerLine, Long };

struct LongFields {
    // mode, links, owner, group, size, month, day, time-or-year
    std::vector<std::string> fields;
};

struct LsEntry {
    std::string name;  // plain name (long format: without " -> target")
    Bytes cell;        // bytes as printed, styles included (long: the name column)
    std::optional<LongFields> long_fields;
    Bytes raw_row;     // long format: the full original row, empty for synthesized rows
};

struct LsListing {
    LsFormat format = LsFormat::Columns;
    std::optional<Bytes> total_line;  // "total 24", long format only
    std::vector<LsEntry> entries;
    bool colored = false;
    bool uses_tabs = false;
};

// Parses the body of a single-directory ls listing (CRLF line endings). Returns
// nullopt when the output has a shape this parser does not understand
// (quoted names, device rows, error lines).
std::optional<LsListing> parse_ls_output(ByteView body, LsFormat format);

// GNU ls vertical column layout for a terminal `width` columns wide. Cells are
// padded on their plain width. `tabs` reproduces ls's tab indentation.
Bytes render_columns(const std::vector<LsEntry>& entries, int width, bool tabs);
// Number of columns the layout above chooses; exposed for tests.
std::size_t layout_columns(const std::vector<std::size_t>& widths, int width);

Bytes render_one_per_line(const std::vector<LsEntry>& entries);

// Renders a long listing. Real rows keep their original bytes whenever the
// column widths are unchanged by the synthesized rows.
Bytes render_long(const LsListing& listing);

std::string format_permissions(unsigned permissions, char type = '-');
std::string human_size(std::uint64_t bytes);
// "Oct 16 12:00" for times within six months of now, else "Oct 16  2019",
// returned as the three fields month, day, time-or-year.
std::vector<std::string> format_ls_date(std::chrono::system_clock::time_point when,
                                        std::chrono::system_clock::time_point now);

// Readline's completion listing: entries column-major in cells of the
// longest name plus two, one CRLF-terminated line per row.
Bytes render_completion_list(const std::vector<std::string>& names, int width);

// Display width of text with escape sequences removed (one column per code point).
std::size_t display_width(ByteView styled);

}  // namespace sshdecoy
