#include "sshdecoy/ls_format.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>

#include "sshdecoy/terminal_codec.hpp"

namespace sshdecoy {

const char* to_string(Collation c) { return c == Collation::C ? "C" : "locale"; }

namespace {

std::string alnum_fold(std::string_view s) {
    std::string out;
    for (char c : s) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc) || uc >= 0x80) out += static_cast<char>(std::tolower(uc));
    }
    return out;
}

int case_rank(std::string_view a, std::string_view b) {
    // Lower case sorts before upper case at the first differing letter.
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = static_cast<unsigned char>(a[i]);
        const auto y = static_cast<unsigned char>(b[i]);
        if (std::tolower(x) == std::tolower(y) && x != y) return std::islower(x) ? -1 : 1;
    }
    return 0;
}

}  // namespace

bool collation_less(Collation c, std::string_view a, std::string_view b) {
    if (c == Collation::C) return a < b;
    const std::string ka = alnum_fold(a), kb = alnum_fold(b);
    if (ka != kb) return ka < kb;
    if (const int r = case_rank(a, b); r != 0) return r < 0;
    return a < b;
}

Collation detect_collation(const std::vector<std::string>& names, Collation fallback) {
    auto sorted_under = [&](Collation c) {
        for (std::size_t i = 1; i < names.size(); ++i)
            if (collation_less(c, names[i], names[i - 1])) return false;
        return true;
    };
    const bool c_ok = sorted_under(Collation::C);
    const bool l_ok = sorted_under(Collation::Locale);
    if (c_ok && !l_ok) return Collation::C;
    if (l_ok && !c_ok) return Collation::Locale;
    return fallback;
}

std::size_t display_width(ByteView styled) {
    const StrippedText plain = strip_escapes(styled);
    std::size_t n = 0;
    for (char c : plain.text)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    return n;
}

namespace {

std::vector<ByteView> split_crlf_lines(ByteView body) {
    std::vector<ByteView> lines;
    std::size_t start = 0;
    while (start < body.size()) {
        auto nl = body.find('\n', start);
        ByteView line = body.substr(start, nl == ByteView::npos ? ByteView::npos : nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == ByteView::npos) break;
        start = nl + 1;
    }
    return lines;
}

std::vector<ByteView> split_cells(ByteView line) {
    std::vector<ByteView> cells;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) cells.push_back(line.substr(start, i - start));
    }
    return cells;
}

bool valid_mode(std::string_view mode) {
    if (mode.size() < 10 || mode.size() > 11) return false;
    if (std::string_view("-dlcbps").find(mode[0]) == std::string_view::npos) return false;
    for (std::size_t i = 1; i < 10; ++i)
        if (std::string_view("rwxsStT-").find(mode[i]) == std::string_view::npos) return false;
    return mode.size() == 10 || mode[10] == '.' || mode[10] == '+' || mode[10] == '@';
}

std::optional<LsEntry> parse_long_row(ByteView row) {
    LsEntry entry;
    LongFields lf;
    std::size_t i = 0;
    for (int f = 0; f < 8; ++f) {
        while (i < row.size() && row[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < row.size() && row[i] != ' ') ++i;
        if (i == start) return std::nullopt;
        lf.fields.emplace_back(row.substr(start, i - start));
    }
    if (i >= row.size() || row[i] != ' ') return std::nullopt;
    ++i;
    if (!valid_mode(lf.fields[0])) return std::nullopt;
    for (const auto& f : lf.fields)
        if (f.find('\x1b') != std::string::npos) return std::nullopt;
    if (!lf.fields[4].empty() && lf.fields[4].back() == ',') return std::nullopt;  // device numbers
    entry.cell = Bytes(row.substr(i));
    std::string plain = strip_escapes(entry.cell).text;
    if (lf.fields[0][0] == 'l') {
        if (auto arrow = plain.find(" -> "); arrow != std::string::npos) plain.resize(arrow);
    }
    if (plain.empty() || plain.front() == '\'' || plain.front() == '"') return std::nullopt;
    entry.name = std::move(plain);
    entry.long_fields = std::move(lf);
    entry.raw_row = Bytes(row);
    return entry;
}

// GNU ls pads with tabs by default (tab stops every 8 columns, off when
// coloring). A listing shows that tabs are off only when some padding run
// reaches a tab stop using spaces alone.
bool spaces_cross_tab_stop(const std::vector<ByteView>& lines) {
    for (ByteView line : lines) {
        const std::string plain = strip_escapes(line).text;
        std::size_t col = 0;
        std::size_t i = 0;
        while (i < plain.size()) {
            if (plain[i] != ' ') {
                std::size_t j = i;
                while (j < plain.size() && plain[j] != ' ') ++j;
                col += display_width(std::string_view(plain).substr(i, j - i));
                i = j;
                continue;
            }
            std::size_t j = i;
            while (j < plain.size() && plain[j] == ' ') ++j;
            const std::size_t from = col;
            const std::size_t to = col + (j - i);
            if (j < plain.size() && j - i >= 2 && (from + 1) / 8 < to / 8) return true;
            col = to;
            i = j;
        }
    }
    return false;
}

}  // namespace

std::optional<LsListing> parse_ls_output(ByteView body, LsFormat format) {
    LsListing listing;
    listing.format = format;
    listing.colored = body.find('\x1b') != ByteView::npos;
    const auto lines = split_crlf_lines(body);
    listing.uses_tabs = body.find('\t') != ByteView::npos ||
                        (!listing.colored && format == LsFormat::Columns && !spaces_cross_tab_stop(lines));

    if (format == LsFormat::Long) {
        std::size_t k = 0;
        if (!lines.empty() && starts_with(strip_escapes(lines[0]).text, "total ")) {
            listing.total_line = Bytes(lines[0]);
            k = 1;
        }
        for (; k < lines.size(); ++k) {
            auto entry = parse_long_row(lines[k]);
            if (!entry) return std::nullopt;
            listing.entries.push_back(std::move(*entry));
        }
        return listing;
    }

    std::vector<std::vector<ByteView>> grid;
    for (ByteView line : lines) {
        if (starts_with(line, "ls: ")) return std::nullopt;
        auto cells = split_cells(line);
        if (cells.empty()) return std::nullopt;
        grid.push_back(std::move(cells));
    }
    if (format == LsFormat::OnePerLine) {
        for (auto& cells : grid) {
            if (cells.size() != 1) return std::nullopt;
        }
    }
    for (std::size_t r = 1; r < grid.size(); ++r)
        if (grid[r].size() > grid[r - 1].size()) return std::nullopt;
    const std::size_t ncols = grid.empty() ? 0 : grid[0].size();
    for (std::size_t c = 0; c < ncols; ++c) {
        for (const auto& row : grid) {
            if (row.size() <= c) break;
            LsEntry entry;
            entry.cell = Bytes(row[c]);
            entry.name = strip_escapes(entry.cell).text;
            if (entry.name.empty() || entry.name.front() == '\'' || entry.name.front() == '"') return std::nullopt;
            listing.entries.push_back(std::move(entry));
        }
    }
    return listing;
}

std::size_t layout_columns(const std::vector<std::size_t>& widths, int width) {
    const std::size_t n = widths.size();
    if (n == 0) return 1;
    const std::size_t line_length = width > 0 ? static_cast<std::size_t>(width) : 80;
    std::size_t max_idx = std::max<std::size_t>(1, line_length / 3);
    const std::size_t max_cols = std::min(max_idx, n);
    struct Info {
        bool valid = true;
        std::size_t line_len;
        std::vector<std::size_t> col;
    };
    std::vector<Info> info(max_cols);
    for (std::size_t i = 0; i < max_cols; ++i) {
        info[i].line_len = (i + 1) * 3;
        info[i].col.assign(i + 1, 3);
    }
    for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t i = 0; i < max_cols; ++i) {
            if (!info[i].valid) continue;
            const std::size_t idx = f / ((n + i) / (i + 1));
            const std::size_t real = widths[f] + (idx == i ? 0 : 2);
            if (info[i].col[idx] < real) {
                info[i].line_len += real - info[i].col[idx];
                info[i].col[idx] = real;
                info[i].valid = info[i].line_len < line_length;
            }
        }
    }
    std::size_t cols = max_cols;
    for (; cols > 1; --cols)
        if (info[cols - 1].valid) break;
    return cols;
}

Bytes render_columns(const std::vector<LsEntry>& entries, int width, bool tabs) {
    const std::size_t n = entries.size();
    if (n == 0) return {};
    std::vector<std::size_t> widths;
    widths.reserve(n);
    for (const auto& e : entries) widths.push_back(display_width(e.cell));
    const std::size_t cols = layout_columns(widths, width);
    const std::size_t rows = n / cols + (n % cols != 0);
    // Column widths of the chosen layout: widest cell plus two, except the last.
    std::vector<std::size_t> colw(cols, 0);
    for (std::size_t f = 0; f < n; ++f) {
        const std::size_t idx = f / rows;
        colw[idx] = std::max(colw[idx], widths[f] + (idx == cols - 1 ? 0 : 2));
    }
    Bytes out;
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t pos = 0;
        std::size_t c = 0;
        for (std::size_t f = r; f < n; f += rows, ++c) {
            out += entries[f].cell;
            if (f + rows >= n) break;
            std::size_t from = pos + widths[f];
            const std::size_t to = pos + colw[c];
            while (from < to) {
                if (tabs && to / 8 > (from + 1) / 8) {
                    out += '\t';
                    from += 8 - from % 8;
                } else {
                    out += ' ';
                    ++from;
                }
            }
            pos += colw[c];
        }
        out += "\r\n";
    }
    return out;
}

Bytes render_one_per_line(const std::vector<LsEntry>& entries) {
    Bytes out;
    for (const auto& e : entries) {
        out += e.cell;
        out += "\r\n";
    }
    return out;
}

namespace {

constexpr bool kRightAligned[8] = {false, true, false, false, true, false, true, true};

Bytes render_row(const LongFields& lf, const std::vector<std::size_t>& widths, ByteView cell) {
    Bytes row;
    for (std::size_t f = 0; f < 8; ++f) {
        const std::string& v = lf.fields[f];
        const std::size_t pad = widths[f] > v.size() ? widths[f] - v.size() : 0;
        if (f) row += ' ';
        if (kRightAligned[f]) row.append(pad, ' ');
        row += v;
        if (!kRightAligned[f]) row.append(pad, ' ');
    }
    row += ' ';
    row += cell;
    return row;
}

std::vector<std::size_t> field_widths(const std::vector<const LsEntry*>& rows) {
    std::vector<std::size_t> w(8, 0);
    for (const auto* e : rows)
        for (std::size_t f = 0; f < 8; ++f) w[f] = std::max(w[f], e->long_fields->fields[f].size());
    return w;
}

}  // namespace

Bytes render_long(const LsListing& listing) {
    Bytes out;
    if (listing.total_line) {
        out += *listing.total_line;
        out += "\r\n";
    }
    std::vector<const LsEntry*> real, all;
    for (const auto& e : listing.entries) {
        if (!e.long_fields) continue;
        all.push_back(&e);
        if (!e.raw_row.empty()) real.push_back(&e);
    }
    const auto old_w = field_widths(real);
    const auto new_w = field_widths(all);
    bool rerender = old_w != new_w;
    if (rerender) {
        // Only re-pad real rows when their original layout is reproducible.
        for (const auto* e : real)
            if (render_row(*e->long_fields, old_w, e->cell) != e->raw_row) {
                rerender = false;
                break;
            }
    }
    const auto& widths = rerender ? new_w : (real.empty() ? new_w : old_w);
    for (const auto& e : listing.entries) {
        if (!e.raw_row.empty() && !rerender)
            out += e.raw_row;
        else if (e.long_fields)
            out += render_row(*e.long_fields, widths, e.cell);
        else
            out += e.cell;
        out += "\r\n";
    }
    return out;
}

std::string format_permissions(unsigned permissions, char type) {
    std::string s(1, type);
    const char* rwx = "rwx";
    for (int shift = 6; shift >= 0; shift -= 3)
        for (int b = 0; b < 3; ++b) s += (permissions >> (shift + 2 - b)) & 1 ? rwx[b] : '-';
    return s;
}

std::string human_size(std::uint64_t bytes) {
    if (bytes < 1024) return std::to_string(bytes);
    static constexpr char units[] = "KMGTPE";
    double v = static_cast<double>(bytes);
    int u = -1;
    while (v >= 1024 && u < 5) {
        v /= 1024;
        ++u;
    }
    char buf[32];
    if (v < 10) {
        double r = std::ceil(v * 10) / 10;
        if (r < 10) {
            std::snprintf(buf, sizeof buf, "%.1f%c", r, units[u]);
            return buf;
        }
        v = r;
    }
    double r = std::ceil(v);
    if (r >= 1024 && u < 5) {
        std::snprintf(buf, sizeof buf, "1.0%c", units[u + 1]);
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.0f%c", r, units[u]);
    return buf;
}

std::vector<std::string> format_ls_date(std::chrono::system_clock::time_point when,
                                        std::chrono::system_clock::time_point now) {
    static constexpr const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                             "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    const std::time_t t = std::chrono::system_clock::to_time_t(when);
    std::tm tm{};
    localtime_r(&t, &tm);
    const auto six_months = std::chrono::seconds(31556952 / 2);
    const bool recent = when > now - six_months && when <= now + std::chrono::minutes(1);
    char tail[16];
    if (recent)
        std::snprintf(tail, sizeof tail, "%02d:%02d", tm.tm_hour, tm.tm_min);
    else
        std::snprintf(tail, sizeof tail, "%d", tm.tm_year + 1900);
    return {months[tm.tm_mon], std::to_string(tm.tm_mday), tail};
}

Bytes render_completion_list(const std::vector<std::string>& names, int width) {
    if (names.empty()) return {};
    std::size_t max = 0;
    for (const auto& n : names) max = std::max(max, display_width(n));
    max += 2;
    const std::size_t screen = width > 0 ? static_cast<std::size_t>(width) : 80;
    std::size_t limit = screen / max;
    if (limit != 1 && limit * max == screen) --limit;
    if (limit == 0) limit = 1;
    const std::size_t count = (names.size() + limit - 1) / limit;
    Bytes out;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0, l = i; j < limit && l < names.size(); ++j, l += count) {
            out += names[l];
            if (j + 1 < limit && l + count < names.size()) out.append(max - display_width(names[l]), ' ');
        }
        out += "\r\n";
    }
    return out;
}

}  // namespace sshdecoy
