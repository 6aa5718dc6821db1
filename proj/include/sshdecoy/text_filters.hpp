#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

// A proxy-local reimplementation of a stdin-to-stdout text utility, used to
// run pipelines over decoy content without touching the host. Input and
// output use LF line endings; sort and comparison follow the C locale.
using TextFilter = std::function<Bytes(ByteView)>;

// Returns a filter for argv (argv[0] is the program: grep, head, tail, wc,
// sort or uniq), or nullopt when the program or any option is unsupported or
// when file operands are present.
std::optional<TextFilter> make_filter(const std::vector<std::string>& argv);

// Parses a head/tail line count option set; nullopt when unsupported.
// `from_start` is set for tail's "+N" form, `all_but` for head's "-n -N".
struct LineCount {
    long long count = 10;
    bool bytes = false;
    bool from_start = false;
    bool all_but = false;
};
std::optional<LineCount> parse_line_count(const std::vector<std::string>& args, std::size_t& operand_index,
                                          bool tail);

Bytes head_lines(ByteView input, const LineCount& count);
Bytes tail_lines(ByteView input, const LineCount& count);

}  // namespace sshdecoy
