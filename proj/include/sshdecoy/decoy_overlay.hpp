#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

enum class DecoyMode { Add, Override, Hide };

const char* to_string(DecoyMode mode);

struct DecoyMeta {
    std::string owner;  // empty: the session username
    std::string group;  // empty: the session username
    unsigned permissions = 0644;
    std::optional<std::uint64_t> size;  // empty: content length
    std::optional<std::chrono::system_clock::time_point> mtime;  // empty: proxy start
};

struct DecoyEntry {
    std::string vpath;  // absolute, normalized
    DecoyMode mode = DecoyMode::Add;
    Bytes content;      // empty for Hide
    DecoyMeta meta;

    std::uint64_t size() const { return meta.size.value_or(content.size()); }
    bool executable() const { return (meta.permissions & 0111) != 0; }
};

struct OverlayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DirListing {
    std::vector<std::string> adds;  // Add entries, sorted bytewise
    std::set<std::string> hides;
    std::set<std::string> overrides;

    bool empty() const { return adds.empty() && hides.empty() && overrides.empty(); }
};

// Immutable decoy filesystem layered over the host's real one.
class OverlaySnapshot {
public:
    static constexpr std::string_view kOverrideSuffix = ".override";

    OverlaySnapshot() = default;

    // Loads add_root and hide_root (either may be empty = not configured),
    // then merges inline entries, which win conflicts. Throws OverlayError.
    static OverlaySnapshot load(const std::filesystem::path& add_root, const std::filesystem::path& hide_root,
                                const std::vector<DecoyEntry>& inline_entries);
    static OverlaySnapshot from_entries(const std::vector<DecoyEntry>& entries);

    const DecoyEntry* lookup(std::string_view vpath) const;
    DirListing list_dir(std::string_view dir_vpath) const;
    // Add/Override names directly under dir_vpath starting with fragment, sorted.
    std::vector<std::string> complete(std::string_view dir_vpath, std::string_view fragment) const;

    const std::map<std::string, DecoyEntry, std::less<>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::map<std::string, DecoyEntry, std::less<>> entries_;
};

// Lexical normalization of an absolute path: collapses "//", ".", "..".
std::string normalize_path(std::string_view absolute);
// Expands "~" and "~/..." with home, joins relative paths to cwd, normalizes.
// "~user" forms are returned unexpanded and unnormalized.
std::string resolve(std::string_view path, std::string_view cwd, std::string_view home);
std::string parent_dir(std::string_view vpath);
std::string base_name(std::string_view vpath);
std::string join_path(std::string_view dir, std::string_view name);

}  // namespace sshdecoy
