#include "sshdecoy/decoy_overlay.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sshdecoy {

namespace fs = std::filesystem;

const char* to_string(DecoyMode mode) {
    switch (mode) {
    case DecoyMode::Add: return "add";
    case DecoyMode::Override: return "override";
    case DecoyMode::Hide: return "hide";
    }
    return "?";
}

std::string normalize_path(std::string_view absolute) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < absolute.size()) {
        while (i < absolute.size() && absolute[i] == '/') ++i;
        std::size_t j = i;
        while (j < absolute.size() && absolute[j] != '/') ++j;
        const std::string_view part = absolute.substr(i, j - i);
        if (part.empty() || part == ".") {
        } else if (part == "..") {
            if (!parts.empty()) parts.pop_back();
        } else {
            parts.push_back(part);
        }
        i = j;
    }
    std::string out;
    for (const auto& p : parts) {
        out += '/';
        out += p;
    }
    return out.empty() ? "/" : out;
}

std::string resolve(std::string_view path, std::string_view cwd, std::string_view home) {
    if (path == "~") return normalize_path(home);
    if (starts_with(path, "~/")) return normalize_path(std::string(home) + std::string(path.substr(1)));
    if (starts_with(path, "~")) return std::string(path);
    if (starts_with(path, "/")) return normalize_path(path);
    return normalize_path(std::string(cwd) + "/" + std::string(path));
}

std::string parent_dir(std::string_view vpath) {
    const auto slash = vpath.rfind('/');
    if (slash == std::string_view::npos || slash == 0) return "/";
    return std::string(vpath.substr(0, slash));
}

std::string base_name(std::string_view vpath) {
    const auto slash = vpath.rfind('/');
    return std::string(slash == std::string_view::npos ? vpath : vpath.substr(slash + 1));
}

std::string join_path(std::string_view dir, std::string_view name) {
    if (dir.empty() || dir == "/") return "/" + std::string(name);
    return std::string(dir) + "/" + std::string(name);
}

namespace {

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw OverlayError("cannot read decoy file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Maps every regular file under root to its virtual absolute path.
std::vector<std::pair<fs::path, std::string>> scan_root(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw OverlayError("decoy root is not a readable directory: " + root.string());
    std::vector<std::pair<fs::path, std::string>> files;
    fs::recursive_directory_iterator it(root, ec), end;
    if (ec) throw OverlayError("cannot read decoy root " + root.string() + ": " + ec.message());
    for (; it != end; it.increment(ec)) {
        if (ec) throw OverlayError("cannot read decoy root " + root.string() + ": " + ec.message());
        if (it->is_directory()) continue;
        if (!it->is_regular_file())
            throw OverlayError("decoy root entries must be regular files: " + it->path().string());
        const std::string rel = fs::relative(it->path(), root).generic_string();
        files.emplace_back(it->path(), normalize_path("/" + rel));
    }
    return files;
}

void insert_unique(std::map<std::string, DecoyEntry, std::less<>>& dest,
                   std::map<std::string, std::string>& origin, DecoyEntry entry, const std::string& source) {
    if (auto it = origin.find(entry.vpath); it != origin.end())
        throw OverlayError("duplicate decoy path " + entry.vpath + " from " + it->second + " and " + source);
    origin.emplace(entry.vpath, source);
    dest[entry.vpath] = std::move(entry);
}

void check_no_directory_conflicts(const std::map<std::string, DecoyEntry, std::less<>>& entries) {
    // A decoy path that is also the parent of another decoy would need a
    // decoy directory, which is not supported.
    for (const auto& [path, entry] : entries) {
        if (entry.mode == DecoyMode::Hide) continue;
        const std::string prefix = path + "/";
        auto it = entries.lower_bound(prefix);
        if (it != entries.end() && starts_with(it->first, prefix))
            throw OverlayError("decoy directories are not supported: " + path + " has children");
    }
}

}  // namespace

OverlaySnapshot OverlaySnapshot::load(const fs::path& add_root, const fs::path& hide_root,
                                      const std::vector<DecoyEntry>& inline_entries) {
    OverlaySnapshot snap;
    std::map<std::string, DecoyEntry, std::less<>> from_roots;

    if (!add_root.empty()) {
        std::map<std::string, std::string> origin;
        for (const auto& [file, vpath] : scan_root(add_root)) {
            DecoyEntry entry;
            entry.mode = DecoyMode::Add;
            entry.vpath = vpath;
            if (ends_with(vpath, kOverrideSuffix) && vpath.size() > kOverrideSuffix.size() + 1 &&
                base_name(vpath) != kOverrideSuffix) {
                entry.mode = DecoyMode::Override;
                entry.vpath = vpath.substr(0, vpath.size() - kOverrideSuffix.size());
            }
            entry.content = read_file(file);
            insert_unique(from_roots, origin, std::move(entry), file.string());
        }
    }
    if (!hide_root.empty()) {
        std::map<std::string, std::string> origin;
        std::map<std::string, DecoyEntry, std::less<>> hides;
        for (const auto& [file, vpath] : scan_root(hide_root)) {
            DecoyEntry entry;
            entry.mode = DecoyMode::Hide;
            entry.vpath = vpath;
            insert_unique(hides, origin, std::move(entry), file.string());
        }
        for (auto& [path, entry] : hides) {
            if (from_roots.count(path))
                throw OverlayError("path " + path + " is both added and hidden by the decoy roots");
            from_roots.emplace(path, std::move(entry));
        }
    }

    snap.entries_ = std::move(from_roots);
    std::map<std::string, std::string> inline_origin;
    std::map<std::string, DecoyEntry, std::less<>> inlined;
    for (const auto& e : inline_entries) {
        DecoyEntry entry = e;
        if (entry.vpath.empty() || entry.vpath[0] != '/')
            throw OverlayError("inline decoy path must be absolute: " + entry.vpath);
        entry.vpath = normalize_path(entry.vpath);
        if (entry.mode == DecoyMode::Hide) entry.content.clear();
        insert_unique(inlined, inline_origin, std::move(entry), "inline decoys");
    }
    for (auto& [path, entry] : inlined) snap.entries_[path] = std::move(entry);
    check_no_directory_conflicts(snap.entries_);
    return snap;
}

OverlaySnapshot OverlaySnapshot::from_entries(const std::vector<DecoyEntry>& entries) {
    return load({}, {}, entries);
}

const DecoyEntry* OverlaySnapshot::lookup(std::string_view vpath) const {
    auto it = entries_.find(vpath);
    return it == entries_.end() ? nullptr : &it->second;
}

DirListing OverlaySnapshot::list_dir(std::string_view dir_vpath) const {
    DirListing out;
    const std::string prefix = dir_vpath == "/" ? "/" : std::string(dir_vpath) + "/";
    for (auto it = entries_.lower_bound(prefix); it != entries_.end() && starts_with(it->first, prefix); ++it) {
        const std::string_view rest = std::string_view(it->first).substr(prefix.size());
        if (rest.empty() || rest.find('/') != std::string_view::npos) continue;
        switch (it->second.mode) {
        case DecoyMode::Add: out.adds.emplace_back(rest); break;
        case DecoyMode::Override: out.overrides.emplace(rest); break;
        case DecoyMode::Hide: out.hides.emplace(rest); break;
        }
    }
    return out;  // map order keeps adds sorted bytewise
}

std::vector<std::string> OverlaySnapshot::complete(std::string_view dir_vpath, std::string_view fragment) const {
    const DirListing listing = list_dir(dir_vpath);
    std::vector<std::string> names;
    for (const auto& n : listing.adds)
        if (starts_with(n, fragment)) names.push_back(n);
    for (const auto& n : listing.overrides)
        if (starts_with(n, fragment)) names.push_back(n);
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace sshdecoy
