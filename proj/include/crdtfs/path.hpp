#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace crdtfs {

/// The kind of element a path designates.
enum class FileType { directory, text, binary };

inline std::string_view type_tag(FileType t) {
    switch (t) {
        case FileType::directory: return "dir";
        case FileType::text: return "text";
        case FileType::binary: return "bin";
    }
    throw error("unreachable: bad FileType");
}

inline FileType parse_type_tag(std::string_view s) {
    if (s == "dir") return FileType::directory;
    if (s == "text") return FileType::text;
    if (s == "bin") return FileType::binary;
    throw parse_error("unknown type tag '" + std::string(s) + "'", 0);
}

/// An absolute slash-separated path. The root is the empty segment list.
class Path {
  public:
    Path() = default;
    explicit Path(std::vector<std::string> segments) : segments_(std::move(segments)) {
        for (const auto& s : segments_) validate_segment(s);
    }

    /// Parses "/" or "/a/b/c". Rejects relative paths, empty segments,
    /// and segments containing whitespace.
    static Path parse(std::string_view text) {
        if (text.empty() || text.front() != '/')
            throw parse_error("path must start with '/'", 0);
        Path p;
        if (text == "/") return p;
        std::size_t i = 1;
        while (i <= text.size()) {
            std::size_t j = text.find('/', i);
            if (j == std::string_view::npos) j = text.size();
            if (j == i) throw parse_error("empty path segment", i);
            std::string seg(text.substr(i, j - i));
            validate_segment(seg, i);
            p.segments_.push_back(std::move(seg));
            i = j + 1;
        }
        return p;
    }

    std::string render() const {
        if (segments_.empty()) return "/";
        std::string out;
        for (const auto& s : segments_) {
            out += '/';
            out += s;
        }
        return out;
    }

    bool is_root() const { return segments_.empty(); }
    std::size_t depth() const { return segments_.size(); }
    const std::vector<std::string>& segments() const { return segments_; }

    /// Final segment; the name under which the element lives in its parent.
    const std::string& name() const {
        if (is_root()) throw error("root path has no name");
        return segments_.back();
    }

    /// Longest strict prefix: the containing directory.
    Path parent() const {
        if (is_root()) throw error("root path has no parent");
        Path p;
        p.segments_.assign(segments_.begin(), segments_.end() - 1);
        return p;
    }

    Path child(std::string name) const {
        validate_segment(name);
        Path p = *this;
        p.segments_.push_back(std::move(name));
        return p;
    }

    /// True when *this is an ancestor of other or equal to it.
    bool is_prefix_of(const Path& other) const {
        if (segments_.size() > other.segments_.size()) return false;
        for (std::size_t i = 0; i < segments_.size(); ++i)
            if (segments_[i] != other.segments_[i]) return false;
        return true;
    }

    /// True when *this is a proper ancestor of other.
    bool is_strict_prefix_of(const Path& other) const {
        return segments_.size() < other.segments_.size() && is_prefix_of(other);
    }

    /// Replaces a leading prefix with another path. Requires from.is_prefix_of(*this).
    Path rebase(const Path& from, const Path& to) const {
        if (!from.is_prefix_of(*this)) throw error("rebase: prefix mismatch");
        Path p = to;
        p.segments_.insert(p.segments_.end(), segments_.begin() + from.depth(), segments_.end());
        return p;
    }

    friend auto operator<=>(const Path&, const Path&) = default;

  private:
    static void validate_segment(const std::string& s, std::size_t pos = 0) {
        if (s.empty()) throw parse_error("empty path segment", pos);
        for (char c : s) {
            if (c == '/' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                (static_cast<unsigned char>(c) < 0x20))
                throw parse_error("invalid character in path segment '" + s + "'", pos);
        }
    }

    std::vector<std::string> segments_;
};

/// Identity of a replicated element: its full creation path plus its type.
/// Two elements with the same path but different types are distinct.
struct ElementKey {
    Path path;
    FileType type = FileType::directory;

    std::string render() const { return "(" + path.render() + "," + std::string(type_tag(type)) + ")"; }

    friend auto operator<=>(const ElementKey&, const ElementKey&) = default;
};

}  // namespace crdtfs
