#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "path.hpp"

namespace crdtfs {

// ---------------------------------------------------------------------------
// User-level edits
// ---------------------------------------------------------------------------

/// Insert one character at a visible index of a text file.
struct EditInsert {
    std::size_t index = 0;
    char ch = 0;
    friend auto operator<=>(const EditInsert&, const EditInsert&) = default;
};

/// Erase the character at a visible index of a text file.
struct EditErase {
    std::size_t index = 0;
    friend auto operator<=>(const EditErase&, const EditErase&) = default;
};

/// Replace the whole value of a binary file.
struct EditWrite {
    std::string value;
    friend auto operator<=>(const EditWrite&, const EditWrite&) = default;
};

using Edit = std::variant<EditInsert, EditErase, EditWrite>;

inline std::string render_edit(const Edit& e) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, EditInsert>)
                return "ins " + std::to_string(v.index) + " " + std::string(1, v.ch);
            else if constexpr (std::is_same_v<T, EditErase>)
                return "del " + std::to_string(v.index);
            else
                return "write " + v.value;
        },
        e);
}

// ---------------------------------------------------------------------------
// Top-level file-system operations
// ---------------------------------------------------------------------------

/// Creates element `name` of type `type` inside directory `parent`.
struct OpAdd {
    Path parent;
    std::string name;
    FileType type = FileType::text;

    Path full_path() const { return parent.child(name); }
    friend auto operator<=>(const OpAdd&, const OpAdd&) = default;
};

/// Removes the element at `path` (and, for directories, its subtree).
struct OpRemove {
    Path path;
    friend auto operator<=>(const OpRemove&, const OpRemove&) = default;
};

/// Applies a content edit to the file at `path`.
struct OpUpdate {
    Path path;
    Edit edit;
    friend auto operator<=>(const OpUpdate&, const OpUpdate&) = default;
};

using FsOp = std::variant<OpAdd, OpRemove, OpUpdate>;

inline std::string render_op(const FsOp& op) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, OpAdd>)
                return "add " + v.full_path().render() + " " + std::string(type_tag(v.type));
            else if constexpr (std::is_same_v<T, OpRemove>)
                return "rmv " + v.path.render();
            else
                return "upd " + v.path.render() + " " + render_edit(v.edit);
        },
        op);
}

namespace detail {
inline std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::size_t parse_index(const std::string& tok) {
    if (tok.empty()) throw parse_error("expected index", 0);
    std::size_t value = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') throw parse_error("bad index '" + tok + "'", 0);
        value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    return value;
}
}  // namespace detail

/// Parses an edit literal: "ins <index> <char>", "del <index>", "write <rest-of-line>".
inline Edit parse_edit(std::string_view text) {
    auto toks = detail::split_ws(text);
    if (toks.empty()) throw parse_error("empty edit literal", 0);
    if (toks[0] == "ins") {
        if (toks.size() != 3 || toks[2].size() != 1)
            throw parse_error("expected 'ins <index> <char>'", 0);
        return EditInsert{detail::parse_index(toks[1]), toks[2][0]};
    }
    if (toks[0] == "del") {
        if (toks.size() != 2) throw parse_error("expected 'del <index>'", 0);
        return EditErase{detail::parse_index(toks[1])};
    }
    if (toks[0] == "write") {
        auto at = text.find("write");
        auto rest = text.substr(at + 5);
        while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
        while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t')) rest.remove_suffix(1);
        return EditWrite{std::string(rest)};
    }
    throw parse_error("unknown edit '" + toks[0] + "'", 0);
}

/// Parses an op literal: "add /p/name type", "rmv /p", "upd /p <edit literal>".
inline FsOp parse_op(std::string_view text) {
    auto toks = detail::split_ws(text);
    if (toks.empty()) throw parse_error("empty op literal", 0);
    if (toks[0] == "add") {
        if (toks.size() != 3) throw parse_error("expected 'add /path type'", 0);
        Path full = Path::parse(toks[1]);
        if (full.is_root()) throw parse_error("cannot add the root", 0);
        return OpAdd{full.parent(), full.name(), parse_type_tag(toks[2])};
    }
    if (toks[0] == "rmv") {
        if (toks.size() != 2) throw parse_error("expected 'rmv /path'", 0);
        return OpRemove{Path::parse(toks[1])};
    }
    if (toks[0] == "upd") {
        if (toks.size() < 3) throw parse_error("expected 'upd /path <edit>'", 0);
        Path p = Path::parse(toks[1]);
        auto at = text.find(toks[1]);
        return OpUpdate{std::move(p), parse_edit(text.substr(at + toks[1].size()))};
    }
    throw parse_error("unknown op '" + toks[0] + "'", 0);
}

// ---------------------------------------------------------------------------
// Conflict classification of concurrent operation pairs
// ---------------------------------------------------------------------------

enum class ConflictKind { AddRemoveSame, AddRemoveAncestor, AddAddName, UpdateRemoveAncestor, None };

inline std::string_view conflict_name(ConflictKind k) {
    switch (k) {
        case ConflictKind::AddRemoveSame: return "AddRemoveSame";
        case ConflictKind::AddRemoveAncestor: return "AddRemoveAncestor";
        case ConflictKind::AddAddName: return "AddAddName";
        case ConflictKind::UpdateRemoveAncestor: return "UpdateRemoveAncestor";
        case ConflictKind::None: return "None";
    }
    throw error("unreachable: bad ConflictKind");
}

namespace detail {
inline ConflictKind classify_ordered(const FsOp& a, const FsOp& b) {
    if (const auto* add = std::get_if<OpAdd>(&a)) {
        if (const auto* rmv = std::get_if<OpRemove>(&b)) {
            if (rmv->path == add->full_path()) return ConflictKind::AddRemoveSame;
            if (rmv->path.is_prefix_of(add->parent)) return ConflictKind::AddRemoveAncestor;
        }
        if (const auto* add2 = std::get_if<OpAdd>(&b)) {
            if (add->parent == add2->parent && add->name == add2->name)
                return ConflictKind::AddAddName;
        }
    }
    if (const auto* upd = std::get_if<OpUpdate>(&a)) {
        if (const auto* rmv = std::get_if<OpRemove>(&b)) {
            if (rmv->path.is_prefix_of(upd->path)) return ConflictKind::UpdateRemoveAncestor;
        }
    }
    return ConflictKind::None;
}
}  // namespace detail

/// Classifies a pair of operations assumed concurrent. Symmetric in its arguments.
inline ConflictKind classify_conflict(const FsOp& a, const FsOp& b) {
    ConflictKind k = detail::classify_ordered(a, b);
    if (k != ConflictKind::None) return k;
    return detail::classify_ordered(b, a);
}

// ---------------------------------------------------------------------------
// Sequential file-system tree (single-site model; used as a test oracle)
// ---------------------------------------------------------------------------

class FsTree {
  public:
    struct Node {
        FileType type = FileType::directory;
        std::map<std::string, Node> children;  // directories only
        std::string data;                      // files only

        bool is_empty() const { return children.empty() && data.empty(); }
        friend bool operator==(const Node&, const Node&) = default;
    };

    FsTree() { root_.type = FileType::directory; }

    /// Three-case recursive descent: the empty path exists in any content;
    /// a non-empty path exists iff its head is a child of a directory and
    /// the tail exists in that child.
    bool exists(const Path& p) const { return find(p) != nullptr; }

    const Node& node_at(const Path& p) const {
        const Node* n = find(p);
        if (!n) throw not_found_error("no element at " + p.render());
        return *n;
    }

    /// Returns the violated precondition clause for `op`, or nullopt when all hold.
    std::optional<std::string> pre_violation(const FsOp& op) const {
        return std::visit(
            [this](const auto& v) -> std::optional<std::string> {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, OpAdd>) {
                    const Node* parent = find(v.parent);
                    if (!parent) return "exists(p)";
                    if (parent->type != FileType::directory) return "type(content(p)) = directory";
                    if (parent->children.count(v.name)) return "not exists(p.n)";
                    return std::nullopt;
                } else if constexpr (std::is_same_v<T, OpRemove>) {
                    if (v.path.is_root()) return "p is not the root";
                    if (!find(v.path)) return "exists(p)";
                    return std::nullopt;
                } else {
                    const Node* n = find(v.path);
                    if (!n) return "exists(p)";
                    return edit_violation(*n, v.edit);
                }
            },
            op);
    }

    bool check_pre(const FsOp& op) const { return !pre_violation(op).has_value(); }

    /// Applies `op`; throws precondition_error naming the violated clause otherwise.
    void apply(const FsOp& op) {
        if (auto clause = pre_violation(op))
            throw precondition_error("precondition violated: " + *clause + " for " + render_op(op));
        std::visit(
            [this](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, OpAdd>) {
                    Node child;
                    child.type = v.type;
                    mut(v.parent).children.emplace(v.name, std::move(child));
                } else if constexpr (std::is_same_v<T, OpRemove>) {
                    mut(v.path.parent()).children.erase(v.path.name());
                } else {
                    apply_edit(mut(v.path), v.edit);
                }
            },
            op);
    }

    const Node& root() const { return root_; }

    /// Indented dump, one node per line: "name [type]" with file data appended.
    std::string dump() const {
        std::string out = "/\n";
        dump_children(root_, 1, out);
        return out;
    }

    friend bool operator==(const FsTree&, const FsTree&) = default;

  private:
    static std::optional<std::string> edit_violation(const Node& n, const Edit& e) {
        if (n.type == FileType::directory) return "u is applicable to content(p)";
        if (std::holds_alternative<EditWrite>(e)) {
            if (n.type != FileType::binary) return "u is applicable to content(p)";
            return std::nullopt;
        }
        if (n.type != FileType::text) return "u is applicable to content(p)";
        if (const auto* ins = std::get_if<EditInsert>(&e)) {
            if (ins->index > n.data.size()) return "edit index within range";
        } else {
            const auto& del = std::get<EditErase>(e);
            if (del.index >= n.data.size()) return "edit index within range";
        }
        return std::nullopt;
    }

    static void apply_edit(Node& n, const Edit& e) {
        if (const auto* ins = std::get_if<EditInsert>(&e))
            n.data.insert(n.data.begin() + static_cast<std::ptrdiff_t>(ins->index), ins->ch);
        else if (const auto* del = std::get_if<EditErase>(&e))
            n.data.erase(n.data.begin() + static_cast<std::ptrdiff_t>(del->index));
        else
            n.data = std::get<EditWrite>(e).value;
    }

    const Node* find(const Path& p) const {
        const Node* cur = &root_;
        for (const auto& seg : p.segments()) {
            if (cur->type != FileType::directory) return nullptr;
            auto it = cur->children.find(seg);
            if (it == cur->children.end()) return nullptr;
            cur = &it->second;
        }
        return cur;
    }

    Node& mut(const Path& p) {
        Node* cur = &root_;
        for (const auto& seg : p.segments()) {
            auto it = cur->children.find(seg);
            if (it == cur->children.end()) throw not_found_error("no element at " + p.render());
            cur = &it->second;
        }
        return *cur;
    }

    void dump_children(const Node& n, std::size_t depth, std::string& out) const {
        for (const auto& [name, child] : n.children) {
            out.append(depth * 2, ' ');
            out += name;
            out += " [";
            out += type_tag(child.type);
            out += "]";
            if (child.type != FileType::directory) {
                out += " \"";
                out += child.data;
                out += "\"";
            }
            out += "\n";
            if (child.type == FileType::directory) dump_children(child, depth + 1, out);
        }
    }

    Node root_;
};

}  // namespace crdtfs
