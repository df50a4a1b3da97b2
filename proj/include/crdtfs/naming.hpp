#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hierarchy.hpp"
#include "path.hpp"

namespace crdtfs {

/// How sibling name conflicts are handled: prevented up front by typed-name
/// preconditions, or admitted and displayed under decorated names until a
/// user resolves them.
enum class NamingMethod { avoid, rename };

/// How conflicting siblings are decorated under the rename method.
enum class Decorator { by_origin_path, by_type_algorithm };

struct NamingConfig {
    NamingMethod method = NamingMethod::rename;
    Decorator decorator = Decorator::by_origin_path;
};

inline std::string naming_tag(const NamingConfig& cfg) {
    if (cfg.method == NamingMethod::avoid) return "avoid";
    return cfg.decorator == Decorator::by_origin_path ? "rename by-origin" : "rename by-algo";
}

/// The avoid method needs every element's type recoverable from its name, and
/// relocation policies break the name-implies-path assumptions it relies on.
inline void validate_configs(const HierarchyConfig& hier, const NamingConfig& naming) {
    if (naming.method != NamingMethod::avoid) return;
    if (!hier.leaf_only && (hier.policy == OrphanPolicy::root || hier.policy == OrphanPolicy::compact))
        throw config_error("avoid naming cannot be combined with relocating orphan policies");
}

// ---------------------------------------------------------------------------
// Typed names (avoid method)
// ---------------------------------------------------------------------------

/// Infers an element type from its name: extension-free names are
/// directories, known text extensions are text files, everything else with an
/// extension is treated as binary.
inline FileType type_of_name(const std::string& name) {
    auto dot = name.find_last_of('.');
    if (dot == std::string::npos || dot + 1 == name.size()) return FileType::directory;
    std::string ext = name.substr(dot + 1);
    static const std::set<std::string> text_exts = {"c",  "java", "txt", "md",   "h",
                                                    "cpp", "py",   "xml", "html", "json"};
    if (text_exts.count(ext)) return FileType::text;
    return FileType::binary;
}

/// Extra local preconditions the avoid method imposes on an add.
inline std::optional<std::string> avoid_add_violation(const HierarchyConfig& hier, const ViewAdd& add) {
    if (type_of_name(add.name) != add.type)
        return "t = type(n): name '" + add.name + "' implies " +
               std::string(type_tag(type_of_name(add.name)));
    if (hier.leaf_only)
        for (const auto& seg : add.parent.segments())
            if (type_of_name(seg) != FileType::directory)
                return "directory segments must be extension-free: '" + seg + "'";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Displayed tree
// ---------------------------------------------------------------------------

/// A node of the user-facing tree: like ViewNode plus the displayed name,
/// which is unique among siblings by construction.
struct FsNode {
    std::string displayed;
    std::string name;  // undecorated
    FileType type = FileType::directory;
    Path origin;
    bool decorated = false;
    std::string content;
    bool key_backed = false;
    std::vector<FsNode> children;

    friend bool operator==(const FsNode&, const FsNode&) = default;
};

namespace naming_detail {

inline std::string underscored(const Path& p) {
    std::string s = p.render();
    for (char& c : s)
        if (c == '/') c = '_';
    return s;
}

inline std::string_view algo_tag(FileType t) {
    switch (t) {
        case FileType::directory: return "dir";
        case FileType::text: return "logoot";
        case FileType::binary: return "lww";
    }
    throw error("unreachable: bad FileType");
}

inline std::string decorate(const ViewNode& n, Decorator d, bool long_form) {
    if (d == Decorator::by_origin_path)
        return n.name + "." + std::string(type_tag(n.type)) + "_" + underscored(n.origin.parent());
    std::string s = n.name + "." + std::string(algo_tag(n.type));
    if (long_form) s += "_" + underscored(n.origin.parent());
    return s;
}

inline FsNode project(const ViewNode& v, const NamingConfig& cfg) {
    FsNode out;
    out.name = v.name;
    out.type = v.type;
    out.origin = v.origin;
    out.content = v.content;
    out.key_backed = v.key_backed;

    std::map<std::string, std::vector<const ViewNode*>> groups;
    for (const auto& c : v.children) groups[c.name].push_back(&c);

    for (const auto& [name, members] : groups) {
        bool conflict = members.size() > 1;
        if (conflict && cfg.method == NamingMethod::avoid)
            throw contract_error("avoid naming admitted a name conflict on '" + name + "'");
        std::map<FileType, std::size_t> per_type;
        for (const ViewNode* m : members) ++per_type[m->type];
        for (const ViewNode* m : members) {
            FsNode child = project(*m, cfg);
            if (!conflict) {
                child.displayed = m->name;
            } else {
                child.decorated = true;
                bool long_form = cfg.decorator == Decorator::by_type_algorithm && per_type[m->type] > 1;
                child.displayed = decorate(*m, cfg.decorator, long_form);
            }
            out.children.push_back(std::move(child));
        }
    }

    std::sort(out.children.begin(), out.children.end(),
              [](const FsNode& a, const FsNode& b) { return a.displayed < b.displayed; });
    for (std::size_t i = 1; i < out.children.size(); ++i)
        if (out.children[i].displayed == out.children[i - 1].displayed)
            throw contract_error("displayed names collide on '" + out.children[i].displayed + "'");
    return out;
}

}  // namespace naming_detail

/// Projects the hierarchy view to the displayed tree. Recomputed on demand:
/// naming is a pure function of the view in both evaluation modes.
inline FsNode fs_view(const ViewNode& root, const NamingConfig& cfg) {
    return naming_detail::project(root, cfg);
}

// ---------------------------------------------------------------------------
// Dumps
// ---------------------------------------------------------------------------

namespace naming_detail {
inline void dump_rec(const FsNode& n, std::size_t depth, std::string& out) {
    for (const auto& c : n.children) {
        out.append(depth * 2, ' ');
        out += c.displayed;
        out += " [";
        out += type_tag(c.type);
        out += "]";
        if (c.decorated) out += " (conflict)";
        if (c.type != FileType::directory) {
            out += " \"";
            out += c.content;
            out += "\"";
        }
        out += "\n";
        if (c.type == FileType::directory) dump_rec(c, depth + 1, out);
    }
}

inline void dump_flat_rec(const FsNode& n, const std::string& prefix, std::string& out) {
    for (const auto& c : n.children) {
        std::string path = prefix + "/" + c.displayed;
        out += path;
        out += " [";
        out += type_tag(c.type);
        out += "]";
        if (c.decorated) out += " (conflict)";
        if (c.type != FileType::directory) {
            out += " \"";
            out += c.content;
            out += "\"";
        }
        out += "\n";
        if (c.type == FileType::directory) dump_flat_rec(c, path, out);
    }
}
}  // namespace naming_detail

inline std::string dump_fs(const FsNode& root) {
    std::string out = "/\n";
    naming_detail::dump_rec(root, 1, out);
    return out;
}

inline std::string dump_fs_flat(const FsNode& root) {
    std::string out = "/ [dir]\n";
    naming_detail::dump_flat_rec(root, "", out);
    return out;
}

// ---------------------------------------------------------------------------
// Displayed-path resolution and conflict resolution planning
// ---------------------------------------------------------------------------

/// Finds the node at a displayed path. Displayed names are unique among
/// siblings, so this never branches.
inline const FsNode* find_displayed(const FsNode& root, const Path& displayed) {
    const FsNode* cur = &root;
    for (const auto& seg : displayed.segments()) {
        const FsNode* next = nullptr;
        for (const auto& c : cur->children)
            if (c.displayed == seg) {
                next = &c;
                break;
            }
        if (!next) return nullptr;
        cur = next;
    }
    return cur;
}

enum class ResolveDecision { choose, merge };

/// What a rename-method resolution must do to the replicated state: keep the
/// winner's key, drop the losers' keys (after merging their content into the
/// winner when asked to).
struct ResolvePlan {
    ElementKey winner;
    std::vector<ElementKey> losers;
    bool merge = false;
};

inline ResolvePlan plan_resolution(const FsNode& root, const NamingConfig& cfg, const Path& dir,
                                   const std::string& name, ResolveDecision decision,
                                   const std::optional<Path>& chosen_origin,
                                   const std::optional<FileType>& chosen_type = std::nullopt) {
    if (cfg.method != NamingMethod::rename)
        throw precondition_error("resolution applies to the rename method only");
    const FsNode* d = find_displayed(root, dir);
    if (!d) throw not_found_error("no directory at " + dir.render());
    if (d->type != FileType::directory)
        throw precondition_error(dir.render() + " is not a directory");

    std::vector<const FsNode*> group;
    for (const auto& c : d->children)
        if (c.name == name) group.push_back(&c);
    if (group.size() < 2)
        throw precondition_error("no name conflict on '" + name + "' in " + dir.render());
    for (const FsNode* m : group)
        if (!m->key_backed)
            throw precondition_error("conflict on '" + name +
                                     "' involves a synthesized directory and cannot be resolved");

    ResolvePlan plan;
    if (decision == ResolveDecision::choose) {
        if (!chosen_origin) throw precondition_error("choose requires an origin");
        std::vector<const FsNode*> matches;
        for (const FsNode* m : group)
            if (m->origin == *chosen_origin && (!chosen_type || m->type == *chosen_type))
                matches.push_back(m);
        if (matches.empty())
            throw not_found_error("no conflicting element with origin " + chosen_origin->render());
        if (matches.size() > 1)
            throw ambiguity_error("several conflicting elements share origin " +
                                  chosen_origin->render() + "; pass the type to disambiguate");
        const FsNode* winner = matches.front();
        plan.winner = ElementKey{winner->origin, winner->type};
        for (const FsNode* m : group)
            if (m != winner) plan.losers.push_back(ElementKey{m->origin, m->type});
        return plan;
    }

    for (const FsNode* m : group)
        if (m->type != group.front()->type)
            throw precondition_error("merge requires elements of one type");
    if (group.front()->type == FileType::directory)
        throw precondition_error("directories cannot be merged; choose one instead");
    const FsNode* winner = group.front();
    for (const FsNode* m : group)
        if (m->origin < winner->origin) winner = m;
    plan.merge = true;
    plan.winner = ElementKey{winner->origin, winner->type};
    for (const FsNode* m : group)
        if (m != winner) plan.losers.push_back(ElementKey{m->origin, m->type});
    return plan;
}

}  // namespace crdtfs
