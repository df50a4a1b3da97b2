#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "fs_model.hpp"
#include "path.hpp"
#include "replication.hpp"

namespace crdtfs {

/// What to do with elements whose parent directory key is absent.
enum class OrphanPolicy { skip, reappear, root, compact };

inline std::string_view policy_tag(OrphanPolicy p) {
    switch (p) {
        case OrphanPolicy::skip: return "skip";
        case OrphanPolicy::reappear: return "reappear";
        case OrphanPolicy::root: return "root";
        case OrphanPolicy::compact: return "compact";
    }
    throw error("unreachable: bad OrphanPolicy");
}

inline OrphanPolicy parse_policy_tag(std::string_view s) {
    if (s == "skip") return OrphanPolicy::skip;
    if (s == "reappear") return OrphanPolicy::reappear;
    if (s == "root") return OrphanPolicy::root;
    if (s == "compact") return OrphanPolicy::compact;
    throw parse_error("unknown orphan policy '" + std::string(s) + "'", 0);
}

struct HierarchyConfig {
    bool leaf_only = false;           // files only in the set; directories synthesized
    OrphanPolicy policy = OrphanPolicy::skip;  // used when !leaf_only
    bool incremental = true;          // maintain the view on deltas vs recompute on lookup
};

/// One node of the tree view. Children may share a name here; the naming
/// layer above resolves that. origin is the path under which the element
/// lives in the replicated set (equal to the view path unless a policy
/// relocated an orphan). key_backed is false for synthesized directories
/// (leaf-only interiors and ancestors recreated by the reappear policy).
struct ViewNode {
    std::string name;
    FileType type = FileType::directory;
    Path origin;
    std::string content;
    bool key_backed = false;
    std::vector<ViewNode> children;

    friend bool operator==(const ViewNode&, const ViewNode&) = default;
};

namespace hier_detail {

inline std::tuple<const std::string&, std::string_view, std::string> sort_key(const ViewNode& n) {
    return {n.name, type_tag(n.type), n.origin.render()};
}

inline ViewNode& insert_child(ViewNode& parent, ViewNode child) {
    auto it = std::lower_bound(parent.children.begin(), parent.children.end(), child,
                               [](const ViewNode& a, const ViewNode& b) { return sort_key(a) < sort_key(b); });
    return *parent.children.insert(it, std::move(child));
}

/// Finds the child directory whose origin equals `at` (a view position every
/// non-relocated directory occupies exactly once).
inline ViewNode* child_dir_at(ViewNode& parent, const std::string& name, const Path& at) {
    for (auto& c : parent.children)
        if (c.type == FileType::directory && c.name == name && c.origin == at) return &c;
    return nullptr;
}

/// Descends to the node for a connected directory path; every step must exist.
inline ViewNode& dir_node_at(ViewNode& root, const Path& path) {
    ViewNode* cur = &root;
    Path walked;
    for (const auto& seg : path.segments()) {
        walked = walked.child(seg);
        ViewNode* next = child_dir_at(*cur, seg, walked);
        if (!next) throw contract_error("view is missing directory node " + walked.render());
        cur = next;
    }
    return *cur;
}

/// Descends to the parent path, creating synthesized directories as needed.
inline ViewNode& ensure_chain(ViewNode& root, const Path& path) {
    ViewNode* cur = &root;
    Path walked;
    for (const auto& seg : path.segments()) {
        walked = walked.child(seg);
        ViewNode* next = child_dir_at(*cur, seg, walked);
        if (!next) {
            ViewNode synth;
            synth.name = seg;
            synth.type = FileType::directory;
            synth.origin = walked;
            synth.key_backed = false;
            next = &insert_child(*cur, std::move(synth));
        }
        cur = next;
    }
    return *cur;
}

inline ViewNode make_node(const ElementKey& key, const ReplicationState& repl) {
    ViewNode n;
    n.name = key.path.name();
    n.type = key.type;
    n.origin = key.path;
    n.key_backed = true;
    if (key.type != FileType::directory) n.content = repl.value_of(key);
    return n;
}

}  // namespace hier_detail

class HierarchyEvaluator {
  public:
    HierarchyEvaluator() : HierarchyEvaluator(HierarchyConfig{}) {}
    explicit HierarchyEvaluator(HierarchyConfig cfg) : cfg_(cfg), cache_(make_root()) {}

    const HierarchyConfig& config() const { return cfg_; }

    static ViewNode make_root() {
        ViewNode r;
        r.type = FileType::directory;
        r.key_backed = true;
        return r;
    }

    /// Keys of the set whose parent chain is incomplete, transitively: the
    /// descendants of an orphan directory count as orphans themselves.
    static std::set<ElementKey> orphans(const std::set<ElementKey>& keys) {
        std::set<Path> conn = connected_dirs(keys);
        std::set<ElementKey> out;
        for (const auto& k : keys)
            if (!k.path.is_root() && !conn.count(k.path.parent())) out.insert(k);
        return out;
    }

    /// Full recomputation of the view from the replication state.
    static ViewNode compute(const ReplicationState& repl, const HierarchyConfig& cfg) {
        ViewNode root = make_root();
        std::vector<ElementKey> keys;
        repl.for_each_key([&](const ElementKey& k) { keys.push_back(k); });
        std::sort(keys.begin(), keys.end(), [](const ElementKey& a, const ElementKey& b) {
            return std::tuple(a.path.depth(), a.path, a.type) < std::tuple(b.path.depth(), b.path, b.type);
        });

        if (cfg.leaf_only) {
            for (const auto& k : keys) {
                if (k.type == FileType::directory)
                    throw contract_error("leaf-only set holds a directory key " + k.render());
                ViewNode& parent = hier_detail::ensure_chain(root, k.path.parent());
                hier_detail::insert_child(parent, hier_detail::make_node(k, repl));
            }
            return root;
        }

        std::set<ElementKey> key_set(keys.begin(), keys.end());
        std::set<Path> conn = connected_dirs(key_set);

        std::vector<ElementKey> orphan_keys;
        for (const auto& k : keys) {  // depth order: ancestors place before descendants
            if (!k.path.is_root() && conn.count(k.path.parent())) {
                ViewNode& parent = hier_detail::dir_node_at(root, k.path.parent());
                hier_detail::insert_child(parent, hier_detail::make_node(k, repl));
            } else {
                orphan_keys.push_back(k);
            }
        }
        for (const auto& k : orphan_keys) place_orphan(root, k, repl, key_set, cfg.policy);
        return root;
    }

    /// The current view. Non-incremental evaluation recomputes after any
    /// change; incremental evaluation returns the maintained cache.
    const ViewNode& view(const ReplicationState& repl) {
        if (!cfg_.incremental && dirty_) {
            cache_ = compute(repl, cfg_);
            dirty_ = false;
        }
        return cache_;
    }

    /// Reports that `key` turned visible/invisible in the set. Deltas are
    /// patched in place except when they can move OTHER nodes: a directory
    /// change with visible keys beneath it reconnects them on appearance and
    /// orphans them on disappearance, so those fall back to a full
    /// recomputation. Connectivity and orphan placement of any key consult
    /// only the directory keys on its own parent chain, so a delta at a path
    /// with nothing visible beneath it cannot re-anchor anything else.
    void note_key_delta(const ReplicationState& repl, const ElementKey& key, bool present) {
        if (!cfg_.incremental) {
            dirty_ = true;
            return;
        }
        if (cfg_.leaf_only && key.type == FileType::directory)
            throw contract_error("leaf-only set holds a directory key " + key.render());
        if (key.type == FileType::directory && has_key_strictly_under(repl, key.path)) {
            cache_ = compute(repl, cfg_);
            return;
        }
        if (present)
            incr_add_key(repl, key);
        else
            incr_remove_key(key);
    }

    /// Reports that `key`'s content value may have changed.
    void note_content_delta(const ReplicationState& repl, const ElementKey& key) {
        if (!cfg_.incremental) {
            dirty_ = true;
            return;
        }
        if (ViewNode* n = find_by_key(cache_, key)) n->content = repl.value_of(key);
    }

  private:
    static std::set<Path> connected_dirs(const std::set<ElementKey>& keys) {
        std::vector<Path> dirs;
        for (const auto& k : keys)
            if (k.type == FileType::directory) dirs.push_back(k.path);
        std::sort(dirs.begin(), dirs.end(),
                  [](const Path& a, const Path& b) { return std::tuple(a.depth(), a) < std::tuple(b.depth(), b); });
        std::set<Path> conn;
        conn.insert(Path());
        for (const auto& p : dirs)
            if (conn.count(p.parent())) conn.insert(p);
        return conn;
    }

    static void place_orphan(ViewNode& root, const ElementKey& k, const ReplicationState& repl,
                             const std::set<ElementKey>& keys, OrphanPolicy policy) {
        switch (policy) {
            case OrphanPolicy::skip:
                return;
            case OrphanPolicy::root:
                hier_detail::insert_child(root, hier_detail::make_node(k, repl));
                return;
            case OrphanPolicy::compact: {
                // Longest prefix whose directory keys are all present.
                ViewNode* cur = &root;
                Path walked;
                for (const auto& seg : k.path.segments()) {
                    Path next = walked.child(seg);
                    if (next == k.path) break;  // only proper prefixes host the orphan
                    if (!keys.count(ElementKey{next, FileType::directory})) break;
                    ViewNode* child = hier_detail::child_dir_at(*cur, seg, next);
                    if (!child) break;  // prefix key present but itself orphaned
                    cur = child;
                    walked = next;
                }
                hier_detail::insert_child(*cur, hier_detail::make_node(k, repl));
                return;
            }
            case OrphanPolicy::reappear: {
                ViewNode& parent = hier_detail::ensure_chain(root, k.path.parent());
                hier_detail::insert_child(parent, hier_detail::make_node(k, repl));
                return;
            }
        }
    }

    static ViewNode* find_by_key(ViewNode& cur, const ElementKey& key) {
        for (auto& c : cur.children) {
            if (c.key_backed && c.origin == key.path && c.type == key.type) return &c;
            if (c.type == FileType::directory)
                if (ViewNode* f = find_by_key(c, key)) return f;
        }
        return nullptr;
    }

    static bool has_key_strictly_under(const ReplicationState& repl, const Path& p) {
        bool found = false;
        repl.for_each_key(
            [&](const ElementKey& k) { found = found || p.is_strict_prefix_of(k.path); });
        return found;
    }

    // Places one key whose delta cannot move other nodes (any file, or a
    // directory with nothing visible beneath it).
    void incr_add_key(const ReplicationState& repl, const ElementKey& key) {
        if (find_by_key(cache_, key))
            throw contract_error("view already holds a node for " + key.render());
        if (cfg_.leaf_only) {
            ViewNode& parent = hier_detail::ensure_chain(cache_, key.path.parent());
            hier_detail::insert_child(parent, hier_detail::make_node(key, repl));
            return;
        }
        // A fully present parent chain is connected from the root by
        // induction, so its nodes all exist.
        bool connected = true;
        Path walked;
        for (std::size_t i = 0; i + 1 < key.path.depth(); ++i) {
            walked = walked.child(key.path.segments()[i]);
            if (!repl.contains(ElementKey{walked, FileType::directory})) {
                connected = false;
                break;
            }
        }
        if (connected) {
            ViewNode& parent = hier_detail::dir_node_at(cache_, key.path.parent());
            hier_detail::insert_child(parent, hier_detail::make_node(key, repl));
            return;
        }
        switch (cfg_.policy) {
            case OrphanPolicy::skip:
                return;
            case OrphanPolicy::root:
                hier_detail::insert_child(cache_, hier_detail::make_node(key, repl));
                return;
            case OrphanPolicy::compact: {
                ViewNode* cur = &cache_;
                Path p;
                for (std::size_t i = 0; i + 1 < key.path.depth(); ++i) {
                    Path next = p.child(key.path.segments()[i]);
                    if (!repl.contains(ElementKey{next, FileType::directory})) break;
                    ViewNode* child = hier_detail::child_dir_at(*cur, key.path.segments()[i], next);
                    if (!child) break;
                    cur = child;
                    p = next;
                }
                hier_detail::insert_child(*cur, hier_detail::make_node(key, repl));
                return;
            }
            case OrphanPolicy::reappear: {
                ViewNode& parent = hier_detail::ensure_chain(cache_, key.path.parent());
                hier_detail::insert_child(parent, hier_detail::make_node(key, repl));
                return;
            }
        }
    }

    void incr_remove_key(const ElementKey& key) {
        remove_rec(cache_, key);  // absent is fine: a skipped orphan has no node
    }

    // Removes the node for `key` anywhere below `cur`; prunes synthesized
    // directories left childless on the way back up.
    bool remove_rec(ViewNode& cur, const ElementKey& key) {
        for (auto it = cur.children.begin(); it != cur.children.end(); ++it) {
            if (it->key_backed && it->origin == key.path && it->type == key.type) {
                cur.children.erase(it);
                return true;
            }
            if (it->type == FileType::directory && remove_rec(*it, key)) {
                if (!it->key_backed && it->children.empty()) cur.children.erase(it);
                return true;
            }
        }
        return false;
    }

    HierarchyConfig cfg_;
    ViewNode cache_;
    bool dirty_ = true;
};

// ---------------------------------------------------------------------------
// View dump
// ---------------------------------------------------------------------------

namespace hier_detail {
inline void dump_rec(const ViewNode& n, std::size_t depth, std::string& out) {
    for (const auto& c : n.children) {
        out.append(depth * 2, ' ');
        out += c.name;
        out += " [";
        out += type_tag(c.type);
        out += "] (origin=";
        out += c.origin.render();
        out += ")";
        if (c.type != FileType::directory) {
            out += " \"";
            out += c.content;
            out += "\"";
        }
        out += "\n";
        if (c.type == FileType::directory) dump_rec(c, depth + 1, out);
    }
}
}  // namespace hier_detail

inline std::string dump_view(const ViewNode& root) {
    std::string out = "/\n";
    hier_detail::dump_rec(root, 1, out);
    return out;
}

// ---------------------------------------------------------------------------
// View-level operations and their adaptation to set-level operations
// ---------------------------------------------------------------------------

struct ViewAdd {
    Path parent;
    std::string name;
    FileType type = FileType::text;
};
struct ViewRemove {
    Path path;
    std::optional<FileType> type;  // disambiguators; resolution fails loudly without
    std::optional<Path> origin;
};
struct ViewUpdate {
    Path path;
    std::optional<FileType> type;
    std::optional<Path> origin;
    Edit edit;
};
using ViewOp = std::variant<ViewAdd, ViewRemove, ViewUpdate>;

struct AdaptedAdd {
    ElementKey key;
};
struct AdaptedRemove {
    ElementKey key;
};
struct AdaptedUpdate {
    ElementKey key;
    Edit edit;
};
using AdaptedOp = std::variant<AdaptedAdd, AdaptedRemove, AdaptedUpdate>;

namespace hier_detail {

inline void resolve_rec(const ViewNode& cur, const Path& path, std::size_t i,
                        std::vector<const ViewNode*>& out) {
    if (i == path.depth()) {
        out.push_back(&cur);
        return;
    }
    for (const auto& c : cur.children) {
        if (c.name != path.segments()[i]) continue;
        if (i + 1 < path.depth() && c.type != FileType::directory) continue;
        resolve_rec(c, path, i + 1, out);
    }
}

inline std::vector<const ViewNode*> resolve_all(const ViewNode& root, const Path& path) {
    std::vector<const ViewNode*> out;
    resolve_rec(root, path, 0, out);
    return out;
}

inline const ViewNode& resolve_one(const ViewNode& root, const Path& path,
                                   const std::optional<FileType>& type,
                                   const std::optional<Path>& origin) {
    auto nodes = resolve_all(root, path);
    std::vector<const ViewNode*> kept;
    for (const ViewNode* n : nodes) {
        if (type && n->type != *type) continue;
        if (origin && n->origin != *origin) continue;
        kept.push_back(n);
    }
    if (kept.empty()) throw not_found_error("no element at " + path.render());
    if (kept.size() > 1)
        throw ambiguity_error("several elements match " + path.render() +
                              "; pass the origin to disambiguate");
    return *kept.front();
}

inline void collect_file_keys(const ViewNode& n, std::vector<ElementKey>& out) {
    for (const auto& c : n.children) {
        if (c.type == FileType::directory)
            collect_file_keys(c, out);
        else if (c.key_backed)
            out.push_back(ElementKey{c.origin, c.type});
    }
}

}  // namespace hier_detail

/// Turns a view-path operation into the set-level operations that realize it.
/// The emitted keys target origin paths, which differ from view paths for
/// relocated orphans.
inline std::vector<AdaptedOp> adapt(const ViewNode& root, const ViewOp& op,
                                    const HierarchyConfig& cfg) {
    return std::visit(
        [&](const auto& v) -> std::vector<AdaptedOp> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ViewAdd>) {
                if (cfg.leaf_only) {
                    if (v.type == FileType::directory)
                        throw precondition_error(
                            "directories are synthesized from file paths, not added");
                    // Prefixes must not be files; absent prefixes appear on the fly.
                    const ViewNode* cur = &root;
                    for (const auto& seg : v.parent.segments()) {
                        const ViewNode* dir_next = nullptr;
                        bool file_blocked = false;
                        for (const auto& c : cur->children) {
                            if (c.name != seg) continue;
                            if (c.type == FileType::directory)
                                dir_next = &c;
                            else
                                file_blocked = true;
                        }
                        if (dir_next) {
                            cur = dir_next;
                            continue;
                        }
                        if (file_blocked)
                            throw precondition_error("type(content(p)) = directory: " +
                                                     v.parent.render() + " crosses a file");
                        cur = nullptr;
                        break;
                    }
                    if (cur)
                        for (const auto& c : cur->children)
                            if (c.name == v.name)
                                throw precondition_error("not exists(p.n): " + v.name +
                                                         " already present");
                    return {AdaptedAdd{ElementKey{v.parent.child(v.name), v.type}}};
                }
                const ViewNode& parent =
                    hier_detail::resolve_one(root, v.parent, FileType::directory, std::nullopt);
                if (!parent.key_backed)
                    throw precondition_error("cannot add under a synthesized directory " +
                                             v.parent.render());
                for (const auto& c : parent.children)
                    if (c.name == v.name)
                        throw precondition_error("not exists(p.n): " + v.name + " already present");
                return {AdaptedAdd{ElementKey{parent.origin.child(v.name), v.type}}};
            } else if constexpr (std::is_same_v<T, ViewRemove>) {
                if (v.path.is_root()) throw precondition_error("p is not the root");
                const ViewNode& n = hier_detail::resolve_one(root, v.path, v.type, v.origin);
                if (!n.key_backed) {
                    if (!cfg.leaf_only)
                        throw precondition_error("no replicated element at " + v.path.render() +
                                                 " (recreated directory)");
                    // Removing a synthesized leaf-only directory removes the
                    // files that give rise to it.
                    std::vector<ElementKey> keys;
                    hier_detail::collect_file_keys(n, keys);
                    std::vector<AdaptedOp> out;
                    for (const auto& k : keys) out.push_back(AdaptedRemove{k});
                    return out;
                }
                return {AdaptedRemove{ElementKey{n.origin, n.type}}};
            } else {
                const ViewNode& n = hier_detail::resolve_one(root, v.path, v.type, v.origin);
                if (n.type == FileType::directory)
                    throw precondition_error("u is applicable to content(p): " + v.path.render() +
                                             " is a directory");
                return {AdaptedUpdate{ElementKey{n.origin, n.type}, v.edit}};
            }
        },
        op);
}

}  // namespace crdtfs
