#pragma once

// Shared helpers for the test suites: deterministic random workload
// generation against live clusters, plus invariant walkers over displayed
// trees. Everything is seeded and platform-stable (rng() % n only).

#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "crdtfs/crdtfs.hpp"

namespace support {

using namespace crdtfs;

// ---------------------------------------------------------------------------
// Displayed-tree inventory
// ---------------------------------------------------------------------------

struct FileEntry {
    Path path;
    FileType type = FileType::text;
    std::size_t content_len = 0;
};

struct Inventory {
    std::vector<Path> dirs;        // displayed directory paths, root included
    std::vector<FileEntry> files;  // displayed file paths with type and length
    std::vector<Path> removables;  // every non-root displayed path
};

inline void inventory_rec(const FsNode& n, const Path& cur, Inventory& inv) {
    for (const FsNode& c : n.children) {
        Path p = cur.child(c.displayed);
        inv.removables.push_back(p);
        if (c.type == FileType::directory) {
            inv.dirs.push_back(p);
            inventory_rec(c, p, inv);
        } else {
            inv.files.push_back(FileEntry{p, c.type, c.content.size()});
        }
    }
}

inline Inventory inventory(const FsNode& root) {
    Inventory inv;
    inv.dirs.push_back(Path());
    inventory_rec(root, Path(), inv);
    return inv;
}

/// Checks the displayed-name invariants over a whole tree: siblings never
/// share a displayed name, and when undecorated-only is expected (avoid
/// method) no decorated node may appear. Returns a description of the first
/// violation.
inline std::optional<std::string> naming_violation(const FsNode& n, bool expect_undecorated) {
    std::set<std::string> seen;
    for (const FsNode& c : n.children) {
        if (!seen.insert(c.displayed).second)
            return "duplicate sibling displayed name '" + c.displayed + "'";
        if (expect_undecorated && c.decorated)
            return "decorated name '" + c.displayed + "' where avoidance promised none";
        if (c.type == FileType::directory)
            if (auto v = naming_violation(c, expect_undecorated)) return v;
    }
    return std::nullopt;
}

/// Collects every conflict group (directory displayed path, undecorated name)
/// present in the tree.
inline void conflict_groups_rec(const FsNode& n, const Path& cur,
                                std::vector<std::pair<Path, std::string>>& out) {
    std::set<std::string> noted;
    for (const FsNode& c : n.children) {
        if (c.decorated && noted.insert(c.name).second) out.emplace_back(cur, c.name);
        if (c.type == FileType::directory) conflict_groups_rec(c, cur.child(c.displayed), out);
    }
}

inline std::vector<std::pair<Path, std::string>> conflict_groups(const FsNode& root) {
    std::vector<std::pair<Path, std::string>> out;
    conflict_groups_rec(root, Path(), out);
    return out;
}

// ---------------------------------------------------------------------------
// Random workloads
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& dir_pool() {
    static const std::vector<std::string> v = {"alpha", "beta", "gamma", "delta"};
    return v;
}
inline const std::vector<std::string>& text_pool() {
    static const std::vector<std::string> v = {"a.txt", "b.md", "notes.c", "mod.py"};
    return v;
}
inline const std::vector<std::string>& bin_pool() {
    static const std::vector<std::string> v = {"img.png", "pack.zip", "tool.exe"};
    return v;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[static_cast<std::size_t>(rng() % v.size())];
}

struct GenSettings {
    SetVariant variant = SetVariant::or_set;
    HierarchyConfig hier;
    NamingConfig naming;
    std::size_t replicas = 3;
    std::size_t ops = 15;
};

/// One plausible next operation against a displayed tree. May still violate a
/// precondition when issued (callers catch and skip); generation itself is
/// deterministic in the rng.
inline FsOp random_op(const FsNode& tree, const GenSettings& g, std::mt19937_64& rng) {
    Inventory inv = inventory(tree);
    bool removes_allowed = g.variant != SetVariant::g && !inv.removables.empty();
    std::uint64_t roll = rng() % 100;

    if (removes_allowed && roll < 20) return OpRemove{pick(inv.removables, rng)};

    if (roll < 45 && !inv.files.empty()) {
        const FileEntry& f = pick(inv.files, rng);
        if (f.type == FileType::binary)
            return OpUpdate{f.path, EditWrite{std::string("v") + std::to_string(rng() % 10)}};
        if (f.content_len > 0 && rng() % 3 == 0)
            return OpUpdate{f.path, EditErase{static_cast<std::size_t>(rng() % f.content_len)}};
        return OpUpdate{f.path,
                        EditInsert{static_cast<std::size_t>(rng() % (f.content_len + 1)),
                                   static_cast<char>('a' + rng() % 26)}};
    }

    // Add.
    Path parent = pick(inv.dirs, rng);
    if (g.hier.leaf_only && rng() % 5 < 2) parent = parent.child(pick(dir_pool(), rng));
    FileType type;
    if (g.hier.leaf_only)
        type = rng() % 5 < 3 ? FileType::text : FileType::binary;
    else
        type = rng() % 100 < 35 ? FileType::directory
               : rng() % 5 < 3  ? FileType::text
                                : FileType::binary;
    std::string name;
    if (g.naming.method == NamingMethod::avoid || rng() % 4 != 0) {
        name = type == FileType::directory ? pick(dir_pool(), rng)
               : type == FileType::text    ? pick(text_pool(), rng)
                                           : pick(bin_pool(), rng);
    } else {
        // Cross-typed name reuse to provoke sibling-name conflicts (rename
        // method only).
        std::uint64_t which = rng() % 3;
        name = which == 0 ? pick(dir_pool(), rng) : which == 1 ? pick(text_pool(), rng)
                                                               : pick(bin_pool(), rng);
    }
    return OpAdd{parent, name, type};
}

/// Issues up to g.ops valid operations without any delivery, so every pair of
/// operations at distinct replicas is concurrent. Deterministic in the seed.
/// When `record` is given, every accepted (replica, operation) pair is
/// appended to it, ready to replay against a twin cluster.
inline std::size_t load_cluster(Cluster& c, const GenSettings& g, std::mt19937_64& rng,
                                std::vector<std::pair<std::string, FsOp>>* record = nullptr) {
    std::size_t issued = 0;
    std::size_t attempts = 0;
    while (issued < g.ops && attempts < g.ops * 6) {
        ++attempts;
        std::size_t ri = static_cast<std::size_t>(rng() % c.size());
        FsOp op = random_op(c.at(ri).fs(), g, rng);
        try {
            c.local(c.at(ri).id(), op);
            if (record) record->emplace_back(c.at(ri).id(), op);
            ++issued;
        } catch (const error&) {
            // Candidate violated a local precondition; try another.
        }
    }
    return issued;
}

inline std::vector<HierarchyConfig> hierarchy_modes(bool incremental = true) {
    std::vector<HierarchyConfig> out;
    for (OrphanPolicy p :
         {OrphanPolicy::skip, OrphanPolicy::reappear, OrphanPolicy::root, OrphanPolicy::compact})
        out.push_back(HierarchyConfig{false, p, incremental});
    out.push_back(HierarchyConfig{true, OrphanPolicy::skip, incremental});
    return out;
}

inline std::string hierarchy_mode_tag(const HierarchyConfig& h) {
    if (h.leaf_only) return "leaf-only";
    return std::string(policy_tag(h.policy));
}

inline std::vector<NamingConfig> applicable_namings(const HierarchyConfig& h) {
    std::vector<NamingConfig> out;
    out.push_back(NamingConfig{NamingMethod::rename, Decorator::by_origin_path});
    out.push_back(NamingConfig{NamingMethod::rename, Decorator::by_type_algorithm});
    if (h.leaf_only || h.policy == OrphanPolicy::skip || h.policy == OrphanPolicy::reappear)
        out.push_back(NamingConfig{NamingMethod::avoid, Decorator::by_origin_path});
    return out;
}

inline const std::vector<SetVariant>& all_variants() {
    static const std::vector<SetVariant> v = {SetVariant::g, SetVariant::two_p, SetVariant::lww,
                                              SetVariant::c, SetVariant::or_set};
    return v;
}

}  // namespace support
