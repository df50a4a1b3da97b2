#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "clocks.hpp"
#include "errors.hpp"
#include "fs_model.hpp"
#include "path.hpp"

namespace crdtfs {

// ---------------------------------------------------------------------------
// Dense position identifiers for sequence atoms
// ---------------------------------------------------------------------------

/// One level of a position identifier: a digit plus the site string that
/// disambiguates equal digits. Ordered by digit, then site, byte-wise.
struct IdDigit {
    std::uint64_t digit = 0;
    std::string site;
    friend auto operator<=>(const IdDigit&, const IdDigit&) = default;
};

/// A position in a replicated sequence: a list of (digit, site) levels,
/// ordered lexicographically (a proper prefix sorts before its extensions).
/// Identifiers are globally unique: the final level's site carries a
/// per-allocation serial ("replica#serial") that is never reused.
struct PositionId {
    std::vector<IdDigit> digits;

    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < digits.size(); ++i) {
            if (i) out += ".";
            out += std::to_string(digits[i].digit) + ":" + digits[i].site;
        }
        return out;
    }

    friend auto operator<=>(const PositionId&, const PositionId&) = default;
};

namespace seq_detail {

constexpr std::uint64_t kBase = 65536;     // digit radix
constexpr std::uint64_t kBoundary = 1024;  // cap on the step taken past the left neighbor
constexpr std::int64_t kSat = std::int64_t{1} << 62;

inline std::uint64_t digit_at(const PositionId* id, std::size_t i) {
    if (!id || i >= id->digits.size()) return 0;
    return id->digits[i].digit;
}

inline std::int64_t sat_mul_add(std::int64_t v, std::int64_t delta) {
    if (v >= kSat / static_cast<std::int64_t>(kBase)) return kSat;
    if (v <= -(kSat / static_cast<std::int64_t>(kBase))) return -kSat;
    return v * static_cast<std::int64_t>(kBase) + delta;
}

/// Allocates an identifier strictly between lo and hi (either may be null,
/// meaning the begin/end of the sequence). Deterministic given (lo, hi) and
/// the replica context; the final level always carries a fresh unique site
/// and a non-zero digit, which keeps the order dense. min_depth forces the
/// search past a depth whose only candidates were unusable.
inline PositionId allocate_between_at(const PositionId* lo, const PositionId* hi,
                                      ReplicaContext& ctx, std::size_t min_depth) {
    const std::size_t lo_len = lo ? lo->digits.size() : 0;
    const std::size_t hi_len = hi ? hi->digits.size() : 0;
    const std::size_t max_len = lo_len > hi_len ? lo_len : hi_len;

    const std::string unique_site = ctx.replica_id() + "#" + std::to_string(ctx.next_seq());

    // Walk depths keeping diff = value(hi, depth) - value(lo, depth), saturated.
    // A missing hi bounds the interval by kBase^depth (diff seeded at kBase^0).
    std::int64_t diff = hi ? 0 : 1;
    std::size_t depth = 0;
    bool numeric = false;
    while (depth <= max_len + 1 || depth < min_depth) {
        ++depth;
        std::int64_t delta = static_cast<std::int64_t>(digit_at(hi, depth - 1)) -
                             static_cast<std::int64_t>(digit_at(lo, depth - 1));
        diff = sat_mul_add(diff, delta);
        if (diff >= 2 && depth >= min_depth) {
            numeric = true;
            break;
        }
    }

    PositionId nid;
    if (numeric) {
        // Numeric room exists at this depth: take a bounded midpoint step.
        std::int64_t room = diff - 1;
        std::uint64_t step = static_cast<std::uint64_t>(
            std::min<std::int64_t>(static_cast<std::int64_t>(kBoundary), (room + 1) / 2));

        std::vector<std::uint64_t> mid(depth);
        for (std::size_t i = 0; i < depth; ++i) mid[i] = digit_at(lo, i);
        std::uint64_t carry = step;
        for (std::size_t i = depth; i-- > 0 && carry;) {
            std::uint64_t v = mid[i] + carry;
            mid[i] = v % kBase;
            carry = v / kBase;
        }
        if (carry) throw contract_error("identifier allocation overflowed its interval");

        // The last digit must stay non-zero so later allocations below this
        // identifier always find numeric room.
        if (mid.back() == 0) {
            auto fits_below_hi = [&](const std::vector<std::uint64_t>& v) {
                if (!hi) return true;
                for (std::size_t i = 0; i < depth; ++i) {
                    std::uint64_t h = digit_at(hi, i);
                    if (v[i] != h) return v[i] < h;
                }
                return false;  // equal to hi's padded value: not strictly below
            };
            auto above_lo = [&](const std::vector<std::uint64_t>& v) {
                for (std::size_t i = 0; i < depth; ++i) {
                    std::uint64_t l = digit_at(lo, i);
                    if (v[i] != l) return v[i] > l;
                }
                return false;
            };
            std::vector<std::uint64_t> up = mid;
            up.back() = 1;  // last digit was 0: +1 cannot carry
            std::vector<std::uint64_t> down = mid;
            {  // -1 with borrow
                std::size_t i = depth;
                while (i-- > 0) {
                    if (down[i] > 0) {
                        down[i] -= 1;
                        break;
                    }
                    down[i] = kBase - 1;
                }
            }
            if (fits_below_hi(up))
                mid = up;
            else if (down.back() != 0 && above_lo(down))
                mid = down;
            else
                return allocate_between_at(lo, hi, ctx, depth + 1);  // descend one depth further
        }

        // Sites: copy from a neighbor while the digit prefix still matches it,
        // otherwise use this replica; the final level gets the fresh site.
        bool match_lo = true, match_hi = true;
        for (std::size_t i = 0; i < depth; ++i) {
            match_lo = match_lo && lo && i < lo_len && mid[i] == lo->digits[i].digit;
            match_hi = match_hi && hi && i < hi_len && mid[i] == hi->digits[i].digit;
            std::string site;
            if (i + 1 == depth)
                site = unique_site;
            else if (match_lo)
                site = lo->digits[i].site;
            else if (match_hi)
                site = hi->digits[i].site;
            else
                site = ctx.replica_id();
            nid.digits.push_back(IdDigit{mid[i], std::move(site)});
        }
    } else {
        // The interval is decided purely by site order (no numeric room at any
        // depth): extend the left neighbor, which sorts after it and keeps
        // sorting before hi at their first differing level.
        if (lo) nid = *lo;
        nid.digits.push_back(IdDigit{1, unique_site});
    }

    if (lo && !(*lo < nid)) throw contract_error("allocated identifier not above left neighbor");
    if (hi && !(nid < *hi)) throw contract_error("allocated identifier not below right neighbor");
    return nid;
}

inline PositionId allocate_between(const PositionId* lo, const PositionId* hi, ReplicaContext& ctx) {
    return allocate_between_at(lo, hi, ctx, 0);
}

}  // namespace seq_detail

// ---------------------------------------------------------------------------
// Content operations
// ---------------------------------------------------------------------------

struct SeqInsert {
    PositionId id;
    char ch = 0;
    friend auto operator<=>(const SeqInsert&, const SeqInsert&) = default;
};

struct SeqDelete {
    PositionId id;
    friend auto operator<=>(const SeqDelete&, const SeqDelete&) = default;
};

struct RegWrite {
    std::string value;
    Stamp stamp;
    friend auto operator<=>(const RegWrite&, const RegWrite&) = default;
};

using ContentOp = std::variant<SeqInsert, SeqDelete, RegWrite>;

inline std::string render_content_op(const ContentOp& op) {
    return std::visit(
        [](const auto& o) -> std::string {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, SeqInsert>)
                return "ins " + o.id.render() + " '" + std::string(1, o.ch) + "'";
            else if constexpr (std::is_same_v<T, SeqDelete>)
                return "del " + o.id.render();
            else
                return "write '" + o.value + "' stamp=" + o.stamp.render();
        },
        op);
}

/// Advances a replica's Lamport clock past any stamp the op carries.
inline void observe_stamps(const ContentOp& op, ReplicaContext& ctx) {
    if (const auto* w = std::get_if<RegWrite>(&op)) ctx.observe(w->stamp);
}

// ---------------------------------------------------------------------------
// Register (whole-value writes; the greater stamp wins on both sides)
// ---------------------------------------------------------------------------

class RegisterCrdt {
  public:
    ContentOp local_write(std::string value, ReplicaContext& ctx) {
        ContentOp op = RegWrite{std::move(value), ctx.next_stamp()};
        apply(op);
        return op;
    }

    /// Ops that empty the observed value. Not self-applied.
    std::vector<ContentOp> clear_ops(ReplicaContext& ctx) const {
        return {RegWrite{"", ctx.next_stamp()}};
    }

    void apply(const ContentOp& op) {
        const auto& w = std::get<RegWrite>(op);
        if (w.stamp == stamp_)
            throw contract_error("duplicate delivery: register stamp " + w.stamp.render());
        if (stamp_ < w.stamp) {
            value_ = w.value;
            stamp_ = w.stamp;
        }
    }

    const std::string& value() const { return value_; }
    const Stamp& stamp() const { return stamp_; }

  private:
    std::string value_;
    Stamp stamp_;  // zero counter: no write yet (real stamps count from 1)
};

// ---------------------------------------------------------------------------
// Sequence (per-character atoms at dense positions; deleted atoms tombstone)
// ---------------------------------------------------------------------------

class SequenceCrdt {
  public:
    ContentOp local_insert(std::size_t index, char ch, ReplicaContext& ctx) {
        std::size_t n = size();
        if (index > n)
            throw precondition_error("edit index within range: insert at " + std::to_string(index) +
                                     " of " + std::to_string(n));
        const PositionId* lo = index == 0 ? nullptr : id_at(index - 1);
        const PositionId* hi = index == n ? nullptr : id_at(index);
        ContentOp op = SeqInsert{seq_detail::allocate_between(lo, hi, ctx), ch};
        apply(op);
        return op;
    }

    ContentOp local_erase(std::size_t index, ReplicaContext&) {
        std::size_t n = size();
        if (index >= n)
            throw precondition_error("edit index within range: erase at " + std::to_string(index) +
                                     " of " + std::to_string(n));
        ContentOp op = SeqDelete{*id_at(index)};
        apply(op);
        return op;
    }

    /// Deletes of every currently-visible atom. Not self-applied; atoms
    /// inserted concurrently elsewhere are unaffected.
    std::vector<ContentOp> clear_ops() const {
        std::vector<ContentOp> ops;
        for (const auto& [id, atom] : atoms_)
            if (atom.live) ops.push_back(SeqDelete{id});
        return ops;
    }

    void apply(const ContentOp& op) {
        if (const auto* ins = std::get_if<SeqInsert>(&op)) {
            auto it = atoms_.find(ins->id);
            if (it != atoms_.end()) {
                // The same atom can be transplanted by two concurrent merge
                // resolutions; the repeat is a no-op (a deletion that raced
                // in-between stays deleted).
                if (it->second.ch != ins->ch)
                    throw contract_error("position " + ins->id.render() + " reused for a different atom");
                return;
            }
            atoms_.emplace(ins->id, Atom{ins->ch, true});
            return;
        }
        const auto& del = std::get<SeqDelete>(op);
        auto it = atoms_.find(del.id);
        if (it == atoms_.end())
            throw contract_error("delete of unknown position " + del.id.render() +
                                 ": causal delivery broken");
        it->second.live = false;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [id, atom] : atoms_)
            if (atom.live) ++n;
        return n;
    }

    std::string value() const {
        std::string out;
        for (const auto& [id, atom] : atoms_)
            if (atom.live) out += atom.ch;
        return out;
    }

    /// Visible atoms in order, for transplanting during a merge resolution.
    std::vector<std::pair<PositionId, char>> live_atoms() const {
        std::vector<std::pair<PositionId, char>> out;
        for (const auto& [id, atom] : atoms_)
            if (atom.live) out.emplace_back(id, atom.ch);
        return out;
    }

  private:
    struct Atom {
        char ch = 0;
        bool live = true;
    };

    const PositionId* id_at(std::size_t visible_index) const {
        std::size_t n = 0;
        for (const auto& [id, atom] : atoms_) {
            if (!atom.live) continue;
            if (n == visible_index) return &id;
            ++n;
        }
        return nullptr;
    }

    std::map<PositionId, Atom> atoms_;
};

// ---------------------------------------------------------------------------
// Uniform per-file content state
// ---------------------------------------------------------------------------

class ContentState {
  public:
    ContentState() : ContentState(FileType::text) {}
    explicit ContentState(FileType t) {
        if (t == FileType::directory) throw config_error("directories carry no content state");
        type_ = t;
        if (t == FileType::binary)
            impl_ = RegisterCrdt{};
        else
            impl_ = SequenceCrdt{};
    }

    FileType type() const { return type_; }

    /// Applies a user-level edit locally and returns the ops to broadcast.
    std::vector<ContentOp> local_edit(const Edit& edit, ReplicaContext& ctx) {
        return std::visit(
            [&](const auto& e) -> std::vector<ContentOp> {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, EditWrite>) {
                    if (type_ != FileType::binary)
                        throw precondition_error("u is applicable to content(p): write needs a binary file");
                    return {std::get<RegisterCrdt>(impl_).local_write(e.value, ctx)};
                } else if constexpr (std::is_same_v<T, EditInsert>) {
                    if (type_ != FileType::text)
                        throw precondition_error("u is applicable to content(p): ins needs a text file");
                    return {std::get<SequenceCrdt>(impl_).local_insert(e.index, e.ch, ctx)};
                } else {
                    if (type_ != FileType::text)
                        throw precondition_error("u is applicable to content(p): del needs a text file");
                    return {std::get<SequenceCrdt>(impl_).local_erase(e.index, ctx)};
                }
            },
            edit);
    }

    /// Ops that empty the value as observed here. Not self-applied.
    std::vector<ContentOp> clear_ops(ReplicaContext& ctx) const {
        if (type_ == FileType::binary) return std::get<RegisterCrdt>(impl_).clear_ops(ctx);
        return std::get<SequenceCrdt>(impl_).clear_ops();
    }

    void apply(const ContentOp& op) {
        std::visit([&](auto& crdt) { crdt.apply(op); }, impl_);
    }

    std::string value() const {
        return std::visit(
            [](const auto& crdt) -> std::string {
                using T = std::decay_t<decltype(crdt)>;
                if constexpr (std::is_same_v<T, RegisterCrdt>)
                    return crdt.value();
                else
                    return crdt.value();
            },
            impl_);
    }

    const RegisterCrdt& as_register() const { return std::get<RegisterCrdt>(impl_); }
    const SequenceCrdt& as_sequence() const { return std::get<SequenceCrdt>(impl_); }

  private:
    FileType type_ = FileType::text;
    std::variant<RegisterCrdt, SequenceCrdt> impl_;
};

}  // namespace crdtfs
