#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "clocks.hpp"
#include "errors.hpp"

namespace crdtfs {

enum class SetVariant { g, two_p, lww, c, or_set };

inline std::string_view variant_tag(SetVariant v) {
    switch (v) {
        case SetVariant::g: return "g";
        case SetVariant::two_p: return "2p";
        case SetVariant::lww: return "lww";
        case SetVariant::c: return "c";
        case SetVariant::or_set: return "or";
    }
    throw error("unreachable: bad SetVariant");
}

inline SetVariant parse_variant_tag(std::string_view s) {
    if (s == "g") return SetVariant::g;
    if (s == "2p") return SetVariant::two_p;
    if (s == "lww") return SetVariant::lww;
    if (s == "c") return SetVariant::c;
    if (s == "or") return SetVariant::or_set;
    throw parse_error("unknown set variant '" + std::string(s) + "'", 0);
}

enum class SetOpKind { add, remove };

inline std::string_view set_op_tag(SetOpKind k) { return k == SetOpKind::add ? "add" : "rmv"; }

// ---------------------------------------------------------------------------
// Downstream messages, one shape per variant
// ---------------------------------------------------------------------------

template <typename E>
struct GSetMsg {
    E element;  // grow-only: adds are the only messages
    friend auto operator<=>(const GSetMsg&, const GSetMsg&) = default;
};

template <typename E>
struct TwoPSetMsg {
    SetOpKind kind = SetOpKind::add;
    E element;
    friend auto operator<=>(const TwoPSetMsg&, const TwoPSetMsg&) = default;
};

template <typename E>
struct LwwSetMsg {
    SetOpKind kind = SetOpKind::add;
    E element;
    Stamp stamp;
    friend auto operator<=>(const LwwSetMsg&, const LwwSetMsg&) = default;
};

template <typename E>
struct CSetMsg {
    E element;
    std::int64_t delta = 0;  // local add emits 1 - counter, local remove emits -counter
    friend auto operator<=>(const CSetMsg&, const CSetMsg&) = default;
};

template <typename E>
struct OrSetMsg {
    SetOpKind kind = SetOpKind::add;
    E element;
    std::vector<Tag> tags;  // add: the one fresh tag; remove: all observed tags
    friend auto operator<=>(const OrSetMsg&, const OrSetMsg&) = default;
};

template <typename E>
using SetDownstream = std::variant<GSetMsg<E>, TwoPSetMsg<E>, LwwSetMsg<E>, CSetMsg<E>, OrSetMsg<E>>;

/// The element a downstream message is about, whatever its variant.
template <typename E>
const E& element_of(const SetDownstream<E>& msg) {
    return std::visit([](const auto& m) -> const E& { return m.element; }, msg);
}

template <typename E>
std::string render_set_msg(const SetDownstream<E>& msg) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GSetMsg<E>>) {
                return "set g add " + m.element.render();
            } else if constexpr (std::is_same_v<T, TwoPSetMsg<E>>) {
                return "set 2p " + std::string(set_op_tag(m.kind)) + " " + m.element.render();
            } else if constexpr (std::is_same_v<T, LwwSetMsg<E>>) {
                return "set lww " + std::string(set_op_tag(m.kind)) + " " + m.element.render() +
                       " stamp=" + m.stamp.render();
            } else if constexpr (std::is_same_v<T, CSetMsg<E>>) {
                return "set c " + m.element.render() + " delta=" + std::to_string(m.delta);
            } else {
                std::string out = "set or " + std::string(set_op_tag(m.kind)) + " " + m.element.render();
                if (m.kind == SetOpKind::add) {
                    out += " tag=" + m.tags.at(0).render();
                } else {
                    out += " tags={";
                    for (std::size_t i = 0; i < m.tags.size(); ++i) {
                        if (i) out += ",";
                        out += m.tags[i].render();
                    }
                    out += "}";
                }
                return out;
            }
        },
        msg);
}

/// Advances a replica's Lamport clock past any stamp the message carries.
template <typename E>
void observe_stamps(const SetDownstream<E>& msg, ReplicaContext& ctx) {
    if (const auto* lww = std::get_if<LwwSetMsg<E>>(&msg)) ctx.observe(lww->stamp);
}

// ---------------------------------------------------------------------------
// G-Set: grow-only
// ---------------------------------------------------------------------------

template <typename E>
class GSet {
  public:
    static constexpr SetVariant variant = SetVariant::g;

    std::optional<std::string> add_violation(const E& e) const {
        if (added_.count(e)) return "a is not in S";
        return std::nullopt;
    }
    std::optional<std::string> remove_violation(const E&) const {
        return "a grow-only set element cannot be removed";
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext&) {
        if (auto why = add_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = GSetMsg<E>{e};
        apply(msg);
        return msg;
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext&) {
        throw precondition_error(*remove_violation(e));
    }
    void apply(const SetDownstream<E>& msg) {
        added_.insert(std::get<GSetMsg<E>>(msg).element);
    }

    bool contains(const E& e) const { return added_.count(e) != 0; }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& e : added_) f(e);
    }

  private:
    std::set<E> added_;
};

// ---------------------------------------------------------------------------
// 2P-Set: add once, remove once; removal is final
// ---------------------------------------------------------------------------

template <typename E>
class TwoPSet {
  public:
    static constexpr SetVariant variant = SetVariant::two_p;

    std::optional<std::string> add_violation(const E& e) const {
        if (removed_.count(e)) return "a removed element is never added again";
        if (added_.count(e)) return "a is not in S";
        return std::nullopt;
    }
    std::optional<std::string> remove_violation(const E& e) const {
        if (!contains(e)) return "a is in S";
        return std::nullopt;
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext&) {
        if (auto why = add_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = TwoPSetMsg<E>{SetOpKind::add, e};
        apply(msg);
        return msg;
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext&) {
        if (auto why = remove_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = TwoPSetMsg<E>{SetOpKind::remove, e};
        apply(msg);
        return msg;
    }
    void apply(const SetDownstream<E>& msg) {
        const auto& m = std::get<TwoPSetMsg<E>>(msg);
        (m.kind == SetOpKind::add ? added_ : removed_).insert(m.element);
    }

    bool contains(const E& e) const { return added_.count(e) && !removed_.count(e); }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& e : added_)
            if (!removed_.count(e)) f(e);
    }

  private:
    std::set<E> added_;
    std::set<E> removed_;
};

// ---------------------------------------------------------------------------
// LWW-Set: per-element (stamp, visibility); the higher stamp wins
// ---------------------------------------------------------------------------

template <typename E>
class LwwSet {
  public:
    static constexpr SetVariant variant = SetVariant::lww;

    std::optional<std::string> add_violation(const E& e) const {
        if (contains(e)) return "a is not in S";
        return std::nullopt;
    }
    std::optional<std::string> remove_violation(const E& e) const {
        if (!contains(e)) return "a is in S";
        return std::nullopt;
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext& ctx) {
        if (auto why = add_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = LwwSetMsg<E>{SetOpKind::add, e, ctx.next_stamp()};
        apply(msg);
        return msg;
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext& ctx) {
        if (auto why = remove_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = LwwSetMsg<E>{SetOpKind::remove, e, ctx.next_stamp()};
        apply(msg);
        return msg;
    }
    void apply(const SetDownstream<E>& msg) {
        const auto& m = std::get<LwwSetMsg<E>>(msg);
        auto it = slots_.find(m.element);
        if (it == slots_.end()) {
            slots_.emplace(m.element, Slot{m.stamp, m.kind == SetOpKind::add});
            return;
        }
        if (m.stamp == it->second.stamp)
            throw contract_error("duplicate delivery: stamp " + m.stamp.render() + " seen twice");
        if (it->second.stamp < m.stamp) it->second = Slot{m.stamp, m.kind == SetOpKind::add};
    }

    bool contains(const E& e) const {
        auto it = slots_.find(e);
        return it != slots_.end() && it->second.visible;
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& [e, slot] : slots_)
            if (slot.visible) f(e);
    }

  private:
    struct Slot {
        Stamp stamp;
        bool visible = false;
    };
    std::map<E, Slot> slots_;
};

// ---------------------------------------------------------------------------
// C-Set: per-element integer counter; downstream carries an additive delta
// ---------------------------------------------------------------------------

template <typename E>
class CSet {
  public:
    static constexpr SetVariant variant = SetVariant::c;

    std::optional<std::string> add_violation(const E& e) const {
        if (counter(e) > 0) return "counter of a is <= 0";
        return std::nullopt;
    }
    std::optional<std::string> remove_violation(const E& e) const {
        if (counter(e) <= 0) return "counter of a is > 0";
        return std::nullopt;
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext&) {
        if (auto why = add_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = CSetMsg<E>{e, 1 - counter(e)};  // counter becomes exactly 1
        apply(msg);
        return msg;
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext&) {
        if (auto why = remove_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = CSetMsg<E>{e, -counter(e)};  // counter becomes exactly 0
        apply(msg);
        return msg;
    }
    void apply(const SetDownstream<E>& msg) {
        const auto& m = std::get<CSetMsg<E>>(msg);
        counters_[m.element] += m.delta;
    }

    std::int64_t counter(const E& e) const {
        auto it = counters_.find(e);
        return it == counters_.end() ? 0 : it->second;
    }
    bool contains(const E& e) const { return counter(e) > 0; }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& [e, c] : counters_)
            if (c > 0) f(e);
    }

  private:
    std::map<E, std::int64_t> counters_;
};

// ---------------------------------------------------------------------------
// OR-Set: unique tags per add; removes delete exactly the observed tags
// ---------------------------------------------------------------------------

template <typename E>
class OrSet {
  public:
    static constexpr SetVariant variant = SetVariant::or_set;

    std::optional<std::string> add_violation(const E& e) const {
        if (contains(e)) return "a is not in S";
        return std::nullopt;
    }
    std::optional<std::string> remove_violation(const E& e) const {
        if (!contains(e)) return "a is in S";
        return std::nullopt;
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext& ctx) {
        if (auto why = add_violation(e)) throw precondition_error(*why);
        SetDownstream<E> msg = OrSetMsg<E>{SetOpKind::add, e, {ctx.next_tag()}};
        apply(msg);
        return msg;
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext&) {
        if (auto why = remove_violation(e)) throw precondition_error(*why);
        const auto& held = live_.at(e);
        SetDownstream<E> msg = OrSetMsg<E>{SetOpKind::remove, e, {held.begin(), held.end()}};
        apply(msg);
        return msg;
    }
    void apply(const SetDownstream<E>& msg) {
        const auto& m = std::get<OrSetMsg<E>>(msg);
        if (m.kind == SetOpKind::add) {
            const Tag& t = m.tags.at(0);
            if (!seen_.insert(t).second)
                throw contract_error("duplicate delivery: tag " + t.render() + " added twice");
            live_[m.element].insert(t);
            return;
        }
        auto it = live_.find(m.element);
        for (const Tag& t : m.tags) {
            if (it != live_.end() && it->second.erase(t)) continue;
            // A sibling remove that observed the same tag may have been applied
            // first; that is fine. A tag we have never seen at all means the
            // add it came from was skipped: causal delivery is broken.
            if (!seen_.count(t))
                throw contract_error("remove names unknown tag " + t.render() +
                                     ": causal delivery broken");
        }
        if (it != live_.end() && it->second.empty()) live_.erase(it);
    }

    bool contains(const E& e) const { return live_.count(e) != 0; }
    const std::set<Tag>& tags_of(const E& e) const {
        static const std::set<Tag> none;
        auto it = live_.find(e);
        return it == live_.end() ? none : it->second;
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& [e, tags] : live_) f(e);
    }

  private:
    std::map<E, std::set<Tag>> live_;
    std::set<Tag> seen_;
};

// ---------------------------------------------------------------------------
// Variant-erased wrapper
// ---------------------------------------------------------------------------

template <typename E>
class SetCrdt {
  public:
    SetCrdt() : SetCrdt(SetVariant::or_set) {}
    explicit SetCrdt(SetVariant v) {
        switch (v) {
            case SetVariant::g: impl_ = GSet<E>{}; break;
            case SetVariant::two_p: impl_ = TwoPSet<E>{}; break;
            case SetVariant::lww: impl_ = LwwSet<E>{}; break;
            case SetVariant::c: impl_ = CSet<E>{}; break;
            case SetVariant::or_set: impl_ = OrSet<E>{}; break;
        }
    }

    SetVariant variant() const {
        return std::visit([](const auto& s) { return s.variant; }, impl_);
    }

    std::optional<std::string> add_violation(const E& e) const {
        return std::visit([&](const auto& s) { return s.add_violation(e); }, impl_);
    }
    std::optional<std::string> remove_violation(const E& e) const {
        return std::visit([&](const auto& s) { return s.remove_violation(e); }, impl_);
    }

    SetDownstream<E> local_add(const E& e, ReplicaContext& ctx) {
        return std::visit([&](auto& s) { return s.local_add(e, ctx); }, impl_);
    }
    SetDownstream<E> local_remove(const E& e, ReplicaContext& ctx) {
        return std::visit([&](auto& s) { return s.local_remove(e, ctx); }, impl_);
    }
    void apply(const SetDownstream<E>& msg) {
        std::visit([&](auto& s) { s.apply(msg); }, impl_);
    }

    bool contains(const E& e) const {
        return std::visit([&](const auto& s) { return s.contains(e); }, impl_);
    }
    std::set<E> lookup() const {
        std::set<E> out;
        for_each([&](const E& e) { out.insert(e); });
        return out;
    }
    template <typename F>
    void for_each(F&& f) const {
        std::visit([&](const auto& s) { s.for_each(f); }, impl_);
    }

    template <typename V>
    const V& as() const {
        return std::get<V>(impl_);
    }

  private:
    std::variant<GSet<E>, TwoPSet<E>, LwwSet<E>, CSet<E>, OrSet<E>> impl_;
};

}  // namespace crdtfs
