#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "clocks.hpp"
#include "errors.hpp"
#include "fs_model.hpp"
#include "hierarchy.hpp"
#include "naming.hpp"
#include "replication.hpp"

namespace crdtfs {

/// One broadcast message in flight. deps is the sender's vector clock from
/// just before sending, so delivering in causal order means delivering a
/// message only once deps is dominated by the receiver's clock.
struct Envelope {
    ReplMsg msg;
    std::string sender;
    VClock deps;
    std::uint64_t uid = 0;  // message identity, shared by every fanned-out copy
};

// ---------------------------------------------------------------------------
// Replica: one site running the full stack
// ---------------------------------------------------------------------------

class Replica {
  public:
    /// Messages from one sender arrive in send order, so only the front of
    /// each queue can ever be deliverable: deps grow along the stream.
    using Inbox = std::map<std::string, std::deque<Envelope>>;

    Replica(std::string id, SetVariant variant, HierarchyConfig hcfg, NamingConfig ncfg)
        : ctx_(std::move(id)), repl_(variant), hier_(hcfg), ncfg_(ncfg) {
        validate_configs(hcfg, ncfg);
    }

    const std::string& id() const { return ctx_.replica_id(); }
    const HierarchyConfig& hierarchy_config() const { return hier_.config(); }
    const NamingConfig& naming_config() const { return ncfg_; }
    const VClock& vclock() const { return vclock_; }
    const ReplicationState& state() const { return repl_; }
    Inbox& inbox() { return inbox_; }
    const Inbox& inbox() const { return inbox_; }

    std::size_t pending() const {
        std::size_t n = 0;
        for (const auto& [sender, q] : inbox_) n += q.size();
        return n;
    }

    const ViewNode& view() { return hier_.view(repl_); }
    FsNode fs() { return fs_view(view(), ncfg_); }
    std::string dump(bool flat = false) { return flat ? dump_fs_flat(fs()) : dump_fs(fs()); }

    /// Applies a user operation, addressed by displayed paths, and returns the
    /// downstream messages wrapped for broadcast.
    std::vector<Envelope> local(const FsOp& op) {
        std::vector<AdaptedOp> adapted = translate(fs(), op);
        // Check every removal up front so a multi-key operation either runs
        // whole or not at all.
        for (const AdaptedOp& a : adapted)
            if (const auto* rm = std::get_if<AdaptedRemove>(&a))
                if (auto why = repl_.elements().remove_violation(rm->key))
                    throw precondition_error(*why);
        std::vector<ReplMsg> msgs;
        for (const AdaptedOp& a : adapted) {
            std::vector<ReplMsg> part = execute(a);
            msgs.insert(msgs.end(), part.begin(), part.end());
        }
        return wrap(std::move(msgs));
    }

    /// Resolves a sibling name conflict under the rename method.
    std::vector<Envelope> resolve(const Path& dir, const std::string& name,
                                  ResolveDecision decision, const std::optional<Path>& origin,
                                  const std::optional<FileType>& type = std::nullopt) {
        FsNode tree = fs();
        ResolvePlan plan = plan_resolution(tree, ncfg_, dir, name, decision, origin, type);
        // The losers must be removable before anything is merged, or a
        // refused removal would leave a half-done resolution behind.
        for (const ElementKey& loser : plan.losers)
            if (auto why = repl_.elements().remove_violation(loser))
                throw precondition_error("conflict on '" + name + "' cannot be resolved: " + *why);
        std::vector<ReplMsg> msgs;
        if (plan.merge) {
            std::vector<ReplMsg> part = merge_content(plan);
            msgs.insert(msgs.end(), part.begin(), part.end());
        }
        for (const ElementKey& loser : plan.losers) {
            std::vector<ReplMsg> part = repl_.local_remove(loser, ctx_);
            hier_.note_key_delta(repl_, loser, false);
            msgs.insert(msgs.end(), part.begin(), part.end());
        }
        return wrap(std::move(msgs));
    }

    bool deliverable(const Envelope& e) const { return e.deps.leq(vclock_); }

    void deliver(const Envelope& e) {
        if (!e.deps.leq(vclock_))
            throw contract_error("causal delivery broken: unmet dependencies " + e.deps.render());
        if (e.deps.get(e.sender) != vclock_.get(e.sender))
            throw contract_error("duplicate delivery from " + e.sender);
        if (std::holds_alternative<SetDownstream<ElementKey>>(e.msg)) {
            const ElementKey& k = element_of(std::get<SetDownstream<ElementKey>>(e.msg));
            bool before = repl_.contains(k);
            repl_.apply(e.msg, ctx_);
            bool after = repl_.contains(k);
            if (before != after) hier_.note_key_delta(repl_, k, after);
        } else {
            const ContentMsg& cm = std::get<ContentMsg>(e.msg);
            repl_.apply(e.msg, ctx_);
            hier_.note_content_delta(repl_, cm.key);
        }
        vclock_.increment(e.sender);
    }

  private:
    /// Resolves displayed paths against the current tree and produces the
    /// set-level operations realizing the user operation. Only the displayed
    /// namespace is consulted: while a name is conflicted its undecorated form
    /// is free again, and deliberately so.
    std::vector<AdaptedOp> translate(const FsNode& tree, const FsOp& op) const {
        const HierarchyConfig& cfg = hier_.config();
        return std::visit(
            [&](const auto& v) -> std::vector<AdaptedOp> {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, OpAdd>) {
                    if (cfg.leaf_only) return translate_leaf_add(tree, v);
                    const FsNode* parent = find_displayed(tree, v.parent);
                    if (!parent) throw not_found_error("exists(p): no element at " + v.parent.render());
                    if (parent->type != FileType::directory)
                        throw precondition_error("type(content(p)) = directory: " +
                                                 v.parent.render() + " is a file");
                    if (!parent->key_backed)
                        throw precondition_error("cannot add under the recreated directory " +
                                                 v.parent.render());
                    for (const auto& c : parent->children)
                        if (c.displayed == v.name)
                            throw precondition_error("not exists(p.n): '" + v.name +
                                                     "' already present in " + v.parent.render());
                    if (ncfg_.method == NamingMethod::avoid)
                        if (auto why = avoid_add_violation(cfg, ViewAdd{parent->origin, v.name, v.type}))
                            throw precondition_error(*why);
                    return {AdaptedAdd{ElementKey{parent->origin.child(v.name), v.type}}};
                } else if constexpr (std::is_same_v<T, OpRemove>) {
                    if (v.path.is_root()) throw precondition_error("p is not the root");
                    const FsNode* n = find_displayed(tree, v.path);
                    if (!n) throw not_found_error("exists(p): no element at " + v.path.render());
                    if (!n->key_backed) {
                        if (!cfg.leaf_only)
                            throw precondition_error("no replicated element at " + v.path.render() +
                                                     " (recreated directory)");
                        std::vector<AdaptedOp> out;
                        collect_subtree_removes(*n, out);
                        return out;
                    }
                    return {AdaptedRemove{ElementKey{n->origin, n->type}}};
                } else {
                    const FsNode* n = find_displayed(tree, v.path);
                    if (!n) throw not_found_error("exists(p): no element at " + v.path.render());
                    if (n->type == FileType::directory)
                        throw precondition_error("u is applicable to content(p): " +
                                                 v.path.render() + " is a directory");
                    return {AdaptedUpdate{ElementKey{n->origin, n->type}, v.edit}};
                }
            },
            op);
    }

    std::vector<AdaptedOp> translate_leaf_add(const FsNode& tree, const OpAdd& v) const {
        if (v.type == FileType::directory)
            throw precondition_error("directories are synthesized from file paths, not added");
        // Walk displayed segments as far as the tree goes; the remainder is
        // taken literally and its directories appear when the file does.
        const FsNode* cur = &tree;
        Path origin;
        for (std::size_t i = 0; i < v.parent.depth(); ++i) {
            const std::string& seg = v.parent.segments()[i];
            const FsNode* next = nullptr;
            if (cur)
                for (const auto& c : cur->children)
                    if (c.displayed == seg) {
                        next = &c;
                        break;
                    }
            if (next) {
                if (next->type != FileType::directory)
                    throw precondition_error("type(content(p)) = directory: " + v.parent.render() +
                                             " crosses a file");
                origin = next->origin;
                cur = next;
            } else {
                origin = origin.child(seg);
                cur = nullptr;
            }
        }
        if (cur)
            for (const auto& c : cur->children)
                if (c.displayed == v.name)
                    throw precondition_error("not exists(p.n): '" + v.name +
                                             "' already present in " + v.parent.render());
        if (ncfg_.method == NamingMethod::avoid)
            if (auto why = avoid_add_violation(hier_.config(), ViewAdd{origin, v.name, v.type}))
                throw precondition_error(*why);
        return {AdaptedAdd{ElementKey{origin.child(v.name), v.type}}};
    }

    static void collect_subtree_removes(const FsNode& n, std::vector<AdaptedOp>& out) {
        for (const auto& c : n.children) {
            if (c.type == FileType::directory)
                collect_subtree_removes(c, out);
            else if (c.key_backed)
                out.push_back(AdaptedRemove{ElementKey{c.origin, c.type}});
        }
    }

    std::vector<ReplMsg> execute(const AdaptedOp& a) {
        return std::visit(
            [&](const auto& x) -> std::vector<ReplMsg> {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, AdaptedAdd>) {
                    auto msgs = repl_.local_add(x.key, ctx_);
                    hier_.note_key_delta(repl_, x.key, true);
                    return msgs;
                } else if constexpr (std::is_same_v<T, AdaptedRemove>) {
                    auto msgs = repl_.local_remove(x.key, ctx_);
                    hier_.note_key_delta(repl_, x.key, false);
                    return msgs;
                } else {
                    auto msgs = repl_.local_update(x.key, x.edit, ctx_);
                    hier_.note_content_delta(repl_, x.key);
                    return msgs;
                }
            },
            a);
    }

    /// Folds the losers' content into the merge winner: text files receive the
    /// losers' surviving characters at their existing positions, binary files
    /// keep the newest value by write stamp.
    std::vector<ReplMsg> merge_content(const ResolvePlan& plan) {
        std::vector<ReplMsg> msgs;
        if (plan.winner.type == FileType::text) {
            for (const ElementKey& loser : plan.losers) {
                const ContentState* c = repl_.content_of(loser);
                if (!c) continue;
                std::vector<ContentOp> ops;
                for (const auto& [id, ch] : c->as_sequence().live_atoms())
                    ops.push_back(SeqInsert{id, ch});
                if (ops.empty()) continue;
                auto part = repl_.local_content_ops(plan.winner, std::move(ops), ctx_);
                msgs.insert(msgs.end(), part.begin(), part.end());
            }
        } else {
            const ContentState* w = repl_.content_of(plan.winner);
            Stamp best = w ? w->as_register().stamp() : Stamp{};
            const ContentState* newest = nullptr;
            for (const ElementKey& loser : plan.losers) {
                const ContentState* c = repl_.content_of(loser);
                if (c && best < c->as_register().stamp()) {
                    best = c->as_register().stamp();
                    newest = c;
                }
            }
            if (newest) {
                std::vector<ContentOp> ops;
                ops.push_back(RegWrite{newest->as_register().value(), ctx_.next_stamp()});
                auto part = repl_.local_content_ops(plan.winner, std::move(ops), ctx_);
                msgs.insert(msgs.end(), part.begin(), part.end());
            }
        }
        hier_.note_content_delta(repl_, plan.winner);
        return msgs;
    }

    std::vector<Envelope> wrap(std::vector<ReplMsg> msgs) {
        std::vector<Envelope> out;
        out.reserve(msgs.size());
        for (ReplMsg& m : msgs) {
            Envelope e;
            e.msg = std::move(m);
            e.sender = id();
            e.deps = vclock_;
            vclock_.increment(id());
            out.push_back(std::move(e));
        }
        return out;
    }

    ReplicaContext ctx_;
    ReplicationState repl_;
    HierarchyEvaluator hier_;
    NamingConfig ncfg_;
    VClock vclock_;
    Inbox inbox_;
};

// ---------------------------------------------------------------------------
// Cluster: replicas plus a causal broadcast bus
// ---------------------------------------------------------------------------

/// A deliverable choice: (receiver index, sender id). The envelope is the
/// front of that sender's queue at that receiver.
using DeliveryChoice = std::pair<std::size_t, std::string>;

class Cluster {
  public:
    Cluster(std::size_t n, SetVariant variant, HierarchyConfig hcfg, NamingConfig ncfg) {
        if (n == 0) throw config_error("a cluster needs at least one replica");
        for (std::size_t i = 0; i < n; ++i)
            replicas_.emplace_back("r" + std::to_string(i + 1), variant, hcfg, ncfg);
    }

    std::size_t size() const { return replicas_.size(); }
    Replica& at(std::size_t i) { return replicas_.at(i); }
    const Replica& at(std::size_t i) const { return replicas_.at(i); }

    Replica& by_id(const std::string& rid) { return replicas_.at(index_of(rid)); }

    std::size_t index_of(const std::string& rid) const {
        for (std::size_t i = 0; i < replicas_.size(); ++i)
            if (replicas_[i].id() == rid) return i;
        throw not_found_error("no replica named " + rid);
    }

    void set_trace(std::vector<std::string>* sink) { trace_ = sink; }

    /// Runs a user operation at one replica and broadcasts its messages.
    void local(const std::string& rid, const FsOp& op) {
        std::size_t i = index_of(rid);
        if (trace_) trace_->push_back("LOCAL " + rid + " " + render_op(op));
        broadcast(i, replicas_[i].local(op));
    }

    void resolve(const std::string& rid, const Path& dir, const std::string& name,
                 ResolveDecision decision, const std::optional<Path>& origin,
                 const std::optional<FileType>& type = std::nullopt) {
        std::size_t i = index_of(rid);
        if (trace_) {
            std::string line = "LOCAL " + rid + " resolve " + dir.render() + " " + name + " ";
            line += decision != ResolveDecision::choose ? "merge"
                    : origin                            ? "choose " + origin->render()
                                                        : "choose ?";
            if (decision == ResolveDecision::choose && type)
                line += " " + std::string(type_tag(*type));
            trace_->push_back(std::move(line));
        }
        broadcast(i, replicas_[i].resolve(dir, name, decision, origin, type));
    }

    std::size_t pending() const {
        std::size_t n = 0;
        for (const Replica& r : replicas_) n += r.pending();
        return n;
    }

    /// Every deliverable (receiver, sender-queue head), in deterministic order.
    std::vector<DeliveryChoice> deliverable_pairs() const {
        std::vector<DeliveryChoice> out;
        for (std::size_t i = 0; i < replicas_.size(); ++i)
            for (const auto& [sender, q] : replicas_[i].inbox())
                if (!q.empty() && replicas_[i].deliverable(q.front())) out.emplace_back(i, sender);
        return out;
    }

    void deliver_choice(const DeliveryChoice& p) {
        Replica& r = replicas_.at(p.first);
        auto it = r.inbox().find(p.second);
        if (it == r.inbox().end() || it->second.empty())
            throw contract_error("no pending message from " + p.second + " at " + r.id());
        deliver_from(p.first, it);
    }

    /// Delivers one deliverable envelope picked by the caller's generator.
    /// Returns false when nothing is deliverable (with correct causal
    /// metadata that means the bus is empty). Scans in the same order as
    /// deliverable_pairs(), without materializing the list.
    bool deliver_one(std::mt19937_64& rng) {
        std::size_t n = 0;
        for (const Replica& r : replicas_)
            for (const auto& [sender, q] : r.inbox())
                if (!q.empty() && r.deliverable(q.front())) ++n;
        if (n == 0) {
            if (pending() != 0)
                throw contract_error("messages pending but none deliverable");
            return false;
        }
        std::size_t k = static_cast<std::size_t>(rng() % n);
        for (std::size_t i = 0; i < replicas_.size(); ++i) {
            Replica::Inbox& inbox = replicas_[i].inbox();
            for (auto it = inbox.begin(); it != inbox.end(); ++it) {
                if (it->second.empty() || !replicas_[i].deliverable(it->second.front())) continue;
                if (k-- == 0) {
                    deliver_from(i, it);
                    return true;
                }
            }
        }
        throw contract_error("deliverable head vanished mid-scan");
    }

    std::size_t deliver_all(std::mt19937_64& rng) {
        std::size_t n = 0;
        while (deliver_one(rng)) ++n;
        return n;
    }

    /// True when every replica shows the same tree and the same visible set.
    /// Meaningful once the bus is drained; callable anytime.
    bool converged(std::string* report = nullptr) {
        std::vector<FsNode> trees;
        std::vector<std::map<ElementKey, std::string>> looks;
        trees.reserve(replicas_.size());
        for (Replica& r : replicas_) {
            trees.push_back(r.fs());
            looks.push_back(r.state().lookup());
        }
        for (std::size_t i = 1; i < replicas_.size(); ++i) {
            if (looks[i] != looks[0]) {
                if (report)
                    *report = "set lookup differs between " + replicas_[0].id() + " and " +
                              replicas_[i].id() + ":\n" + render_lookup(looks[0]) + "--\n" +
                              render_lookup(looks[i]);
                return false;
            }
            if (!(trees[i] == trees[0])) {
                if (report)
                    *report = "trees differ between " + replicas_[0].id() + " and " +
                              replicas_[i].id() + ":\n-- " + replicas_[0].id() + " --\n" +
                              dump_fs(trees[0]) + "-- " + replicas_[i].id() + " --\n" +
                              dump_fs(trees[i]);
                return false;
            }
        }
        return true;
    }

    /// Identity of the cluster state for schedule enumeration: which message
    /// uids each replica has delivered. Same delivered sets must mean same
    /// state, which is exactly what the enumeration checks.
    std::string delivered_fingerprint() const {
        std::string s;
        for (std::size_t i = 0; i < replicas_.size(); ++i) {
            s += '|';
            if (i >= delivered_.size()) continue;
            std::vector<std::uint64_t> uids = delivered_[i];
            std::sort(uids.begin(), uids.end());
            for (std::uint64_t uid : uids) {
                s += std::to_string(uid);
                s += ',';
            }
        }
        return s;
    }

    /// Full observable state, for comparing terminal states across schedules.
    std::string state_fingerprint() {
        std::string s;
        for (Replica& r : replicas_) {
            s += "-- " + r.id() + " --\n";
            s += dump_fs(r.fs());
            s += render_lookup(r.state().lookup());
        }
        return s;
    }

  private:
    static std::string render_lookup(const std::map<ElementKey, std::string>& m) {
        std::string s;
        for (const auto& [k, v] : m) s += k.render() + " \"" + v + "\"\n";
        return s;
    }

    void deliver_from(std::size_t i, Replica::Inbox::iterator it) {
        Replica& r = replicas_[i];
        Envelope e = std::move(it->second.front());
        it->second.pop_front();
        if (it->second.empty()) r.inbox().erase(it);
        if (trace_)
            trace_->push_back("DELIVER " + r.id() + " from=" + e.sender + " deps=" +
                              e.deps.render() + " " + render_repl_msg(e.msg));
        r.deliver(e);
        if (delivered_.size() < replicas_.size()) delivered_.resize(replicas_.size());
        delivered_[i].push_back(e.uid);
    }

    void broadcast(std::size_t from, std::vector<Envelope> envs) {
        for (Envelope& e : envs) {
            e.uid = next_uid_++;
            for (std::size_t i = 0; i < replicas_.size(); ++i) {
                if (i == from) continue;
                replicas_[i].inbox()[e.sender].push_back(e);
            }
        }
    }

    std::vector<Replica> replicas_;
    std::vector<std::vector<std::uint64_t>> delivered_;  // per replica, delivery order
    std::uint64_t next_uid_ = 1;
    std::vector<std::string>* trace_ = nullptr;
};

// ---------------------------------------------------------------------------
// Exhaustive schedule enumeration
// ---------------------------------------------------------------------------

struct EnumerationResult {
    std::set<std::string> outcomes;   // distinct terminal state fingerprints
    std::size_t terminal_states = 0;  // quiescent arrivals (see memoize below)
    std::size_t visited = 0;          // states explored (distinct ones when memoized)
    bool capped = false;              // hit the exploration cap
    std::string divergence;           // first in-state divergence report, if any
};

namespace sim_detail {
inline void enumerate_rec(const Cluster& c, EnumerationResult& r, std::set<std::string>* seen,
                          std::size_t cap) {
    if (r.capped) return;
    if (r.visited >= cap) {
        r.capped = true;
        return;
    }
    ++r.visited;
    auto pairs = c.deliverable_pairs();
    if (pairs.empty()) {
        Cluster terminal = c;
        std::string rep;
        if (!terminal.converged(&rep) && r.divergence.empty()) r.divergence = rep;
        r.outcomes.insert(terminal.state_fingerprint());
        ++r.terminal_states;
        return;
    }
    for (const auto& p : pairs) {
        Cluster next = c;
        next.deliver_choice(p);
        if (seen && !seen->insert(next.delivered_fingerprint()).second) continue;
        enumerate_rec(next, r, seen, cap);
    }
}
}  // namespace sim_detail

/// Explores every causal delivery order of the messages currently in flight.
/// With memoize (the default), orders that reach the same per-replica
/// delivered sets are explored once — cheap, but it takes "state is a
/// function of the delivered set" on faith, and terminal_states counts
/// distinct delivered sets. With memoize off the full order tree is walked
/// and every complete order's terminal state is computed independently, so
/// a single outcome is evidence rather than assumption; terminal_states
/// then counts complete orders. Memoize off is for small instances only.
inline EnumerationResult enumerate_schedules(const Cluster& start, std::size_t cap = 1 << 20,
                                             bool memoize = true) {
    EnumerationResult r;
    Cluster c = start;
    c.set_trace(nullptr);
    std::set<std::string> seen;
    seen.insert(c.delivered_fingerprint());
    sim_detail::enumerate_rec(c, r, memoize ? &seen : nullptr, cap);
    return r;
}

// ---------------------------------------------------------------------------
// Threaded drain (validation that replicas transfer across threads cleanly)
// ---------------------------------------------------------------------------

/// Drains the bus with one thread per replica. Each replica is touched only
/// by its own thread; the inboxes are guarded by one mutex. The result must
/// match a single-threaded drain's converged state.
inline void drain_threaded(Cluster& c) {
    c.set_trace(nullptr);
    std::mutex mu;
    std::vector<std::thread> threads;
    threads.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        threads.emplace_back([&c, &mu, i] {
            Replica& me = c.at(i);
            for (;;) {
                std::optional<Envelope> picked;
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (c.pending() == 0) return;
                    for (auto& [sender, q] : me.inbox()) {
                        if (!q.empty() && me.deliverable(q.front())) {
                            picked = std::move(q.front());
                            q.pop_front();
                            break;
                        }
                    }
                }
                if (picked)
                    me.deliver(*picked);
                else
                    std::this_thread::yield();
            }
        });
    }
    for (std::thread& t : threads) t.join();
}

}  // namespace crdtfs
