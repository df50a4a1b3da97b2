#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "clocks.hpp"
#include "content_crdts.hpp"
#include "errors.hpp"
#include "fs_model.hpp"
#include "path.hpp"
#include "set_crdts.hpp"

namespace crdtfs {

/// A content operation targeted at one element's content state. Applicable
/// regardless of whether the key is currently in the element set.
struct ContentMsg {
    ElementKey key;
    ContentOp op;
    friend auto operator<=>(const ContentMsg&, const ContentMsg&) = default;
};

using ReplMsg = std::variant<SetDownstream<ElementKey>, ContentMsg>;

inline std::string render_repl_msg(const ReplMsg& msg) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ContentMsg>)
                return "content " + m.key.render() + " " + render_content_op(m.op);
            else
                return render_set_msg(m);
        },
        msg);
}

/// Bottom layer: the element-set CRDT plus per-element content states.
/// Content entries are created lazily and never deleted, so the content of a
/// removed element survives and is still there if the element is added back.
class ReplicationState {
  public:
    ReplicationState() = default;
    explicit ReplicationState(SetVariant v) : elements_(v) {}

    SetVariant variant() const { return elements_.variant(); }

    /// Adds a key: one set-add message, plus (for files) the content ops that
    /// clear the value as observed here, so a freshly added file reads empty.
    std::vector<ReplMsg> local_add(const ElementKey& key, ReplicaContext& ctx) {
        if (auto why = elements_.add_violation(key))
            throw precondition_error("add " + key.render() + ": " + *why);
        std::vector<ReplMsg> out;
        out.push_back(elements_.local_add(key, ctx));
        if (key.type != FileType::directory) {
            auto& content = content_entry(key);
            for (auto& op : content.clear_ops(ctx)) {
                content.apply(op);
                out.push_back(ContentMsg{key, std::move(op)});
            }
        }
        return out;
    }

    /// Removes a key from the set; its content entry is retained untouched.
    std::vector<ReplMsg> local_remove(const ElementKey& key, ReplicaContext& ctx) {
        if (auto why = elements_.remove_violation(key))
            throw precondition_error("remove " + key.render() + ": " + *why);
        return {elements_.local_remove(key, ctx)};
    }

    /// Applies a user edit to a visible file's content.
    std::vector<ReplMsg> local_update(const ElementKey& key, const Edit& edit, ReplicaContext& ctx) {
        if (!elements_.contains(key))
            throw precondition_error("update " + key.render() + ": exists(p)");
        if (key.type == FileType::directory)
            throw precondition_error("update " + key.render() + ": directories have no content");
        std::vector<ReplMsg> out;
        for (auto& op : content_entry(key).local_edit(edit, ctx))
            out.push_back(ContentMsg{key, std::move(op)});
        return out;
    }

    /// Applies pre-built content ops locally (merge transplants) and wraps
    /// them for broadcast.
    std::vector<ReplMsg> local_content_ops(const ElementKey& key, std::vector<ContentOp> ops,
                                           ReplicaContext& ctx) {
        if (!elements_.contains(key))
            throw precondition_error("update " + key.render() + ": exists(p)");
        if (key.type == FileType::directory)
            throw precondition_error("update " + key.render() + ": directories have no content");
        auto& content = content_entry(key);
        std::vector<ReplMsg> out;
        for (auto& op : ops) {
            observe_stamps(op, ctx);
            content.apply(op);
            out.push_back(ContentMsg{key, std::move(op)});
        }
        return out;
    }

    /// Applies a remote message. Content messages land even when the key is
    /// not in the set (that is how remove-versus-update resolves: both win).
    void apply(const ReplMsg& msg, ReplicaContext& ctx) {
        if (const auto* set_msg = std::get_if<SetDownstream<ElementKey>>(&msg)) {
            observe_stamps(*set_msg, ctx);
            elements_.apply(*set_msg);
            return;
        }
        const auto& cm = std::get<ContentMsg>(msg);
        if (cm.key.type == FileType::directory)
            throw contract_error("content message for a directory key " + cm.key.render());
        observe_stamps(cm.op, ctx);
        content_entry(cm.key).apply(cm.op);
    }

    bool contains(const ElementKey& key) const { return elements_.contains(key); }

    /// Content value of a key: empty for directories and never-edited files.
    std::string value_of(const ElementKey& key) const {
        if (key.type == FileType::directory) return "";
        auto it = contents_.find(key);
        return it == contents_.end() ? "" : it->second.value();
    }

    const ContentState* content_of(const ElementKey& key) const {
        auto it = contents_.find(key);
        return it == contents_.end() ? nullptr : &it->second;
    }

    template <typename F>
    void for_each_key(F&& f) const {
        elements_.for_each(f);
    }

    /// The user-facing projection: visible keys mapped to their content.
    std::map<ElementKey, std::string> lookup() const {
        std::map<ElementKey, std::string> out;
        elements_.for_each([&](const ElementKey& k) { out.emplace(k, value_of(k)); });
        return out;
    }

    const SetCrdt<ElementKey>& elements() const { return elements_; }

  private:
    ContentState& content_entry(const ElementKey& key) {
        auto it = contents_.find(key);
        if (it == contents_.end()) it = contents_.emplace(key, ContentState(key.type)).first;
        return it->second;
    }

    SetCrdt<ElementKey> elements_;
    std::map<ElementKey, ContentState> contents_;
};

}  // namespace crdtfs
