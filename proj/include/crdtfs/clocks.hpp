#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

#include "errors.hpp"

namespace crdtfs {

/// A Lamport timestamp extended with the issuing replica's id so that the
/// order is total: stamps compare by counter first, replica id second.
struct Stamp {
    std::uint64_t counter = 0;
    std::string replica;

    std::string render() const { return std::to_string(counter) + ":" + replica; }

    friend auto operator<=>(const Stamp&, const Stamp&) = default;
};

/// A globally unique tag minted by one replica: replica id plus a local
/// sequence number that the replica never reuses.
struct Tag {
    std::string replica;
    std::uint64_t seq = 0;

    std::string render() const { return replica + ":" + std::to_string(seq); }

    friend auto operator<=>(const Tag&, const Tag&) = default;
};

/// Per-replica clock state: mints stamps, tags, and sequence numbers, and
/// advances the Lamport counter when remote stamps are observed.
class ReplicaContext {
  public:
    ReplicaContext() = default;
    explicit ReplicaContext(std::string replica_id) : replica_(std::move(replica_id)) {
        if (replica_.empty()) throw config_error("replica id must be non-empty");
    }

    const std::string& replica_id() const { return replica_; }

    Stamp next_stamp() { return Stamp{++lamport_, replica_}; }

    Tag next_tag() { return Tag{replica_, ++seq_}; }

    std::uint64_t next_seq() { return ++seq_; }

    /// Keeps the local Lamport counter ahead of every stamp ever seen.
    void observe(const Stamp& s) {
        if (s.counter > lamport_) lamport_ = s.counter;
    }

    std::uint64_t lamport() const { return lamport_; }

  private:
    std::string replica_;
    std::uint64_t lamport_ = 0;
    std::uint64_t seq_ = 0;
};

/// A vector clock keyed by replica id. Used by the delivery harness to
/// decide causal deliverability; absent entries count as zero.
class VClock {
  public:
    std::uint64_t get(const std::string& replica) const {
        auto it = entries_.find(replica);
        return it == entries_.end() ? 0 : it->second;
    }

    void set(const std::string& replica, std::uint64_t value) { entries_[replica] = value; }

    void increment(const std::string& replica) { ++entries_[replica]; }

    /// True when every entry of *this is <= the matching entry of other.
    bool leq(const VClock& other) const {
        for (const auto& [r, v] : entries_)
            if (v > other.get(r)) return false;
        return true;
    }

    const std::map<std::string, std::uint64_t>& entries() const { return entries_; }

    std::string render() const {
        std::string out = "{";
        bool first = true;
        for (const auto& [r, v] : entries_) {
            if (v == 0) continue;
            if (!first) out += ",";
            first = false;
            out += r + ":" + std::to_string(v);
        }
        out += "}";
        return out;
    }

    friend auto operator<=>(const VClock&, const VClock&) = default;

  private:
    std::map<std::string, std::uint64_t> entries_;
};

}  // namespace crdtfs
