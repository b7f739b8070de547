#pragma once

// Range-based set reconciliation: the responder step, balanced splitting by
// rank, the canonical message encoding and a two-peer in-process driver.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rbsr/core.hpp"
#include "rbsr/store.hpp"

namespace rbsr {

struct ProtocolParams {
    std::size_t branch_factor = 16;    // b
    std::size_t idlist_threshold = 32; // t

    /// Throws ConfigError unless b >= 2 and t >= 1.
    void validate() const;
};

struct SkipPayload {
    friend bool operator==(const SkipPayload&, const SkipPayload&) = default;
};

struct FingerprintPayload {
    Fingerprint fp;
    friend bool operator==(const FingerprintPayload&, const FingerprintPayload&) = default;
};

struct IdListPayload {
    std::vector<ItemKey> keys;
    bool want_reply = false;
    friend bool operator==(const IdListPayload&, const IdListPayload&) = default;
};

using Payload = std::variant<SkipPayload, FingerprintPayload, IdListPayload>;

struct RangeElement {
    HalfOpenRange range;
    Payload payload;
    friend bool operator==(const RangeElement&, const RangeElement&) = default;
};

struct Message {
    std::vector<RangeElement> elements;

    bool empty() const { return elements.empty(); }
    friend bool operator==(const Message&, const Message&) = default;
};

inline constexpr std::uint8_t kMessageFormat = 0x01;

std::vector<std::uint8_t> encode_message(const Message& m);
/// Throws DecodeError on malformed bytes, including trailing garbage.
Message decode_message(std::span<const std::uint8_t> bytes);

/// Throws ProtocolError unless ranges are valid, ascending and disjoint, and
/// every IdList is strictly increasing and inside its range.
void check_message(const Message& m);

/// Drops consecutive duplicates; throws PreconditionError on decreasing input.
std::vector<Bound> normalize_cuts(const std::vector<Bound>& cuts);

/// Cuts [l, Select(r0+q_1), ..., Select(r0+q_{b-1}), u] with q_j = floor(j*m/b),
/// normalized; [l, u] when the range holds no items.
std::vector<Bound> split_by_rank(const StoreView& store, const Bound& l, const Bound& u, std::size_t b,
                                 OpStats* work = nullptr);

struct SkipOut {};
struct IdListOut {
    std::vector<ItemKey> keys;
};
struct SplitOut {
    std::vector<std::pair<HalfOpenRange, Fingerprint>> children;
};
using Response = std::variant<SkipOut, IdListOut, SplitOut>;

/// One responder step on `range` given the peer's fingerprint. With
/// `use_windows` the range is opened as a window and the split reuses its
/// ranks and cached aggregate; the answer is identical either way.
Response respond(const StoreView& store, const HalfOpenRange& range, const Fingerprint& remote,
                 const ProtocolParams& params, bool use_windows = false, OpStats* work = nullptr);

/// Single element (outer, fingerprint of the local aggregate).
Message initiate(const StoreView& store, const HalfOpenRange& outer, OpStats* work = nullptr);

enum class Role { Initiator, Responder };

struct PeerCounters {
    std::uint64_t Q = 0;      // fingerprint elements answered
    std::uint64_t I = 0;      // answered by a split
    std::uint64_t L_skip = 0; // answered by a skip
    std::uint64_t L_id = 0;   // answered by an id list
    std::uint64_t K = 0;      // ids in id lists produced by responder steps
    std::uint64_t reply_items = 0; // ids sent back for want_reply lists
    std::uint64_t node_visits = 0;
    std::uint64_t respond_node_visits = 0;
    std::uint64_t entries_scanned = 0;

    PeerCounters& operator+=(const PeerCounters& o);
};

/// A range this peer skipped because fingerprints matched, with the local
/// aggregate that produced the match.
struct SkipRecord {
    HalfOpenRange range;
    Aggregate local;
};

/// One side of a session. Only the initiator accumulates have/need.
class Peer {
public:
    Peer(const StoreView& store, Role role, ProtocolParams params = {}, bool use_windows = false);

    Message initiate(const HalfOpenRange& outer);
    /// Reply to `incoming`; empty when this side has nothing more to say.
    Message process(const Message& incoming);

    Role role() const { return role_; }
    const PeerCounters& counters() const { return counters_; }
    /// Sorted on return.
    std::vector<ItemKey> have() const;
    std::vector<ItemKey> need() const;

    void record_skips(bool on) { record_skips_ = on; }
    const std::vector<SkipRecord>& skips() const { return skips_; }

private:
    void charge(const OpStats& s, bool in_respond);

    const StoreView& store_;
    Role role_;
    ProtocolParams params_;
    bool use_windows_;
    bool record_skips_ = false;
    PeerCounters counters_;
    std::vector<ItemKey> have_;
    std::vector<ItemKey> need_;
    std::vector<SkipRecord> skips_;
};

struct ReconcileOptions {
    bool initiator_windows = false;
    bool responder_windows = false;
    bool record_skips = false;
    std::uint64_t max_rounds = 64;
};

struct ReconcileOutcome {
    std::vector<ItemKey> have; // in X, missing from Y
    std::vector<ItemKey> need; // in Y, missing from X
    std::uint64_t rounds = 0;  // messages sent by the initiator
    std::uint64_t messages = 0;
    std::uint64_t bytes_sent = 0;
    Sha256Digest transcript_hash{};
    PeerCounters initiator;
    PeerCounters responder;
    std::vector<SkipRecord> skips; // both peers, when recorded

    /// Sum of both peers' counters.
    PeerCounters totals() const;
};

/// Runs X (initiator) against Y until one side has nothing to send.
/// Throws ConfigError if the stores' summary configurations differ and
/// ProtocolError if the session exceeds max_rounds.
ReconcileOutcome reconcile(const StoreView& x, const StoreView& y, const HalfOpenRange& outer,
                           const ProtocolParams& params = {}, const ReconcileOptions& opt = {});

} // namespace rbsr
