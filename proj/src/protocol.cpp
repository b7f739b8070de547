#include "rbsr/protocol.hpp"

#include <algorithm>
#include <iterator>

#include "rbsr/codec.hpp"
#include "rbsr/error.hpp"
#include "rbsr/window.hpp"

namespace rbsr {

namespace {

enum Tag : std::uint8_t { kTagSkip = 0, kTagFingerprint = 1, kTagIdList = 2 };

template <typename F>
auto counted(const StoreView& store, OpStats* work, F&& f) {
    auto r = f();
    if (work) *work += store.last_op_stats();
    return r;
}

void put_bound(ByteWriter& w, const Bound& b) { w.put_bytes(encode_bound(b)); }

Bound get_bound(ByteReader& r) {
    std::uint8_t tag = r.get_u8();
    switch (static_cast<Bound::Kind>(tag)) {
    case Bound::Kind::MinusInfinity:
        return Bound::minus_infinity();
    case Bound::Kind::PlusInfinity:
        return Bound::plus_infinity();
    case Bound::Kind::Key:
        return Bound(decode_key(r.get_bytes(kKeyEncodedSize)));
    }
    throw DecodeError("bad bound tag " + std::to_string(tag));
}

} // namespace

void ProtocolParams::validate() const {
    if (branch_factor < 2) throw ConfigError("branch factor must be at least 2");
    if (idlist_threshold < 1) throw ConfigError("id list threshold must be at least 1");
}

std::vector<std::uint8_t> encode_message(const Message& m) {
    ByteWriter w;
    w.put_u8(kMessageFormat);
    w.put_leb128(m.elements.size());
    for (const auto& e : m.elements) {
        put_bound(w, e.range.lo);
        put_bound(w, e.range.hi);
        if (std::holds_alternative<SkipPayload>(e.payload)) {
            w.put_u8(kTagSkip);
        } else if (auto* fp = std::get_if<FingerprintPayload>(&e.payload)) {
            w.put_u8(kTagFingerprint);
            w.put_bytes(fp->fp.bytes);
        } else {
            const auto& ids = std::get<IdListPayload>(e.payload);
            w.put_u8(kTagIdList);
            w.put_u8(ids.want_reply ? 1 : 0);
            w.put_leb128(ids.keys.size());
            for (const auto& k : ids.keys) w.put_bytes(encode_key(k));
        }
    }
    return w.take();
}

Message decode_message(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::uint8_t format = r.get_u8();
    if (format != kMessageFormat) throw DecodeError("unknown message format " + std::to_string(format));
    std::uint64_t n = r.get_leb128();
    // Every element needs at least three bytes.
    if (n > r.remaining() / 3) throw DecodeError("element count exceeds message length");
    Message m;
    m.elements.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        RangeElement e;
        e.range.lo = get_bound(r);
        e.range.hi = get_bound(r);
        std::uint8_t tag = r.get_u8();
        switch (tag) {
        case kTagSkip:
            e.payload = SkipPayload{};
            break;
        case kTagFingerprint: {
            FingerprintPayload fp;
            auto b = r.get_bytes(fp.fp.bytes.size());
            std::copy(b.begin(), b.end(), fp.fp.bytes.begin());
            e.payload = fp;
            break;
        }
        case kTagIdList: {
            IdListPayload ids;
            std::uint8_t want = r.get_u8();
            if (want > 1) throw DecodeError("bad want_reply flag");
            ids.want_reply = want == 1;
            std::uint64_t k = r.get_leb128();
            if (k > r.remaining() / kKeyEncodedSize) throw DecodeError("id count exceeds message length");
            ids.keys.reserve(k);
            for (std::uint64_t j = 0; j < k; ++j) ids.keys.push_back(decode_key(r.get_bytes(kKeyEncodedSize)));
            e.payload = std::move(ids);
            break;
        }
        default:
            throw DecodeError("bad element tag " + std::to_string(tag));
        }
        m.elements.push_back(std::move(e));
    }
    if (!r.at_end()) throw DecodeError("trailing bytes after message");
    return m;
}

void check_message(const Message& m) {
    const Bound* prev_hi = nullptr;
    for (std::size_t i = 0; i < m.elements.size(); ++i) {
        const auto& e = m.elements[i];
        if (!e.range.valid()) throw ProtocolError("element " + std::to_string(i) + " has an inverted range");
        if (prev_hi && *prev_hi > e.range.lo) {
            throw ProtocolError("element " + std::to_string(i) + " overlaps or precedes its predecessor");
        }
        prev_hi = &e.range.hi;
        if (auto* ids = std::get_if<IdListPayload>(&e.payload)) {
            for (std::size_t j = 0; j < ids->keys.size(); ++j) {
                if (!e.range.contains(ids->keys[j])) {
                    throw ProtocolError("element " + std::to_string(i) + " lists an id outside its range");
                }
                if (j > 0 && !(ids->keys[j - 1] < ids->keys[j])) {
                    throw ProtocolError("element " + std::to_string(i) + " id list is not strictly increasing");
                }
            }
        }
    }
}

std::vector<Bound> normalize_cuts(const std::vector<Bound>& cuts) {
    std::vector<Bound> out;
    out.reserve(cuts.size());
    for (const auto& c : cuts) {
        if (!out.empty()) {
            if (c < out.back()) throw PreconditionError("cuts must be non-decreasing");
            if (c == out.back()) continue;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<Bound> split_by_rank(const StoreView& store, const Bound& l, const Bound& u, std::size_t b,
                                 OpStats* work) {
    if (b < 2) throw ConfigError("split fanout must be at least 2");
    if (u < l) throw PreconditionError("split_by_rank with inverted bounds");
    const std::uint64_t r0 = counted(store, work, [&] { return store.rank(l); });
    const std::uint64_t r1 = counted(store, work, [&] { return store.rank(u); });
    const std::uint64_t m = r1 - r0;
    if (m == 0) return normalize_cuts({l, u});
    std::vector<Bound> cuts{l};
    for (std::size_t j = 1; j < b; ++j) {
        auto q = static_cast<std::uint64_t>((static_cast<unsigned __int128>(j) * m) / b);
        cuts.emplace_back(counted(store, work, [&] { return store.select(r0 + q); }));
    }
    cuts.push_back(u);
    return normalize_cuts(cuts);
}

Response respond(const StoreView& store, const HalfOpenRange& range, const Fingerprint& remote,
                 const ProtocolParams& params, bool use_windows, OpStats* work) {
    params.validate();
    if (!range.valid()) throw PreconditionError("respond on an inverted range");

    if (use_windows) {
        WindowHandle w = window_open(store, range.lo, range.hi, work);
        if (fingerprint_of_aggregate(w.total) == remote) return SkipOut{};
        if (w.count() <= params.idlist_threshold) return IdListOut{window_enumerate(store, w, 0, w.count(), work)};
        SplitOut out;
        for (const auto& c : window_split(store, w, params.branch_factor, work)) {
            out.children.emplace_back(c.outer, fingerprint_of_aggregate(c.total));
        }
        return out;
    }

    Aggregate a = counted(store, work, [&] { return store.aggregate(range.lo, range.hi); });
    if (fingerprint_of_aggregate(a) == remote) return SkipOut{};
    if (a.count <= params.idlist_threshold) {
        return IdListOut{counted(store, work, [&] { return store.enumerate(range.lo, range.hi); })};
    }
    auto cuts = split_by_rank(store, range.lo, range.hi, params.branch_factor, work);
    SplitOut out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        Aggregate c = counted(store, work, [&] { return store.aggregate(cuts[k], cuts[k + 1]); });
        out.children.emplace_back(HalfOpenRange{cuts[k], cuts[k + 1]}, fingerprint_of_aggregate(c));
    }
    return out;
}

Message initiate(const StoreView& store, const HalfOpenRange& outer, OpStats* work) {
    if (!outer.valid()) throw PreconditionError("initiate on an inverted range");
    Aggregate a = counted(store, work, [&] { return store.aggregate(outer.lo, outer.hi); });
    return Message{{RangeElement{outer, FingerprintPayload{fingerprint_of_aggregate(a)}}}};
}

PeerCounters& PeerCounters::operator+=(const PeerCounters& o) {
    Q += o.Q;
    I += o.I;
    L_skip += o.L_skip;
    L_id += o.L_id;
    K += o.K;
    reply_items += o.reply_items;
    node_visits += o.node_visits;
    respond_node_visits += o.respond_node_visits;
    entries_scanned += o.entries_scanned;
    return *this;
}

Peer::Peer(const StoreView& store, Role role, ProtocolParams params, bool use_windows)
    : store_(store), role_(role), params_(params), use_windows_(use_windows) {
    params_.validate();
}

void Peer::charge(const OpStats& s, bool in_respond) {
    counters_.node_visits += s.nodes_visited;
    counters_.entries_scanned += s.entries_scanned;
    if (in_respond) counters_.respond_node_visits += s.nodes_visited;
}

Message Peer::initiate(const HalfOpenRange& outer) {
    OpStats s;
    Message m = rbsr::initiate(store_, outer, &s);
    charge(s, false);
    return m;
}

Message Peer::process(const Message& incoming) {
    check_message(incoming);
    const bool initiator = role_ == Role::Initiator;
    Message out;
    for (const auto& e : incoming.elements) {
        if (std::holds_alternative<SkipPayload>(e.payload)) continue;

        if (auto* fp = std::get_if<FingerprintPayload>(&e.payload)) {
            OpStats s;
            Response r = respond(store_, e.range, fp->fp, params_, use_windows_, &s);
            charge(s, true);
            ++counters_.Q;
            if (std::holds_alternative<SkipOut>(r)) {
                ++counters_.L_skip;
                // Diagnostic only, not charged.
                if (record_skips_) skips_.push_back({e.range, store_.aggregate(e.range.lo, e.range.hi)});
                out.elements.push_back({e.range, SkipPayload{}});
            } else if (auto* ids = std::get_if<IdListOut>(&r)) {
                ++counters_.L_id;
                counters_.K += ids->keys.size();
                out.elements.push_back({e.range, IdListPayload{std::move(ids->keys), initiator}});
            } else {
                auto& split = std::get<SplitOut>(r);
                ++counters_.I;
                for (auto& [range, cfp] : split.children) out.elements.push_back({range, FingerprintPayload{cfp}});
            }
            continue;
        }

        const auto& remote = std::get<IdListPayload>(e.payload);
        if (!initiator && !remote.want_reply) continue;
        OpStats s;
        auto local = counted(store_, &s, [&] { return store_.enumerate(e.range.lo, e.range.hi); });
        charge(s, false);
        if (initiator) {
            std::set_difference(local.begin(), local.end(), remote.keys.begin(), remote.keys.end(),
                                std::back_inserter(have_));
            std::set_difference(remote.keys.begin(), remote.keys.end(), local.begin(), local.end(),
                                std::back_inserter(need_));
        }
        if (remote.want_reply) {
            counters_.reply_items += local.size();
            out.elements.push_back({e.range, IdListPayload{std::move(local), false}});
        }
    }
    return out;
}

std::vector<ItemKey> Peer::have() const {
    auto v = have_;
    std::sort(v.begin(), v.end());
    return v;
}

std::vector<ItemKey> Peer::need() const {
    auto v = need_;
    std::sort(v.begin(), v.end());
    return v;
}

PeerCounters ReconcileOutcome::totals() const {
    PeerCounters t = initiator;
    t += responder;
    return t;
}

ReconcileOutcome reconcile(const StoreView& x, const StoreView& y, const HalfOpenRange& outer,
                           const ProtocolParams& params, const ReconcileOptions& opt) {
    if (x.config() != y.config()) throw ConfigError("peers use different summary configurations");
    params.validate();

    Peer px(x, Role::Initiator, params, opt.initiator_windows);
    Peer py(y, Role::Responder, params, opt.responder_windows);
    px.record_skips(opt.record_skips);
    py.record_skips(opt.record_skips);

    ReconcileOutcome res;
    Sha256Hasher transcript;
    // Every transmitted message goes through the wire format and back.
    auto transmit = [&](const Message& m) {
        auto bytes = encode_message(m);
        transcript.update(bytes);
        res.bytes_sent += bytes.size();
        ++res.messages;
        return decode_message(bytes);
    };

    Message msg = transmit(px.initiate(outer));
    res.rounds = 1;
    for (;;) {
        Message reply = py.process(msg);
        if (reply.empty()) break;
        reply = transmit(reply);
        Message next = px.process(reply);
        if (next.empty()) break;
        if (res.rounds >= opt.max_rounds) {
            throw ProtocolError("session exceeded " + std::to_string(opt.max_rounds) + " rounds");
        }
        msg = transmit(next);
        ++res.rounds;
    }

    res.have = px.have();
    res.need = px.need();
    res.transcript_hash = transcript.finish();
    res.initiator = px.counters();
    res.responder = py.counters();
    if (opt.record_skips) {
        res.skips = px.skips();
        res.skips.insert(res.skips.end(), py.skips().begin(), py.skips().end());
    }
    return res;
}

} // namespace rbsr
