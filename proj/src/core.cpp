#include "rbsr/core.hpp"

#include <algorithm>

#include "rbsr/codec.hpp"
#include "rbsr/error.hpp"

namespace rbsr {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0xf]);
    }
    return out;
}

ItemKey make_key(std::uint64_t timestamp, std::initializer_list<std::uint8_t> prefix) {
    if (prefix.size() > kIdSize) throw PreconditionError("id prefix longer than 32 bytes");
    ItemKey k;
    k.timestamp = timestamp;
    std::copy(prefix.begin(), prefix.end(), k.id.begin());
    return k;
}

std::strong_ordering compare_keys(const ItemKey& a, const ItemKey& b) { return a <=> b; }

EncodedKey encode_key(const ItemKey& key) {
    EncodedKey out{};
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(key.timestamp >> (56 - 8 * i));
    std::copy(key.id.begin(), key.id.end(), out.begin() + 8);
    return out;
}

ItemKey decode_key(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kKeyEncodedSize) throw DecodeError("truncated key encoding");
    ItemKey k;
    for (int i = 0; i < 8; ++i) k.timestamp = (k.timestamp << 8) | bytes[i];
    std::copy(bytes.begin() + 8, bytes.begin() + kKeyEncodedSize, k.id.begin());
    return k;
}

std::string to_string(const ItemKey& key) {
    return "(" + std::to_string(key.timestamp) + "," + to_hex(key.id) + ")";
}

const ItemKey& Bound::key() const {
    if (kind_ != Kind::Key) throw PreconditionError("bound is a sentinel, not a key");
    return key_;
}

std::vector<std::uint8_t> encode_bound(const Bound& bound) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(bound.kind()));
    if (bound.is_key()) {
        auto enc = encode_key(bound.key());
        out.insert(out.end(), enc.begin(), enc.end());
    }
    return out;
}

Bound decode_bound(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
    ByteReader r(bytes);
    std::uint8_t tag = r.get_u8();
    Bound b;
    switch (tag) {
    case 0: b = Bound::minus_infinity(); break;
    case 1: b = Bound(decode_key(r.get_bytes(kKeyEncodedSize))); break;
    case 2: b = Bound::plus_infinity(); break;
    default: throw DecodeError("unknown bound tag " + std::to_string(tag));
    }
    if (consumed != nullptr) *consumed = r.position();
    return b;
}

std::string to_string(const Bound& bound) {
    switch (bound.kind()) {
    case Bound::Kind::MinusInfinity: return "-inf";
    case Bound::Kind::PlusInfinity: return "+inf";
    case Bound::Kind::Key: break;
    }
    return to_string(bound.key());
}

void SummaryConfig::validate() const {
    if (width_bits < 8 || width_bits > 256 || width_bits % 8 != 0) {
        throw ConfigError("summary width must be a multiple of 8 in [8, 256], got " +
                          std::to_string(width_bits));
    }
    if (slice_len != width_bits / 8) {
        throw ConfigError("slice_len must equal width_bits/8");
    }
    if (slice_offset + slice_len > kKeyEncodedSize) {
        throw ConfigError("summary slice exceeds the 40-byte key encoding");
    }
}

SummaryConfig SummaryConfig::with_width(unsigned width_bits, unsigned slice_offset) {
    SummaryConfig cfg{width_bits, slice_offset, width_bits / 8};
    cfg.validate();
    return cfg;
}

Summary Summary::zero(unsigned width_bits) {
    Summary s;
    s.width_bits_ = static_cast<std::uint16_t>(width_bits);
    return s;
}

Summary Summary::from_big_endian(std::span<const std::uint8_t> bytes, unsigned width_bits) {
    Summary s = zero(width_bits);
    std::size_t n = std::min<std::size_t>(bytes.size(), 32);
    for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t byte = bytes[bytes.size() - 1 - j];
        s.limbs_[j / 8] |= byte << (8 * (j % 8));
    }
    s.reduce();
    return s;
}

Summary Summary::from_little_endian(std::span<const std::uint8_t> bytes, unsigned width_bits) {
    if (bytes.size() != width_bits / 8) throw DecodeError("summary byte length does not match width");
    Summary s = zero(width_bits);
    for (std::size_t j = 0; j < bytes.size(); ++j) {
        s.limbs_[j / 8] |= std::uint64_t{bytes[j]} << (8 * (j % 8));
    }
    return s;
}

bool Summary::is_zero() const {
    return std::all_of(limbs_.begin(), limbs_.end(), [](std::uint64_t l) { return l == 0; });
}

void Summary::reduce() {
    unsigned full = width_bits_ / 64;
    unsigned rem = width_bits_ % 64;
    if (full >= 4) return;
    if (rem != 0) {
        limbs_[full] &= (std::uint64_t{1} << rem) - 1;
        ++full;
    }
    for (unsigned i = full; i < 4; ++i) limbs_[i] = 0;
}

Summary& Summary::operator+=(const Summary& other) {
    if (other.width_bits_ != width_bits_) {
        throw ConfigError("summary width mismatch: " + std::to_string(width_bits_) + " vs " +
                          std::to_string(other.width_bits_));
    }
    unsigned __int128 carry = 0;
    for (int i = 0; i < 4; ++i) {
        unsigned __int128 sum = static_cast<unsigned __int128>(limbs_[i]) + other.limbs_[i] + carry;
        limbs_[i] = static_cast<std::uint64_t>(sum);
        carry = sum >> 64;
    }
    reduce();
    return *this;
}

std::vector<std::uint8_t> Summary::to_little_endian() const {
    std::vector<std::uint8_t> out(width_bits_ / 8);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = static_cast<std::uint8_t>(limbs_[j / 8] >> (8 * (j % 8)));
    }
    return out;
}

std::string Summary::to_hex() const {
    auto le = to_little_endian();
    std::reverse(le.begin(), le.end());
    return rbsr::to_hex(le);
}

Summary summary_of_item(const ItemKey& key, const SummaryConfig& cfg) {
    auto enc = encode_key(key);
    return Summary::from_big_endian(std::span(enc).subspan(cfg.slice_offset, cfg.slice_len), cfg.width_bits);
}

Aggregate& Aggregate::combine(const Aggregate& other) {
    summary += other.summary;
    count += other.count;
    return *this;
}

Aggregate aggregate_combine(const Aggregate& a, const Aggregate& b) {
    Aggregate out = a;
    out.combine(b);
    return out;
}

Aggregate aggregate_of_items(std::span<const ItemKey> items, const SummaryConfig& cfg) {
    Aggregate acc = Aggregate::identity(cfg);
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0 && !(items[i - 1] < items[i])) {
            throw PreconditionError("aggregate_of_items requires strictly increasing keys");
        }
        acc.combine(Aggregate::of_item(items[i], cfg));
    }
    return acc;
}

std::vector<std::uint8_t> encode_aggregate(const Aggregate& a) {
    ByteWriter w;
    w.put_bytes(a.summary.to_little_endian());
    w.put_leb128(a.count);
    return w.take();
}

std::string Fingerprint::to_hex() const { return rbsr::to_hex(bytes); }

Fingerprint Fingerprint::from_hex(const std::string& hex) {
    if (hex.size() != 32) throw DecodeError("fingerprint hex must be 32 characters");
    Fingerprint fp;
    for (std::size_t i = 0; i < 16; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit in fingerprint");
        fp.bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return fp;
}

Fingerprint fingerprint_of_aggregate(const Aggregate& a) {
    auto digest = sha256(encode_aggregate(a));
    Fingerprint fp;
    std::copy_n(digest.begin(), fp.bytes.size(), fp.bytes.begin());
    return fp;
}

} // namespace rbsr
