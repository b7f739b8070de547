#pragma once

// Ordered universe, bounds, the (count, modular summary) aggregate monoid and
// the fingerprint map. Everything here is a plain value type.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rbsr {

inline constexpr std::size_t kIdSize = 32;
inline constexpr std::size_t kKeyEncodedSize = 40;

using ItemId = std::array<std::uint8_t, kIdSize>;
using EncodedKey = std::array<std::uint8_t, kKeyEncodedSize>;

/// A record of the reconciled set: ordered by timestamp, then id bytewise.
struct ItemKey {
    std::uint64_t timestamp = 0;
    ItemId id{};

    friend auto operator<=>(const ItemKey&, const ItemKey&) = default;
    friend bool operator==(const ItemKey&, const ItemKey&) = default;
};

/// Key whose id starts with `prefix` and is zero-padded.
ItemKey make_key(std::uint64_t timestamp, std::initializer_list<std::uint8_t> prefix = {});

std::strong_ordering compare_keys(const ItemKey& a, const ItemKey& b);

/// 8-byte big-endian timestamp followed by the 32 id bytes.
EncodedKey encode_key(const ItemKey& key);
ItemKey decode_key(std::span<const std::uint8_t> bytes);

std::string to_string(const ItemKey& key);

/// Range endpoint: a key or one of the two sentinels.
class Bound {
public:
    enum class Kind : std::uint8_t { MinusInfinity = 0, Key = 1, PlusInfinity = 2 };

    constexpr Bound() = default;
    Bound(const ItemKey& key) : kind_(Kind::Key), key_(key) {} // NOLINT(google-explicit-constructor)

    static constexpr Bound minus_infinity() { return Bound(Kind::MinusInfinity); }
    static constexpr Bound plus_infinity() { return Bound(Kind::PlusInfinity); }

    Kind kind() const { return kind_; }
    bool is_key() const { return kind_ == Kind::Key; }
    bool is_minus_infinity() const { return kind_ == Kind::MinusInfinity; }
    bool is_plus_infinity() const { return kind_ == Kind::PlusInfinity; }
    const ItemKey& key() const;

    // Sentinels keep a zeroed key, so member-wise order is the bound order.
    friend auto operator<=>(const Bound&, const Bound&) = default;
    friend bool operator==(const Bound&, const Bound&) = default;

    friend std::strong_ordering operator<=>(const Bound& b, const ItemKey& k) {
        if (b.kind_ == Kind::MinusInfinity) return std::strong_ordering::less;
        if (b.kind_ == Kind::PlusInfinity) return std::strong_ordering::greater;
        return b.key_ <=> k;
    }
    friend bool operator==(const Bound& b, const ItemKey& k) { return b.is_key() && b.key_ == k; }

private:
    constexpr explicit Bound(Kind kind) : kind_(kind) {}

    Kind kind_ = Kind::MinusInfinity;
    ItemKey key_{};
};

std::vector<std::uint8_t> encode_bound(const Bound& bound);
/// Decodes one bound from the front of `bytes`; `consumed` receives its length.
Bound decode_bound(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

std::string to_string(const Bound& bound);

/// [lo, hi) over the key order.
struct HalfOpenRange {
    Bound lo = Bound::minus_infinity();
    Bound hi = Bound::plus_infinity();

    bool valid() const { return lo <= hi; }
    bool contains(const ItemKey& key) const { return lo <= key && hi > key; }

    friend bool operator==(const HalfOpenRange&, const HalfOpenRange&) = default;
};

inline HalfOpenRange full_range() { return {}; }

/// Which bytes of the encoded key feed the modular summary, and at what width.
struct SummaryConfig {
    unsigned width_bits = 256;
    unsigned slice_offset = 8;
    unsigned slice_len = 32;

    void validate() const;
    static SummaryConfig with_width(unsigned width_bits, unsigned slice_offset);

    friend bool operator==(const SummaryConfig&, const SummaryConfig&) = default;
};

/// Unsigned integer modulo 2^width_bits, width a multiple of 8 in [8, 256].
class Summary {
public:
    Summary() = default;
    static Summary zero(unsigned width_bits);
    /// Big-endian bytes, reduced modulo 2^width_bits.
    static Summary from_big_endian(std::span<const std::uint8_t> bytes, unsigned width_bits);
    /// Exactly width_bits/8 little-endian bytes.
    static Summary from_little_endian(std::span<const std::uint8_t> bytes, unsigned width_bits);

    unsigned width_bits() const { return width_bits_; }
    const std::array<std::uint64_t, 4>& limbs() const { return limbs_; }
    bool is_zero() const;

    Summary& operator+=(const Summary& other);
    friend Summary operator+(Summary a, const Summary& b) { return a += b; }

    std::vector<std::uint8_t> to_little_endian() const;
    std::string to_hex() const; // big-endian, width/4 digits

    friend bool operator==(const Summary&, const Summary&) = default;

private:
    void reduce();

    std::uint16_t width_bits_ = 256;
    std::array<std::uint64_t, 4> limbs_{}; // little-endian limbs
};

Summary summary_of_item(const ItemKey& key, const SummaryConfig& cfg);

/// A(S) = (|S|, Σ(S)).
struct Aggregate {
    std::uint64_t count = 0;
    Summary summary;

    static Aggregate identity(const SummaryConfig& cfg) { return {0, Summary::zero(cfg.width_bits)}; }
    static Aggregate of_item(const ItemKey& key, const SummaryConfig& cfg) {
        return {1, summary_of_item(key, cfg)};
    }

    /// Throws ConfigError when the summary widths differ.
    Aggregate& combine(const Aggregate& other);

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

Aggregate aggregate_combine(const Aggregate& a, const Aggregate& b);

/// Aggregate of a strictly increasing sequence; throws PreconditionError otherwise.
Aggregate aggregate_of_items(std::span<const ItemKey> items, const SummaryConfig& cfg);

/// Summary as little-endian bytes followed by the count as LEB128.
std::vector<std::uint8_t> encode_aggregate(const Aggregate& a);

struct Fingerprint {
    std::array<std::uint8_t, 16> bytes{};

    std::string to_hex() const;
    static Fingerprint from_hex(const std::string& hex);

    friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// First 16 bytes of SHA-256 over encode_aggregate(a).
Fingerprint fingerprint_of_aggregate(const Aggregate& a);

using Sha256Digest = std::array<std::uint8_t, 32>;
Sha256Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> bytes);

} // namespace rbsr
