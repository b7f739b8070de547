#include "rbsr/detail/page_format.hpp"

#include <algorithm>
#include <cstring>

#include "rbsr/codec.hpp"
#include "rbsr/error.hpp"

namespace rbsr::detail {

namespace {

void put_header(ByteWriter& w, const FileHeader& h) {
    w.put_bytes(kMagic);
    w.put_u32le(h.page_size);
    w.put_u16le(static_cast<std::uint16_t>(h.cfg.width_bits));
    w.put_u16le(static_cast<std::uint16_t>(h.cfg.slice_offset));
    w.put_u16le(static_cast<std::uint16_t>(h.cfg.slice_len));
    w.put_u16le(h.agg_flags);
}

void pad_to(std::vector<std::uint8_t>& v, std::size_t size) {
    if (v.size() > size) throw ConfigError("page content exceeds page size");
    v.resize(size, 0);
}

} // namespace

bool valid_page_size(std::uint32_t page_size) {
    return page_size >= 512 && page_size <= 65536 && (page_size & (page_size - 1)) == 0;
}

std::size_t branch_record_size(const SummaryConfig& cfg) { return 8 + 8 + cfg.width_bits / 8 + kKeyEncodedSize; }

std::size_t branch_capacity(std::uint32_t page_size, const SummaryConfig& cfg) {
    return (page_size - kPageHeaderSize) / branch_record_size(cfg);
}

std::size_t leaf_capacity(std::uint32_t page_size) { return (page_size - kPageHeaderSize) / kKeyEncodedSize; }

FileHeader decode_file_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFileHeaderSize) throw StorageError("file too short for a header");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw StorageError("bad magic");
    ByteReader r(bytes.subspan(8));
    FileHeader h;
    h.page_size = r.get_u32le();
    h.cfg.width_bits = r.get_u16le();
    h.cfg.slice_offset = r.get_u16le();
    h.cfg.slice_len = r.get_u16le();
    h.agg_flags = r.get_u16le();
    if (!valid_page_size(h.page_size)) throw StorageError("unsupported page size " + std::to_string(h.page_size));
    try {
        h.cfg.validate();
    } catch (const ConfigError& e) {
        throw StorageError(std::string("bad summary configuration in header: ") + e.what());
    }
    if (h.agg_flags != (kAggEntries | kAggHashsum)) {
        throw StorageError("unsupported aggregate flags " + std::to_string(h.agg_flags));
    }
    return h;
}

std::size_t meta_crc_offset(const SummaryConfig& cfg) { return kFileHeaderSize + 36 + cfg.width_bits / 8; }

std::vector<std::uint8_t> encode_meta_page(const FileHeader& h, const MetaBlock& m) {
    ByteWriter w;
    put_header(w, h);
    w.put_u64le(m.txn_id);
    w.put_u64le(m.root_page);
    w.put_u32le(m.height);
    w.put_u64le(m.next_page);
    w.put_u64le(m.total.count);
    w.put_bytes(m.total.summary.to_little_endian());
    w.put_u32le(crc32(w.bytes()));
    auto out = w.take();
    pad_to(out, h.page_size);
    return out;
}

std::optional<MetaBlock> decode_meta_page(std::span<const std::uint8_t> page, const FileHeader& h) {
    auto crc_at = meta_crc_offset(h.cfg);
    if (page.size() < crc_at + 4) return std::nullopt;
    FileHeader own;
    try {
        own = decode_file_header(page);
    } catch (const StorageError&) {
        return std::nullopt;
    }
    if (own.page_size != h.page_size || !(own.cfg == h.cfg) || own.agg_flags != h.agg_flags) return std::nullopt;
    ByteReader tail(page.subspan(crc_at, 4));
    if (tail.get_u32le() != crc32(page.first(crc_at))) return std::nullopt;

    ByteReader r(page.subspan(kFileHeaderSize));
    MetaBlock m;
    m.txn_id = r.get_u64le();
    m.root_page = r.get_u64le();
    m.height = r.get_u32le();
    m.next_page = r.get_u64le();
    m.total.count = r.get_u64le();
    m.total.summary = Summary::from_little_endian(r.get_bytes(h.cfg.width_bits / 8), h.cfg.width_bits);
    return m;
}

std::vector<std::uint8_t> encode_node(const Node& n, const FileHeader& h) {
    ByteWriter w;
    if (n.leaf) {
        if (n.keys.size() > leaf_capacity(h.page_size)) throw ConfigError("leaf overflows its page");
        w.put_u8(static_cast<std::uint8_t>(PageType::Leaf));
        w.put_u8(0);
        w.put_u16le(static_cast<std::uint16_t>(n.keys.size()));
        for (int i = 0; i < 12; ++i) w.put_u8(0);
        for (const auto& k : n.keys) w.put_bytes(encode_key(k));
    } else {
        if (n.children.size() > branch_capacity(h.page_size, h.cfg)) throw ConfigError("branch overflows its page");
        w.put_u8(static_cast<std::uint8_t>(PageType::Branch));
        w.put_u8(static_cast<std::uint8_t>(h.agg_flags));
        w.put_u16le(static_cast<std::uint16_t>(n.children.size()));
        for (int i = 0; i < 12; ++i) w.put_u8(0);
        for (const auto& c : n.children) {
            w.put_u64le(c.id);
            w.put_u64le(c.agg.count);
            w.put_bytes(c.agg.summary.to_little_endian());
            w.put_bytes(encode_key(c.min_key));
        }
    }
    auto out = w.take();
    pad_to(out, h.page_size);
    return out;
}

Node decode_node(std::span<const std::uint8_t> page, const FileHeader& h) {
    if (page.size() != h.page_size) throw DecodeError("short page");
    ByteReader r(page);
    auto type = r.get_u8();
    auto flags = r.get_u8();
    auto count = r.get_u16le();
    auto reserved = r.get_bytes(12);
    if (std::any_of(reserved.begin(), reserved.end(), [](std::uint8_t b) { return b != 0; })) {
        throw DecodeError("non-zero reserved page header bytes");
    }
    Node n;
    if (type == static_cast<std::uint8_t>(PageType::Leaf)) {
        if (flags != 0) throw DecodeError("leaf page with aggregate flags");
        if (count == 0 || count > leaf_capacity(h.page_size)) throw DecodeError("leaf record count out of range");
        n.leaf = true;
        n.keys.reserve(count);
        for (unsigned i = 0; i < count; ++i) n.keys.push_back(decode_key(r.get_bytes(kKeyEncodedSize)));
    } else if (type == static_cast<std::uint8_t>(PageType::Branch)) {
        if (flags != h.agg_flags) throw DecodeError("branch page flags differ from the file header");
        if (count == 0 || count > branch_capacity(h.page_size, h.cfg)) {
            throw DecodeError("branch record count out of range");
        }
        n.leaf = false;
        n.children.reserve(count);
        for (unsigned i = 0; i < count; ++i) {
            ChildRef c;
            c.id = r.get_u64le();
            c.agg.count = r.get_u64le();
            c.agg.summary = Summary::from_little_endian(r.get_bytes(h.cfg.width_bits / 8), h.cfg.width_bits);
            c.min_key = decode_key(r.get_bytes(kKeyEncodedSize));
            n.children.push_back(std::move(c));
        }
    } else {
        throw DecodeError("unknown page type " + std::to_string(type));
    }
    return n;
}

} // namespace rbsr::detail
