#pragma once

// Byte layout of the paged store. See FORMAT.md.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rbsr/core.hpp"
#include "rbsr/detail/agg_tree.hpp"

namespace rbsr::detail {

inline constexpr std::uint8_t kMagic[8] = {'R', 'S', 'O', 'S', 'P', 'G', 'V', '1'};
inline constexpr std::size_t kFileHeaderSize = 20;
inline constexpr std::size_t kPageHeaderSize = 16;
inline constexpr std::uint64_t kNoPage = ~std::uint64_t{0};
inline constexpr std::uint64_t kFirstNodePage = 2;

inline constexpr std::uint16_t kAggEntries = 0x1;
inline constexpr std::uint16_t kAggHashsum = 0x2;

enum class PageType : std::uint8_t { Branch = 1, Leaf = 2 };

struct FileHeader {
    std::uint32_t page_size = 4096;
    SummaryConfig cfg;
    std::uint16_t agg_flags = kAggEntries | kAggHashsum;
};

struct MetaBlock {
    std::uint64_t txn_id = 0;
    std::uint64_t root_page = kNoPage;
    std::uint32_t height = 0;
    std::uint64_t next_page = kFirstNodePage;
    Aggregate total;
};

bool valid_page_size(std::uint32_t page_size);

std::size_t branch_record_size(const SummaryConfig& cfg);
std::size_t branch_capacity(std::uint32_t page_size, const SummaryConfig& cfg);
std::size_t leaf_capacity(std::uint32_t page_size);

/// Parses and validates the 20-byte header prefix; throws StorageError.
FileHeader decode_file_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_meta_page(const FileHeader& h, const MetaBlock& m);
/// Empty when the header or checksum does not match.
std::optional<MetaBlock> decode_meta_page(std::span<const std::uint8_t> page, const FileHeader& h);
/// Offset of the CRC field inside a meta page.
std::size_t meta_crc_offset(const SummaryConfig& cfg);

/// Branch children ids are page numbers. Throws ConfigError if the node
/// does not fit.
std::vector<std::uint8_t> encode_node(const Node& n, const FileHeader& h);
/// Throws DecodeError on malformed pages.
Node decode_node(std::span<const std::uint8_t> page, const FileHeader& h);

} // namespace rbsr::detail
