#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rbsr/core.hpp"

namespace rbsr {

class ByteWriter {
public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_leb128(std::uint64_t v);
    void put_u16le(std::uint16_t v);
    void put_u32le(std::uint32_t v);
    void put_u64le(std::uint64_t v);
    void put_bytes(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Sequential reader; every getter throws DecodeError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t get_u8();
    std::uint64_t get_leb128();
    std::uint16_t get_u16le();
    std::uint32_t get_u32le();
    std::uint64_t get_u64le();
    std::span<const std::uint8_t> get_bytes(std::size_t n);

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

/// Incremental SHA-256.
class Sha256Hasher {
public:
    Sha256Hasher();
    ~Sha256Hasher();
    Sha256Hasher(const Sha256Hasher&) = delete;
    Sha256Hasher& operator=(const Sha256Hasher&) = delete;
    Sha256Hasher(Sha256Hasher&&) noexcept;
    Sha256Hasher& operator=(Sha256Hasher&&) noexcept;

    void update(std::span<const std::uint8_t> data);
    Sha256Digest finish();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::uint32_t crc32(std::span<const std::uint8_t> data);

} // namespace rbsr
