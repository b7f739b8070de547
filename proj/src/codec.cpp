#include "rbsr/codec.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include "rbsr/error.hpp"

namespace rbsr {

void ByteWriter::put_leb128(std::uint64_t v) {
    do {
        std::uint8_t byte = v & 0x7f;
        v >>= 7;
        if (v != 0) byte |= 0x80;
        buf_.push_back(byte);
    } while (v != 0);
}

void ByteWriter::put_u16le(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u32le(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64le(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint8_t ByteReader::get_u8() {
    if (remaining() < 1) throw DecodeError("truncated input: expected 1 byte");
    return bytes_[pos_++];
}

std::uint64_t ByteReader::get_leb128() {
    std::uint64_t value = 0;
    for (unsigned shift = 0;; shift += 7) {
        if (shift >= 64) throw DecodeError("LEB128 value overflows 64 bits");
        std::uint8_t byte = get_u8();
        std::uint64_t part = byte & 0x7f;
        if (shift == 63 && part > 1) throw DecodeError("LEB128 value overflows 64 bits");
        value |= part << shift;
        if ((byte & 0x80) == 0) return value;
    }
}

std::uint16_t ByteReader::get_u16le() {
    auto b = get_bytes(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::get_u32le() {
    auto b = get_bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t ByteReader::get_u64le() {
    auto b = get_bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::span<const std::uint8_t> ByteReader::get_bytes(std::size_t n) {
    if (remaining() < n) {
        throw DecodeError("truncated input: expected " + std::to_string(n) + " bytes, have " +
                          std::to_string(remaining()));
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
}

struct Sha256Hasher::Impl {
    EVP_MD_CTX* ctx = nullptr;
    ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha256Hasher::Sha256Hasher() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 initialisation failed");
    }
}

Sha256Hasher::~Sha256Hasher() = default;
Sha256Hasher::Sha256Hasher(Sha256Hasher&&) noexcept = default;
Sha256Hasher& Sha256Hasher::operator=(Sha256Hasher&&) noexcept = default;

void Sha256Hasher::update(std::span<const std::uint8_t> data) {
    if (!data.empty()) EVP_DigestUpdate(impl_->ctx, data.data(), data.size());
}

Sha256Digest Sha256Hasher::finish() {
    Sha256Digest out{};
    unsigned len = 0;
    EVP_DigestFinal_ex(impl_->ctx, out.data(), &len);
    return out;
}

Sha256Digest sha256(std::span<const std::uint8_t> data) {
    Sha256Hasher h;
    h.update(data);
    return h.finish();
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(::crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

} // namespace rbsr
