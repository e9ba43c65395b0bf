#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlcapsule {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView b) {
    return std::string(b.begin(), b.end());
}

std::string hex(ByteView b);

// All on-disk and on-wire integers are little-endian.
void put_u16le(Bytes& out, std::uint16_t v);
void put_u32le(Bytes& out, std::uint32_t v);
void put_u64le(Bytes& out, std::uint64_t v);

// Appends a u32 length prefix followed by the raw bytes.
void put_lp(Bytes& out, ByteView field);

// Sequential reader over a byte buffer. Throws Error{ParseError} on
// underruns so truncated inputs never yield partially-read garbage.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16le();
    std::uint32_t u32le();
    std::uint64_t u64le();
    Bytes take(std::size_t n);
    Bytes lp();  // u32 length-prefixed field
    void expect_magic(std::string_view magic);

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

private:
    ByteView data_;
    std::size_t pos_ = 0;
};

bool constant_time_eq(ByteView a, ByteView b);

// True if `needle` occurs as a contiguous substring of `haystack`.
bool contains_subsequence(ByteView haystack, ByteView needle);

}  // namespace mlcapsule
