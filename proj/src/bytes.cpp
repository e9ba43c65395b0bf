#include "mlcapsule/bytes.hpp"

#include <sodium.h>

#include "mlcapsule/error.hpp"

namespace mlcapsule {

std::string hex(ByteView b) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (auto byte : b) {
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0x0f]);
    }
    return out;
}

void put_u16le(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32le(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64le(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_lp(Bytes& out, ByteView field) {
    if (field.size() > 0xffffffffull) {
        throw Error(ErrorCode::InvalidArgument, "field too large for u32 length prefix");
    }
    put_u32le(out, static_cast<std::uint32_t>(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

std::uint8_t ByteReader::u8() {
    if (remaining() < 1) throw Error(ErrorCode::ParseError, "unexpected end of input");
    return data_[pos_++];
}

std::uint16_t ByteReader::u16le() {
    if (remaining() < 2) throw Error(ErrorCode::ParseError, "unexpected end of input");
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                      static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32le() {
    if (remaining() < 4) throw Error(ErrorCode::ParseError, "unexpected end of input");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64le() {
    if (remaining() < 8) throw Error(ErrorCode::ParseError, "unexpected end of input");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

Bytes ByteReader::take(std::size_t n) {
    if (remaining() < n) throw Error(ErrorCode::ParseError, "unexpected end of input");
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
}

Bytes ByteReader::lp() {
    std::uint32_t n = u32le();
    return take(n);
}

void ByteReader::expect_magic(std::string_view magic) {
    if (remaining() < magic.size()) throw Error(ErrorCode::ParseError, "unexpected end of input");
    for (char c : magic) {
        if (data_[pos_++] != static_cast<std::uint8_t>(c)) {
            throw Error(ErrorCode::ParseError, "bad magic, expected " + std::string(magic));
        }
    }
}

bool constant_time_eq(ByteView a, ByteView b) {
    if (a.size() != b.size()) return false;
    if (a.empty()) return true;
    return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

bool contains_subsequence(ByteView haystack, ByteView needle) {
    if (needle.empty()) return true;
    if (haystack.size() < needle.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        if (std::memcmp(haystack.data() + i, needle.data(), needle.size()) == 0) return true;
    }
    return false;
}

}  // namespace mlcapsule
