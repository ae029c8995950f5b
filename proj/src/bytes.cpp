#include "scauth/bytes.hpp"

namespace scauth {

static constexpr char kHexDigits[] = "0123456789abcdef";

std::string to_hex(ByteView data) {
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0f]);
    }
    return out;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

void put_u32(Bytes& out, uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<uint8_t>(v >> shift));
}

void put_u64(Bytes& out, uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<uint8_t>(v >> shift));
}

void put_i64(Bytes& out, int64_t v) {
    put_u64(out, static_cast<uint64_t>(v));
}

bool ByteReader::get_u32(uint32_t& v) {
    if (remaining() < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data[pos++];
    return true;
}

bool ByteReader::get_u64(uint64_t& v) {
    if (remaining() < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data[pos++];
    return true;
}

bool ByteReader::get_i64(int64_t& v) {
    uint64_t u;
    if (!get_u64(u)) return false;
    v = static_cast<int64_t>(u);
    return true;
}

bool ByteReader::get_bytes(uint8_t* dst, size_t n) {
    if (remaining() < n) return false;
    for (size_t i = 0; i < n; ++i) dst[i] = data[pos++];
    return true;
}

bool ByteReader::get_vec(Bytes& out, size_t n) {
    if (remaining() < n) return false;
    out.assign(data.begin() + static_cast<ptrdiff_t>(pos),
               data.begin() + static_cast<ptrdiff_t>(pos + n));
    pos += n;
    return true;
}

}  // namespace scauth
