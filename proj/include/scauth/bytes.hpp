#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scauth {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

std::string to_hex(ByteView data);
std::optional<Bytes> from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

// Big-endian fixed-width appenders used by every canonical serialization.
void put_u32(Bytes& out, uint32_t v);
void put_u64(Bytes& out, uint64_t v);
void put_i64(Bytes& out, int64_t v);

// Cursor-style reader; all getters return false on underflow.
struct ByteReader {
    ByteView data;
    size_t pos{0};

    bool get_u32(uint32_t& v);
    bool get_u64(uint64_t& v);
    bool get_i64(int64_t& v);
    bool get_bytes(uint8_t* dst, size_t n);
    bool get_vec(Bytes& out, size_t n);
    bool done() const { return pos == data.size(); }
    size_t remaining() const { return data.size() - pos; }
};

}  // namespace scauth
