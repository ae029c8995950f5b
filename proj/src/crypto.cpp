#include "scauth/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/rand.h>

#include <cstring>
#include <memory>

namespace scauth {

namespace {

struct BnDeleter {
    void operator()(BIGNUM* p) const { BN_free(p); }
};
struct BnCtxDeleter {
    void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct PointDeleter {
    void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using PointPtr = std::unique_ptr<EC_POINT, PointDeleter>;

// Shared immutable curve context; EC_GROUP is read-only after creation and
// safe to use from many threads as long as each call has its own BN_CTX.
struct Curve {
    EC_GROUP* group;
    BnPtr order;       // n
    BnPtr half_order;  // floor(n / 2)

    Curve() {
        group = EC_GROUP_new_by_curve_name(NID_secp256k1);
        if (!group) throw CryptoError("secp256k1 group unavailable");
        order.reset(BN_new());
        half_order.reset(BN_new());
        BnCtxPtr ctx(BN_CTX_new());
        if (!EC_GROUP_get_order(group, order.get(), ctx.get()))
            throw CryptoError("cannot read group order");
        BN_rshift1(half_order.get(), order.get());
    }
};

const Curve& curve() {
    static Curve c;
    return c;
}

BnPtr bn_from_be32(ByteView b32) {
    return BnPtr(BN_bin2bn(b32.data(), static_cast<int>(b32.size()), nullptr));
}

void bn_to_be32(const BIGNUM* v, uint8_t out[32]) {
    BN_bn2binpad(v, out, 32);
}

bool scalar_in_range(const BIGNUM* d) {
    return !BN_is_zero(d) && BN_cmp(d, curve().order.get()) < 0;
}

std::array<uint8_t, 65> point_to_uncompressed(const EC_POINT* p, BN_CTX* ctx) {
    std::array<uint8_t, 65> out{};
    size_t n = EC_POINT_point2oct(curve().group, p, POINT_CONVERSION_UNCOMPRESSED,
                                  out.data(), out.size(), ctx);
    if (n != 65) throw CryptoError("point serialization failed");
    return out;
}

Digest32 hmac_sha256(ByteView key, ByteView data) {
    Digest32 out;
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
              data.data(), data.size(), out.bytes.data(), &len) || len != 32)
        throw CryptoError("HMAC failure");
    return out;
}

// Deterministic nonce stream (RFC 6979 construction with HMAC-SHA256).
struct NonceStream {
    std::array<uint8_t, 32> v;
    std::array<uint8_t, 32> k;

    NonceStream(ByteView priv32, const Digest32& z) {
        v.fill(0x01);
        k.fill(0x00);
        step(priv32, z, 0x00);
        step(priv32, z, 0x01);
    }

    void step(ByteView priv32, const Digest32& z, uint8_t sep) {
        Bytes buf(v.begin(), v.end());
        buf.push_back(sep);
        buf.insert(buf.end(), priv32.begin(), priv32.end());
        buf.insert(buf.end(), z.bytes.begin(), z.bytes.end());
        k = hmac_sha256({k.data(), k.size()}, buf).bytes;
        v = hmac_sha256({k.data(), k.size()}, {v.data(), v.size()}).bytes;
    }

    // Next candidate scalar; caller rejects out-of-range values.
    std::array<uint8_t, 32> next() {
        v = hmac_sha256({k.data(), k.size()}, {v.data(), v.size()}).bytes;
        auto candidate = v;
        Bytes buf(v.begin(), v.end());
        buf.push_back(0x00);
        k = hmac_sha256({k.data(), k.size()}, buf).bytes;
        v = hmac_sha256({k.data(), k.size()}, {v.data(), v.size()}).bytes;
        return candidate;
    }
};

}  // namespace

std::string Digest32::hex() const {
    return to_hex(view());
}

std::optional<Digest32> Digest32::from_hex(std::string_view h) {
    auto raw = scauth::from_hex(h);
    if (!raw || raw->size() != 32) return std::nullopt;
    Digest32 d;
    std::memcpy(d.bytes.data(), raw->data(), 32);
    return d;
}

bool Address::is_zero() const {
    for (uint8_t b : bytes)
        if (b != 0) return false;
    return true;
}

std::string Address::hex() const {
    return "0x" + to_hex(view());
}

std::optional<Address> Address::from_hex(std::string_view h) {
    if (h.size() != 42 || h[0] != '0' || (h[1] != 'x' && h[1] != 'X')) return std::nullopt;
    auto raw = scauth::from_hex(h.substr(2));
    if (!raw || raw->size() != 20) return std::nullopt;
    Address a;
    std::memcpy(a.bytes.data(), raw->data(), 20);
    return a;
}

std::array<uint8_t, 65> Signature::serialize() const {
    std::array<uint8_t, 65> out{};
    std::memcpy(out.data(), r.data(), 32);
    std::memcpy(out.data() + 32, s.data(), 32);
    out[64] = recovery_id;
    return out;
}

std::string Signature::hex() const {
    auto ser = serialize();
    return to_hex({ser.data(), ser.size()});
}

std::optional<Signature> Signature::parse(ByteView bytes65) {
    if (bytes65.size() != 65) return std::nullopt;
    Signature sig;
    std::memcpy(sig.r.data(), bytes65.data(), 32);
    std::memcpy(sig.s.data(), bytes65.data() + 32, 32);
    sig.recovery_id = bytes65[64];
    if (sig.recovery_id > 1) return std::nullopt;
    return sig;
}

std::optional<Signature> Signature::from_hex(std::string_view h) {
    auto raw = scauth::from_hex(h);
    if (!raw) return std::nullopt;
    return parse(*raw);
}

Digest32 hash_bytes(ByteView data) {
    Digest32 out;
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), out.bytes.data(), &len, EVP_sha256(), nullptr) ||
        len != 32)
        throw CryptoError("SHA-256 failure");
    return out;
}

Digest32 hash_bytes(std::string_view data) {
    return hash_bytes(as_bytes(data));
}

Digest32 message_digest(ByteView message) {
    Bytes framed;
    framed.reserve(kDomainTag.size() + message.size());
    framed.insert(framed.end(), kDomainTag.begin(), kDomainTag.end());
    framed.insert(framed.end(), message.begin(), message.end());
    return hash_bytes(framed);
}

KeyPair generate_keypair(ByteView seed32) {
    if (seed32.size() != 32) throw InvalidSeed();
    BnPtr d = bn_from_be32(seed32);
    if (!d || !scalar_in_range(d.get())) throw InvalidSeed();

    BnCtxPtr ctx(BN_CTX_new());
    PointPtr pub(EC_POINT_new(curve().group));
    if (!EC_POINT_mul(curve().group, pub.get(), d.get(), nullptr, nullptr, ctx.get()))
        throw CryptoError("scalar multiplication failed");

    KeyPair kp;
    std::memcpy(kp.private_key.data(), seed32.data(), 32);
    kp.public_key = point_to_uncompressed(pub.get(), ctx.get());
    return kp;
}

KeyPair generate_keypair() {
    std::array<uint8_t, 32> seed{};
    for (;;) {
        if (RAND_bytes(seed.data(), static_cast<int>(seed.size())) != 1)
            throw CryptoError("RAND_bytes failure");
        BnPtr d = bn_from_be32({seed.data(), seed.size()});
        if (d && scalar_in_range(d.get()))
            return generate_keypair({seed.data(), seed.size()});
    }
}

Address derive_address(ByteView public_key65) {
    if (public_key65.size() != 65 || public_key65[0] != 0x04) throw InvalidPoint();
    BnCtxPtr ctx(BN_CTX_new());
    PointPtr p(EC_POINT_new(curve().group));
    // oct2point rejects encodings that do not satisfy the curve equation.
    if (!EC_POINT_oct2point(curve().group, p.get(), public_key65.data(), public_key65.size(),
                            ctx.get()))
        throw InvalidPoint();

    Digest32 h = hash_bytes(public_key65.subspan(1));  // X || Y only
    Address a;
    std::memcpy(a.bytes.data(), h.bytes.data() + 12, 20);
    return a;
}

Signature sign_digest(ByteView private_key32, const Digest32& z) {
    if (private_key32.size() != 32) throw InvalidKey();
    BnPtr d = bn_from_be32(private_key32);
    if (!d || !scalar_in_range(d.get())) throw InvalidKey();

    const Curve& cv = curve();
    BnCtxPtr ctx(BN_CTX_new());
    BnPtr zbn = bn_from_be32(z.view());
    BnPtr k(BN_new()), r(BN_new()), s(BN_new()), tmp(BN_new()), kinv(BN_new());
    BnPtr rx(BN_new()), ry(BN_new());
    PointPtr R(EC_POINT_new(cv.group));

    NonceStream nonces(private_key32, z);
    for (;;) {
        auto cand = nonces.next();
        BN_bin2bn(cand.data(), 32, k.get());
        if (!scalar_in_range(k.get())) continue;

        if (!EC_POINT_mul(cv.group, R.get(), k.get(), nullptr, nullptr, ctx.get()))
            throw CryptoError("scalar multiplication failed");
        if (!EC_POINT_get_affine_coordinates(cv.group, R.get(), rx.get(), ry.get(), ctx.get()))
            continue;
        // Rx >= n would push the recovery id outside {0,1}; retry instead.
        if (BN_cmp(rx.get(), cv.order.get()) >= 0) continue;
        if (BN_is_zero(rx.get())) continue;
        BN_copy(r.get(), rx.get());

        // s = k^-1 (z + r d) mod n
        if (!BN_mod_inverse(kinv.get(), k.get(), cv.order.get(), ctx.get())) continue;
        BN_mod_mul(tmp.get(), r.get(), d.get(), cv.order.get(), ctx.get());
        BN_mod_add(tmp.get(), tmp.get(), zbn.get(), cv.order.get(), ctx.get());
        BN_mod_mul(s.get(), kinv.get(), tmp.get(), cv.order.get(), ctx.get());
        if (BN_is_zero(s.get())) continue;

        uint8_t recid = BN_is_odd(ry.get()) ? 1 : 0;
        if (BN_cmp(s.get(), cv.half_order.get()) > 0) {
            BN_sub(s.get(), cv.order.get(), s.get());
            recid ^= 1;
        }

        Signature sig;
        bn_to_be32(r.get(), sig.r.data());
        bn_to_be32(s.get(), sig.s.data());
        sig.recovery_id = recid;
        return sig;
    }
}

Signature sign_message(ByteView private_key32, ByteView message) {
    return sign_digest(private_key32, message_digest(message));
}

std::optional<std::array<uint8_t, 65>> recover_public_key(const Digest32& z,
                                                          const Signature& sig) noexcept {
    try {
        const Curve& cv = curve();
        if (sig.recovery_id > 1) return std::nullopt;

        BnCtxPtr ctx(BN_CTX_new());
        BnPtr r = bn_from_be32({sig.r.data(), sig.r.size()});
        BnPtr s = bn_from_be32({sig.s.data(), sig.s.size()});
        if (!r || !s) return std::nullopt;
        if (BN_is_zero(r.get()) || BN_cmp(r.get(), cv.order.get()) >= 0) return std::nullopt;
        if (BN_is_zero(s.get()) || BN_cmp(s.get(), cv.order.get()) >= 0) return std::nullopt;
        // Canonical form only: the high-s twin of a valid signature is rejected.
        if (BN_cmp(s.get(), cv.half_order.get()) > 0) return std::nullopt;

        // Rebuild R from its x coordinate and the y-parity carried by recovery_id.
        PointPtr R(EC_POINT_new(cv.group));
        if (!EC_POINT_set_compressed_coordinates(cv.group, R.get(), r.get(), sig.recovery_id,
                                                 ctx.get()))
            return std::nullopt;

        // Q = r^-1 (s R - z G)
        BnPtr zbn = bn_from_be32(z.view());
        BnPtr rinv(BN_new()), u1(BN_new()), u2(BN_new());
        if (!BN_mod_inverse(rinv.get(), r.get(), cv.order.get(), ctx.get())) return std::nullopt;
        BN_mod_mul(u2.get(), s.get(), rinv.get(), cv.order.get(), ctx.get());
        BN_mod_mul(u1.get(), zbn.get(), rinv.get(), cv.order.get(), ctx.get());
        BN_mod_sub(u1.get(), cv.order.get(), u1.get(), cv.order.get(), ctx.get());  // -z r^-1

        PointPtr Q(EC_POINT_new(cv.group));
        if (!EC_POINT_mul(cv.group, Q.get(), u1.get(), R.get(), u2.get(), ctx.get()))
            return std::nullopt;
        if (EC_POINT_is_at_infinity(cv.group, Q.get())) return std::nullopt;
        return point_to_uncompressed(Q.get(), ctx.get());
    } catch (...) {
        return std::nullopt;
    }
}

bool verify_signature(ByteView message, const Signature& sig, const Address& address) noexcept {
    try {
        auto pub = recover_public_key(message_digest(message), sig);
        if (!pub) return false;
        return derive_address({pub->data(), pub->size()}) == address;
    } catch (...) {
        return false;
    }
}

}  // namespace scauth
