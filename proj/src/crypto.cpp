#include "mlcapsule/crypto.hpp"

#include <sodium.h>

#include <mutex>

#include "mlcapsule/error.hpp"

namespace mlcapsule::crypto {

namespace {

constexpr std::size_t kBoxPkLen = crypto_box_PUBLICKEYBYTES;   // 32
constexpr std::size_t kBoxSkLen = crypto_box_SECRETKEYBYTES;   // 32
constexpr std::size_t kBoxMacLen = crypto_box_MACBYTES;        // 16
constexpr std::size_t kChunkTagLen = crypto_aead_chacha20poly1305_ietf_ABYTES;  // 16

// Associated data binding a chunk to its sealing identity and position.
Bytes chunk_ad(const Digest& measurement, std::uint32_t index, std::uint64_t total_len) {
    Bytes ad(measurement.begin(), measurement.end());
    put_u32le(ad, index);
    put_u64le(ad, total_len);
    return ad;
}

std::uint64_t chunk_count(std::uint64_t total_len, std::uint32_t chunk_size) {
    if (total_len == 0) return 1;  // one empty, still-authenticated chunk
    return (total_len + chunk_size - 1) / chunk_size;
}

}  // namespace

void init() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) {
            throw Error(ErrorCode::StorageUnavailable, "libsodium initialization failed");
        }
    });
}

Digest digest(ByteView data) {
    init();
    Digest out;
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

SigKeyPair sig_keygen() {
    init();
    SigKeyPair kp;
    kp.pk.resize(crypto_sign_PUBLICKEYBYTES);
    kp.sk.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_keypair(kp.pk.data(), kp.sk.data());
    return kp;
}

Bytes sign(ByteView sk, ByteView message) {
    init();
    if (sk.size() != crypto_sign_SECRETKEYBYTES) {
        throw Error(ErrorCode::InvalidArgument, "bad signing key length");
    }
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sk.data());
    return sig;
}

bool verify(ByteView pk, ByteView message, ByteView signature) {
    init();
    if (pk.size() != crypto_sign_PUBLICKEYBYTES || signature.size() != crypto_sign_BYTES) {
        return false;
    }
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       pk.data()) == 0;
}

KeyPair pke_keygen() {
    init();
    Bytes pk(kBoxPkLen), scalar(kBoxSkLen);
    crypto_box_keypair(pk.data(), scalar.data());
    KeyPair kp;
    kp.pk = pk;
    // The decryption routine needs both halves; keep them in one secret blob.
    kp.sk = scalar;
    kp.sk.insert(kp.sk.end(), pk.begin(), pk.end());
    memzero(scalar);
    return kp;
}

Ciphertext pke_enc(ByteView pk, ByteView plaintext) {
    init();
    if (pk.size() != kBoxPkLen) {
        throw Error(ErrorCode::InvalidArgument, "bad public key length");
    }
    // Sealed box: ephemeral pk | mac | body.
    Bytes raw(crypto_box_SEALBYTES + plaintext.size());
    if (crypto_box_seal(raw.data(), plaintext.data(), plaintext.size(), pk.data()) != 0) {
        throw Error(ErrorCode::InvalidArgument, "encryption failed");
    }
    Ciphertext c;
    c.header.assign(raw.begin(), raw.begin() + kBoxPkLen);
    c.tag.assign(raw.begin() + kBoxPkLen, raw.begin() + kBoxPkLen + kBoxMacLen);
    c.body.assign(raw.begin() + kBoxPkLen + kBoxMacLen, raw.end());
    return c;
}

Bytes pke_dec(ByteView sk, const Ciphertext& c) {
    init();
    if (sk.size() != kBoxSkLen + kBoxPkLen) {
        throw Error(ErrorCode::InvalidArgument, "bad secret key length");
    }
    if (c.scheme_id != kSchemeHybridX25519) {
        throw Error(ErrorCode::ParseError, "unknown ciphertext scheme");
    }
    if (c.header.size() != kBoxPkLen || c.tag.size() != kBoxMacLen) {
        throw Error(ErrorCode::IntegrityFailure, "malformed ciphertext framing");
    }
    Bytes raw;
    raw.reserve(c.total_len());
    raw.insert(raw.end(), c.header.begin(), c.header.end());
    raw.insert(raw.end(), c.tag.begin(), c.tag.end());
    raw.insert(raw.end(), c.body.begin(), c.body.end());

    Bytes plain(c.body.size());
    if (crypto_box_seal_open(plain.data(), raw.data(), raw.size(), sk.data() + kBoxSkLen,
                             sk.data()) != 0) {
        throw Error(ErrorCode::IntegrityFailure, "ciphertext authentication failed");
    }
    return plain;
}

Bytes Ciphertext::serialize() const {
    Bytes out;
    put_u16le(out, scheme_id);
    put_lp(out, header);
    put_lp(out, tag);
    put_lp(out, body);
    return out;
}

Ciphertext Ciphertext::parse(ByteView raw) {
    ByteReader r(raw);
    Ciphertext c;
    c.scheme_id = r.u16le();
    c.header = r.lp();
    c.tag = r.lp();
    c.body = r.lp();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after ciphertext");
    return c;
}

SealKey derive_seal_key(ByteView root_seal_key, const Digest& measurement) {
    init();
    if (root_seal_key.size() < crypto_generichash_KEYBYTES_MIN ||
        root_seal_key.size() > crypto_generichash_KEYBYTES_MAX) {
        throw Error(ErrorCode::InvalidArgument, "bad root seal key length");
    }
    SealKey key;
    crypto_generichash(key.data(), key.size(), measurement.data(), measurement.size(),
                       root_seal_key.data(), root_seal_key.size());
    return key;
}

Bytes seal(const SealKey& key, const Digest& measurement, ByteView plaintext,
           std::uint32_t chunk_size) {
    init();
    if (chunk_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "chunk size must be positive");
    }
    const std::uint64_t total = plaintext.size();
    const std::uint64_t n = chunk_count(total, chunk_size);

    Bytes out;
    out.reserve(18 + total + n * (4 + kChunkNonceLen + kChunkTagLen));
    for (char c : {'M', 'L', 'C', 'S'}) out.push_back(static_cast<std::uint8_t>(c));
    put_u16le(out, kSealVersion);
    put_u64le(out, total);
    put_u32le(out, chunk_size);

    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t off = i * static_cast<std::uint64_t>(chunk_size);
        const std::size_t plain_len =
            static_cast<std::size_t>(std::min<std::uint64_t>(chunk_size, total - off));

        put_u32le(out, static_cast<std::uint32_t>(i));
        std::array<std::uint8_t, kChunkNonceLen> nonce;
        randombytes_buf(nonce.data(), nonce.size());
        out.insert(out.end(), nonce.begin(), nonce.end());

        Bytes ad = chunk_ad(measurement, static_cast<std::uint32_t>(i), total);
        std::size_t ct_off = out.size();
        out.resize(out.size() + plain_len + kChunkTagLen);
        unsigned long long ct_len = 0;
        crypto_aead_chacha20poly1305_ietf_encrypt(
            out.data() + ct_off, &ct_len, plaintext.data() + off, plain_len, ad.data(),
            ad.size(), nullptr, nonce.data(), key.data());
    }
    return out;
}

SealedHeader parse_sealed_header(ByteView blob) {
    if (blob.size() < 4 + 2 + 8 + 4) {
        throw Error(ErrorCode::TruncatedBlob, "sealed blob shorter than header");
    }
    ByteReader r(blob);
    r.expect_magic("MLCS");
    SealedHeader h;
    h.version = r.u16le();
    h.total_len = r.u64le();
    h.chunk_size = r.u32le();
    if (h.version != kSealVersion) {
        throw Error(ErrorCode::ParseError, "unsupported sealed blob version");
    }
    if (h.chunk_size == 0) {
        throw Error(ErrorCode::ParseError, "zero chunk size");
    }
    return h;
}

Bytes unseal(const SealKey& key, const Digest& measurement, ByteView blob) {
    init();
    SealedHeader h = parse_sealed_header(blob);
    ByteReader r(blob.subspan(18));

    // the layout is exact, so the advertised length must reconcile with the
    // blob before anything is allocated
    if (h.total_len > blob.size()) {
        throw Error(ErrorCode::TruncatedBlob, "advertised length exceeds blob size");
    }
    const std::uint64_t n = chunk_count(h.total_len, h.chunk_size);
    const std::uint64_t expected = 18 + n * (4 + kChunkNonceLen + kChunkTagLen) + h.total_len;
    if (blob.size() < expected) {
        throw Error(ErrorCode::TruncatedBlob, "sealed blob shorter than its header implies");
    }
    if (blob.size() > expected) {
        throw Error(ErrorCode::ParseError, "sealed blob longer than its header implies");
    }
    Bytes plain(static_cast<std::size_t>(h.total_len));

    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t off = i * static_cast<std::uint64_t>(h.chunk_size);
        const std::size_t plain_len =
            static_cast<std::size_t>(std::min<std::uint64_t>(h.chunk_size, h.total_len - off));
        const std::size_t ct_len = plain_len + kChunkTagLen;

        if (r.remaining() < 4 + kChunkNonceLen + ct_len) {
            throw Error(ErrorCode::TruncatedBlob, "sealed blob ends mid-chunk");
        }
        std::uint32_t index = r.u32le();
        if (index != i) {
            throw Error(ErrorCode::ChunkOutOfOrder, "chunk " + std::to_string(i) +
                                                        " carries index " + std::to_string(index));
        }
        Bytes nonce = r.take(kChunkNonceLen);
        Bytes ct = r.take(ct_len);
        Bytes ad = chunk_ad(measurement, index, h.total_len);

        unsigned long long out_len = 0;
        int rc = crypto_aead_chacha20poly1305_ietf_decrypt(
            plain.data() + off, &out_len, nullptr, ct.data(), ct.size(), ad.data(), ad.size(),
            nonce.data(), key.data());
        if (rc != 0) {
            // A failing first chunk is indistinguishable from a wrong enclave
            // identity (the key and AD both derive from the measurement), so
            // it is reported as an identity mismatch; once the first chunk
            // verified, the key is known good and later failures are corruption.
            if (i == 0) {
                throw Error(ErrorCode::IdentityMismatch,
                            "chunk 0 authentication failed (wrong seal identity or corrupt blob)");
            }
            throw Error(ErrorCode::IntegrityFailure,
                        "chunk " + std::to_string(i) + " authentication failed");
        }
    }
    if (!r.done()) {
        throw Error(ErrorCode::ParseError, "trailing bytes after final chunk");
    }
    return plain;
}

void memzero(std::span<std::uint8_t> buf) {
    if (!buf.empty()) sodium_memzero(buf.data(), buf.size());
}

}  // namespace mlcapsule::crypto
