#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "mlcapsule/bytes.hpp"

namespace mlcapsule::crypto {

inline constexpr std::size_t kDigestLen = 32;
inline constexpr std::size_t kSealKeyLen = 32;
inline constexpr std::size_t kChunkNonceLen = 12;
inline constexpr std::uint32_t kDefaultChunkSize = 2u * 1024 * 1024;  // 2 MiB
inline constexpr std::uint16_t kSealVersion = 1;

// Scheme identifiers carried in serialized key/ciphertext headers.
inline constexpr std::uint16_t kSchemeEd25519 = 1;
inline constexpr std::uint16_t kSchemeHybridX25519 = 2;

using Digest = std::array<std::uint8_t, kDigestLen>;
using SealKey = std::array<std::uint8_t, kSealKeyLen>;

// Must be called before any other function in this namespace; idempotent.
void init();

// SHA-256.
Digest digest(ByteView data);

// ---- signatures (quotes, query tickets) ----

struct SigKeyPair {
    Bytes sk;  // ed25519 secret key (64 bytes)
    Bytes pk;  // ed25519 public key (32 bytes)
};

SigKeyPair sig_keygen();
Bytes sign(ByteView sk, ByteView message);
bool verify(ByteView pk, ByteView message, ByteView signature);

// ---- public key encryption (hybrid KEM + authenticated cipher) ----

struct KeyPair {
    Bytes sk;  // x25519 secret scalar followed by the matching public key
    Bytes pk;
};

struct Ciphertext {
    std::uint16_t scheme_id = kSchemeHybridX25519;
    Bytes header;  // ephemeral public key
    Bytes tag;     // 16-byte integrity tag
    Bytes body;    // cipher body, same length as plaintext

    Bytes serialize() const;
    static Ciphertext parse(ByteView raw);
    std::size_t total_len() const { return header.size() + tag.size() + body.size(); }
};

KeyPair pke_keygen();
Ciphertext pke_enc(ByteView pk, ByteView plaintext);
// Throws Error{IntegrityFailure} on wrong key or mutated ciphertext.
Bytes pke_dec(ByteView sk, const Ciphertext& c);

// ---- enclave sealing ----

// SealKey = KDF(root_seal_key, measurement); deterministic and
// measurement-separating.
SealKey derive_seal_key(ByteView root_seal_key, const Digest& measurement);

// Authenticated encryption in chunks (default 2 MiB). Each chunk's associated
// data binds (measurement, chunk index, total plaintext length), so chunks
// cannot be reordered or transplanted between blobs.
//
// Layout, all integers little-endian:
//   "MLCS" | version u16 | total_len u64 | chunk_size u32
//   then per chunk: index u32 | nonce 12B | ciphertext+tag
// A zero-length plaintext still emits one (empty) authenticated chunk.
Bytes seal(const SealKey& key, const Digest& measurement, ByteView plaintext,
           std::uint32_t chunk_size = kDefaultChunkSize);

// Errors: TruncatedBlob, ChunkOutOfOrder, IdentityMismatch (first chunk fails
// authentication: wrong key or measurement), IntegrityFailure (a later chunk
// fails after the first verified).
Bytes unseal(const SealKey& key, const Digest& measurement, ByteView blob);

struct SealedHeader {
    std::uint16_t version;
    std::uint64_t total_len;
    std::uint32_t chunk_size;
};
SealedHeader parse_sealed_header(ByteView blob);

// Best-effort scrub of secret material.
void memzero(std::span<std::uint8_t> buf);

}  // namespace mlcapsule::crypto
