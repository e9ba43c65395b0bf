#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlcapsule/crypto.hpp"
#include "mlcapsule/error.hpp"
#include "test_util.hpp"

using namespace mlcapsule;

namespace {

crypto::Digest meas(const char* tag) {
    return crypto::digest(to_bytes(tag));
}

}  // namespace

TEST_CASE("digest basics") {
    auto a = crypto::digest(to_bytes("a"));
    auto b = crypto::digest(to_bytes("a"));
    auto c = crypto::digest(to_bytes(""));
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.size() == 32);
}

TEST_CASE("sign/verify roundtrip and negatives") {
    auto kp = crypto::sig_keygen();
    Bytes msg = to_bytes("pay-per-query ticket body");
    Bytes sig = crypto::sign(kp.sk, msg);
    CHECK(crypto::verify(kp.pk, msg, sig));

    Bytes flipped = sig;
    flipped[0] ^= 1;
    CHECK_FALSE(crypto::verify(kp.pk, msg, flipped));

    auto other = crypto::sig_keygen();
    CHECK_FALSE(crypto::verify(other.pk, msg, sig));
}

TEST_CASE("pke roundtrip including empty and 5 MiB messages") {
    auto kp = crypto::pke_keygen();

    Bytes empty;
    CHECK(crypto::pke_dec(kp.sk, crypto::pke_enc(kp.pk, empty)) == empty);

    Bytes big = testutil::random_bytes(5u * 1024 * 1024, 7);
    CHECK(crypto::pke_dec(kp.sk, crypto::pke_enc(kp.pk, big)) == big);
}

TEST_CASE("pke decryption under a different keypair fails") {
    auto kp1 = crypto::pke_keygen();
    auto kp2 = crypto::pke_keygen();
    auto c = crypto::pke_enc(kp1.pk, to_bytes("secret weights"));
    try {
        crypto::pke_dec(kp2.sk, c);
        FAIL("foreign-key decryption succeeded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IntegrityFailure);
    }
}

TEST_CASE("pke encryption is randomized") {
    auto kp = crypto::pke_keygen();
    Bytes m = to_bytes("same message");
    auto c1 = crypto::pke_enc(kp.pk, m);
    auto c2 = crypto::pke_enc(kp.pk, m);
    CHECK(c1.serialize() != c2.serialize());
}

TEST_CASE("pke integrity: bit flips in any field fail decryption") {
    auto kp = crypto::pke_keygen();
    Bytes m = testutil::random_bytes(257, 3);
    auto c = crypto::pke_enc(kp.pk, m);

    auto flip_and_check = [&](Bytes& field, std::size_t bit) {
        field[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK_THROWS_AS(crypto::pke_dec(kp.sk, c), Error);
        field[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    };
    std::mt19937_64 rng(11);
    for (int i = 0; i < 16; ++i) {
        flip_and_check(c.body, rng() % (c.body.size() * 8));
        flip_and_check(c.tag, rng() % (c.tag.size() * 8));
        flip_and_check(c.header, rng() % (c.header.size() * 8));
    }
    CHECK(crypto::pke_dec(kp.sk, c) == m);  // untouched ciphertext still opens
}

TEST_CASE("pke roundtrip property over 1000 random messages") {
    auto kp = crypto::pke_keygen();
    std::mt19937_64 rng(23);
    for (int i = 0; i < 1000; ++i) {
        Bytes m = testutil::random_bytes(rng() % 512, rng());
        CHECK(crypto::pke_dec(kp.sk, crypto::pke_enc(kp.pk, m)) == m);
    }
}

TEST_CASE("ciphertext serialization roundtrip") {
    auto kp = crypto::pke_keygen();
    auto c = crypto::pke_enc(kp.pk, to_bytes("roundtrip me"));
    auto c2 = crypto::Ciphertext::parse(c.serialize());
    CHECK(c2.serialize() == c.serialize());
    CHECK(crypto::pke_dec(kp.sk, c2) == to_bytes("roundtrip me"));
}

TEST_CASE("seal key derivation is deterministic and measurement-separating") {
    Bytes root = testutil::random_bytes(32, 5);
    auto m1 = meas("enclave one");
    CHECK(crypto::derive_seal_key(root, m1) == crypto::derive_seal_key(root, m1));
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        auto ma = crypto::digest(testutil::random_bytes(16, rng()));
        auto mb = crypto::digest(testutil::random_bytes(16, rng()));
        if (ma == mb) continue;
        CHECK(crypto::derive_seal_key(root, ma) != crypto::derive_seal_key(root, mb));
    }
}

TEST_CASE("sealing roundtrip across the size boundary cases") {
    Bytes root = testutil::random_bytes(32, 8);
    auto m = meas("boundary enclave");
    auto key = crypto::derive_seal_key(root, m);

    const std::size_t kMiB2 = 2u * 1024 * 1024;
    for (std::size_t size : {std::size_t(0), std::size_t(1), kMiB2 - 1, kMiB2, kMiB2 + 1}) {
        Bytes plain = testutil::random_bytes(size, size + 1);
        Bytes blob = crypto::seal(key, m, plain);
        CHECK(crypto::unseal(key, m, blob) == plain);
    }
}

TEST_CASE("100 MiB seal produces 50 chunks and roundtrips") {
    Bytes root = testutil::random_bytes(32, 9);
    auto m = meas("large enclave");
    auto key = crypto::derive_seal_key(root, m);

    Bytes plain(100u * 1024 * 1024);
    std::mt19937_64 rng(10);
    for (std::size_t i = 0; i < plain.size(); i += 4096) {
        plain[i] = static_cast<std::uint8_t>(rng());
    }

    Bytes blob = crypto::seal(key, m, plain);
    auto header = crypto::parse_sealed_header(blob);
    CHECK(header.total_len == plain.size());
    // 100 MiB / 2 MiB = exactly 50 chunks, each 4 + 12 + payload + 16 bytes
    std::size_t expected = 18 + 50 * (4 + 12 + 16) + plain.size();
    CHECK(blob.size() == expected);
    CHECK(crypto::unseal(key, m, blob) == plain);
}

TEST_CASE("chunk reordering is rejected") {
    Bytes root = testutil::random_bytes(32, 12);
    auto m = meas("reorder enclave");
    auto key = crypto::derive_seal_key(root, m);

    const std::uint32_t chunk = 64;
    Bytes plain = testutil::random_bytes(256, 13);  // 4 chunks
    Bytes blob = crypto::seal(key, m, plain, chunk);

    // swap chunk records 1 and 2 (fixed-size records: 4 + 12 + 64 + 16)
    const std::size_t rec = 4 + 12 + chunk + 16;
    const std::size_t base = 18;
    Bytes swapped = blob;
    std::copy(blob.begin() + base + rec, blob.begin() + base + 2 * rec,
              swapped.begin() + base + 2 * rec);
    std::copy(blob.begin() + base + 2 * rec, blob.begin() + base + 3 * rec,
              swapped.begin() + base + rec);
    try {
        crypto::unseal(key, m, swapped);
        FAIL("reordered blob unsealed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ChunkOutOfOrder);
    }
}

TEST_CASE("truncation and mutation are rejected, never wrong plaintext") {
    Bytes root = testutil::random_bytes(32, 14);
    auto m = meas("tamper enclave");
    auto key = crypto::derive_seal_key(root, m);
    Bytes plain = testutil::random_bytes(300, 15);
    Bytes blob = crypto::seal(key, m, plain, 100);

    SUBCASE("truncated") {
        Bytes cut(blob.begin(), blob.end() - 9);
        try {
            crypto::unseal(key, m, cut);
            FAIL("truncated blob unsealed");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TruncatedBlob);
        }
    }
    SUBCASE("mutated later chunk") {
        Bytes bad = blob;
        bad[bad.size() - 20] ^= 0x40;  // inside the last chunk's ciphertext
        try {
            crypto::unseal(key, m, bad);
            FAIL("mutated blob unsealed");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::IntegrityFailure);
        }
    }
    SUBCASE("random single-bit flips never yield wrong plaintext") {
        std::mt19937_64 rng(16);
        for (int i = 0; i < 64; ++i) {
            Bytes bad = blob;
            std::size_t bit = rng() % (bad.size() * 8);
            bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            try {
                Bytes out = crypto::unseal(key, m, bad);
                FAIL("flipped blob unsealed at bit ", bit);
            } catch (const Error&) {
                // every flip must surface as a typed error
            }
        }
    }
}

TEST_CASE("unseal under a different measurement reports IdentityMismatch") {
    Bytes root = testutil::random_bytes(32, 17);
    auto m1 = meas("sealed-for");
    auto m2 = meas("opened-as");
    auto key = crypto::derive_seal_key(root, m1);
    Bytes blob = crypto::seal(key, m1, to_bytes("layer weights"));
    try {
        crypto::unseal(key, m2, blob);
        FAIL("wrong-measurement unseal succeeded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IdentityMismatch);
    }
}

TEST_CASE("sealing is injective over distinct plaintexts") {
    Bytes root = testutil::random_bytes(32, 18);
    auto m = meas("inject enclave");
    auto key = crypto::derive_seal_key(root, m);
    std::mt19937_64 rng(19);
    std::vector<Bytes> blobs;
    for (int i = 0; i < 64; ++i) {
        Bytes plain = testutil::random_bytes(32 + (rng() % 64), rng());
        blobs.push_back(crypto::seal(key, m, plain));
    }
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        for (std::size_t j = i + 1; j < blobs.size(); ++j) {
            CHECK(blobs[i] != blobs[j]);
        }
    }
}
