#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "mlcapsule/bytes.hpp"
#include "mlcapsule/crypto.hpp"
#include "mlcapsule/rng.hpp"

namespace mlcapsule::iee {

// Public verification parameters returned by HwInstance::setup.
struct HwParams {
    std::uint16_t scheme_id = crypto::kSchemeEd25519;
    Bytes verification_key;

    Bytes serialize() const;
    static HwParams parse(ByteView raw);
    static HwParams read(ByteReader& r);  // consumes one record from a stream
    bool operator==(const HwParams&) const = default;
};

struct EnclaveHandle {
    std::array<std::uint8_t, 16> id{};

    auto operator<=>(const EnclaveHandle&) const = default;
    std::string hex() const { return mlcapsule::hex(id); }
};

struct StepResult {
    Bytes new_state;
    Bytes output;
};

// An enclave program: an opaque canonical code encoding plus a state
// transition that is deterministic given its coins.
struct Program {
    Bytes code_bytes;
    std::function<StepResult(ByteView state, ByteView input, Rng& coins)> step;
};

// Attestation record binding one program run to its I/O.
struct Quote {
    Bytes md_hdl;  // measurement (32 B) followed by handle id (16 B)
    Bytes tag_q;   // digest of the program's code bytes
    Bytes input;
    Bytes output;
    Bytes sigma;

    // Canonical signed bytes: the four fields in order, each with a u32
    // little-endian length prefix. Injective framing, no field numbering.
    static Bytes canonical_bytes(ByteView md_hdl, ByteView tag_q, ByteView input,
                                 ByteView output);
    Bytes canonical_bytes() const { return canonical_bytes(md_hdl, tag_q, input, output); }

    // "MLCQ" | four length-prefixed fields | length-prefixed sigma.
    Bytes serialize() const;
    static Quote parse(ByteView raw);
    static Quote read(ByteReader& r);  // consumes one record from a stream
    bool operator==(const Quote&) const = default;
};

// Lookup table used when restoring persisted platform state: serialized
// enclaves only carry code bytes, the transition logic lives in the binary.
class ProgramRegistry {
public:
    void add(Program program);
    const Program* find(ByteView code_bytes) const;

private:
    std::vector<Program> programs_;
};

using RngFactory = std::function<std::unique_ptr<Rng>(std::uint64_t load_seq)>;

// Software simulation of the secure hardware functionality: enclave registry,
// state table, attested execution. The quoting key and the platform root seal
// key never leave the instance except through save_state(), which stands in
// for the hardware-fused storage of a real platform.
class HwInstance {
public:
    // security_level must be 128. aux is accepted and ignored.
    static std::pair<HwParams, std::unique_ptr<HwInstance>> setup(int security_level_bits = 128,
                                                                  ByteView aux = {});

    HwInstance(const HwInstance&) = delete;
    HwInstance& operator=(const HwInstance&) = delete;

    // Loads a program into a fresh enclave with empty state.
    EnclaveHandle load(const HwParams& params, Program program);

    // Runs the program one step at the enclave's current state. Unknown
    // handle -> HandleNotFound; a program failure surfaces as ProgramError
    // and leaves the state untouched.
    Bytes run(const EnclaveHandle& hdl, ByteView input);

    // Same transition as run, plus a signed attestation over the I/O.
    Quote run_quote(const EnclaveHandle& hdl, ByteView input);

    static int quote_verify(const HwParams& params, const Quote& quote);

    const HwParams& params() const { return params_; }
    std::size_t enclave_count() const;

    // Per-enclave seal key, derived from the platform root key and the
    // enclave measurement. In real hardware this derivation happens inside
    // the enclave; exposing it here is the simulation's trust substitution.
    crypto::SealKey seal_key_for(const crypto::Digest& measurement) const;

    // Injectable program coins; by default every enclave draws from the
    // process CSPRNG. Affects enclaves loaded after the call.
    void set_rng_factory(RngFactory factory);

    // Platform persistence ("MLCP"): quoting key, root seal key and the
    // enclave table. Callers must store this with restrictive permissions.
    Bytes save_state() const;
    static std::pair<HwParams, std::unique_ptr<HwInstance>> restore(ByteView raw,
                                                                    const ProgramRegistry& registry);

private:
    HwInstance() = default;

    struct EnclaveRecord {
        Program program;
        Bytes state;
        crypto::Digest measurement{};
        std::unique_ptr<Rng> coins;
        std::mutex mu;  // serializes runs per handle
    };

    StepResult run_step(EnclaveRecord& rec, ByteView input);
    std::shared_ptr<EnclaveRecord> find_record(const EnclaveHandle& hdl) const;

    HwParams params_;
    Bytes sk_quote_;
    Bytes root_seal_key_;
    RngFactory rng_factory_;
    std::uint64_t next_load_seq_ = 0;

    mutable std::shared_mutex table_mu_;
    std::map<EnclaveHandle, std::shared_ptr<EnclaveRecord>> table_;
};

// ---- remote-attestation unforgeability game ----

// Challenger wrapping a fresh instance; records every quoted tuple and counts
// submitted quotes that verify without matching a recorded tuple.
class UnforgeabilityGame {
public:
    explicit UnforgeabilityGame(ByteView aux = {});

    const HwParams& params() const { return params_; }
    EnclaveHandle load(Program program);
    Quote run_quote(const EnclaveHandle& hdl, ByteView input);

    // Returns true iff the quote verifies and its tuple was never issued.
    bool submit(const Quote& attempt);

    std::uint64_t accepted_forgeries() const { return accepted_; }
    std::uint64_t submissions() const { return submissions_; }
    std::uint64_t issued_quotes() const { return issued_; }

private:
    HwParams params_;
    std::unique_ptr<HwInstance> hw_;
    std::vector<crypto::Digest> query_list_;  // digests of canonical tuples
    std::uint64_t accepted_ = 0;
    std::uint64_t submissions_ = 0;
    std::uint64_t issued_ = 0;
};

// Shipped adversary strategies. Each returns the number of accepted forgeries
// (honest behaviour and random guessing should both return 0).
std::uint64_t forge_random_bytes(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng);
std::uint64_t forge_replay(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng);
std::uint64_t forge_bitflip(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng);

// Simple test programs.
Program make_echo_program();
Program make_counter_program();

}  // namespace mlcapsule::iee
