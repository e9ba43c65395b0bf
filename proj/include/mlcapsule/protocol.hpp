#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "mlcapsule/capsule.hpp"
#include "mlcapsule/iee.hpp"
#include "mlcapsule/layers.hpp"
#include "mlcapsule/train.hpp"

namespace mlcapsule::protocol {

// Client request: verification parameters plus the setup quote whose output
// field carries the enclave-generated public key.
struct ModelRequest {
    iee::HwParams hw_params;
    iee::Quote setup_quote;

    Bytes serialize() const;
    static ModelRequest parse(ByteView raw);
};

// Public architecture plus the ciphertext of the serialized secrets.
struct HiddenModel {
    nn::ModelDef model_def;
    crypto::Ciphertext encrypted_secrets;

    Bytes serialize() const;
    static HiddenModel parse(ByteView raw);
};

// ---- hardware program Q ----

// Commands understood by the enclave program. "train", "setup" and
// "classify" follow the protocol; "seal-layers" and "classify-sealed" are the
// layer-wise storage path used by persistent workspaces.
Bytes encode_q_input(std::string_view command, ByteView payload);
std::pair<std::string, Bytes> decode_q_input(ByteView raw);

Bytes encode_classify_payload(const nn::ModelDef& def, const crypto::Ciphertext& c,
                              const nn::Tensor& input);
Bytes encode_classify_sealed_payload(const std::vector<nn::CapsuleLayer>& layers,
                                     const nn::Tensor& input);
Bytes encode_train_payload(const nn::ModelDef& arch, const nn::Dataset& data,
                           const nn::TrainConfig& cfg);

struct ProgramQConfig {
    // Queries the enclave will answer before refusing; 0 disables metering.
    std::uint64_t query_threshold = 0;
};

iee::Program make_program_q();
crypto::Digest program_q_tag();
Bytes program_q_code_bytes();

// ---- the four algorithms ----

struct ClientSession {
    std::unique_ptr<iee::HwInstance> hw;
    iee::HwParams params;
    iee::EnclaveHandle q_handle;
    nn::ModelDef model_def;
};

// Sets up the simulated hardware, loads program Q and runs its "setup"
// command under attestation. The session retains the enclave handle.
std::pair<ModelRequest, ClientSession> obtain(const nn::ModelDef& def,
                                              const ProgramQConfig& q_cfg = {});

// Verifies the quote and the program tag, then encrypts the secrets to the
// enclave's public key. Errors: QuoteInvalid, TagMismatch.
HiddenModel provide(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                    const ModelRequest& req);

// Runs Q's "classify" on (def, c, input); program-level failures surface with
// their own error codes (NoKey, IntegrityFailure, ShapeMismatch, ...).
nn::Tensor classify(ClientSession& session, const HiddenModel& hidden, const nn::Tensor& input);

// Convenience wrappers over the workspace commands.
std::vector<nn::CapsuleLayer> seal_layers(ClientSession& session, const HiddenModel& hidden);
nn::Tensor classify_sealed(ClientSession& session,
                           const std::vector<nn::CapsuleLayer>& layers, const nn::Tensor& input);

// ---- model secrecy experiment ----

using Oracle = std::function<nn::Tensor(const nn::Tensor&)>;

// Receives the public definition, the (real or simulated) hidden model and a
// budgeted classification oracle; returns a guess for the challenge bit.
using Adversary = std::function<int(const nn::ModelDef&, const HiddenModel&, const Oracle&, Rng&)>;

// One run of the experiment at challenge bit b. The b=0 branch substitutes a
// zero-string encryption of equal length and answers oracle calls with the
// model directly; b=1 runs the full provide/classify pipeline.
int secrecy_experiment(int b, const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                       const Adversary& adversary, std::uint64_t query_budget, Rng& rng);

struct AdvantageEstimate {
    double p_guess1_b1 = 0.0;
    double p_guess1_b0 = 0.0;
    double advantage = 0.0;
    std::uint64_t trials = 0;
};

AdvantageEstimate estimate_advantage(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                                     const Adversary& adversary, std::uint64_t trials,
                                     std::uint64_t query_budget, std::uint64_t seed);

// Shipped distinguishers.
Adversary make_oracle_consistency_adversary(std::size_t probe_queries);
Adversary make_ciphertext_length_adversary();
Adversary make_byte_histogram_adversary();

// Random dense/relu/softmax model generator for correctness sweeps.
struct ToyModel {
    nn::ModelDef def;
    nn::ModelSecrets secrets;
};
ToyModel random_toy_model(Rng& rng, std::size_t max_params = 10000);
nn::Tensor random_input(const nn::ModelDef& def, Rng& rng);

}  // namespace mlcapsule::protocol
