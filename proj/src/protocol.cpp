#include "mlcapsule/protocol.hpp"

#include <sodium.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "mlcapsule/error.hpp"
#include "mlcapsule/model_io.hpp"

namespace mlcapsule::protocol {

namespace {

constexpr std::uint8_t kStateHasSk = 1u << 0;
constexpr std::uint8_t kStateHasCache = 1u << 1;
constexpr std::uint8_t kStateHasTrained = 1u << 2;

// Program Q keeps everything it knows in the hardware state table, so the
// whole record serializes to one byte string.
struct QState {
    Bytes sk;           // x25519 dual blob, present after "setup"
    Bytes seal_secret;  // per-enclave sealing secret, created at "setup"
    std::uint64_t query_threshold = 0;  // 0 = unmetered
    std::uint64_t queries_used = 0;
    // cached layer-wise sealing of the last provisioned model
    crypto::Digest cache_key{};
    Bytes cached_def_doc;
    Bytes cached_layers;
    // model kept by the "train" command
    Bytes trained_def_doc;
    Bytes trained_secrets;

    bool has_sk() const { return !sk.empty(); }
    bool has_cache() const { return !cached_def_doc.empty(); }

    Bytes serialize() const {
        Bytes out;
        out.insert(out.end(), {'M', 'L', 'Q', 'S'});
        std::uint8_t flags = 0;
        if (has_sk()) flags |= kStateHasSk;
        if (has_cache()) flags |= kStateHasCache;
        if (!trained_def_doc.empty()) flags |= kStateHasTrained;
        out.push_back(flags);
        put_lp(out, sk);
        put_lp(out, seal_secret);
        put_u64le(out, query_threshold);
        put_u64le(out, queries_used);
        if (has_cache()) {
            out.insert(out.end(), cache_key.begin(), cache_key.end());
            put_lp(out, cached_def_doc);
            put_lp(out, cached_layers);
        }
        if (!trained_def_doc.empty()) {
            put_lp(out, trained_def_doc);
            put_lp(out, trained_secrets);
        }
        return out;
    }

    static QState parse(ByteView raw) {
        QState s;
        if (raw.empty()) return s;  // fresh enclave
        ByteReader r(raw);
        r.expect_magic("MLQS");
        std::uint8_t flags = r.u8();
        s.sk = r.lp();
        s.seal_secret = r.lp();
        s.query_threshold = r.u64le();
        s.queries_used = r.u64le();
        if (flags & kStateHasCache) {
            Bytes key = r.take(crypto::kDigestLen);
            std::memcpy(s.cache_key.data(), key.data(), crypto::kDigestLen);
            s.cached_def_doc = r.lp();
            s.cached_layers = r.lp();
        }
        if (flags & kStateHasTrained) {
            s.trained_def_doc = r.lp();
            s.trained_secrets = r.lp();
        }
        return s;
    }
};

Bytes serialize_dataset(const nn::Dataset& data) {
    Bytes out;
    put_u32le(out, data.feature_dim);
    put_u32le(out, data.class_count);
    put_u32le(out, static_cast<std::uint32_t>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (float v : data.inputs[i]) put_u32le(out, std::bit_cast<std::uint32_t>(v));
        put_u32le(out, data.labels[i]);
    }
    return out;
}

nn::Dataset parse_dataset(ByteView raw) {
    ByteReader r(raw);
    nn::Dataset data;
    data.feature_dim = r.u32le();
    data.class_count = r.u32le();
    std::uint32_t n = r.u32le();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::vector<float> x(data.feature_dim);
        for (auto& v : x) v = std::bit_cast<float>(r.u32le());
        data.inputs.push_back(std::move(x));
        data.labels.push_back(r.u32le());
    }
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after dataset");
    data.validate();
    return data;
}

crypto::SealKey q_seal_key(const QState& state, const crypto::Digest& measurement) {
    if (state.seal_secret.empty()) {
        throw Error(ErrorCode::NoKey, "enclave sealing secret missing; run setup first");
    }
    return crypto::derive_seal_key(state.seal_secret, measurement);
}

Bytes build_sealed_layers(const QState& state, const crypto::Digest& measurement,
                          const nn::ModelDef& def, const nn::ModelSecrets& secrets) {
    auto layers = nn::seal_model(def, secrets, q_seal_key(state, measurement), measurement);
    return nn::serialize_capsule_layers(layers);
}

// Decrypts and re-seals per layer unless the cache already holds this exact
// (definition, ciphertext) pair.
void ensure_layer_cache(QState& state, const crypto::Digest& measurement, ByteView def_doc,
                        const crypto::Ciphertext& c) {
    Bytes key_material(def_doc.begin(), def_doc.end());
    Bytes cser = c.serialize();
    key_material.insert(key_material.end(), cser.begin(), cser.end());
    crypto::Digest cache_key = crypto::digest(key_material);
    if (state.has_cache() && state.cache_key == cache_key) return;

    if (!state.has_sk()) {
        throw Error(ErrorCode::NoKey, "classify before setup");
    }
    nn::ModelDef def = nn::parse_model_doc(to_string(def_doc));
    Bytes plain = crypto::pke_dec(state.sk, c);
    nn::ModelSecrets secrets = nn::parse_secrets(def, plain);
    crypto::memzero(plain);

    state.cached_layers = build_sealed_layers(state, measurement, def, secrets);
    state.cached_def_doc.assign(def_doc.begin(), def_doc.end());
    state.cache_key = cache_key;
}

nn::Tensor run_capsule_classify(const QState& state, const crypto::Digest& measurement,
                                const nn::ModelDef& def, ByteView serialized_layers,
                                const nn::Tensor& input) {
    auto layers = nn::parse_capsule_layers(serialized_layers);
    return nn::capsule_forward(def, layers, q_seal_key(state, measurement), measurement, input);
}

void guard_check(QState& state) {
    if (state.query_threshold == 0) return;
    if (state.queries_used >= state.query_threshold) {
        throw Error(ErrorCode::QuotaExceeded,
                    "query threshold " + std::to_string(state.query_threshold) + " reached");
    }
    ++state.queries_used;  // committed only when the step returns
}

}  // namespace

Bytes encode_q_input(std::string_view command, ByteView payload) {
    Bytes out;
    put_lp(out, to_bytes(command));
    put_lp(out, payload);
    return out;
}

std::pair<std::string, Bytes> decode_q_input(ByteView raw) {
    ByteReader r(raw);
    std::string command = to_string(r.lp());
    Bytes payload = r.lp();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after command input");
    return {std::move(command), std::move(payload)};
}

Bytes encode_classify_payload(const nn::ModelDef& def, const crypto::Ciphertext& c,
                              const nn::Tensor& input) {
    Bytes out;
    put_lp(out, to_bytes(nn::write_model_doc(def)));
    put_lp(out, c.serialize());
    put_lp(out, nn::serialize_tensor(input));
    return out;
}

Bytes encode_classify_sealed_payload(const std::vector<nn::CapsuleLayer>& layers,
                                     const nn::Tensor& input) {
    Bytes out;
    put_lp(out, nn::serialize_capsule_layers(layers));
    put_lp(out, nn::serialize_tensor(input));
    return out;
}

Bytes encode_train_payload(const nn::ModelDef& arch, const nn::Dataset& data,
                           const nn::TrainConfig& cfg) {
    Bytes out;
    put_lp(out, to_bytes(nn::write_model_doc(arch)));
    put_lp(out, serialize_dataset(data));
    put_u32le(out, cfg.epochs);
    put_u32le(out, std::bit_cast<std::uint32_t>(cfg.learning_rate));
    put_u64le(out, cfg.seed);
    return out;
}

Bytes program_q_code_bytes() {
    return to_bytes("mlcapsule.program-q/v1");
}

crypto::Digest program_q_tag() {
    return crypto::digest(program_q_code_bytes());
}

iee::Program make_program_q() {
    iee::Program p;
    p.code_bytes = program_q_code_bytes();
    const crypto::Digest measurement = crypto::digest(p.code_bytes);

    p.step = [measurement](ByteView state_bytes, ByteView input, Rng& coins) -> iee::StepResult {
        QState state = QState::parse(state_bytes);
        auto [command, payload] = decode_q_input(input);
        Bytes out;

        if (command == "setup") {
            std::uint64_t threshold = 0;
            if (!payload.empty()) {
                ByteReader r(payload);
                threshold = r.u64le();
                if (!r.done()) throw Error(ErrorCode::ParseError, "bad setup payload");
            }
            // Key material derives from the program coins, so a fixed coin
            // stream reproduces the enclave exactly.
            std::array<std::uint8_t, crypto_box_SEEDBYTES> seed;
            coins.fill(seed);
            Bytes pk(crypto_box_PUBLICKEYBYTES), scalar(crypto_box_SECRETKEYBYTES);
            crypto_box_seed_keypair(pk.data(), scalar.data(), seed.data());
            crypto::memzero(seed);
            state.sk = scalar;
            state.sk.insert(state.sk.end(), pk.begin(), pk.end());
            state.seal_secret.resize(32);
            coins.fill(state.seal_secret);
            state.query_threshold = threshold;
            state.queries_used = 0;
            out = pk;
        } else if (command == "train") {
            ByteReader r(payload);
            nn::ModelDef arch = nn::parse_model_doc(to_string(r.lp()));
            nn::Dataset data = parse_dataset(r.lp());
            nn::TrainConfig cfg;
            cfg.epochs = r.u32le();
            cfg.learning_rate = std::bit_cast<float>(r.u32le());
            cfg.seed = r.u64le();
            if (!r.done()) throw Error(ErrorCode::ParseError, "bad train payload");

            auto result = nn::train_toy(data, arch, cfg);
            state.trained_def_doc = to_bytes(nn::write_model_doc(arch));
            state.trained_secrets = nn::serialize_secrets(result.secrets);
            put_lp(out, state.trained_def_doc);
            put_lp(out, state.trained_secrets);
        } else if (command == "classify") {
            ByteReader r(payload);
            Bytes def_doc = r.lp();
            crypto::Ciphertext c = crypto::Ciphertext::parse(r.lp());
            nn::Tensor x = nn::parse_tensor(r.lp());
            if (!r.done()) throw Error(ErrorCode::ParseError, "bad classify payload");
            if (!state.has_sk()) throw Error(ErrorCode::NoKey, "classify before setup");

            guard_check(state);
            ensure_layer_cache(state, measurement, def_doc, c);
            nn::ModelDef def = nn::parse_model_doc(to_string(def_doc));
            nn::Tensor posterior =
                run_capsule_classify(state, measurement, def, state.cached_layers, x);
            out = nn::serialize_tensor(posterior);
        } else if (command == "seal-layers") {
            ByteReader r(payload);
            Bytes def_doc = r.lp();
            crypto::Ciphertext c = crypto::Ciphertext::parse(r.lp());
            if (!r.done()) throw Error(ErrorCode::ParseError, "bad seal-layers payload");
            if (!state.has_sk()) throw Error(ErrorCode::NoKey, "seal-layers before setup");

            ensure_layer_cache(state, measurement, def_doc, c);
            out = state.cached_layers;
        } else if (command == "classify-sealed") {
            ByteReader r(payload);
            Bytes layers = r.lp();
            nn::Tensor x = nn::parse_tensor(r.lp());
            if (!r.done()) throw Error(ErrorCode::ParseError, "bad classify-sealed payload");
            if (state.seal_secret.empty()) {
                throw Error(ErrorCode::NoKey, "classify-sealed before setup");
            }

            if (!state.has_cache()) {
                throw Error(ErrorCode::NoKey, "no provisioned model definition in enclave state");
            }
            guard_check(state);
            nn::ModelDef def = nn::parse_model_doc(to_string(state.cached_def_doc));
            nn::Tensor posterior = run_capsule_classify(state, measurement, def, layers, x);
            out = nn::serialize_tensor(posterior);
        } else {
            throw Error(ErrorCode::UnknownCommand, "command '" + command + "'");
        }

        return iee::StepResult{state.serialize(), std::move(out)};
    };
    return p;
}

// ---- request / hidden model serialization ----

// Plain concatenation: both records are self-delimiting.
Bytes ModelRequest::serialize() const {
    Bytes out = hw_params.serialize();
    Bytes quote = setup_quote.serialize();
    out.insert(out.end(), quote.begin(), quote.end());
    return out;
}

ModelRequest ModelRequest::parse(ByteView raw) {
    ByteReader r(raw);
    ModelRequest req;
    req.hw_params = iee::HwParams::read(r);
    req.setup_quote = iee::Quote::read(r);
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after request");
    return req;
}

Bytes HiddenModel::serialize() const {
    Bytes out;
    put_lp(out, to_bytes(nn::write_model_doc(model_def)));
    put_lp(out, encrypted_secrets.serialize());
    return out;
}

HiddenModel HiddenModel::parse(ByteView raw) {
    ByteReader r(raw);
    HiddenModel h;
    h.model_def = nn::parse_model_doc(to_string(r.lp()));
    h.encrypted_secrets = crypto::Ciphertext::parse(r.lp());
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after hidden model");
    return h;
}

// ---- the four algorithms ----

std::pair<ModelRequest, ClientSession> obtain(const nn::ModelDef& def,
                                              const ProgramQConfig& q_cfg) {
    def.validate();
    auto [params, hw] = iee::HwInstance::setup(128);
    auto hdl = hw->load(params, make_program_q());

    Bytes setup_payload;
    if (q_cfg.query_threshold != 0) put_u64le(setup_payload, q_cfg.query_threshold);
    iee::Quote quote = hw->run_quote(hdl, encode_q_input("setup", setup_payload));

    ModelRequest req{params, quote};
    ClientSession session{std::move(hw), params, hdl, def};
    return {std::move(req), std::move(session)};
}

HiddenModel provide(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                    const ModelRequest& req) {
    def.validate();
    nn::check_secrets(def, secrets);

    if (iee::HwInstance::quote_verify(req.hw_params, req.setup_quote) != 1) {
        throw Error(ErrorCode::QuoteInvalid, "setup quote failed verification");
    }
    auto tag = program_q_tag();
    if (!constant_time_eq(req.setup_quote.tag_q, tag)) {
        throw Error(ErrorCode::TagMismatch, "quote was produced by a different program");
    }
    auto [command, payload] = decode_q_input(req.setup_quote.input);
    if (command != "setup") {
        throw Error(ErrorCode::QuoteInvalid, "quote does not attest the setup command");
    }
    const Bytes& pk = req.setup_quote.output;

    Bytes plain = nn::serialize_secrets(secrets);
    HiddenModel hidden{def, crypto::pke_enc(pk, plain)};
    crypto::memzero(plain);
    return hidden;
}

namespace {

nn::Tensor run_q_for_tensor(ClientSession& session, std::string_view command, ByteView payload) {
    Bytes out;
    try {
        out = session.hw->run(session.q_handle, encode_q_input(command, payload));
    } catch (const ProgramError& e) {
        e.unwrap();
    }
    return nn::parse_tensor(out);
}

}  // namespace

nn::Tensor classify(ClientSession& session, const HiddenModel& hidden, const nn::Tensor& input) {
    return run_q_for_tensor(
        session, "classify",
        encode_classify_payload(hidden.model_def, hidden.encrypted_secrets, input));
}

std::vector<nn::CapsuleLayer> seal_layers(ClientSession& session, const HiddenModel& hidden) {
    Bytes payload;
    put_lp(payload, to_bytes(nn::write_model_doc(hidden.model_def)));
    put_lp(payload, hidden.encrypted_secrets.serialize());
    Bytes out;
    try {
        out = session.hw->run(session.q_handle, encode_q_input("seal-layers", payload));
    } catch (const ProgramError& e) {
        e.unwrap();
    }
    return nn::parse_capsule_layers(out);
}

nn::Tensor classify_sealed(ClientSession& session, const std::vector<nn::CapsuleLayer>& layers,
                           const nn::Tensor& input) {
    return run_q_for_tensor(session, "classify-sealed",
                            encode_classify_sealed_payload(layers, input));
}

// ---- model secrecy experiment ----

int secrecy_experiment(int b, const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                       const Adversary& adversary, std::uint64_t query_budget, Rng& rng) {
    if (b != 0 && b != 1) throw Error(ErrorCode::InvalidArgument, "challenge bit must be 0 or 1");

    auto [req, session] = obtain(def);
    auto budget = std::make_shared<std::uint64_t>(query_budget);
    auto spend = [budget] {
        if (*budget == 0) {
            throw Error(ErrorCode::QuotaExceeded, "secrecy experiment query budget exhausted");
        }
        --*budget;
    };

    HiddenModel hidden;
    Oracle oracle;
    if (b == 1) {
        hidden = provide(def, secrets, req);
        auto hm = std::make_shared<HiddenModel>(hidden);
        auto sess = std::make_shared<ClientSession>(std::move(session));
        oracle = [sess, hm, spend](const nn::Tensor& x) {
            spend();
            return classify(*sess, *hm, x);
        };
    } else {
        // Sim1: zero-string encryption of equal length under the same pk.
        Bytes zeros(nn::serialize_secrets(secrets).size(), 0);
        hidden = HiddenModel{def, crypto::pke_enc(req.setup_quote.output, zeros)};
        // Sim2: answer queries from the model directly.
        oracle = [&def, &secrets, spend](const nn::Tensor& x) {
            spend();
            return nn::forward(def, secrets, x);
        };
    }

    int guess = 0;
    try {
        guess = adversary(def, hidden, oracle, rng);
    } catch (const Error&) {
        guess = 0;  // budget exhaustion (or any failure) ends the experiment
    }
    return guess == 1 ? 1 : 0;
}

AdvantageEstimate estimate_advantage(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                                     const Adversary& adversary, std::uint64_t trials,
                                     std::uint64_t query_budget, std::uint64_t seed) {
    AdvantageEstimate est;
    est.trials = trials;
    std::uint64_t ones_b1 = 0, ones_b0 = 0, n_b1 = 0, n_b0 = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        int b = static_cast<int>(t % 2);
        SeededRng rng(seed ^ (t * 0x9e3779b97f4a7c15ull + b));
        int guess = secrecy_experiment(b, def, secrets, adversary, query_budget, rng);
        if (b == 1) {
            ++n_b1;
            ones_b1 += guess;
        } else {
            ++n_b0;
            ones_b0 += guess;
        }
    }
    est.p_guess1_b1 = n_b1 ? static_cast<double>(ones_b1) / n_b1 : 0.0;
    est.p_guess1_b0 = n_b0 ? static_cast<double>(ones_b0) / n_b0 : 0.0;
    est.advantage = std::abs(est.p_guess1_b1 - est.p_guess1_b0);
    return est;
}

Adversary make_oracle_consistency_adversary(std::size_t probe_queries) {
    return [probe_queries](const nn::ModelDef& def, const HiddenModel&, const Oracle& oracle,
                           Rng& rng) -> int {
        for (std::size_t q = 0; q < probe_queries; ++q) {
            nn::Tensor x = random_input(def, rng);
            nn::Tensor a = oracle(x);
            nn::Tensor b = oracle(x);
            if (!(a == b)) return 0;
            double sum = 0.0;
            for (float v : a.data) {
                if (v < 0.0f) return 0;
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-5) return 0;
            if (a.size() != def.class_count) return 0;
        }
        return 1;  // transcript looks like a well-behaved classifier
    };
}

Adversary make_ciphertext_length_adversary() {
    return [](const nn::ModelDef& def, const HiddenModel& hidden, const Oracle&, Rng&) -> int {
        // The definition fixes the exact serialized length of the secrets.
        std::size_t expected = 10;  // MLCW header: magic + version + count
        for (const auto& shape : def.param_shapes()) {
            expected += 2 + shape.weights.size() * 4 + nn::shape_size(shape.weights) * 4;
            expected += 2 + shape.bias.size() * 4 + nn::shape_size(shape.bias) * 4;
        }
        return hidden.encrypted_secrets.body.size() == expected ? 1 : 0;
    };
}

Adversary make_byte_histogram_adversary() {
    return [](const nn::ModelDef&, const HiddenModel& hidden, const Oracle&, Rng&) -> int {
        const Bytes& body = hidden.encrypted_secrets.body;
        if (body.size() < 256) return 0;
        std::array<double, 256> counts{};
        for (auto byte : body) counts[byte] += 1.0;
        const double expect = static_cast<double>(body.size()) / 256.0;
        double chi2 = 0.0;
        for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
        // far tail for a uniform byte distribution (df=255)
        return chi2 > 255.0 + 4.0 * std::sqrt(510.0) ? 1 : 0;
    };
}

ToyModel random_toy_model(Rng& rng, std::size_t max_params) {
    auto pick = [&rng](std::uint32_t lo, std::uint32_t hi) {
        return lo + static_cast<std::uint32_t>(rng.next_u64() % (hi - lo + 1));
    };
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::uint32_t input_dim = pick(2, 32);
        std::uint32_t classes = pick(2, 8);
        std::uint32_t hidden_layers = pick(0, 2);
        std::vector<std::uint32_t> widths;
        std::uint32_t prev = input_dim;
        nn::ModelDef def;
        def.input_shape = {input_dim};
        def.class_count = classes;
        for (std::uint32_t h = 0; h < hidden_layers; ++h) {
            std::uint32_t width = pick(2, 32);
            nn::LayerSpec dense;
            dense.kind = nn::LayerKind::Dense;
            dense.in_features = prev;
            dense.out_features = width;
            def.layers.push_back(dense);
            nn::LayerSpec act;
            act.kind = nn::LayerKind::Relu;
            def.layers.push_back(act);
            prev = width;
        }
        nn::LayerSpec head;
        head.kind = nn::LayerKind::Dense;
        head.in_features = prev;
        head.out_features = classes;
        def.layers.push_back(head);
        nn::LayerSpec sm;
        sm.kind = nn::LayerKind::Softmax;
        def.layers.push_back(sm);

        std::size_t params = 0;
        for (const auto& shape : def.param_shapes()) {
            params += nn::shape_size(shape.weights) + nn::shape_size(shape.bias);
        }
        if (params > max_params) continue;

        ToyModel model;
        model.def = def;
        model.secrets = nn::init_dense_secrets(def, rng.next_u64());
        return model;
    }
    throw Error(ErrorCode::InvalidArgument, "could not sample a model under the parameter cap");
}

nn::Tensor random_input(const nn::ModelDef& def, Rng& rng) {
    nn::Tensor x = nn::Tensor::zeros(def.input_shape);
    for (auto& v : x.data) {
        // uniform in [-1, 1)
        v = static_cast<float>(rng.next_u64() >> 11) * (1.0f / 4503599627370496.0f) * 2.0f - 1.0f;
    }
    return x;
}

}  // namespace mlcapsule::protocol
