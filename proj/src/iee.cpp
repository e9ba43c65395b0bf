#include "mlcapsule/iee.hpp"

#include <algorithm>
#include <cstring>

#include "mlcapsule/error.hpp"

namespace mlcapsule::iee {

namespace {

constexpr std::size_t kHandleLen = 16;
constexpr std::size_t kRootSealKeyLen = 32;

crypto::Digest tuple_digest(const Quote& q) {
    return crypto::digest(Quote::canonical_bytes(q.md_hdl, q.tag_q, q.input, q.output));
}

}  // namespace

Bytes HwParams::serialize() const {
    Bytes out;
    put_u16le(out, scheme_id);
    put_lp(out, verification_key);
    return out;
}

HwParams HwParams::read(ByteReader& r) {
    HwParams p;
    p.scheme_id = r.u16le();
    p.verification_key = r.lp();
    if (p.scheme_id != crypto::kSchemeEd25519) {
        throw Error(ErrorCode::ParseError, "unknown signature scheme");
    }
    if (p.verification_key.empty()) {
        throw Error(ErrorCode::ParseError, "empty verification key");
    }
    return p;
}

HwParams HwParams::parse(ByteView raw) {
    ByteReader r(raw);
    HwParams p = read(r);
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after params");
    return p;
}

Bytes Quote::canonical_bytes(ByteView md_hdl, ByteView tag_q, ByteView input, ByteView output) {
    Bytes out;
    out.reserve(16 + md_hdl.size() + tag_q.size() + input.size() + output.size());
    put_lp(out, md_hdl);
    put_lp(out, tag_q);
    put_lp(out, input);
    put_lp(out, output);
    return out;
}

Bytes Quote::serialize() const {
    Bytes out;
    out.insert(out.end(), {'M', 'L', 'C', 'Q'});
    put_lp(out, md_hdl);
    put_lp(out, tag_q);
    put_lp(out, input);
    put_lp(out, output);
    put_lp(out, sigma);
    return out;
}

Quote Quote::read(ByteReader& r) {
    r.expect_magic("MLCQ");
    Quote q;
    q.md_hdl = r.lp();
    q.tag_q = r.lp();
    q.input = r.lp();
    q.output = r.lp();
    q.sigma = r.lp();
    return q;
}

Quote Quote::parse(ByteView raw) {
    ByteReader r(raw);
    Quote q = read(r);
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after quote");
    return q;
}

void ProgramRegistry::add(Program program) {
    programs_.push_back(std::move(program));
}

const Program* ProgramRegistry::find(ByteView code_bytes) const {
    for (const auto& p : programs_) {
        if (p.code_bytes.size() == code_bytes.size() &&
            std::equal(code_bytes.begin(), code_bytes.end(), p.code_bytes.begin())) {
            return &p;
        }
    }
    return nullptr;
}

std::pair<HwParams, std::unique_ptr<HwInstance>> HwInstance::setup(int security_level_bits,
                                                                   ByteView aux) {
    (void)aux;  // accepted for game fidelity, unused
    if (security_level_bits != 128) {
        throw Error(ErrorCode::InvalidArgument, "unsupported security level");
    }
    crypto::init();
    auto hw = std::unique_ptr<HwInstance>(new HwInstance());
    auto kp = crypto::sig_keygen();
    hw->sk_quote_ = std::move(kp.sk);
    hw->params_.scheme_id = crypto::kSchemeEd25519;
    hw->params_.verification_key = std::move(kp.pk);
    hw->root_seal_key_.resize(kRootSealKeyLen);
    SystemRng().fill(hw->root_seal_key_);
    hw->rng_factory_ = [](std::uint64_t) { return std::make_unique<SystemRng>(); };
    return {hw->params_, std::move(hw)};
}

void HwInstance::set_rng_factory(RngFactory factory) {
    std::unique_lock lock(table_mu_);
    rng_factory_ = std::move(factory);
}

EnclaveHandle HwInstance::load(const HwParams& params, Program program) {
    if (params != params_) {
        throw Error(ErrorCode::InvalidArgument, "params do not belong to this instance");
    }
    if (program.code_bytes.empty() || !program.step) {
        throw Error(ErrorCode::InvalidArgument, "malformed program");
    }

    std::unique_lock lock(table_mu_);
    std::uint64_t seq = next_load_seq_++;

    EnclaveHandle hdl;
    // Counter prefix guarantees freshness; random suffix keeps handles opaque.
    for (int i = 0; i < 8; ++i) hdl.id[i] = static_cast<std::uint8_t>(seq >> (8 * i));
    SystemRng().fill(std::span(hdl.id).subspan(8));

    auto rec = std::make_shared<EnclaveRecord>();
    rec->measurement = crypto::digest(program.code_bytes);
    rec->program = std::move(program);
    rec->coins = rng_factory_(seq);
    table_.emplace(hdl, std::move(rec));
    return hdl;
}

std::shared_ptr<HwInstance::EnclaveRecord> HwInstance::find_record(const EnclaveHandle& hdl) const {
    std::shared_lock lock(table_mu_);
    auto it = table_.find(hdl);
    if (it == table_.end()) {
        throw Error(ErrorCode::HandleNotFound, "no enclave for handle " + hdl.hex());
    }
    return it->second;
}

StepResult HwInstance::run_step(EnclaveRecord& rec, ByteView input) {
    try {
        return rec.program.step(rec.state, input, *rec.coins);
    } catch (const ProgramError&) {
        throw;
    } catch (const Error& e) {
        throw ProgramError(e.code(), e.message());
    } catch (const std::exception& e) {
        throw ProgramError(ErrorCode::ProgramError, e.what());
    }
}

Bytes HwInstance::run(const EnclaveHandle& hdl, ByteView input) {
    auto rec = find_record(hdl);
    std::lock_guard lock(rec->mu);
    StepResult res = run_step(*rec, input);
    rec->state = std::move(res.new_state);
    return res.output;
}

Quote HwInstance::run_quote(const EnclaveHandle& hdl, ByteView input) {
    auto rec = find_record(hdl);
    std::lock_guard lock(rec->mu);
    StepResult res = run_step(*rec, input);
    rec->state = std::move(res.new_state);

    Quote q;
    q.md_hdl.assign(rec->measurement.begin(), rec->measurement.end());
    q.md_hdl.insert(q.md_hdl.end(), hdl.id.begin(), hdl.id.end());
    q.tag_q.assign(rec->measurement.begin(), rec->measurement.end());
    q.input.assign(input.begin(), input.end());
    q.output = std::move(res.output);
    auto d = crypto::digest(q.canonical_bytes());
    q.sigma = crypto::sign(sk_quote_, d);
    return q;
}

int HwInstance::quote_verify(const HwParams& params, const Quote& quote) {
    if (params.scheme_id != crypto::kSchemeEd25519) return 0;
    auto d = crypto::digest(quote.canonical_bytes());
    return crypto::verify(params.verification_key, d, quote.sigma) ? 1 : 0;
}

std::size_t HwInstance::enclave_count() const {
    std::shared_lock lock(table_mu_);
    return table_.size();
}

crypto::SealKey HwInstance::seal_key_for(const crypto::Digest& measurement) const {
    return crypto::derive_seal_key(root_seal_key_, measurement);
}

Bytes HwInstance::save_state() const {
    std::shared_lock lock(table_mu_);
    Bytes out;
    out.insert(out.end(), {'M', 'L', 'C', 'P'});
    put_u16le(out, 1);  // format version
    put_u16le(out, params_.scheme_id);
    put_lp(out, params_.verification_key);
    put_lp(out, sk_quote_);
    put_lp(out, root_seal_key_);
    put_u64le(out, next_load_seq_);
    put_u32le(out, static_cast<std::uint32_t>(table_.size()));
    for (const auto& [hdl, rec] : table_) {
        out.insert(out.end(), hdl.id.begin(), hdl.id.end());
        put_lp(out, rec->program.code_bytes);
        put_lp(out, rec->state);
    }
    return out;
}

std::pair<HwParams, std::unique_ptr<HwInstance>> HwInstance::restore(
    ByteView raw, const ProgramRegistry& registry) {
    crypto::init();
    ByteReader r(raw);
    r.expect_magic("MLCP");
    if (r.u16le() != 1) throw Error(ErrorCode::ParseError, "unsupported platform state version");

    auto hw = std::unique_ptr<HwInstance>(new HwInstance());
    hw->params_.scheme_id = r.u16le();
    hw->params_.verification_key = r.lp();
    hw->sk_quote_ = r.lp();
    hw->root_seal_key_ = r.lp();
    hw->next_load_seq_ = r.u64le();
    hw->rng_factory_ = [](std::uint64_t) { return std::make_unique<SystemRng>(); };

    std::uint32_t count = r.u32le();
    for (std::uint32_t i = 0; i < count; ++i) {
        Bytes id = r.take(kHandleLen);
        Bytes code = r.lp();
        Bytes state = r.lp();
        const Program* prog = registry.find(code);
        if (prog == nullptr) {
            throw Error(ErrorCode::ParseError, "persisted enclave program not registered");
        }
        auto rec = std::make_shared<EnclaveRecord>();
        rec->program = *prog;
        rec->state = std::move(state);
        rec->measurement = crypto::digest(code);
        rec->coins = hw->rng_factory_(i);
        EnclaveHandle hdl;
        std::memcpy(hdl.id.data(), id.data(), kHandleLen);
        hw->table_.emplace(hdl, std::move(rec));
    }
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after platform state");
    HwParams params = hw->params_;
    return {params, std::move(hw)};
}

// ---- unforgeability game ----

UnforgeabilityGame::UnforgeabilityGame(ByteView aux) {
    auto [params, hw] = HwInstance::setup(128, aux);
    params_ = params;
    hw_ = std::move(hw);
}

EnclaveHandle UnforgeabilityGame::load(Program program) {
    return hw_->load(params_, std::move(program));
}

Quote UnforgeabilityGame::run_quote(const EnclaveHandle& hdl, ByteView input) {
    Quote q = hw_->run_quote(hdl, input);
    query_list_.push_back(tuple_digest(q));
    ++issued_;
    return q;
}

bool UnforgeabilityGame::submit(const Quote& attempt) {
    ++submissions_;
    if (HwInstance::quote_verify(params_, attempt) != 1) return false;
    auto d = tuple_digest(attempt);
    if (std::find(query_list_.begin(), query_list_.end(), d) != query_list_.end()) {
        return false;  // replay of an issued tuple, not a forgery
    }
    ++accepted_;
    return true;
}

std::uint64_t forge_random_bytes(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng) {
    std::uint64_t before = game.accepted_forgeries();
    for (std::uint64_t i = 0; i < attempts; ++i) {
        Quote q;
        q.md_hdl.resize(48);
        q.tag_q.resize(32);
        q.input.resize(8);
        q.output.resize(8);
        q.sigma.resize(64);
        rng.fill(q.md_hdl);
        rng.fill(q.tag_q);
        rng.fill(q.input);
        rng.fill(q.output);
        rng.fill(q.sigma);
        game.submit(q);
    }
    return game.accepted_forgeries() - before;
}

std::uint64_t forge_replay(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng) {
    std::uint64_t before = game.accepted_forgeries();
    auto hdl = game.load(make_echo_program());
    for (std::uint64_t i = 0; i < attempts; ++i) {
        Bytes in(8);
        rng.fill(in);
        Quote q = game.run_quote(hdl, in);
        game.submit(q);  // verbatim replay: verifies but sits in the query list
    }
    return game.accepted_forgeries() - before;
}

std::uint64_t forge_bitflip(UnforgeabilityGame& game, std::uint64_t attempts, Rng& rng) {
    std::uint64_t before = game.accepted_forgeries();
    auto hdl = game.load(make_echo_program());
    Quote honest = game.run_quote(hdl, to_bytes("seed input"));
    for (std::uint64_t i = 0; i < attempts; ++i) {
        Quote q = honest;
        Bytes* fields[] = {&q.md_hdl, &q.tag_q, &q.input, &q.output, &q.sigma};
        Bytes& target = *fields[rng.next_u64() % 5];
        std::size_t bit = rng.next_u64() % (target.size() * 8);
        target[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        game.submit(q);
    }
    return game.accepted_forgeries() - before;
}

Program make_echo_program() {
    Program p;
    p.code_bytes = to_bytes("mlcapsule.test.echo/v1");
    p.step = [](ByteView state, ByteView input, Rng&) {
        return StepResult{Bytes(state.begin(), state.end()), Bytes(input.begin(), input.end())};
    };
    return p;
}

Program make_counter_program() {
    Program p;
    p.code_bytes = to_bytes("mlcapsule.test.counter/v1");
    p.step = [](ByteView state, ByteView input, Rng&) -> StepResult {
        std::uint64_t value = 0;
        if (!state.empty()) {
            ByteReader r(state);
            value = r.u64le();
        }
        if (to_string(input) == "inc") {
            ++value;
        } else {
            throw Error(ErrorCode::UnknownCommand, "counter only understands inc");
        }
        Bytes new_state;
        put_u64le(new_state, value);
        return StepResult{std::move(new_state), to_bytes(std::to_string(value))};
    };
    return p;
}

}  // namespace mlcapsule::iee
