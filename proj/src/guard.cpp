#include "mlcapsule/guard.hpp"

#include <sodium.h>

#include <cstring>

#include "mlcapsule/error.hpp"
#include "mlcapsule/model_io.hpp"

namespace mlcapsule::guard {

namespace {

Bytes counter_mac(const crypto::SealKey& key, std::uint64_t value) {
    Bytes msg;
    msg.insert(msg.end(), {'M', 'L', 'C', 'C'});
    put_u64le(msg, value);
    Bytes mac(32);
    crypto_generichash(mac.data(), mac.size(), msg.data(), msg.size(), key.data(), key.size());
    return mac;
}

}  // namespace

Bytes GuardState::serialize() const {
    Bytes out;
    put_u64le(out, counter);
    put_u64le(out, threshold);
    put_u64le(out, version);
    return out;
}

GuardState GuardState::parse(ByteView raw) {
    ByteReader r(raw);
    GuardState s;
    s.counter = r.u64le();
    s.threshold = r.u64le();
    s.version = r.u64le();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after guard state");
    return s;
}

GuardState check_and_increment(const GuardState& state) {
    if (state.counter >= state.threshold) {
        throw Error(ErrorCode::QuotaExceeded,
                    "used " + std::to_string(state.counter) + " of " +
                        std::to_string(state.threshold) + " queries");
    }
    GuardState next = state;
    ++next.counter;
    ++next.version;
    return next;
}

MonotonicCounterFile::MonotonicCounterFile(std::filesystem::path path, crypto::SealKey key)
    : path_(std::move(path)), key_(key) {}

bool MonotonicCounterFile::exists() const {
    return std::filesystem::exists(path_);
}

void MonotonicCounterFile::write(std::uint64_t value) {
    Bytes out;
    out.insert(out.end(), {'M', 'L', 'C', 'C'});
    put_u64le(out, value);
    Bytes mac = counter_mac(key_, value);
    out.insert(out.end(), mac.begin(), mac.end());
    nn::write_file_private(path_, out);
}

void MonotonicCounterFile::initialize(std::uint64_t value) {
    write(value);
}

std::uint64_t MonotonicCounterFile::read() const {
    if (!exists()) {
        throw Error(ErrorCode::StorageUnavailable, "monotonic counter storage missing");
    }
    Bytes raw;
    try {
        raw = nn::read_file(path_);
    } catch (const Error&) {
        throw Error(ErrorCode::StorageUnavailable, "monotonic counter storage unreadable");
    }
    ByteReader r(raw);
    r.expect_magic("MLCC");
    std::uint64_t value = r.u64le();
    Bytes mac = r.take(32);
    if (!r.done() || !constant_time_eq(mac, counter_mac(key_, value))) {
        throw Error(ErrorCode::StorageUnavailable, "monotonic counter failed authentication");
    }
    return value;
}

std::uint64_t MonotonicCounterFile::increment() {
    std::uint64_t next = read() + 1;
    write(next);
    return next;
}

PersistentGuard::PersistentGuard(std::filesystem::path sealed_path,
                                 std::filesystem::path counter_path, crypto::SealKey key,
                                 crypto::Digest measurement)
    : sealed_path_(std::move(sealed_path)),
      key_(key),
      measurement_(measurement),
      counter_(std::move(counter_path), key) {}

bool PersistentGuard::initialized() const {
    return std::filesystem::exists(sealed_path_) && counter_.exists();
}

void PersistentGuard::initialize(std::uint64_t threshold) {
    GuardState state{0, threshold, 0};
    counter_.initialize(0);
    store(state);
}

GuardState PersistentGuard::load() const {
    if (!std::filesystem::exists(sealed_path_)) {
        throw Error(ErrorCode::StorageUnavailable, "guard state missing");
    }
    Bytes blob = nn::read_file(sealed_path_);
    return GuardState::parse(crypto::unseal(key_, measurement_, blob));
}

void PersistentGuard::store(const GuardState& state) {
    nn::write_file_private(sealed_path_, crypto::seal(key_, measurement_, state.serialize()));
}

GuardState PersistentGuard::peek() const {
    return load();
}

GuardState PersistentGuard::begin_query() {
    std::lock_guard lock(mu_);

    GuardState state = load();
    std::uint64_t recorded = counter_.read();  // fails closed if missing

    if (state.version == recorded + 1) {
        // A previous attempt crashed between the sealed write and the counter
        // increment. That query was consumed but never released; settle the
        // counter and continue. The crash cost exactly one query.
        counter_.increment();
        recorded = state.version;
    } else if (state.version != recorded) {
        // version < recorded: a stale sealed file was restored.
        // version > recorded+1: stores diverged beyond any crash explanation.
        throw Error(ErrorCode::RollbackDetected,
                    "sealed state version " + std::to_string(state.version) +
                        " does not match recorded " + std::to_string(recorded));
    }

    GuardState next = check_and_increment(state);

    // Sealed write commits the query before the counter service confirms it;
    // a crash at either point can only lose the in-flight query, never mint one.
    store(next);
    if (crash_hook) crash_hook(CrashPoint::AfterSealedWrite);
    counter_.increment();
    if (crash_hook) crash_hook(CrashPoint::AfterCounterIncrement);
    return next;
}

// ---- tickets ----

Bytes QueryTicket::serialize() const {
    Bytes out;
    out.insert(out.end(), query_digest.begin(), query_digest.end());
    put_lp(out, sp_signature);
    return out;
}

QueryTicket QueryTicket::parse(ByteView raw) {
    ByteReader r(raw);
    QueryTicket t;
    Bytes d = r.take(crypto::kDigestLen);
    std::memcpy(t.query_digest.data(), d.data(), crypto::kDigestLen);
    t.sp_signature = r.lp();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after ticket");
    return t;
}

QueryTicket issue_ticket(ByteView sp_signing_key, ByteView query_bytes) {
    QueryTicket t;
    t.query_digest = crypto::digest(query_bytes);
    t.sp_signature = crypto::sign(sp_signing_key, t.query_digest);
    return t;
}

SpentSet::SpentSet(SpentSet&& other) noexcept {
    std::lock_guard lock(other.mu_);
    set_ = std::move(other.set_);
}

SpentSet& SpentSet::operator=(SpentSet&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        set_ = std::move(other.set_);
    }
    return *this;
}

bool SpentSet::insert(const crypto::Digest& d) {
    std::lock_guard lock(mu_);
    return set_.insert(std::string(d.begin(), d.end())).second;
}

bool SpentSet::contains(const crypto::Digest& d) const {
    std::lock_guard lock(mu_);
    return set_.count(std::string(d.begin(), d.end())) > 0;
}

std::size_t SpentSet::size() const {
    std::lock_guard lock(mu_);
    return set_.size();
}

Bytes SpentSet::serialize() const {
    std::lock_guard lock(mu_);
    Bytes out;
    put_u32le(out, static_cast<std::uint32_t>(set_.size()));
    for (const auto& d : set_) out.insert(out.end(), d.begin(), d.end());
    return out;
}

SpentSet SpentSet::parse(ByteView raw) {
    ByteReader r(raw);
    SpentSet s;
    std::uint32_t n = r.u32le();
    for (std::uint32_t i = 0; i < n; ++i) {
        Bytes d = r.take(crypto::kDigestLen);
        s.set_.insert(std::string(d.begin(), d.end()));
    }
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after spent set");
    return s;
}

void redeem_ticket(ByteView sp_verify_key, const QueryTicket& ticket, ByteView query_bytes,
                   SpentSet& spent) {
    if (!crypto::verify(sp_verify_key, ticket.query_digest, ticket.sp_signature)) {
        throw Error(ErrorCode::BadSignature, "ticket signature invalid");
    }
    crypto::Digest actual = crypto::digest(query_bytes);
    if (!constant_time_eq(actual, ticket.query_digest)) {
        throw Error(ErrorCode::DigestMismatch, "ticket was issued for a different query");
    }
    if (!spent.insert(actual)) {
        throw Error(ErrorCode::TicketReused, "ticket already redeemed");
    }
}

}  // namespace mlcapsule::guard
