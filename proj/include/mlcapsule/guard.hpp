#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <unordered_set>

#include "mlcapsule/crypto.hpp"

namespace mlcapsule::guard {

struct GuardState {
    std::uint64_t counter = 0;
    std::uint64_t threshold = 0;
    std::uint64_t version = 0;  // monotonic persistence epoch

    Bytes serialize() const;
    static GuardState parse(ByteView raw);
    bool operator==(const GuardState&) const = default;
};

// Pure quota step: counter+1, version+1. Throws QuotaExceeded at the
// threshold without consuming a query.
GuardState check_and_increment(const GuardState& state);

// ---- rollback-protected persistence ----

// Simulated hardware monotonic counter: "MLCC" | value u64 LE | 32 B MAC
// keyed with the seal key. Missing or unreadable storage fails closed.
class MonotonicCounterFile {
public:
    MonotonicCounterFile(std::filesystem::path path, crypto::SealKey key);

    void initialize(std::uint64_t value);
    std::uint64_t read() const;
    std::uint64_t increment();  // returns the new value
    bool exists() const;

private:
    void write(std::uint64_t value);

    std::filesystem::path path_;
    crypto::SealKey key_;
};

// Crash points the test harness can inject into the persistence sequence.
enum class CrashPoint {
    None,
    AfterSealedWrite,       // sealed state advanced, counter service not yet
    AfterCounterIncrement,  // both advanced, posterior never released
};

struct CrashInjected {};  // thrown by the crash hook

// Guard state sealed on disk plus version binding against the monotonic
// counter. Update order: check, increment, sealed write, counter-service
// write, release. A crash at any point costs at most the in-flight query and
// can never mint a free one; restoring a stale sealed file is detected as a
// rollback.
class PersistentGuard {
public:
    PersistentGuard(std::filesystem::path sealed_path, std::filesystem::path counter_path,
                    crypto::SealKey key, crypto::Digest measurement);

    void initialize(std::uint64_t threshold);

    // Loads, validates against the counter service, consumes one query and
    // persists. Errors: QuotaExceeded, RollbackDetected, StorageUnavailable.
    GuardState begin_query();

    GuardState peek() const;
    bool initialized() const;

    // test hook, fired between persistence steps
    std::function<void(CrashPoint)> crash_hook;

private:
    GuardState load() const;
    void store(const GuardState& state);

    std::filesystem::path sealed_path_;
    crypto::SealKey key_;
    crypto::Digest measurement_;
    MonotonicCounterFile counter_;
    std::mutex mu_;
};

// ---- fine-grained signed-query tickets ----

struct QueryTicket {
    crypto::Digest query_digest{};
    Bytes sp_signature;

    Bytes serialize() const;
    static QueryTicket parse(ByteView raw);
};

QueryTicket issue_ticket(ByteView sp_signing_key, ByteView query_bytes);

// First-wins set of redeemed digests; safe for concurrent redeem.
class SpentSet {
public:
    SpentSet() = default;
    SpentSet(SpentSet&& other) noexcept;
    SpentSet& operator=(SpentSet&& other) noexcept;

    // Returns false if the digest was already present.
    bool insert(const crypto::Digest& d);
    bool contains(const crypto::Digest& d) const;
    std::size_t size() const;

    Bytes serialize() const;
    static SpentSet parse(ByteView raw);

private:
    mutable std::mutex mu_;
    std::unordered_set<std::string> set_;
};

// Verifies the signature and one-time use, then marks the ticket spent.
// Errors: BadSignature, DigestMismatch, TicketReused.
void redeem_ticket(ByteView sp_verify_key, const QueryTicket& ticket, ByteView query_bytes,
                   SpentSet& spent);

}  // namespace mlcapsule::guard
