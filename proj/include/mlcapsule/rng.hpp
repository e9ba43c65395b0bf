#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>

namespace mlcapsule {

// Randomness source for simulated-hardware coins and test harnesses.
// Cryptographic key generation does not go through this interface; it always
// uses the process CSPRNG.
class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;
    virtual std::uint64_t next_u64() = 0;
};

// CSPRNG-backed (libsodium randombytes).
class SystemRng final : public Rng {
public:
    void fill(std::span<std::uint8_t> out) override;
    std::uint64_t next_u64() override;
};

// Deterministic stream for reproducible games and experiments.
class SeededRng final : public Rng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    void fill(std::span<std::uint8_t> out) override;
    std::uint64_t next_u64() override { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace mlcapsule
