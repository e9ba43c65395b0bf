#include "mlcapsule/rng.hpp"

#include <sodium.h>

#include <cstring>

namespace mlcapsule {

void SystemRng::fill(std::span<std::uint8_t> out) {
    randombytes_buf(out.data(), out.size());
}

std::uint64_t SystemRng::next_u64() {
    std::uint64_t v;
    randombytes_buf(&v, sizeof v);
    return v;
}

void SeededRng::fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t v = engine_();
        std::size_t n = std::min(sizeof v, out.size() - i);
        std::memcpy(out.data() + i, &v, n);
        i += n;
    }
}

}  // namespace mlcapsule
