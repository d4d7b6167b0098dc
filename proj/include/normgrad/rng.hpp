#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "normgrad/vec.hpp"

namespace normgrad {

// Deterministic random stream: a fixed engine plus a fixed gaussian
// transform, so the same seed reproduces the same values on every platform.
// One stream per thread of execution; never share an Rng across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    // Algorithm identifier recorded in experiment provenance.
    static std::string algorithm() { return "mt19937_64/box-muller"; }

    std::uint64_t seed() const { return seed_; }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal variate (Box-Muller, spare cached).
    double gaussian();

    // n standard-normal variates.
    Vec gaussian_vec(std::size_t n);

    // Derives an independent deterministic substream for `purpose`.
    Rng substream(std::uint64_t purpose) const;

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace normgrad
