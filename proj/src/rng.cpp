#include "normgrad/rng.hpp"

#include <cmath>
#include <numbers>

namespace normgrad {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    // Rejection sampling against the largest multiple of n, so the result is
    // unbiased and the stream stays deterministic.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = 0;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
}

Vec Rng::gaussian_vec(std::size_t n) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = gaussian();
    }
    return v;
}

Rng Rng::substream(std::uint64_t purpose) const {
    // splitmix64 over (seed ^ purpose); decorrelates substreams cheaply.
    std::uint64_t z = seed_ ^ (purpose * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z = z ^ (z >> 31);
    return Rng(z);
}

}  // namespace normgrad
