#include <doctest.h>

#include <cmath>

#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

using namespace normgrad;

TEST_CASE("identical seed gives identical streams") {
    Rng a(1234);
    Rng b(1234);
    CHECK(a.gaussian_vec(3) == b.gaussian_vec(3));
    CHECK(a.uniform01() == b.uniform01());
    CHECK(a.uniform_int(1000) == b.uniform_int(1000));
}

TEST_CASE("different seeds diverge") {
    Rng a(1);
    Rng b(2);
    CHECK(a.gaussian_vec(8) != b.gaussian_vec(8));
}

TEST_CASE("gaussian sample moments match the standard normal") {
    Rng rng(7);
    const std::size_t n = 1000000;
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.gaussian();
        sum += x;
        sq += x * x;
    }
    const double m = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - m * m;
    CHECK(std::fabs(m) <= 0.01);
    CHECK(std::fabs(var - 1.0) <= 0.01);
}

TEST_CASE("uniform_int stays in range") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.uniform_int(17) < 17);
    }
}

TEST_CASE("substreams are deterministic and distinct") {
    Rng base(5);
    Rng s1 = base.substream(1);
    Rng s1_again = Rng(5).substream(1);
    Rng s2 = base.substream(2);
    CHECK(s1.gaussian_vec(4) == s1_again.gaussian_vec(4));
    CHECK(Rng(5).substream(1).gaussian_vec(4) != s2.gaussian_vec(4));
}

TEST_CASE("algorithm identifier is stable") {
    CHECK(Rng::algorithm() == "mt19937_64/box-muller");
}
