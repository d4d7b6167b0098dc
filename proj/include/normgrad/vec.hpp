#pragma once

#include <cstddef>
#include <vector>

#include "normgrad/errors.hpp"

namespace normgrad {

// H-dimensional vector of 64-bit reals. Length is fixed by whoever builds it;
// every operation below treats the contents as immutable.
using Vec = std::vector<double>;

// Mean, population standard deviation (divisor H, never H-1) and variance.
struct Moments {
    double mean = 0.0;
    double std = 0.0;
    double var = 0.0;
};

// Arithmetic mean, summed left to right.
double mean(const Vec& v);

// Population standard deviation: sqrt((1/H) * sum (v_i - mean)^2).
double std_pop(const Vec& v);

// Population variance, same divisor.
double var_pop(const Vec& v);

// Two-pass mean/std/var in one call.
Moments moments(const Vec& v);

// sum u_i * v_i in fixed left-to-right order. Throws on length mismatch.
double dot(const Vec& u, const Vec& v);

// max_i |v_i|; 0 for the empty vector.
double max_abs(const Vec& v);

bool all_finite(const Vec& v);

// Throws NonFinite naming `what` if any entry is NaN/Inf.
void require_finite(const Vec& v, const char* what);

}  // namespace normgrad
