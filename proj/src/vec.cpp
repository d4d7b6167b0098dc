#include "normgrad/vec.hpp"

#include <cmath>
#include <stdexcept>

namespace normgrad {

double mean(const Vec& v) {
    if (v.empty()) {
        throw std::invalid_argument("mean: empty vector");
    }
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    return sum / static_cast<double>(v.size());
}

double var_pop(const Vec& v) {
    const double mu = mean(v);
    double acc = 0.0;
    for (double x : v) {
        const double d = x - mu;
        acc += d * d;
    }
    return acc / static_cast<double>(v.size());
}

double std_pop(const Vec& v) {
    return std::sqrt(var_pop(v));
}

Moments moments(const Vec& v) {
    Moments m;
    m.mean = mean(v);
    double acc = 0.0;
    for (double x : v) {
        const double d = x - m.mean;
        acc += d * d;
    }
    m.var = acc / static_cast<double>(v.size());
    m.std = std::sqrt(m.var);
    return m;
}

double dot(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sum += u[i] * v[i];
    }
    return sum;
}

double max_abs(const Vec& v) {
    double m = 0.0;
    for (double x : v) {
        const double a = std::fabs(x);
        if (a > m) {
            m = a;
        }
    }
    return m;
}

bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

void require_finite(const Vec& v, const char* what) {
    if (!all_finite(v)) {
        throw NonFinite(std::string(what) + ": non-finite entry");
    }
}

}  // namespace normgrad
