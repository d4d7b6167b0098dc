#pragma once

#include <cstddef>
#include <string>

#include "normgrad/vec.hpp"

namespace normgrad {

// The six normalization behaviors plus the identity. LayerNormSimple,
// DetachNorm, DetachMean and DetachVariance share one forward rule and differ
// only in which derivatives the backward pass keeps:
//
//   LayerNorm       h  = gain (.) y + bias,  y = (x - mu) / sigma
//   LayerNormSimple y  (full backward through mu and sigma)
//   DetachNorm      y  (mu and sigma treated as constants in backward)
//   DetachMean      y  (only mu's derivative cut)
//   DetachVariance  y  (only sigma's derivative cut)
//   AdaNorm         z  = C(1 - k*y) (.) y, the scale factor detached
//   NoNorm          identity
enum class NormVariant {
    LayerNorm,
    LayerNormSimple,
    DetachNorm,
    DetachMean,
    DetachVariance,
    AdaNorm,
    NoNorm,
};

// Canonical lowercase name ("layernorm-simple", "detach-mean", ...).
std::string to_string(NormVariant v);

// Parses a variant name, case-insensitive and ignoring '-'/'_'.
// Throws std::invalid_argument on unknown names.
NormVariant parse_variant(const std::string& name);

// Elementwise gain and bias, same length H as the layer. LayerNorm only.
struct AffineParams {
    Vec gain;
    Vec bias;
};

// AdaNorm scale function phi(y) = C * (1 - k*y).
struct AdaNormConfig {
    double C = 1.0;   // average scaling weight, > 0
    double k = 0.1;   // in (0, 1)
};

// Everything the exact backward pass needs, captured at forward time.
// Immutable after forward; a single cache may be read concurrently.
struct ForwardCache {
    Vec x;
    double mu = 0.0;
    double sigma = 1.0;   // the divisor actually used (eps floor included)
    Vec y;                // (x - mu) / sigma
    Vec phi;              // C(1 - k*y); filled iff variant == AdaNorm
    std::size_t tail_count = 0;  // AdaNorm: components with |y_i| >= 1/k
    NormVariant variant = NormVariant::NoNorm;
};

struct BackwardResult {
    Vec dx;
    Vec dgain;   // filled iff variant == LayerNorm
    Vec dbias;   // filled iff variant == LayerNorm
};

struct Normalized {
    Vec y;
    double mu = 0.0;
    double sigma = 0.0;
};

// y = (x - mu) / sigma_eff with sigma_eff = max(std_pop(x), eps) when eps > 0.
// With eps = 0 a zero-spread input throws DegenerateInput.
// Requires H >= 2 and finite entries.
Normalized normalize(const Vec& x, double eps);

struct ForwardOut {
    Vec out;
    ForwardCache cache;
};

// Dispatching forward pass. `params` must be supplied iff variant ==
// LayerNorm, `ada` iff variant == AdaNorm (std::invalid_argument otherwise).
ForwardOut forward(NormVariant variant, const Vec& x, const AffineParams* params,
                   const AdaNormConfig* ada, double eps);

// dx = (1/sigma) * (g - mean(g)*1 - (dot(y,g)/H) * y).
// Three vector passes; the HxH map is never materialized here.
Vec backward_simple(const ForwardCache& cache, const Vec& g);

// dx = g / sigma.
Vec backward_detach_all(const ForwardCache& cache, const Vec& g);

// dx = (1/sigma) * (g - (dot(y,g)/H) * y).
Vec backward_detach_mean(const ForwardCache& cache, const Vec& g);

// dx = (1/sigma) * (g - mean(g)*1).
Vec backward_detach_variance(const ForwardCache& cache, const Vec& g);

// dbias = g, dgain = g (.) y, dx = backward_simple on gain (.) g.
BackwardResult backward_layernorm(const ForwardCache& cache, const AffineParams& params,
                                  const Vec& g);

// The scale factor is detached, so dx = backward_simple on phi (.) g.
Vec backward_adanorm(const ForwardCache& cache, const AdaNormConfig& ada, const Vec& g);

// Dispatch to the per-variant rule; NoNorm returns dx = g.
// Throws std::invalid_argument on a variant/cache mismatch.
BackwardResult backward(NormVariant variant, const ForwardCache& cache,
                        const AffineParams* params, const AdaNormConfig* ada, const Vec& g);

}  // namespace normgrad
