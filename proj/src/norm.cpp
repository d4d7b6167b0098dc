#include "normgrad/norm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace normgrad {

std::string to_string(NormVariant v) {
    switch (v) {
        case NormVariant::LayerNorm: return "layernorm";
        case NormVariant::LayerNormSimple: return "layernorm-simple";
        case NormVariant::DetachNorm: return "detachnorm";
        case NormVariant::DetachMean: return "detach-mean";
        case NormVariant::DetachVariance: return "detach-variance";
        case NormVariant::AdaNorm: return "adanorm";
        case NormVariant::NoNorm: return "nonorm";
    }
    throw std::logic_error("to_string: bad NormVariant");
}

NormVariant parse_variant(const std::string& name) {
    std::string key;
    for (char c : name) {
        if (c == '-' || c == '_') continue;
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (key == "layernorm") return NormVariant::LayerNorm;
    if (key == "layernormsimple") return NormVariant::LayerNormSimple;
    if (key == "detachnorm") return NormVariant::DetachNorm;
    if (key == "detachmean") return NormVariant::DetachMean;
    if (key == "detachvariance") return NormVariant::DetachVariance;
    if (key == "adanorm") return NormVariant::AdaNorm;
    if (key == "nonorm" || key == "none") return NormVariant::NoNorm;
    throw std::invalid_argument("unknown norm variant: " + name);
}

Normalized normalize(const Vec& x, double eps) {
    if (x.size() < 2) {
        throw std::invalid_argument("normalize: H must be >= 2");
    }
    if (eps < 0.0) {
        throw std::invalid_argument("normalize: eps must be >= 0");
    }
    require_finite(x, "normalize input");

    const Moments m = moments(x);
    double sigma = m.std;
    if (eps > 0.0) {
        sigma = std::max(sigma, eps);
    } else if (sigma == 0.0) {
        throw DegenerateInput("normalize: zero-spread input with eps = 0");
    }

    Normalized r;
    r.mu = m.mean;
    r.sigma = sigma;
    r.y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.y[i] = (x[i] - m.mean) / sigma;
    }
    return r;
}

namespace {

void check_length(const Vec& g, const ForwardCache& cache, const char* op) {
    if (g.size() != cache.x.size()) {
        throw std::invalid_argument(std::string(op) + ": upstream gradient length mismatch");
    }
    require_finite(g, op);
}

}  // namespace

ForwardOut forward(NormVariant variant, const Vec& x, const AffineParams* params,
                   const AdaNormConfig* ada, double eps) {
    if ((variant == NormVariant::LayerNorm) != (params != nullptr)) {
        throw std::invalid_argument("forward: gain/bias supplied iff variant is layernorm");
    }
    if ((variant == NormVariant::AdaNorm) != (ada != nullptr)) {
        throw std::invalid_argument("forward: adanorm config supplied iff variant is adanorm");
    }

    ForwardOut r;
    r.cache.variant = variant;

    if (variant == NormVariant::NoNorm) {
        require_finite(x, "forward input");
        r.cache.x = x;
        r.cache.mu = 0.0;
        r.cache.sigma = 1.0;
        r.cache.y = x;
        r.out = x;
        return r;
    }

    Normalized n = normalize(x, eps);
    r.cache.x = x;
    r.cache.mu = n.mu;
    r.cache.sigma = n.sigma;
    r.cache.y = std::move(n.y);

    switch (variant) {
        case NormVariant::LayerNorm: {
            if (params->gain.size() != x.size() || params->bias.size() != x.size()) {
                throw std::invalid_argument("forward: gain/bias length mismatch");
            }
            r.out.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                r.out[i] = params->gain[i] * r.cache.y[i] + params->bias[i];
            }
            break;
        }
        case NormVariant::LayerNormSimple:
        case NormVariant::DetachNorm:
        case NormVariant::DetachMean:
        case NormVariant::DetachVariance:
            // Identical forward; the variants differ only in backward.
            r.out = r.cache.y;
            break;
        case NormVariant::AdaNorm: {
            if (!(ada->C > 0.0) || !(ada->k > 0.0 && ada->k < 1.0)) {
                throw std::invalid_argument("forward: adanorm requires C > 0 and k in (0,1)");
            }
            const double inv_k = 1.0 / ada->k;
            r.cache.phi.resize(x.size());
            r.out.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double yi = r.cache.y[i];
                const double phi = ada->C * (1.0 - ada->k * yi);
                r.cache.phi[i] = phi;
                r.out[i] = phi * yi;
                // phi is unclamped; it flips sign past y_i = 1/k. Count how
                // often a component leaves the |y_i| < 1/k range.
                if (std::fabs(yi) >= inv_k) {
                    ++r.cache.tail_count;
                }
            }
            break;
        }
        default:
            throw std::logic_error("forward: unhandled variant");
    }

    require_finite(r.out, "forward output");
    return r;
}

Vec backward_simple(const ForwardCache& cache, const Vec& g) {
    check_length(g, cache, "backward_simple");
    const std::size_t h = g.size();
    const double g_mean = mean(g);
    const double yg_over_h = dot(cache.y, g) / static_cast<double>(h);
    Vec dx(h);
    for (std::size_t i = 0; i < h; ++i) {
        dx[i] = (g[i] - g_mean - yg_over_h * cache.y[i]) / cache.sigma;
    }
    return dx;
}

Vec backward_detach_all(const ForwardCache& cache, const Vec& g) {
    check_length(g, cache, "backward_detach_all");
    Vec dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        dx[i] = g[i] / cache.sigma;
    }
    return dx;
}

Vec backward_detach_mean(const ForwardCache& cache, const Vec& g) {
    check_length(g, cache, "backward_detach_mean");
    const std::size_t h = g.size();
    const double yg_over_h = dot(cache.y, g) / static_cast<double>(h);
    Vec dx(h);
    for (std::size_t i = 0; i < h; ++i) {
        dx[i] = (g[i] - yg_over_h * cache.y[i]) / cache.sigma;
    }
    return dx;
}

Vec backward_detach_variance(const ForwardCache& cache, const Vec& g) {
    check_length(g, cache, "backward_detach_variance");
    const double g_mean = mean(g);
    Vec dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        dx[i] = (g[i] - g_mean) / cache.sigma;
    }
    return dx;
}

BackwardResult backward_layernorm(const ForwardCache& cache, const AffineParams& params,
                                  const Vec& g) {
    check_length(g, cache, "backward_layernorm");
    const std::size_t h = g.size();
    BackwardResult r;
    r.dbias = g;
    r.dgain.resize(h);
    Vec inner(h);
    for (std::size_t i = 0; i < h; ++i) {
        r.dgain[i] = g[i] * cache.y[i];
        inner[i] = params.gain[i] * g[i];
    }
    r.dx = backward_simple(cache, inner);
    return r;
}

Vec backward_adanorm(const ForwardCache& cache, const AdaNormConfig&, const Vec& g) {
    check_length(g, cache, "backward_adanorm");
    if (cache.phi.size() != g.size()) {
        throw std::invalid_argument("backward_adanorm: cache has no scale factors");
    }
    Vec inner(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        inner[i] = cache.phi[i] * g[i];
    }
    return backward_simple(cache, inner);
}

BackwardResult backward(NormVariant variant, const ForwardCache& cache,
                        const AffineParams* params, const AdaNormConfig* ada, const Vec& g) {
    if (variant != cache.variant) {
        throw std::invalid_argument("backward: variant does not match cache");
    }
    BackwardResult r;
    switch (variant) {
        case NormVariant::LayerNorm:
            if (params == nullptr) {
                throw std::invalid_argument("backward: layernorm needs gain/bias");
            }
            return backward_layernorm(cache, *params, g);
        case NormVariant::LayerNormSimple:
            r.dx = backward_simple(cache, g);
            return r;
        case NormVariant::DetachNorm:
            r.dx = backward_detach_all(cache, g);
            return r;
        case NormVariant::DetachMean:
            r.dx = backward_detach_mean(cache, g);
            return r;
        case NormVariant::DetachVariance:
            r.dx = backward_detach_variance(cache, g);
            return r;
        case NormVariant::AdaNorm:
            if (ada == nullptr) {
                throw std::invalid_argument("backward: adanorm needs its config");
            }
            r.dx = backward_adanorm(cache, *ada, g);
            return r;
        case NormVariant::NoNorm:
            require_finite(g, "backward");
            r.dx = g;
            return r;
    }
    throw std::logic_error("backward: unhandled variant");
}

}  // namespace normgrad
