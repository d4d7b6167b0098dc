#include "normgrad/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace normgrad {

namespace {

constexpr std::size_t kMaxJacobianDim = 64;

void check_dims(std::size_t h, const char* op) {
    if (h > kMaxJacobianDim) {
        throw std::invalid_argument(std::string(op) + ": H too large to materialize");
    }
}

}  // namespace

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols != rhs.rows) {
        throw std::invalid_argument("matmul: shape mismatch");
    }
    Matrix out(lhs.rows, rhs.cols);
    for (std::size_t i = 0; i < lhs.rows; ++i) {
        for (std::size_t k = 0; k < lhs.cols; ++k) {
            const double v = lhs.at(i, k);
            for (std::size_t j = 0; j < rhs.cols; ++j) {
                out.at(i, j) += v * rhs.at(k, j);
            }
        }
    }
    return out;
}

Vec matvec(const Matrix& m, const Vec& v) {
    if (m.cols != v.size()) {
        throw std::invalid_argument("matvec: shape mismatch");
    }
    Vec out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            acc += m.at(i, j) * v[j];
        }
        out[i] = acc;
    }
    return out;
}

double max_abs_diff(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.rows != rhs.rows || lhs.cols != rhs.cols) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < lhs.a.size(); ++i) {
        m = std::max(m, std::fabs(lhs.a[i] - rhs.a[i]));
    }
    return m;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_diff_grad: h must be > 0");
    }
    Vec grad(x.size());
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        probe[i] = xi + h;
        const double fp = f(probe);
        probe[i] = xi - h;
        const double fm = f(probe);
        probe[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NonFinite("finite_diff_grad: probe returned NaN/Inf");
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

Vec probe_forward(NormVariant variant, const Vec& xp, const ForwardCache& base,
                  const AffineParams* params, const AdaNormConfig* ada) {
    const std::size_t h = xp.size();
    if (h != base.x.size()) {
        throw std::invalid_argument("probe_forward: probe length mismatch");
    }
    switch (variant) {
        case NormVariant::NoNorm:
            return xp;
        case NormVariant::DetachNorm: {
            Vec out(h);
            for (std::size_t i = 0; i < h; ++i) {
                out[i] = (xp[i] - base.mu) / base.sigma;
            }
            return out;
        }
        case NormVariant::DetachMean: {
            // mu frozen; sigma recomputed about the probe's own mean.
            const double sigma_p = std_pop(xp);
            if (sigma_p == 0.0) {
                throw DegenerateInput("probe_forward: zero-spread probe");
            }
            Vec out(h);
            for (std::size_t i = 0; i < h; ++i) {
                out[i] = (xp[i] - base.mu) / sigma_p;
            }
            return out;
        }
        case NormVariant::DetachVariance: {
            const double mu_p = mean(xp);
            Vec out(h);
            for (std::size_t i = 0; i < h; ++i) {
                out[i] = (xp[i] - mu_p) / base.sigma;
            }
            return out;
        }
        case NormVariant::LayerNormSimple:
            return normalize(xp, 0.0).y;
        case NormVariant::LayerNorm: {
            if (params == nullptr) {
                throw std::invalid_argument("probe_forward: layernorm needs gain/bias");
            }
            Vec y = normalize(xp, 0.0).y;
            for (std::size_t i = 0; i < h; ++i) {
                y[i] = params->gain[i] * y[i] + params->bias[i];
            }
            return y;
        }
        case NormVariant::AdaNorm: {
            // Scale factors frozen at the base point; normalization itself
            // keeps its full dependence on the probe.
            if (base.phi.size() != h) {
                throw std::invalid_argument("probe_forward: cache has no scale factors");
            }
            Vec y = normalize(xp, 0.0).y;
            for (std::size_t i = 0; i < h; ++i) {
                y[i] = base.phi[i] * y[i];
            }
            return y;
        }
    }
    (void)ada;
    throw std::logic_error("probe_forward: unhandled variant");
}

Matrix analytic_jacobian(NormVariant variant, const ForwardCache& cache,
                         const AffineParams* params) {
    const std::size_t h = cache.x.size();
    check_dims(h, "analytic_jacobian");
    const double hd = static_cast<double>(h);
    const double inv_sigma = 1.0 / cache.sigma;
    const Vec& y = cache.y;

    Matrix j(h, h);
    switch (variant) {
        case NormVariant::NoNorm:
            for (std::size_t i = 0; i < h; ++i) j.at(i, i) = 1.0;
            return j;
        case NormVariant::DetachNorm:
            for (std::size_t i = 0; i < h; ++i) j.at(i, i) = inv_sigma;
            return j;
        case NormVariant::DetachMean:
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t k = 0; k < h; ++k) {
                    const double id = (i == k) ? 1.0 : 0.0;
                    j.at(i, k) = inv_sigma * (id - y[i] * y[k] / hd);
                }
            }
            return j;
        case NormVariant::DetachVariance:
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t k = 0; k < h; ++k) {
                    const double id = (i == k) ? 1.0 : 0.0;
                    j.at(i, k) = inv_sigma * (id - 1.0 / hd);
                }
            }
            return j;
        case NormVariant::LayerNormSimple:
        case NormVariant::LayerNorm:
        case NormVariant::AdaNorm: {
            for (std::size_t i = 0; i < h; ++i) {
                double row_scale = 1.0;
                if (variant == NormVariant::LayerNorm) {
                    if (params == nullptr) {
                        throw std::invalid_argument("analytic_jacobian: layernorm needs gain");
                    }
                    row_scale = params->gain[i];
                } else if (variant == NormVariant::AdaNorm) {
                    if (cache.phi.size() != h) {
                        throw std::invalid_argument("analytic_jacobian: cache has no scale factors");
                    }
                    row_scale = cache.phi[i];
                }
                for (std::size_t k = 0; k < h; ++k) {
                    const double id = (i == k) ? 1.0 : 0.0;
                    j.at(i, k) = row_scale * inv_sigma * (id - y[i] * y[k] / hd - 1.0 / hd);
                }
            }
            return j;
        }
    }
    throw std::logic_error("analytic_jacobian: unhandled variant");
}

Matrix numeric_jacobian(NormVariant variant, const Vec& x, double h,
                        const AffineParams* params, const AdaNormConfig* ada) {
    const std::size_t n = x.size();
    check_dims(n, "numeric_jacobian");
    if (!(h > 0.0)) {
        throw std::invalid_argument("numeric_jacobian: h must be > 0");
    }
    const ForwardCache base = forward(variant, x, params, ada, 0.0).cache;

    Matrix j(n, n);
    Vec probe = x;
    for (std::size_t col = 0; col < n; ++col) {
        const double xi = x[col];
        probe[col] = xi + h;
        const Vec fp = probe_forward(variant, probe, base, params, ada);
        probe[col] = xi - h;
        const Vec fm = probe_forward(variant, probe, base, params, ada);
        probe[col] = xi;
        for (std::size_t row = 0; row < n; ++row) {
            j.at(row, col) = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    return j;
}

JacobianPair compare_jacobians(NormVariant variant, const Vec& x, double h,
                               const AffineParams* params, const AdaNormConfig* ada) {
    JacobianPair pair;
    const ForwardCache cache = forward(variant, x, params, ada, 0.0).cache;
    pair.analytic = analytic_jacobian(variant, cache, params);
    pair.numeric = numeric_jacobian(variant, x, h, params, ada);
    pair.max_abs_err = max_abs_diff(pair.analytic, pair.numeric);
    return pair;
}

GradReport theorem1_stats(NormVariant variant, double sigma, const Vec& g, const Vec& dx) {
    GradReport r;
    r.variant = variant;
    r.H = g.size();
    const Moments mg = moments(g);
    const Moments md = moments(dx);
    r.measured_mean = md.mean;
    r.measured_var = md.var;
    r.predicted_var_bound_or_value = mg.var / (sigma * sigma);

    switch (variant) {
        case NormVariant::DetachNorm:
            r.predicted_mean = mg.mean / sigma;
            r.bound_is_equality = true;
            break;
        case NormVariant::LayerNormSimple:
            r.predicted_mean = 0.0;
            r.bound_is_equality = false;
            break;
        case NormVariant::DetachMean:
            r.predicted_mean = mg.mean / sigma;
            r.bound_is_equality = false;
            break;
        case NormVariant::DetachVariance:
            r.predicted_mean = 0.0;
            r.bound_is_equality = true;
            break;
        default:
            throw std::invalid_argument("theorem1_stats: variant has no moment prediction");
    }

    r.abs_error_mean = std::fabs(r.measured_mean - r.predicted_mean);
    if (r.bound_is_equality) {
        r.violation_var = std::fabs(r.measured_var - r.predicted_var_bound_or_value);
    } else {
        r.violation_var = std::max(0.0, r.measured_var - r.predicted_var_bound_or_value);
    }
    return r;
}

GradReport theorem1_report(NormVariant variant, const Vec& x, const Vec& g) {
    if (std_pop(x) <= 0.0) {
        throw DegenerateInput("theorem1_report: zero-spread input");
    }
    const ForwardOut f = forward(variant, x, nullptr, nullptr, 0.0);
    const BackwardResult b = backward(variant, f.cache, nullptr, nullptr, g);
    return theorem1_stats(variant, f.cache.sigma, g, b.dx);
}

bool satisfies_theorem1(const GradReport& r, double rel, double mean_abs_tol,
                        double var_abs_tol) {
    if (r.abs_error_mean > rel * std::fabs(r.predicted_mean) + mean_abs_tol) {
        return false;
    }
    if (r.bound_is_equality) {
        return r.violation_var <= rel * r.predicted_var_bound_or_value + var_abs_tol;
    }
    return r.violation_var <= var_abs_tol;
}

Vec random_test_vector(Rng& rng, std::size_t n) {
    for (;;) {
        Vec x = rng.gaussian_vec(n);
        if (std_pop(x) >= 1e-3) {
            return x;
        }
    }
}

Theorem2Report theorem2_numeric_check(double C, double k, std::size_t H,
                                      std::size_t trials, Rng& rng) {
    if (!(C > 0.0) || !(k > 0.0 && k < 1.0)) {
        throw std::invalid_argument("theorem2_numeric_check: need C > 0 and k in (0,1)");
    }
    Theorem2Report rep;
    rep.C = C;
    rep.k = k;
    rep.H = H;
    rep.trials = trials;
    rep.tail_bound = k * k;  // Chebyshev with var(y) = 1

    const AdaNormConfig ada{C, k};
    for (std::size_t t = 0; t < trials; ++t) {
        const Vec x = random_test_vector(rng, H);
        const ForwardOut f = forward(NormVariant::AdaNorm, x, nullptr, &ada, 0.0);
        rep.max_abs_err_phi_mean =
            std::max(rep.max_abs_err_phi_mean, std::fabs(mean(f.cache.phi) - C));
        rep.max_abs_err_z_mean =
            std::max(rep.max_abs_err_z_mean, std::fabs(mean(f.out) + C * k));
        rep.tail_components += f.cache.tail_count;
    }
    rep.total_components = H * trials;
    rep.tail_fraction = rep.total_components == 0
                            ? 0.0
                            : static_cast<double>(rep.tail_components) /
                                  static_cast<double>(rep.total_components);
    rep.identities_ok = rep.max_abs_err_phi_mean <= rep.identity_tol &&
                        rep.max_abs_err_z_mean <= rep.identity_tol;
    rep.tail_ok = rep.tail_fraction <= rep.tail_bound;
    return rep;
}

std::string to_text(const GradReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "variant=" << to_string(r.variant) << " H=" << r.H
       << " measured_mean=" << r.measured_mean << " measured_var=" << r.measured_var
       << " predicted_mean=" << r.predicted_mean
       << " predicted_var_bound_or_value=" << r.predicted_var_bound_or_value
       << " bound_is_equality=" << (r.bound_is_equality ? 1 : 0)
       << " abs_error_mean=" << r.abs_error_mean << " violation_var=" << r.violation_var;
    return os.str();
}

std::string to_text(const Theorem2Report& r) {
    std::ostringstream os;
    os.precision(17);
    os << "C=" << r.C << " k=" << r.k << " H=" << r.H << " trials=" << r.trials
       << " max_abs_err_phi_mean=" << r.max_abs_err_phi_mean
       << " max_abs_err_z_mean=" << r.max_abs_err_z_mean
       << " tail_fraction=" << r.tail_fraction << " tail_bound=" << r.tail_bound
       << " identities_ok=" << (r.identities_ok ? 1 : 0) << " tail_ok=" << (r.tail_ok ? 1 : 0);
    return os.str();
}

nlohmann::json to_json(const GradReport& r) {
    return nlohmann::json{
        {"variant", to_string(r.variant)},
        {"H", r.H},
        {"measured_mean", r.measured_mean},
        {"measured_var", r.measured_var},
        {"predicted_mean", r.predicted_mean},
        {"predicted_var_bound_or_value", r.predicted_var_bound_or_value},
        {"bound_is_equality", r.bound_is_equality},
        {"abs_error_mean", r.abs_error_mean},
        {"violation_var", r.violation_var},
    };
}

nlohmann::json to_json(const Theorem2Report& r) {
    return nlohmann::json{
        {"C", r.C},
        {"k", r.k},
        {"H", r.H},
        {"trials", r.trials},
        {"max_abs_err_phi_mean", r.max_abs_err_phi_mean},
        {"max_abs_err_z_mean", r.max_abs_err_z_mean},
        {"tail_components", r.tail_components},
        {"total_components", r.total_components},
        {"tail_fraction", r.tail_fraction},
        {"tail_bound", r.tail_bound},
        {"identities_ok", r.identities_ok},
        {"tail_ok", r.tail_ok},
    };
}

}  // namespace normgrad
