#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "normgrad/norm.hpp"
#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

#include <nlohmann/json_fwd.hpp>

namespace normgrad {

// Small dense row-major matrix; Jacobians are materialized only at desk scale.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

Matrix matmul(const Matrix& lhs, const Matrix& rhs);
Vec matvec(const Matrix& m, const Vec& v);
double max_abs_diff(const Matrix& lhs, const Matrix& rhs);

// Central differences: ((f(x + h e_i) - f(x - h e_i)) / 2h)_i.
// Throws NonFinite if a probe returns NaN/Inf.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

// Forward pass at a probe point with the variant's detach semantics applied:
// quantities the variant detaches (mu, sigma, phi) stay frozen at the values
// in `base`, everything else is recomputed from `xp`.
Vec probe_forward(NormVariant variant, const Vec& xp, const ForwardCache& base,
                  const AffineParams* params, const AdaNormConfig* ada);

// Jacobian d out_i / d x_j of the variant's forward rule, entry (i, j).
// The four core variants give the symmetric maps
//   layernorm-simple -> W1 = (1/sigma)(I - y y^T/H - 1 1^T/H)
//   detach-mean      -> W2 = (1/sigma)(I - y y^T/H)
//   detach-variance  -> W3 = (1/sigma)(I - 1 1^T/H)
//   detachnorm       -> (1/sigma) I
// layernorm/adanorm additionally scale rows by gain/phi; nonorm is I.
// Requires H <= 64; `params` needed for layernorm only.
Matrix analytic_jacobian(NormVariant variant, const ForwardCache& cache,
                         const AffineParams* params = nullptr);

// Column j = central difference of the (detach-aware) forward output w.r.t.
// x_j. Same layout as analytic_jacobian. Requires H <= 64.
Matrix numeric_jacobian(NormVariant variant, const Vec& x, double h,
                        const AffineParams* params = nullptr,
                        const AdaNormConfig* ada = nullptr);

struct JacobianPair {
    Matrix analytic;
    Matrix numeric;
    double max_abs_err = 0.0;
};

JacobianPair compare_jacobians(NormVariant variant, const Vec& x, double h,
                               const AffineParams* params = nullptr,
                               const AdaNormConfig* ada = nullptr);

// Measured vs predicted input-gradient moments for one (x, g) case.
struct GradReport {
    NormVariant variant = NormVariant::LayerNormSimple;
    std::size_t H = 0;
    double measured_mean = 0.0;
    double measured_var = 0.0;
    double predicted_mean = 0.0;
    double predicted_var_bound_or_value = 0.0;
    bool bound_is_equality = false;
    double abs_error_mean = 0.0;
    // Inequality cases: max(0, measured - bound). Equality cases:
    // |measured - predicted|. Zero (up to fp noise) when satisfied.
    double violation_var = 0.0;
};

// Fills a report from an already-computed (g, dx) pair. `sigma` is the
// divisor the backward rule used. Accepts the four core variants.
GradReport theorem1_stats(NormVariant variant, double sigma, const Vec& g, const Vec& dx);

// Runs forward + backward (eps = 0) on (x, g) and reports the moments.
GradReport theorem1_report(NormVariant variant, const Vec& x, const Vec& g);

// True when the report satisfies its prediction within
//   mean:            |m - p| <= rel*|p| + mean_abs_tol
//   var (equality):  |m - p| <= rel*p   + var_abs_tol
//   var (bound):     m <= p + var_abs_tol
bool satisfies_theorem1(const GradReport& r, double rel, double mean_abs_tol,
                        double var_abs_tol);

// Numeric verification of the constructed scale function phi(y) = C(1 - k*y):
// per-trial mean(phi) = C and mean(z) = -C*k to fp tolerance, and the
// fraction of components with |y_i| >= 1/k stays within the Chebyshev bound
// k^2 (variance of y is 1).
struct Theorem2Report {
    double C = 1.0;
    double k = 0.1;
    std::size_t H = 0;
    std::size_t trials = 0;
    double max_abs_err_phi_mean = 0.0;
    double max_abs_err_z_mean = 0.0;
    std::size_t tail_components = 0;
    std::size_t total_components = 0;
    double tail_fraction = 0.0;
    double tail_bound = 0.0;
    double identity_tol = 1e-12;
    bool identities_ok = false;
    bool tail_ok = false;

    bool ok() const { return identities_ok && tail_ok; }
};

Theorem2Report theorem2_numeric_check(double C, double k, std::size_t H,
                                      std::size_t trials, Rng& rng);

// Draws a standard-normal vector, rejecting spreads below 1e-3 so 1/sigma
// factors stay well-conditioned in tolerance arithmetic.
Vec random_test_vector(Rng& rng, std::size_t n);

// Line-oriented plain text and structured JSON forms of the reports.
std::string to_text(const GradReport& r);
std::string to_text(const Theorem2Report& r);
nlohmann::json to_json(const GradReport& r);
nlohmann::json to_json(const Theorem2Report& r);

}  // namespace normgrad
