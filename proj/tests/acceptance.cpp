// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// non-skipped criterion fails. The MNIST check is skipped (not failed) when
// the IDX files are absent; point NORMGRAD_MNIST_DIR at a directory holding
//   train-images-idx3-ubyte  train-labels-idx1-ubyte
//   t10k-images-idx3-ubyte   t10k-labels-idx1-ubyte
// (default search path: ./data/mnist).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "normgrad/csv.hpp"
#include "normgrad/dataset.hpp"
#include "normgrad/gradcheck.hpp"
#include "normgrad/harness.hpp"
#include "normgrad/net.hpp"
#include "normgrad/norm.hpp"
#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

using namespace normgrad;

namespace {

struct Outcome {
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

int g_failures = 0;

void report(int index, const std::string& name, const Outcome& outcome, double seconds) {
    std::ostringstream line;
    line.precision(3);
    line << "[" << index << "] " << name << " ... ";
    if (outcome.skipped) {
        line << "SKIP";
    } else if (outcome.pass) {
        line << "PASS";
    } else {
        line << "FAIL";
        ++g_failures;
    }
    line << " (" << std::fixed << seconds << "s)";
    if (!outcome.detail.empty()) {
        line << " - " << outcome.detail;
    }
    std::cout << line.str() << std::endl;
}

template <typename Fn>
void run_criterion(int index, const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
        outcome = fn();
    } catch (const std::exception& e) {
        outcome.pass = false;
        outcome.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(index, name, outcome, secs);
}

const NormVariant kCoreVariants[] = {
    NormVariant::DetachNorm,
    NormVariant::LayerNormSimple,
    NormVariant::DetachMean,
    NormVariant::DetachVariance,
};

const NormVariant kAllVariants[] = {
    NormVariant::LayerNorm,      NormVariant::LayerNormSimple, NormVariant::DetachNorm,
    NormVariant::DetachMean,     NormVariant::DetachVariance,  NormVariant::AdaNorm,
    NormVariant::NoNorm,
};

// 1. Forward invariants: mean(y) within 1e-12*max|x|, std_pop(y) = 1
//    within 1e-9, 1000 random vectors per H in {2,3,8,64,512}.
Outcome forward_invariants() {
    Rng rng(20250807);
    double worst_mean = 0.0;
    double worst_std = 0.0;
    for (std::size_t h : {2, 3, 8, 64, 512}) {
        for (int trial = 0; trial < 1000; ++trial) {
            Vec x = random_test_vector(rng, h);
            const double scale = std::exp((rng.uniform01() - 0.5) * 10.0);
            const double offset = (rng.uniform01() - 0.5) * 2000.0;
            for (double& v : x) v = v * scale + offset;
            const Normalized n = normalize(x, 0.0);
            const double mean_err = std::fabs(mean(n.y)) / std::max(1.0, max_abs(x));
            const double std_err = std::fabs(std_pop(n.y) - 1.0);
            worst_mean = std::max(worst_mean, mean_err);
            worst_std = std::max(worst_std, std_err);
            if (mean_err > 1e-12 || std_err > 1e-9) {
                return {false, false,
                        "H=" + std::to_string(h) + " mean_err=" + csv::format_double(mean_err) +
                            " std_err=" + csv::format_double(std_err)};
            }
        }
    }
    return {true, false,
            "worst mean_err=" + csv::format_double(worst_mean) +
                " worst std_err=" + csv::format_double(worst_std)};
}

// 2. Theorem 1 moment identities/bounds: 1000 (x,g) pairs per variant per
//    H in {3,8,64,512}; equalities at relative 1e-10, violations <= 1e-12.
Outcome theorem1_suite() {
    Rng rng(20250808);
    double worst_mean = 0.0;
    double worst_viol = 0.0;
    for (NormVariant v : kCoreVariants) {
        for (std::size_t h : {3, 8, 64, 512}) {
            for (int trial = 0; trial < 1000; ++trial) {
                const Vec x = random_test_vector(rng, h);
                const Vec g = rng.gaussian_vec(h);
                const GradReport r = theorem1_report(v, x, g);
                const double g_scale = max_abs(g) / std_pop(x);
                if (!satisfies_theorem1(r, 1e-10, 1e-12 * g_scale, 1e-12)) {
                    return {false, false, to_text(r)};
                }
                worst_mean = std::max(worst_mean, r.abs_error_mean);
                worst_viol = std::max(worst_viol, r.violation_var);
            }
        }
    }
    return {true, false,
            "worst mean_err=" + csv::format_double(worst_mean) +
                " worst var_violation=" + csv::format_double(worst_viol)};
}

// 3. Oracle equivalence: analytic vs numeric Jacobians <= 1e-6 (H <= 16,
//    50 trials per variant) and end-to-end MLP gradients vs central
//    differences <= 1e-5 (2-4-4-3 network, 20 seeds, every variant).
Outcome oracle_equivalence() {
    Rng rng(20250809);
    const AdaNormConfig ada{1.0, 0.1};
    double worst_jac = 0.0;
    for (NormVariant v : kAllVariants) {
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t h = 3 + rng.uniform_int(14);
            const Vec x = random_test_vector(rng, h);
            AffineParams affine;
            const AffineParams* params = nullptr;
            if (v == NormVariant::LayerNorm) {
                affine.gain = rng.gaussian_vec(h);
                affine.bias = rng.gaussian_vec(h);
                params = &affine;
            }
            const AdaNormConfig* ada_ptr = v == NormVariant::AdaNorm ? &ada : nullptr;
            const JacobianPair pair = compare_jacobians(v, x, 1e-5, params, ada_ptr);
            worst_jac = std::max(worst_jac, pair.max_abs_err);
            if (pair.max_abs_err > 1e-6) {
                return {false, false,
                        "jacobian " + to_string(v) +
                            " err=" + csv::format_double(pair.max_abs_err)};
            }
        }
    }

    double worst_mlp = 0.0;
    for (NormVariant v : kAllVariants) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            Rng model_rng(seed);
            MlpModel model = make_mlp(model_rng, 2, {4, 4}, 3, v, ada, 1e-5);
            // Central differences need the probe to sit away from the ReLU
            // kinks and away from tiny per-layer spreads (the normalize
            // map's higher derivatives grow as 1/sigma^3); redraw the input
            // until both margins clear.
            Vec x = model_rng.gaussian_vec(2);
            for (int attempt = 0; attempt < 200; ++attempt) {
                const MlpTrace probe_trace = mlp_forward(model, x);
                double min_gap = 1e300;
                double min_sigma = 1e300;
                for (const LayerTrace& lt : probe_trace.layers) {
                    min_sigma = std::min(min_sigma, lt.cache.sigma);
                    for (double vpost : lt.post_norm) {
                        min_gap = std::min(min_gap, std::fabs(vpost));
                    }
                }
                if (min_gap >= 1e-2 && min_sigma >= 0.2) {
                    break;
                }
                x = model_rng.gaussian_vec(2);
            }
            const std::size_t label = model_rng.uniform_int(3);

            const MlpTrace base = mlp_forward(model, x);
            const LossGrad lg = softmax_xent(base.logits, label);
            zero_grads(model);
            const Vec dinput = mlp_backward(model, base, lg.dlogits);

            const auto loss_at = [&](const Vec& probe_x) {
                return softmax_xent(mlp_forward_frozen(model, probe_x, base), label).loss;
            };
            const double h_fd = 1e-4;
            for (const ParamRef& ref : params(model)) {
                for (std::size_t i = 0; i < ref.value->size(); ++i) {
                    const double saved = (*ref.value)[i];
                    (*ref.value)[i] = saved + h_fd;
                    const double lp = loss_at(x);
                    (*ref.value)[i] = saved - h_fd;
                    const double lm = loss_at(x);
                    (*ref.value)[i] = saved;
                    const double fd = (lp - lm) / (2.0 * h_fd);
                    worst_mlp = std::max(worst_mlp, std::fabs(fd - (*ref.grad)[i]));
                }
            }
            Vec probe = x;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double saved = probe[i];
                probe[i] = saved + h_fd;
                const double lp = loss_at(probe);
                probe[i] = saved - h_fd;
                const double lm = loss_at(probe);
                probe[i] = saved;
                const double fd = (lp - lm) / (2.0 * h_fd);
                worst_mlp = std::max(worst_mlp, std::fabs(fd - dinput[i]));
            }
            if (worst_mlp > 1e-5) {
                return {false, false,
                        "mlp " + to_string(v) + " seed=" + std::to_string(seed) +
                            " err=" + csv::format_double(worst_mlp)};
            }
        }
    }
    return {true, false,
            "worst jacobian_err=" + csv::format_double(worst_jac) +
                " worst mlp_err=" + csv::format_double(worst_mlp)};
}

// 4. AdaNorm identities: per-trial mean(phi)=C and mean(z)=-C*k within
//    1e-12 over 1e4 trials; |y_i| >= 10 on at most 1% of components.
Outcome adanorm_identities() {
    Rng rng(20250810);
    const Theorem2Report rep = theorem2_numeric_check(1.0, 0.1, 128, 10000, rng);
    const bool pass = rep.identities_ok && rep.tail_fraction <= 0.01;
    return {pass, false,
            "max_phi_mean_err=" + csv::format_double(rep.max_abs_err_phi_mean) +
                " max_z_mean_err=" + csv::format_double(rep.max_abs_err_z_mean) +
                " tail_fraction=" + csv::format_double(rep.tail_fraction)};
}

// 5. Kernel identities of the backward maps, H <= 16, entrywise <= 1e-12.
Outcome kernel_identities() {
    Rng rng(20250811);
    double worst = 0.0;
    for (std::size_t h = 2; h <= 16; ++h) {
        for (int trial = 0; trial < 25; ++trial) {
            const Vec x = random_test_vector(rng, h);
            const ForwardCache cache =
                forward(NormVariant::LayerNormSimple, x, nullptr, nullptr, 0.0).cache;
            const Vec ones(h, 1.0);
            worst = std::max(worst, max_abs(backward_simple(cache, ones)));
            worst = std::max(worst, max_abs(backward_simple(cache, cache.y)));
            worst = std::max(worst, max_abs(backward_detach_mean(cache, cache.y)));
            worst = std::max(worst, max_abs(backward_detach_variance(cache, ones)));

            const Matrix w1 = analytic_jacobian(NormVariant::LayerNormSimple, cache);
            const Matrix w2 = analytic_jacobian(NormVariant::DetachMean, cache);
            Matrix center(h, h);
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t c = 0; c < h; ++c) {
                    center.at(r, c) = (r == c ? 1.0 : 0.0) - 1.0 / static_cast<double>(h);
                }
            }
            worst = std::max(worst, max_abs_diff(matmul(center, w2), w1));
            if (worst > 1e-12) {
                return {false, false, "H=" + std::to_string(h) +
                                          " err=" + csv::format_double(worst)};
            }
        }
    }
    return {true, false, "worst=" + csv::format_double(worst)};
}

ExperimentConfig training_config(NormVariant v) {
    ExperimentConfig cfg;
    cfg.variant = v;
    if (v == NormVariant::AdaNorm) {
        cfg.ada_C = 1.0;
        cfg.ada_k = 0.1;
    }
    cfg.depth = 4;
    cfg.width = 128;
    cfg.optimizer.kind = OptimizerConfig::Kind::Adam;
    cfg.optimizer.lr = 1e-3;
    cfg.epochs = 200;
    cfg.batch_size = 32;
    cfg.seed = 7;
    cfg.dataset.kind = DatasetConfig::Kind::Blobs;
    cfg.dataset.classes = 3;
    cfg.dataset.per_class = 100;
    cfg.dataset.dim = 16;
    cfg.dataset.spread = 0.2;
    cfg.eps = 1e-5;
    cfg.out_dir = "acceptance_tmp/train";
    return cfg;
}

// 6. Training sanity on blobs (depth 4, width 128, Adam 1e-3): the four
//    stable variants reach 95% train accuracy within 200 epochs; the detach
//    family either trains or ends with a recorded diverged status.
Outcome training_sanity() {
    const Dataset dataset =
        build_dataset(training_config(NormVariant::NoNorm).dataset, 7);
    std::ostringstream detail;
    for (NormVariant v : {NormVariant::NoNorm, NormVariant::LayerNorm,
                          NormVariant::LayerNormSimple, NormVariant::AdaNorm}) {
        const RunRecord rec = run_on_dataset(training_config(v), dataset);
        if (rec.diverged()) {
            return {false, false, to_string(v) + " diverged unexpectedly"};
        }
        double best_train_acc = 0.0;
        std::size_t reached_at = rec.epochs.size();
        for (const EpochRow& row : rec.epochs) {
            best_train_acc = std::max(best_train_acc, row.train_acc);
            if (row.train_acc >= 0.95 && reached_at == rec.epochs.size()) {
                reached_at = row.epoch;
            }
        }
        if (best_train_acc < 0.95) {
            return {false, false,
                    to_string(v) + " best train_acc=" + csv::format_double(best_train_acc)};
        }
        detail << to_string(v) << "@" << reached_at << " ";
    }
    for (NormVariant v : {NormVariant::DetachNorm, NormVariant::DetachMean,
                          NormVariant::DetachVariance}) {
        const RunRecord rec = run_on_dataset(training_config(v), dataset);
        if (rec.diverged()) {
            detail << to_string(v) << "=diverged@" << rec.diverged_epoch << " ";
        } else {
            detail << to_string(v) << "=completed(train_acc="
                   << csv::format_double(rec.epochs.back().train_acc) << ") ";
        }
    }
    return {true, false, detail.str()};
}

// 7. MNIST scaled check: 784-256-128-10 MLP, layernorm and adanorm reach
//    97% test accuracy within 5 epochs. Skipped when the files are absent.
Outcome mnist_check() {
    std::string dir = "data/mnist";
    if (const char* env = std::getenv("NORMGRAD_MNIST_DIR")) {
        dir = env;
    }
    const std::string train_images = dir + "/train-images-idx3-ubyte";
    const std::string train_labels = dir + "/train-labels-idx1-ubyte";
    const std::string test_images = dir + "/t10k-images-idx3-ubyte";
    const std::string test_labels = dir + "/t10k-labels-idx1-ubyte";
    for (const std::string& path :
         {train_images, train_labels, test_images, test_labels}) {
        if (!std::filesystem::exists(path)) {
            return {true, true, "IDX files not found under " + dir};
        }
    }

    ExperimentConfig cfg;
    cfg.depth = 2;
    cfg.width = 256;
    cfg.widths_override = {256, 128};
    cfg.optimizer.kind = OptimizerConfig::Kind::Adam;
    cfg.optimizer.lr = 1e-3;
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.seed = 7;
    cfg.dataset.kind = DatasetConfig::Kind::Mnist;
    cfg.dataset.images = train_images;
    cfg.dataset.labels = train_labels;
    cfg.dataset.test_images = test_images;
    cfg.dataset.test_labels = test_labels;
    cfg.dataset.val_count = 5000;
    cfg.eps = 1e-5;
    cfg.out_dir = "acceptance_tmp/mnist";

    const Dataset dataset = build_dataset(cfg.dataset, cfg.seed);
    std::ostringstream detail;
    for (NormVariant v : {NormVariant::LayerNorm, NormVariant::AdaNorm}) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.variant = v;
        if (v == NormVariant::AdaNorm) {
            run_cfg.ada_C = 1.0;
            run_cfg.ada_k = 0.1;
        }
        const RunRecord rec = run_on_dataset(run_cfg, dataset);
        if (rec.diverged()) {
            return {false, false, to_string(v) + " diverged"};
        }
        detail << to_string(v) << " test_acc=" << csv::format_double(rec.test_acc) << " ";
        if (rec.test_acc < 0.97) {
            return {false, false, detail.str()};
        }
    }
    return {true, false, detail.str()};
}

// 8. Reporting: the comparison table is emitted with shared seed/data and
//    all output files parse and round-trip byte-identically.
Outcome reporting() {
    ExperimentConfig cfg = training_config(NormVariant::LayerNorm);
    cfg.epochs = 40;
    cfg.out_dir = "acceptance_tmp/compare";
    const std::vector<NormVariant> variants = {
        NormVariant::LayerNorm, NormVariant::LayerNormSimple, NormVariant::AdaNorm};
    const CompareResult result = compare_suite(cfg, variants);

    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream os(cfg.out_dir + "/compare.csv", std::ios::binary);
        os << result.csv;
    }
    {
        std::ofstream os(cfg.out_dir + "/compare.md", std::ios::binary);
        os << result.markdown;
    }
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.variant = result.runs[i].variant;
        write_run_outputs(run_cfg, result.runs[i]);
    }

    // round-trip every emitted CSV and parse every emitted JSON
    {
        std::ifstream is(cfg.out_dir + "/compare.csv", std::ios::binary);
        const std::string text((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
        if (write_compare_csv(parse_compare_csv(text)) != text) {
            return {false, false, "compare.csv does not round-trip"};
        }
    }
    for (NormVariant v : variants) {
        const std::string stem = cfg.out_dir + "/run-" + to_string(v);
        std::ifstream is(stem + ".csv", std::ios::binary);
        const std::string text((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
        if (write_run_csv(parse_run_csv(text)) != text) {
            return {false, false, stem + ".csv does not round-trip"};
        }
        std::ifstream js(stem + ".json");
        nlohmann::json j;
        js >> j;
        if (j["seed"] != result.seed_used || j["dataset_hash"] != result.dataset_hash) {
            return {false, false, stem + ".json has mismatched provenance"};
        }
    }

    std::ostringstream detail;
    detail << "overfit_gap:";
    for (const CompareRow& row : result.rows) {
        detail << " " << to_string(row.variant) << "="
               << csv::format_double(row.overfit_gap);
    }
    return {true, false, detail.str()};
}

}  // namespace

int main() {
    std::cout << "acceptance suite (rng: " << Rng::algorithm() << ")" << std::endl;
    run_criterion(1, "forward-invariants", forward_invariants);
    run_criterion(2, "theorem1-gradient-moments", theorem1_suite);
    run_criterion(3, "oracle-equivalence", oracle_equivalence);
    run_criterion(4, "adanorm-identities", adanorm_identities);
    run_criterion(5, "kernel-identities", kernel_identities);
    run_criterion(6, "training-sanity", training_sanity);
    run_criterion(7, "mnist-scaled-check", mnist_check);
    run_criterion(8, "reporting-compare-suite", reporting);

    std::error_code ec;
    std::filesystem::remove_all("acceptance_tmp", ec);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all criteria passed (or were skipped)" << std::endl;
    return 0;
}
