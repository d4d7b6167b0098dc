// Command-line front end: theorem verification, gradient checking, training
// and variant comparison. Exit codes: 0 success, 1 invariant violation,
// 2 usage/config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "normgrad/csv.hpp"
#include "normgrad/errors.hpp"
#include "normgrad/gradcheck.hpp"
#include "normgrad/harness.hpp"
#include "normgrad/net.hpp"
#include "normgrad/norm.hpp"

namespace {

using namespace normgrad;

const std::vector<NormVariant> kTheorem1Variants = {
    NormVariant::DetachNorm,
    NormVariant::LayerNormSimple,
    NormVariant::DetachMean,
    NormVariant::DetachVariance,
};

const std::vector<NormVariant> kAllVariants = {
    NormVariant::LayerNorm,      NormVariant::LayerNormSimple, NormVariant::DetachNorm,
    NormVariant::DetachMean,     NormVariant::DetachVariance,  NormVariant::AdaNorm,
    NormVariant::NoNorm,
};

void write_text_file(const std::string& path, const std::string& text) {
    if (path.empty()) {
        return;
    }
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ConfigError("cannot open output file " + path);
    }
    os << text;
}

int run_verify_theorem1(std::size_t trials, std::size_t hmin, std::size_t hmax,
                        std::uint64_t seed, bool verbose, const std::string& out_path) {
    if (hmin < 2 || hmax < hmin) {
        throw ConfigError("verify theorem1: need 2 <= hmin <= hmax");
    }
    bool all_pass = true;
    nlohmann::json summary = nlohmann::json::array();
    Rng rng(seed);
    for (NormVariant v : kTheorem1Variants) {
        double max_mean_err = 0.0;
        double max_var_viol = 0.0;
        std::size_t failures = 0;
        GradReport worst;
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t h = hmin + rng.uniform_int(hmax - hmin + 1);
            const Vec x = random_test_vector(rng, h);
            const Vec g = rng.gaussian_vec(h);
            const GradReport rep = theorem1_report(v, x, g);
            if (verbose) {
                std::cout << to_text(rep) << "\n";
            }
            const double g_scale = max_abs(g) / std_pop(x);
            const bool ok = satisfies_theorem1(rep, 1e-10, 1e-12 * g_scale, 1e-12);
            if (!ok) {
                ++failures;
                worst = rep;
            }
            max_mean_err = std::max(max_mean_err, rep.abs_error_mean);
            max_var_viol = std::max(max_var_viol, rep.violation_var);
        }
        const bool pass = failures == 0;
        all_pass = all_pass && pass;
        std::cout << "theorem1 " << to_string(v) << " trials=" << trials << " H=[" << hmin
                  << "," << hmax << "] max_mean_err=" << csv::format_double(max_mean_err)
                  << " max_var_viol=" << csv::format_double(max_var_viol) << " "
                  << (pass ? "PASS" : "FAIL") << "\n";
        nlohmann::json entry{{"variant", to_string(v)},
                             {"trials", trials},
                             {"max_abs_error_mean", max_mean_err},
                             {"max_violation_var", max_var_viol},
                             {"failures", failures},
                             {"pass", pass}};
        if (!pass) {
            entry["worst_report"] = to_json(worst);
        }
        summary.push_back(entry);
    }
    write_text_file(out_path, summary.dump(2) + "\n");
    return all_pass ? 0 : 1;
}

int run_verify_theorem2(double C, double k, std::size_t H, std::size_t trials,
                        std::uint64_t seed, const std::string& out_path) {
    Rng rng(seed);
    const Theorem2Report rep = theorem2_numeric_check(C, k, H, trials, rng);
    std::cout << "theorem2 " << to_text(rep) << " " << (rep.ok() ? "PASS" : "FAIL") << "\n";
    write_text_file(out_path, to_json(rep).dump(2) + "\n");
    return rep.ok() ? 0 : 1;
}

int run_gradcheck(const std::string& variant_name, std::size_t H, std::size_t trials,
                  std::uint64_t seed) {
    std::vector<NormVariant> variants;
    if (variant_name == "all") {
        variants = kAllVariants;
    } else {
        variants = {parse_variant(variant_name)};
    }
    const double h_fd = 1e-5;
    const double tol = 1e-6;
    const AdaNormConfig ada{1.0, 0.1};
    bool all_pass = true;
    Rng rng(seed);
    for (NormVariant v : variants) {
        double max_jac_err = 0.0;
        double max_grad_err = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const Vec x = random_test_vector(rng, H);
            AffineParams affine;
            const AffineParams* params = nullptr;
            const AdaNormConfig* ada_ptr = v == NormVariant::AdaNorm ? &ada : nullptr;
            if (v == NormVariant::LayerNorm) {
                affine.gain = rng.gaussian_vec(H);
                affine.bias = rng.gaussian_vec(H);
                params = &affine;
            }
            const JacobianPair pair = compare_jacobians(v, x, h_fd, params, ada_ptr);
            max_jac_err = std::max(max_jac_err, pair.max_abs_err);

            // Same check expressed through a scalar loss dot(g, forward(x)).
            const Vec g = rng.gaussian_vec(H);
            const ForwardOut f = forward(v, x, params, ada_ptr, 0.0);
            const BackwardResult b = backward(v, f.cache, params, ada_ptr, g);
            const Vec fd = finite_diff_grad(
                [&](const Vec& xp) {
                    return dot(g, probe_forward(v, xp, f.cache, params, ada_ptr));
                },
                x, h_fd);
            for (std::size_t i = 0; i < H; ++i) {
                max_grad_err = std::max(max_grad_err, std::fabs(fd[i] - b.dx[i]));
            }
        }
        const bool pass = max_jac_err <= tol && max_grad_err <= tol;
        all_pass = all_pass && pass;
        std::cout << "gradcheck " << to_string(v) << " H=" << H << " trials=" << trials
                  << " max_jacobian_err=" << csv::format_double(max_jac_err)
                  << " max_grad_err=" << csv::format_double(max_grad_err) << " "
                  << (pass ? "PASS" : "FAIL") << "\n";
    }
    return all_pass ? 0 : 1;
}

int run_train(const std::string& config_path, bool no_grad_check) {
    ExperimentConfig cfg = load_config_file(config_path);
    cfg.check_grads = !no_grad_check;
    const RunRecord rec = run_experiment(cfg);
    std::cout << "train variant=" << to_string(rec.variant) << " seed=" << rec.seed_used
              << " (" << rec.seed_source << ") epochs=" << rec.epochs.size() << " status="
              << (rec.diverged() ? "diverged@" + std::to_string(rec.diverged_epoch)
                                 : "completed");
    if (!rec.epochs.empty()) {
        const EpochRow& last = rec.epochs.back();
        std::cout << " train_loss=" << csv::format_double(last.train_loss)
                  << " val_acc=" << csv::format_double(last.val_acc)
                  << " train_acc=" << csv::format_double(last.train_acc);
    }
    if (!rec.diverged()) {
        std::cout << " test_acc=" << csv::format_double(rec.test_acc);
    }
    std::cout << " wall_time_s=" << csv::format_double(rec.wall_time_s) << "\n";
    std::cout << "outputs: " << cfg.out_dir << "/run-" << to_string(rec.variant)
              << ".{csv,json}\n";
    return 0;
}

int run_compare(const std::string& config_path, const std::string& variants_arg,
                bool no_grad_check) {
    ExperimentConfig cfg = load_config_file(config_path);
    cfg.check_grads = !no_grad_check;
    std::vector<NormVariant> variants;
    std::string cur;
    for (char c : variants_arg + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                variants.push_back(parse_variant(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (variants.empty()) {
        throw ConfigError("compare: empty variant list");
    }
    const CompareResult result = compare_suite(cfg, variants);
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/compare.csv", result.csv);
    write_text_file(cfg.out_dir + "/compare.md", result.markdown);
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.variant = result.runs[i].variant;
        write_run_outputs(run_cfg, result.runs[i]);
    }
    std::cout << result.markdown;
    std::cout << "outputs: " << cfg.out_dir << "/compare.{csv,md}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"normalization-gradient toolbox"};
    app.require_subcommand(1);

    // verify
    CLI::App* verify = app.add_subcommand("verify", "check the gradient-moment theorems");
    verify->require_subcommand(1);

    std::size_t t1_trials = 1000, t1_hmin = 3, t1_hmax = 512;
    std::uint64_t t1_seed = 7;
    bool t1_verbose = false;
    std::string t1_out;
    CLI::App* theorem1 = verify->add_subcommand("theorem1", "gradient re-centering/re-scaling");
    theorem1->add_option("--trials", t1_trials, "random cases per variant");
    theorem1->add_option("--hmin", t1_hmin, "smallest vector length");
    theorem1->add_option("--hmax", t1_hmax, "largest vector length");
    theorem1->add_option("--seed", t1_seed, "rng seed");
    theorem1->add_flag("--verbose", t1_verbose, "print one report line per case");
    theorem1->add_option("--out", t1_out, "write the JSON summary here");

    double t2_C = 1.0, t2_k = 0.1;
    std::size_t t2_H = 128, t2_trials = 10000;
    std::uint64_t t2_seed = 7;
    std::string t2_out;
    CLI::App* theorem2 = verify->add_subcommand("theorem2", "adaptive scale construction");
    theorem2->add_option("--C", t2_C, "average scaling weight");
    theorem2->add_option("--k", t2_k, "scale slope");
    theorem2->add_option("--H", t2_H, "vector length");
    theorem2->add_option("--trials", t2_trials, "number of random vectors");
    theorem2->add_option("--seed", t2_seed, "rng seed");
    theorem2->add_option("--out", t2_out, "write the JSON report here");

    // gradcheck
    std::string gc_variant = "all";
    std::size_t gc_H = 8, gc_trials = 50;
    std::uint64_t gc_seed = 7;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "analytic vs numeric Jacobians and gradients");
    gradcheck_cmd->add_option("--variant", gc_variant, "variant name or 'all'");
    gradcheck_cmd->add_option("--H", gc_H, "vector length (<= 64)");
    gradcheck_cmd->add_option("--trials", gc_trials, "random cases per variant");
    gradcheck_cmd->add_option("--seed", gc_seed, "rng seed");

    // train
    std::string train_config;
    bool train_no_grad_check = false;
    CLI::App* train = app.add_subcommand("train", "run one experiment from a JSON config");
    train->add_option("--config", train_config, "experiment config file")->required();
    train->add_flag("--no-grad-check", train_no_grad_check,
                    "disable the per-step gradient-moment assertions");

    // compare
    std::string cmp_config, cmp_variants;
    bool cmp_no_grad_check = false;
    CLI::App* compare = app.add_subcommand("compare", "run several variants on shared data");
    compare->add_option("--config", cmp_config, "base experiment config file")->required();
    compare->add_option("--variants", cmp_variants, "comma-separated variant list")->required();
    compare->add_flag("--no-grad-check", cmp_no_grad_check,
                      "disable the per-step gradient-moment assertions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (theorem1->parsed()) {
            return run_verify_theorem1(t1_trials, t1_hmin, t1_hmax, t1_seed, t1_verbose, t1_out);
        }
        if (theorem2->parsed()) {
            return run_verify_theorem2(t2_C, t2_k, t2_H, t2_trials, t2_seed, t2_out);
        }
        if (gradcheck_cmd->parsed()) {
            return run_gradcheck(gc_variant, gc_H, gc_trials, gc_seed);
        }
        if (train->parsed()) {
            return run_train(train_config, train_no_grad_check);
        }
        if (compare->parsed()) {
            return run_compare(cmp_config, cmp_variants, cmp_no_grad_check);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
