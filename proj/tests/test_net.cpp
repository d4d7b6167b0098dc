#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "normgrad/net.hpp"
#include "normgrad/norm.hpp"
#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

using namespace normgrad;

namespace {

const NormVariant kAllVariants[] = {
    NormVariant::LayerNorm,      NormVariant::LayerNormSimple, NormVariant::DetachNorm,
    NormVariant::DetachMean,     NormVariant::DetachVariance,  NormVariant::AdaNorm,
    NormVariant::NoNorm,
};

double frozen_loss(const MlpModel& model, const Vec& x, std::size_t label,
                   const MlpTrace& base) {
    return softmax_xent(mlp_forward_frozen(model, x, base), label).loss;
}

// Max-abs error between analytic parameter/input gradients and central
// differences of the loss, detach semantics applied to the probes.
double fd_worst_error(MlpModel& model, const Vec& x, std::size_t label, double h) {
    const MlpTrace base = mlp_forward(model, x);
    const LossGrad lg = softmax_xent(base.logits, label);
    zero_grads(model);
    const Vec dinput = mlp_backward(model, base, lg.dlogits);

    double worst = 0.0;
    for (const ParamRef& ref : params(model)) {
        for (std::size_t i = 0; i < ref.value->size(); ++i) {
            const double saved = (*ref.value)[i];
            (*ref.value)[i] = saved + h;
            const double lp = frozen_loss(model, x, label, base);
            (*ref.value)[i] = saved - h;
            const double lm = frozen_loss(model, x, label, base);
            (*ref.value)[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, std::fabs(fd - (*ref.grad)[i]));
        }
    }
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double lp = frozen_loss(model, probe, label, base);
        probe[i] = saved - h;
        const double lm = frozen_loss(model, probe, label, base);
        probe[i] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, std::fabs(fd - dinput[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("kaiming_init: variance, zero bias, determinism") {
    Rng rng(401);
    const LinearLayer big = kaiming_init(rng, 2, 50000);
    double sq = 0.0;
    for (double w : big.weight) sq += w * w;
    const double var = sq / static_cast<double>(big.weight.size());
    CHECK(std::fabs(var - 1.0) <= 0.02);  // 2/fan_in with fan_in = 2
    CHECK(max_abs(big.bias) == 0.0);

    Rng a(42), b(42);
    const LinearLayer la = kaiming_init(a, 7, 5);
    const LinearLayer lb = kaiming_init(b, 7, 5);
    CHECK(la.weight == lb.weight);

    CHECK_THROWS_AS(kaiming_init(rng, 0, 3), std::invalid_argument);
}

TEST_CASE("softmax_xent: symmetric, extreme and gradient-sum cases") {
    const LossGrad sym = softmax_xent({0.0, 0.0}, 0);
    CHECK(sym.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(sym.dlogits[0] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(sym.dlogits[1] == doctest::Approx(0.5).epsilon(1e-15));

    const LossGrad extreme = softmax_xent({1000.0, -1000.0}, 0);
    CHECK(extreme.loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isfinite(extreme.loss));

    Rng rng(402);
    for (int t = 0; t < 20; ++t) {
        const Vec logits = rng.gaussian_vec(1 + rng.uniform_int(10));
        const LossGrad lg = softmax_xent(logits, rng.uniform_int(logits.size()));
        double sum = 0.0;
        for (double d : lg.dlogits) sum += d;
        CHECK(std::fabs(sum) <= 1e-14);
    }
    CHECK_THROWS_AS(softmax_xent({0.0, 0.0}, 2), std::invalid_argument);
}

TEST_CASE("mlp_forward: identity network passes nonnegative inputs through") {
    Rng rng(403);
    MlpModel model = make_mlp(rng, 3, {3}, 3, NormVariant::NoNorm, {}, 1e-5);
    std::fill(model.hidden[0].lin.weight.begin(), model.hidden[0].lin.weight.end(), 0.0);
    std::fill(model.out.weight.begin(), model.out.weight.end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        model.hidden[0].lin.weight[i * 3 + i] = 1.0;
        model.out.weight[i * 3 + i] = 1.0;
    }
    const Vec x = {0.5, 2.0, 0.0};
    CHECK(mlp_forward(model, x).logits == x);
}

TEST_CASE("mlp_forward: eps floor handles a constant pre-norm vector") {
    Rng rng(404);
    MlpModel model = make_mlp(rng, 2, {4}, 3, NormVariant::LayerNormSimple, {}, 1e-5);
    std::fill(model.hidden[0].lin.weight.begin(), model.hidden[0].lin.weight.end(), 0.0);
    const MlpTrace trace = mlp_forward(model, {1.0, 2.0});
    CHECK(max_abs(trace.layers[0].post_norm) == 0.0);
    CHECK(all_finite(trace.logits));
}

TEST_CASE("mlp_forward: non-finite intermediates are flagged") {
    Rng rng(405);
    MlpModel model = make_mlp(rng, 2, {4}, 3, NormVariant::NoNorm, {}, 1e-5);
    model.hidden[0].lin.weight[0] = 1e308;
    CHECK_THROWS_AS(mlp_forward(model, {1e10, 0.0}), NonFinite);
}

TEST_CASE("mlp_backward: finite-difference oracle across variants (2-4-3)") {
    const AdaNormConfig ada{1.0, 0.1};
    for (NormVariant v : kAllVariants) {
        Rng rng(406);
        MlpModel model = make_mlp(rng, 2, {4}, 3, v, ada, 1e-5);
        // keep the probe input away from the ReLU kinks, where central
        // differences do not measure the subgradient the backward pass uses
        Vec x = rng.gaussian_vec(2);
        for (int attempt = 0; attempt < 200; ++attempt) {
            const MlpTrace t = mlp_forward(model, x);
            double min_gap = 1e300;
            double min_sigma = 1e300;
            for (const LayerTrace& lt : t.layers) {
                min_sigma = std::min(min_sigma, lt.cache.sigma);
                for (double vpost : lt.post_norm) {
                    min_gap = std::min(min_gap, std::fabs(vpost));
                }
            }
            if (min_gap >= 1e-2 && min_sigma >= 0.2) break;
            x = rng.gaussian_vec(2);
        }
        const double worst = fd_worst_error(model, x, 1, 1e-4);
        INFO("variant ", to_string(v));
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("mlp_backward: zero upstream gives zero gradients") {
    Rng rng(407);
    MlpModel model = make_mlp(rng, 3, {5, 4}, 2, NormVariant::LayerNorm, {}, 1e-5);
    const MlpTrace trace = mlp_forward(model, rng.gaussian_vec(3));
    zero_grads(model);
    const Vec dinput = mlp_backward(model, trace, Vec(2, 0.0));
    CHECK(max_abs(dinput) == 0.0);
    for (const ParamRef& ref : params(model)) {
        CHECK(max_abs(*ref.grad) == 0.0);
    }
}

TEST_CASE("mlp_backward: nonorm matches a hand-rolled plain network") {
    Rng rng(408);
    MlpModel model = make_mlp(rng, 3, {4}, 2, NormVariant::NoNorm, {}, 1e-5);
    const Vec x = rng.gaussian_vec(3);
    const MlpTrace trace = mlp_forward(model, x);
    const LossGrad lg = softmax_xent(trace.logits, 0);
    zero_grads(model);
    mlp_backward(model, trace, lg.dlogits);

    // reference backprop with the norm slots removed entirely
    const LinearLayer& l0 = model.hidden[0].lin;
    const Vec a = linear_forward(l0, x);
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] > 0.0 ? a[i] : 0.0;
    // d logits -> d r
    Vec dr(l0.out, 0.0);
    for (std::size_t o = 0; o < model.out.out; ++o) {
        for (std::size_t i = 0; i < model.out.in; ++i) {
            dr[i] += model.out.weight[o * model.out.in + i] * lg.dlogits[o];
        }
    }
    for (std::size_t i = 0; i < dr.size(); ++i) {
        if (a[i] <= 0.0) dr[i] = 0.0;
    }
    for (std::size_t o = 0; o < l0.out; ++o) {
        CHECK(model.hidden[0].lin.dbias[o] == doctest::Approx(dr[o]).epsilon(1e-14));
        for (std::size_t c = 0; c < l0.in; ++c) {
            CHECK(model.hidden[0].lin.dweight[o * l0.in + c] ==
                  doctest::Approx(dr[o] * x[c]).epsilon(1e-14));
        }
    }
}

TEST_CASE("mlp_backward: gradient moment instrumentation holds while training") {
    Rng rng(409);
    const AdaNormConfig ada{1.0, 0.1};
    for (NormVariant v :
         {NormVariant::LayerNormSimple, NormVariant::DetachNorm, NormVariant::LayerNorm,
          NormVariant::AdaNorm}) {
        MlpModel model = make_mlp(rng, 4, {8, 8}, 3, v, ada, 1e-5);
        std::vector<ParamRef> refs = params(model);
        AdamState adam;
        GradStats stats;
        stats.enforce = true;
        for (int step = 0; step < 25; ++step) {
            const Vec x = rng.gaussian_vec(4);
            const MlpTrace trace = mlp_forward(model, x);
            const LossGrad lg = softmax_xent(trace.logits, rng.uniform_int(3));
            zero_grads(model);
            CHECK_NOTHROW(mlp_backward(model, trace, lg.dlogits, &stats));
            adam_step(adam, refs);
        }
        CHECK(stats.observations == 2u * 25u);
    }
}

TEST_CASE("adam_step: zero gradients leave parameters unchanged") {
    Vec value = {1.5, -2.0};
    Vec grad = {0.0, 0.0};
    std::vector<ParamRef> refs = {{"p", {2}, &value, &grad}};
    AdamState state;
    adam_step(state, refs);
    adam_step(state, refs);
    CHECK(value == Vec{1.5, -2.0});
}

TEST_CASE("adam_step: first step moves by ~lr") {
    Vec value = {1.0};
    Vec grad = {1.0};
    std::vector<ParamRef> refs = {{"p", {1}, &value, &grad}};
    AdamState state;
    state.lr = 0.01;
    adam_step(state, refs);
    // bias-corrected m-hat = v-hat = 1, so the step is lr/(1 + eps_opt)
    const double expected = 1.0 - 0.01 / (1.0 + 1e-8);
    CHECK(value[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adam_step: identical runs give identical trajectories") {
    auto run = [] {
        Rng rng(410);
        MlpModel model = make_mlp(rng, 3, {6}, 2, NormVariant::LayerNorm, {}, 1e-5);
        std::vector<ParamRef> refs = params(model);
        AdamState state;
        Rng data(411);
        for (int step = 0; step < 10; ++step) {
            const Vec x = data.gaussian_vec(3);
            const MlpTrace trace = mlp_forward(model, x);
            const LossGrad lg = softmax_xent(trace.logits, data.uniform_int(2));
            zero_grads(model);
            mlp_backward(model, trace, lg.dlogits);
            adam_step(state, refs);
        }
        Vec flat;
        for (const ParamRef& r : refs) {
            flat.insert(flat.end(), r.value->begin(), r.value->end());
        }
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("sgd_step: arithmetic and linearity") {
    Vec value = {1.0};
    Vec grad = {2.0};
    std::vector<ParamRef> refs = {{"p", {1}, &value, &grad}};
    sgd_step(0.0, refs);
    CHECK(value[0] == 1.0);
    sgd_step(0.5, refs);
    CHECK(value[0] == 0.0);

    Vec v1 = {3.0}, v2 = {3.0}, g = {1.25};
    std::vector<ParamRef> r1 = {{"p", {1}, &v1, &g}};
    std::vector<ParamRef> r2 = {{"p", {1}, &v2, &g}};
    sgd_step(0.2, r1);
    sgd_step(0.1, r2);
    sgd_step(0.1, r2);
    CHECK(v1[0] == doctest::Approx(v2[0]).epsilon(1e-15));
}

TEST_CASE("clip_global_norm caps the gradient norm") {
    Vec value = {0.0, 0.0};
    Vec grad = {3.0, 4.0};
    std::vector<ParamRef> refs = {{"p", {2}, &value, &grad}};
    const double pre = clip_global_norm(refs, 1.0);
    CHECK(pre == doctest::Approx(5.0));
    CHECK(std::sqrt(grad[0] * grad[0] + grad[1] * grad[1]) == doctest::Approx(1.0));
    // below the cap nothing changes
    Vec small = {0.1, 0.1};
    std::vector<ParamRef> refs2 = {{"p", {2}, &value, &small}};
    clip_global_norm(refs2, 10.0);
    CHECK(small == Vec{0.1, 0.1});
}

TEST_CASE("checkpoint: round trip, bad magic, truncation") {
    Rng rng(412);
    MlpModel model = make_mlp(rng, 3, {4}, 2, NormVariant::LayerNorm, {}, 1e-5);
    std::vector<ParamRef> refs = params(model);
    const std::string path = "test_checkpoint.ngrd";
    save_checkpoint(path, refs);

    const Vec original = model.hidden[0].lin.weight;
    model.hidden[0].lin.weight.assign(original.size(), 0.0);
    load_checkpoint(path, refs);
    CHECK(model.hidden[0].lin.weight == original);

    {
        std::ofstream os("test_checkpoint_bad.ngrd", std::ios::binary);
        os << "XXXXrest";
    }
    CHECK_THROWS_AS(load_checkpoint("test_checkpoint_bad.ngrd", refs), BadMagic);

    {
        std::ofstream os("test_checkpoint_trunc.ngrd", std::ios::binary);
        os << "NGRD";
    }
    CHECK_THROWS_AS(load_checkpoint("test_checkpoint_trunc.ngrd", refs), TruncatedFile);

    std::remove(path.c_str());
    std::remove("test_checkpoint_bad.ngrd");
    std::remove("test_checkpoint_trunc.ngrd");
}
