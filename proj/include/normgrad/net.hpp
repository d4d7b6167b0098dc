#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "normgrad/gradcheck.hpp"
#include "normgrad/norm.hpp"
#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

namespace normgrad {

// Fully-connected layer, weight row-major (out x in).
struct LinearLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Vec weight;   // out*in, row r = weights of output unit r
    Vec bias;     // out
    Vec dweight;  // gradient buffers, same shapes
    Vec dbias;
};

// weight ~ Normal(0, 2/fan_in), bias = 0.
LinearLayer kaiming_init(Rng& rng, std::size_t fan_in, std::size_t fan_out);

// y = W x + b.
Vec linear_forward(const LinearLayer& lin, const Vec& x);

// One hidden block: linear -> norm -> ReLU. The affine gain/bias (and their
// gradient buffers) are live only when variant == LayerNorm.
struct HiddenLayer {
    LinearLayer lin;
    NormVariant variant = NormVariant::NoNorm;
    AffineParams affine;
    Vec dgain;
    Vec dbias_norm;
};

// MLP with normalization applied before the activation in every hidden
// layer; the output layer is linear only.
struct MlpModel {
    std::vector<HiddenLayer> hidden;
    LinearLayer out;
    NormVariant variant = NormVariant::NoNorm;
    AdaNormConfig ada;
    double eps = 1e-5;  // sigma floor for the training path

    std::size_t input_dim() const { return hidden.empty() ? out.in : hidden.front().lin.in; }
    std::size_t output_dim() const { return out.out; }
};

MlpModel make_mlp(Rng& rng, std::size_t in_dim, const std::vector<std::size_t>& widths,
                  std::size_t n_classes, NormVariant variant, AdaNormConfig ada,
                  double eps);

// A named view of one parameter tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    std::vector<std::size_t> shape;
    Vec* value = nullptr;
    Vec* grad = nullptr;
};

// Deterministic parameter order: hidden layers first (weight, bias, then
// gain/bias when present), output layer last.
std::vector<ParamRef> params(MlpModel& model);

void zero_grads(MlpModel& model);

struct LayerTrace {
    Vec pre_norm;      // W x + b
    ForwardCache cache;
    Vec post_norm;
    Vec activ;         // ReLU(post_norm)
};

struct MlpTrace {
    Vec input;
    std::vector<LayerTrace> layers;
    Vec logits;
};

// Forward pass keeping every per-layer cache. Throws NonFinite if the
// logits (or any intermediate) leave the finite range.
MlpTrace mlp_forward(const MlpModel& model, const Vec& x);

// Forward pass with the variant's detach semantics applied against the base
// traces: each norm layer freezes whatever it detaches (mu, sigma, phi) at
// the values recorded in `base`. This is what a finite-difference probe of
// the loss must evaluate for detach variants.
Vec mlp_forward_frozen(const MlpModel& model, const Vec& x, const MlpTrace& base);

// Max-shifted cross entropy; dlogits = softmax - onehot.
struct LossGrad {
    double loss = 0.0;
    Vec dlogits;
};
LossGrad softmax_xent(const Vec& logits, std::size_t label);

// Running maxima of the per-norm-layer gradient moment checks. `observe`
// throws InvariantViolation when a measured moment leaves its predicted
// envelope (scale-aware tolerances) and `enforce` is set.
struct GradStats {
    double mean_maxabs = 0.0;
    double var_maxviol = 0.0;
    std::size_t observations = 0;
    bool enforce = true;

    void observe(const GradReport& report, double g_scale);
};

// Backprop; accumulates into the model's gradient buffers. When `stats` is
// non-null, every norm layer's (upstream g, dx) pair is checked against its
// predicted gradient moments.
Vec mlp_backward(MlpModel& model, const MlpTrace& trace, const Vec& dlogits,
                 GradStats* stats = nullptr);

// Adam with bias correction; moment buffers are keyed by parameter order.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;
    std::size_t step = 0;
    std::vector<Vec> m;
    std::vector<Vec> v;
};

void adam_step(AdamState& state, const std::vector<ParamRef>& params);

// p <- p - lr * g.
void sgd_step(double lr, const std::vector<ParamRef>& params);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(const std::vector<ParamRef>& params, double max_norm);

// Flat binary checkpoint: magic "NGRD", version u32, then per parameter
// (name length u32, name bytes, rank u32, dims u32 each, row-major f64
// values), all little-endian.
void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params);

// Loads into existing parameters; names, order and shapes must match.
void load_checkpoint(const std::string& path, const std::vector<ParamRef>& params);

}  // namespace normgrad
