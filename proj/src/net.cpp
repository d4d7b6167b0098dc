#include "normgrad/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace normgrad {

LinearLayer kaiming_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    if (fan_in < 1 || fan_out < 1) {
        throw std::invalid_argument("kaiming_init: fan_in and fan_out must be >= 1");
    }
    LinearLayer lin;
    lin.in = fan_in;
    lin.out = fan_out;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    lin.weight.resize(fan_in * fan_out);
    for (double& w : lin.weight) {
        w = std * rng.gaussian();
    }
    lin.bias.assign(fan_out, 0.0);
    lin.dweight.assign(lin.weight.size(), 0.0);
    lin.dbias.assign(fan_out, 0.0);
    return lin;
}

Vec linear_forward(const LinearLayer& lin, const Vec& x) {
    if (x.size() != lin.in) {
        throw std::invalid_argument("linear_forward: input length mismatch");
    }
    Vec y(lin.out);
    for (std::size_t r = 0; r < lin.out; ++r) {
        const double* row = lin.weight.data() + r * lin.in;
        double acc = lin.bias[r];
        for (std::size_t c = 0; c < lin.in; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
    return y;
}

MlpModel make_mlp(Rng& rng, std::size_t in_dim, const std::vector<std::size_t>& widths,
                  std::size_t n_classes, NormVariant variant, AdaNormConfig ada,
                  double eps) {
    MlpModel model;
    model.variant = variant;
    model.ada = ada;
    model.eps = eps;
    std::size_t prev = in_dim;
    for (std::size_t w : widths) {
        HiddenLayer layer;
        layer.lin = kaiming_init(rng, prev, w);
        layer.variant = variant;
        if (variant == NormVariant::LayerNorm) {
            layer.affine.gain.assign(w, 1.0);
            layer.affine.bias.assign(w, 0.0);
            layer.dgain.assign(w, 0.0);
            layer.dbias_norm.assign(w, 0.0);
        }
        model.hidden.push_back(std::move(layer));
        prev = w;
    }
    model.out = kaiming_init(rng, prev, n_classes);
    return model;
}

std::vector<ParamRef> params(MlpModel& model) {
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < model.hidden.size(); ++i) {
        HiddenLayer& layer = model.hidden[i];
        const std::string prefix = "hidden" + std::to_string(i);
        refs.push_back({prefix + ".weight", {layer.lin.out, layer.lin.in},
                        &layer.lin.weight, &layer.lin.dweight});
        refs.push_back({prefix + ".bias", {layer.lin.out}, &layer.lin.bias, &layer.lin.dbias});
        if (layer.variant == NormVariant::LayerNorm) {
            refs.push_back({prefix + ".gain", {layer.lin.out}, &layer.affine.gain, &layer.dgain});
            refs.push_back({prefix + ".norm_bias", {layer.lin.out}, &layer.affine.bias,
                            &layer.dbias_norm});
        }
    }
    refs.push_back({"out.weight", {model.out.out, model.out.in}, &model.out.weight,
                    &model.out.dweight});
    refs.push_back({"out.bias", {model.out.out}, &model.out.bias, &model.out.dbias});
    return refs;
}

void zero_grads(MlpModel& model) {
    for (HiddenLayer& layer : model.hidden) {
        std::fill(layer.lin.dweight.begin(), layer.lin.dweight.end(), 0.0);
        std::fill(layer.lin.dbias.begin(), layer.lin.dbias.end(), 0.0);
        std::fill(layer.dgain.begin(), layer.dgain.end(), 0.0);
        std::fill(layer.dbias_norm.begin(), layer.dbias_norm.end(), 0.0);
    }
    std::fill(model.out.dweight.begin(), model.out.dweight.end(), 0.0);
    std::fill(model.out.dbias.begin(), model.out.dbias.end(), 0.0);
}

MlpTrace mlp_forward(const MlpModel& model, const Vec& x) {
    MlpTrace trace;
    trace.input = x;
    Vec cur = x;
    for (const HiddenLayer& layer : model.hidden) {
        LayerTrace lt;
        lt.pre_norm = linear_forward(layer.lin, cur);
        const AffineParams* affine =
            layer.variant == NormVariant::LayerNorm ? &layer.affine : nullptr;
        const AdaNormConfig* ada =
            layer.variant == NormVariant::AdaNorm ? &model.ada : nullptr;
        ForwardOut f = forward(layer.variant, lt.pre_norm, affine, ada, model.eps);
        lt.cache = std::move(f.cache);
        lt.post_norm = std::move(f.out);
        lt.activ.resize(lt.post_norm.size());
        for (std::size_t i = 0; i < lt.post_norm.size(); ++i) {
            lt.activ[i] = lt.post_norm[i] > 0.0 ? lt.post_norm[i] : 0.0;
        }
        cur = lt.activ;
        trace.layers.push_back(std::move(lt));
    }
    trace.logits = linear_forward(model.out, cur);
    require_finite(trace.logits, "mlp_forward logits");
    return trace;
}

namespace {

double sigma_eff(double std, double eps) {
    if (eps > 0.0) {
        return std::max(std, eps);
    }
    if (std == 0.0) {
        throw DegenerateInput("frozen probe: zero-spread input with eps = 0");
    }
    return std;
}

}  // namespace

Vec mlp_forward_frozen(const MlpModel& model, const Vec& x, const MlpTrace& base) {
    if (base.layers.size() != model.hidden.size()) {
        throw std::invalid_argument("mlp_forward_frozen: trace does not match model");
    }
    Vec cur = x;
    for (std::size_t li = 0; li < model.hidden.size(); ++li) {
        const HiddenLayer& layer = model.hidden[li];
        const ForwardCache& frozen = base.layers[li].cache;
        const Vec a = linear_forward(layer.lin, cur);
        const std::size_t n = a.size();
        Vec h(n);
        switch (layer.variant) {
            case NormVariant::NoNorm:
                h = a;
                break;
            case NormVariant::LayerNorm: {
                const Normalized nrm = normalize(a, model.eps);
                for (std::size_t i = 0; i < n; ++i) {
                    h[i] = layer.affine.gain[i] * nrm.y[i] + layer.affine.bias[i];
                }
                break;
            }
            case NormVariant::LayerNormSimple:
                h = normalize(a, model.eps).y;
                break;
            case NormVariant::DetachNorm:
                for (std::size_t i = 0; i < n; ++i) {
                    h[i] = (a[i] - frozen.mu) / frozen.sigma;
                }
                break;
            case NormVariant::DetachMean: {
                const double s = sigma_eff(std_pop(a), model.eps);
                for (std::size_t i = 0; i < n; ++i) {
                    h[i] = (a[i] - frozen.mu) / s;
                }
                break;
            }
            case NormVariant::DetachVariance: {
                const double mu = mean(a);
                for (std::size_t i = 0; i < n; ++i) {
                    h[i] = (a[i] - mu) / frozen.sigma;
                }
                break;
            }
            case NormVariant::AdaNorm: {
                const Normalized nrm = normalize(a, model.eps);
                for (std::size_t i = 0; i < n; ++i) {
                    h[i] = frozen.phi[i] * nrm.y[i];
                }
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = h[i] > 0.0 ? h[i] : 0.0;
        }
        cur = std::move(h);
    }
    return linear_forward(model.out, cur);
}

LossGrad softmax_xent(const Vec& logits, std::size_t label) {
    if (label >= logits.size()) {
        throw std::invalid_argument("softmax_xent: label out of range");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    LossGrad lg;
    lg.dlogits.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        lg.dlogits[i] = std::exp(logits[i] - m);
        sum += lg.dlogits[i];
    }
    lg.loss = std::log(sum) - (logits[label] - m);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        lg.dlogits[i] /= sum;
    }
    lg.dlogits[label] -= 1.0;
    return lg;
}

void GradStats::observe(const GradReport& report, double g_scale) {
    mean_maxabs = std::max(mean_maxabs, report.abs_error_mean);
    var_maxviol = std::max(var_maxviol, report.violation_var);
    ++observations;
    if (!enforce) {
        return;
    }
    const double mean_tol = 1e-10 * std::fabs(report.predicted_mean) + 1e-12 * g_scale;
    const double var_tol =
        report.bound_is_equality
            ? 1e-10 * report.predicted_var_bound_or_value + 1e-12 * g_scale * g_scale
            : 1e-12 * std::max(1.0, g_scale * g_scale);
    if (report.abs_error_mean > mean_tol || report.violation_var > var_tol) {
        throw InvariantViolation("gradient moments left their predicted envelope: " +
                                 to_text(report));
    }
}

namespace {

// Accumulate dW += d o x^T, db += d; returns W^T d.
Vec linear_backward(LinearLayer& lin, const Vec& input, const Vec& d) {
    Vec dx(lin.in, 0.0);
    for (std::size_t r = 0; r < lin.out; ++r) {
        double* drow = lin.dweight.data() + r * lin.in;
        const double* wrow = lin.weight.data() + r * lin.in;
        const double dr = d[r];
        lin.dbias[r] += dr;
        for (std::size_t c = 0; c < lin.in; ++c) {
            drow[c] += dr * input[c];
            dx[c] += wrow[c] * dr;
        }
    }
    return dx;
}

}  // namespace

Vec mlp_backward(MlpModel& model, const MlpTrace& trace, const Vec& dlogits,
                 GradStats* stats) {
    if (trace.layers.size() != model.hidden.size()) {
        throw std::invalid_argument("mlp_backward: trace does not match model");
    }
    const Vec& last_act =
        model.hidden.empty() ? trace.input : trace.layers.back().activ;
    Vec d = linear_backward(model.out, last_act, dlogits);

    for (std::size_t li = model.hidden.size(); li-- > 0;) {
        HiddenLayer& layer = model.hidden[li];
        const LayerTrace& lt = trace.layers[li];

        // ReLU mask.
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (lt.post_norm[i] <= 0.0) {
                d[i] = 0.0;
            }
        }

        Vec d_pre;
        switch (layer.variant) {
            case NormVariant::NoNorm:
                d_pre = d;
                break;
            case NormVariant::LayerNorm: {
                BackwardResult b = backward_layernorm(lt.cache, layer.affine, d);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    layer.dgain[i] += b.dgain[i];
                    layer.dbias_norm[i] += b.dbias[i];
                }
                d_pre = std::move(b.dx);
                break;
            }
            case NormVariant::LayerNormSimple:
                d_pre = backward_simple(lt.cache, d);
                break;
            case NormVariant::DetachNorm:
                d_pre = backward_detach_all(lt.cache, d);
                break;
            case NormVariant::DetachMean:
                d_pre = backward_detach_mean(lt.cache, d);
                break;
            case NormVariant::DetachVariance:
                d_pre = backward_detach_variance(lt.cache, d);
                break;
            case NormVariant::AdaNorm:
                d_pre = backward_adanorm(lt.cache, model.ada, d);
                break;
        }

        if (stats != nullptr && layer.variant != NormVariant::NoNorm) {
            // The moment predictions apply to the gradient entering the
            // normalization core, i.e. after the elementwise gain/phi scale.
            NormVariant rule = layer.variant;
            Vec g_eff;
            const Vec* g_eff_ptr = &d;
            if (layer.variant == NormVariant::LayerNorm) {
                rule = NormVariant::LayerNormSimple;
                g_eff.resize(d.size());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    g_eff[i] = layer.affine.gain[i] * d[i];
                }
                g_eff_ptr = &g_eff;
            } else if (layer.variant == NormVariant::AdaNorm) {
                rule = NormVariant::LayerNormSimple;
                g_eff.resize(d.size());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    g_eff[i] = lt.cache.phi[i] * d[i];
                }
                g_eff_ptr = &g_eff;
            }
            const GradReport rep = theorem1_stats(rule, lt.cache.sigma, *g_eff_ptr, d_pre);
            stats->observe(rep, max_abs(*g_eff_ptr) / lt.cache.sigma);
        }

        const Vec& input = li == 0 ? trace.input : trace.layers[li - 1].activ;
        d = linear_backward(layer.lin, input, d_pre);
    }
    return d;
}

void adam_step(AdamState& state, const std::vector<ParamRef>& params) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].value->size(), 0.0);
            state.v[i].assign(params[i].value->size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter count changed");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Vec& value = *params[p].value;
        const Vec& grad = *params[p].grad;
        Vec& m = state.m[p];
        Vec& v = state.v[p];
        if (value.size() != grad.size() || value.size() != m.size()) {
            throw std::invalid_argument("adam_step: shape mismatch");
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps_opt);
        }
    }
}

void sgd_step(double lr, const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params) {
        if (p.value->size() != p.grad->size()) {
            throw std::invalid_argument("sgd_step: shape mismatch");
        }
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            (*p.value)[i] -= lr * (*p.grad)[i];
        }
    }
}

double clip_global_norm(const std::vector<ParamRef>& params, double max_norm) {
    double sq = 0.0;
    for (const ParamRef& p : params) {
        for (double g : *p.grad) {
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (const ParamRef& p : params) {
            for (double& g : *p.grad) {
                g *= scale;
            }
        }
    }
    return norm;
}

namespace {

constexpr char kMagic[4] = {'N', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw TruncatedFile("checkpoint: truncated integer");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw TruncatedFile("checkpoint: truncated value");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    for (const ParamRef& p : params) {
        write_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_u32(os, static_cast<std::uint32_t>(p.shape.size()));
        for (std::size_t d : p.shape) {
            write_u32(os, static_cast<std::uint32_t>(d));
        }
        for (double v : *p.value) {
            write_f64(os, v);
        }
    }
    if (!os) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

void load_checkpoint(const std::string& path, const std::vector<ParamRef>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    char magic[4];
    if (!is.read(magic, 4)) {
        throw TruncatedFile("checkpoint: missing magic");
    }
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw BadMagic("checkpoint: bad magic bytes");
    }
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    for (const ParamRef& p : params) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) {
            throw TruncatedFile("checkpoint: truncated name");
        }
        if (name != p.name) {
            throw std::runtime_error("checkpoint: expected parameter " + p.name + ", found " +
                                     name);
        }
        const std::uint32_t rank = read_u32(is);
        std::vector<std::size_t> shape(rank);
        std::size_t count = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = read_u32(is);
            count *= shape[d];
        }
        if (shape != p.shape || count != p.value->size()) {
            throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
        }
        for (std::size_t i = 0; i < count; ++i) {
            (*p.value)[i] = read_f64(is);
        }
    }
}

}  // namespace normgrad
