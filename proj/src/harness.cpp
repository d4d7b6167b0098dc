#include "normgrad/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "normgrad/csv.hpp"
#include "normgrad/errors.hpp"

namespace normgrad {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx,
                const std::vector<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ConfigError("config: unknown key \"" + it.key() + "\" in " + ctx);
        }
    }
}

const json& require(const json& j, const std::string& ctx, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError("config: missing key \"" + key + "\" in " + ctx);
    }
    return *it;
}

template <typename T>
T get_as(const json& j, const std::string& ctx, const std::string& key) {
    try {
        return require(j, ctx, key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for \"" + key + "\" in " + ctx + ": " + e.what());
    }
}

OptimizerConfig parse_optimizer(const json& j) {
    OptimizerConfig opt;
    const std::string type = get_as<std::string>(j, "optimizer", "type");
    if (type == "adam") {
        opt.kind = OptimizerConfig::Kind::Adam;
        check_keys(j, "optimizer", {"type", "lr", "beta1", "beta2", "eps"});
        opt.lr = get_as<double>(j, "optimizer", "lr");
        if (j.contains("beta1")) opt.beta1 = get_as<double>(j, "optimizer", "beta1");
        if (j.contains("beta2")) opt.beta2 = get_as<double>(j, "optimizer", "beta2");
        if (j.contains("eps")) opt.eps = get_as<double>(j, "optimizer", "eps");
    } else if (type == "sgd") {
        opt.kind = OptimizerConfig::Kind::Sgd;
        check_keys(j, "optimizer", {"type", "lr"});
        opt.lr = get_as<double>(j, "optimizer", "lr");
    } else {
        throw ConfigError("config: unknown optimizer type \"" + type + "\"");
    }
    if (!(opt.lr > 0.0)) {
        throw ConfigError("config: optimizer lr must be > 0");
    }
    return opt;
}

DatasetConfig parse_dataset(const json& j) {
    DatasetConfig ds;
    const std::string kind = get_as<std::string>(j, "dataset", "kind");
    if (kind == "blobs") {
        ds.kind = DatasetConfig::Kind::Blobs;
        check_keys(j, "dataset", {"kind", "classes", "per_class", "dim", "spread"});
        ds.classes = get_as<std::size_t>(j, "dataset", "classes");
        ds.per_class = get_as<std::size_t>(j, "dataset", "per_class");
        ds.dim = get_as<std::size_t>(j, "dataset", "dim");
        ds.spread = get_as<double>(j, "dataset", "spread");
    } else if (kind == "spirals") {
        ds.kind = DatasetConfig::Kind::Spirals;
        check_keys(j, "dataset", {"kind", "classes", "per_class", "noise"});
        ds.classes = get_as<std::size_t>(j, "dataset", "classes");
        ds.per_class = get_as<std::size_t>(j, "dataset", "per_class");
        ds.noise = get_as<double>(j, "dataset", "noise");
    } else if (kind == "mnist") {
        ds.kind = DatasetConfig::Kind::Mnist;
        check_keys(j, "dataset",
                   {"kind", "images", "labels", "test_images", "test_labels", "val_count"});
        ds.images = get_as<std::string>(j, "dataset", "images");
        ds.labels = get_as<std::string>(j, "dataset", "labels");
        ds.test_images = get_as<std::string>(j, "dataset", "test_images");
        ds.test_labels = get_as<std::string>(j, "dataset", "test_labels");
        if (j.contains("val_count")) {
            ds.val_count = get_as<std::size_t>(j, "dataset", "val_count");
        }
    } else {
        throw ConfigError("config: unknown dataset kind \"" + kind + "\"");
    }
    if (ds.kind != DatasetConfig::Kind::Mnist && (ds.classes < 1 || ds.per_class < 1)) {
        throw ConfigError("config: dataset counts must be >= 1");
    }
    return ds;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    check_keys(j, "config",
               {"variant", "ada_C", "ada_k", "depth", "width", "optimizer", "epochs",
                "batch_size", "seed", "dataset", "eps", "clip", "out_dir"});
    ExperimentConfig cfg;
    try {
        cfg.variant = parse_variant(get_as<std::string>(j, "config", "variant"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    const bool is_ada = cfg.variant == NormVariant::AdaNorm;
    if (is_ada) {
        cfg.ada_C = get_as<double>(j, "config", "ada_C");
        cfg.ada_k = get_as<double>(j, "config", "ada_k");
        if (!(cfg.ada_C > 0.0) || !(cfg.ada_k > 0.0 && cfg.ada_k < 1.0)) {
            throw ConfigError("config: need ada_C > 0 and ada_k in (0,1)");
        }
    } else if (j.contains("ada_C") || j.contains("ada_k")) {
        throw ConfigError("config: ada_C/ada_k are only valid for the adanorm variant");
    }

    cfg.depth = get_as<std::size_t>(j, "config", "depth");
    cfg.width = get_as<std::size_t>(j, "config", "width");
    cfg.optimizer = parse_optimizer(require(j, "config", "optimizer"));
    cfg.epochs = get_as<std::size_t>(j, "config", "epochs");
    cfg.batch_size = get_as<std::size_t>(j, "config", "batch_size");
    cfg.seed = get_as<std::uint64_t>(j, "config", "seed");
    cfg.dataset = parse_dataset(require(j, "config", "dataset"));
    cfg.eps = get_as<double>(j, "config", "eps");
    if (j.contains("clip")) {
        cfg.clip = get_as<double>(j, "config", "clip");
        if (!(*cfg.clip > 0.0)) {
            throw ConfigError("config: clip must be > 0");
        }
    }
    cfg.out_dir = get_as<std::string>(j, "config", "out_dir");

    if (cfg.depth < 1 || cfg.width < 1 || cfg.epochs < 1 || cfg.batch_size < 1) {
        throw ConfigError("config: depth/width/epochs/batch_size must be >= 1");
    }
    if (cfg.eps < 0.0) {
        throw ConfigError("config: eps must be >= 0");
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("config: cannot open " + path);
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["variant"] = to_string(cfg.variant);
    if (cfg.variant == NormVariant::AdaNorm) {
        j["ada_C"] = cfg.ada_C;
        j["ada_k"] = cfg.ada_k;
    }
    j["depth"] = cfg.depth;
    j["width"] = cfg.width;
    json opt;
    opt["type"] = cfg.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd";
    opt["lr"] = cfg.optimizer.lr;
    if (cfg.optimizer.kind == OptimizerConfig::Kind::Adam) {
        opt["beta1"] = cfg.optimizer.beta1;
        opt["beta2"] = cfg.optimizer.beta2;
        opt["eps"] = cfg.optimizer.eps;
    }
    j["optimizer"] = opt;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    json ds;
    switch (cfg.dataset.kind) {
        case DatasetConfig::Kind::Blobs:
            ds["kind"] = "blobs";
            ds["classes"] = cfg.dataset.classes;
            ds["per_class"] = cfg.dataset.per_class;
            ds["dim"] = cfg.dataset.dim;
            ds["spread"] = cfg.dataset.spread;
            break;
        case DatasetConfig::Kind::Spirals:
            ds["kind"] = "spirals";
            ds["classes"] = cfg.dataset.classes;
            ds["per_class"] = cfg.dataset.per_class;
            ds["noise"] = cfg.dataset.noise;
            break;
        case DatasetConfig::Kind::Mnist:
            ds["kind"] = "mnist";
            ds["images"] = cfg.dataset.images;
            ds["labels"] = cfg.dataset.labels;
            ds["test_images"] = cfg.dataset.test_images;
            ds["test_labels"] = cfg.dataset.test_labels;
            ds["val_count"] = cfg.dataset.val_count;
            break;
    }
    j["dataset"] = ds;
    j["eps"] = cfg.eps;
    if (cfg.clip) {
        j["clip"] = *cfg.clip;
    }
    j["out_dir"] = cfg.out_dir;
    return j;
}

namespace {

constexpr const char* kRunCsvHeader =
    "epoch,train_loss,val_loss,val_acc,grad_mean_maxabs,grad_var_maxviol";

std::size_t parse_index(const std::string& s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("csv: malformed index: " + s);
    }
    return v;
}

}  // namespace

std::string write_run_csv(const std::vector<EpochRow>& rows) {
    std::string out = kRunCsvHeader;
    out.push_back('\n');
    for (const EpochRow& r : rows) {
        out += std::to_string(r.epoch);
        out.push_back(',');
        out += csv::format_double(r.train_loss);
        out.push_back(',');
        out += csv::format_double(r.val_loss);
        out.push_back(',');
        out += csv::format_double(r.val_acc);
        out.push_back(',');
        out += csv::format_double(r.grad_mean_maxabs);
        out.push_back(',');
        out += csv::format_double(r.grad_var_maxviol);
        out.push_back('\n');
    }
    return out;
}

std::vector<EpochRow> parse_run_csv(const std::string& text) {
    const std::vector<std::string> lines = csv::split_lines(text);
    if (lines.empty() || lines[0] != kRunCsvHeader) {
        throw std::invalid_argument("csv: missing or wrong run header");
    }
    std::vector<EpochRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = csv::split_line(lines[i]);
        if (f.size() != 6) {
            throw std::invalid_argument("csv: wrong field count in row " + std::to_string(i));
        }
        EpochRow r;
        r.epoch = parse_index(f[0]);
        r.train_loss = csv::parse_double(f[1]);
        r.val_loss = csv::parse_double(f[2]);
        r.val_acc = csv::parse_double(f[3]);
        r.grad_mean_maxabs = csv::parse_double(f[4]);
        r.grad_var_maxviol = csv::parse_double(f[5]);
        rows.push_back(r);
    }
    return rows;
}

std::size_t RunRecord::best_val_epoch() const {
    if (epochs.empty()) {
        return static_cast<std::size_t>(-1);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < epochs.size(); ++i) {
        if (epochs[i].val_loss < epochs[best].val_loss) {
            best = i;
        }
    }
    return best;
}

json to_json(const RunRecord& rec, const ExperimentConfig& cfg) {
    json j;
    j["variant"] = to_string(rec.variant);
    j["status"] = rec.diverged() ? "diverged" : "completed";
    if (rec.diverged()) {
        j["diverged_epoch"] = rec.diverged_epoch;
    }
    j["seed"] = rec.seed_used;
    j["seed_source"] = rec.seed_source;
    j["rng_algorithm"] = rec.rng_algorithm;
    j["dataset_hash"] = rec.dataset_hash;
    j["test_acc"] = rec.test_acc;
    j["wall_time_s"] = rec.wall_time_s;
    j["config"] = to_json(cfg);
    json rows = json::array();
    for (const EpochRow& r : rec.epochs) {
        rows.push_back(json{{"epoch", r.epoch},
                            {"train_loss", r.train_loss},
                            {"val_loss", r.val_loss},
                            {"val_acc", r.val_acc},
                            {"train_acc", r.train_acc},
                            {"grad_mean_maxabs", r.grad_mean_maxabs},
                            {"grad_var_maxviol", r.grad_var_maxviol},
                            {"ada_tail_events", r.ada_tail_events}});
    }
    j["epochs"] = rows;
    return j;
}

SeedInfo resolve_seed(const ExperimentConfig& cfg) {
    SeedInfo si{cfg.seed, "config"};
    if (const char* env = std::getenv("NORMGRAD_SEED")) {
        const std::string s(env);
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError("NORMGRAD_SEED is not an unsigned integer: " + s);
        }
        si.seed = v;
        si.source = "env";
    }
    return si;
}

Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
    Rng rng = Rng(seed).substream(0xDA7A);
    switch (cfg.kind) {
        case DatasetConfig::Kind::Blobs:
            return gen_blobs(rng, cfg.classes, cfg.per_class, cfg.dim, cfg.spread);
        case DatasetConfig::Kind::Spirals:
            return gen_spirals(rng, cfg.classes, cfg.per_class, cfg.noise);
        case DatasetConfig::Kind::Mnist: {
            Dataset train = load_mnist_idx(cfg.images, cfg.labels);
            Dataset test = load_mnist_idx(cfg.test_images, cfg.test_labels);
            if (cfg.val_count >= train.size()) {
                throw ConfigError("config: mnist val_count >= training set size");
            }
            Dataset ds;
            ds.inputs = std::move(train.inputs);
            ds.labels = std::move(train.labels);
            ds.n_train = ds.inputs.size() - cfg.val_count;
            ds.n_val = cfg.val_count;
            for (std::size_t i = 0; i < test.size(); ++i) {
                ds.inputs.push_back(std::move(test.inputs[i]));
                ds.labels.push_back(test.labels[i]);
            }
            ds.n_test = test.size();
            ds.n_classes = 10;
            return ds;
        }
    }
    throw std::logic_error("build_dataset: unhandled kind");
}

EvalResult evaluate_split(const MlpModel& model, const Dataset& dataset,
                          std::size_t begin, std::size_t count) {
    EvalResult r;
    if (count == 0) {
        return r;
    }
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) {
        const MlpTrace trace = mlp_forward(model, dataset.inputs[i]);
        const std::size_t label = static_cast<std::size_t>(dataset.labels[i]);
        loss_sum += softmax_xent(trace.logits, label).loss;
        const std::size_t pred = static_cast<std::size_t>(
            std::max_element(trace.logits.begin(), trace.logits.end()) -
            trace.logits.begin());
        if (pred == label) {
            ++correct;
        }
    }
    r.loss = loss_sum / static_cast<double>(count);
    r.acc = static_cast<double>(correct) / static_cast<double>(count);
    return r;
}

RunRecord run_on_dataset(const ExperimentConfig& cfg, const Dataset& dataset) {
    const auto t0 = std::chrono::steady_clock::now();
    const SeedInfo si = resolve_seed(cfg);

    RunRecord rec;
    rec.variant = cfg.variant;
    rec.seed_used = si.seed;
    rec.seed_source = si.source;
    rec.rng_algorithm = Rng::algorithm();
    rec.dataset_hash = dataset.content_hash();

    Rng model_rng = Rng(si.seed).substream(0x6D6F);
    Rng shuffle_rng = Rng(si.seed).substream(0x5348);

    const AdaNormConfig ada{cfg.ada_C, cfg.ada_k};
    MlpModel model = make_mlp(model_rng, dataset.dim(), cfg.widths(),
                              static_cast<std::size_t>(dataset.n_classes), cfg.variant, ada,
                              cfg.eps);
    std::vector<ParamRef> refs = params(model);

    AdamState adam;
    adam.lr = cfg.optimizer.lr;
    adam.beta1 = cfg.optimizer.beta1;
    adam.beta2 = cfg.optimizer.beta2;
    adam.eps_opt = cfg.optimizer.eps;

    std::vector<std::size_t> order(dataset.n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        try {
            // Deterministic reshuffle each epoch.
            for (std::size_t i = order.size(); i > 1; --i) {
                const std::size_t j = shuffle_rng.uniform_int(i);
                std::swap(order[i - 1], order[j]);
            }

            GradStats stats;
            stats.enforce = cfg.check_grads;
            double loss_sum = 0.0;
            std::uint64_t tail_events = 0;

            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
                zero_grads(model);
                for (std::size_t k = 0; k < bsz; ++k) {
                    const std::size_t idx = order[start + k];
                    const MlpTrace trace = mlp_forward(model, dataset.inputs[idx]);
                    for (const LayerTrace& lt : trace.layers) {
                        tail_events += lt.cache.tail_count;
                    }
                    LossGrad lg = softmax_xent(
                        trace.logits, static_cast<std::size_t>(dataset.labels[idx]));
                    if (!std::isfinite(lg.loss)) {
                        throw NonFinite("training loss is non-finite");
                    }
                    loss_sum += lg.loss;
                    for (double& d : lg.dlogits) {
                        d /= static_cast<double>(bsz);
                    }
                    mlp_backward(model, trace, lg.dlogits, &stats);
                }
                if (cfg.clip) {
                    clip_global_norm(refs, *cfg.clip);
                }
                if (cfg.optimizer.kind == OptimizerConfig::Kind::Adam) {
                    adam_step(adam, refs);
                } else {
                    sgd_step(cfg.optimizer.lr, refs);
                }
            }

            EpochRow row;
            row.epoch = epoch;
            row.train_loss = loss_sum / static_cast<double>(dataset.n_train);
            const EvalResult val = evaluate_split(model, dataset, dataset.val_begin(),
                                                  dataset.n_val);
            const EvalResult train = evaluate_split(model, dataset, dataset.train_begin(),
                                                    dataset.n_train);
            row.val_loss = val.loss;
            row.val_acc = val.acc;
            row.train_acc = train.acc;
            row.grad_mean_maxabs = stats.mean_maxabs;
            row.grad_var_maxviol = stats.var_maxviol;
            row.ada_tail_events = tail_events;
            rec.epochs.push_back(row);
        } catch (const NonFinite&) {
            rec.status = RunRecord::Status::Diverged;
            rec.diverged_epoch = epoch;
            break;
        }
    }

    if (!rec.diverged()) {
        rec.test_acc = evaluate_split(model, dataset, dataset.test_begin(), dataset.n_test).acc;
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

void write_run_outputs(const ExperimentConfig& cfg, const RunRecord& rec) {
    std::filesystem::create_directories(cfg.out_dir);
    const std::string stem = cfg.out_dir + "/run-" + to_string(rec.variant);
    {
        std::ofstream os(stem + ".csv", std::ios::binary);
        os << write_run_csv(rec.epochs);
    }
    {
        std::ofstream os(stem + ".json", std::ios::binary);
        os << to_json(rec, cfg).dump(2) << "\n";
    }
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
    const SeedInfo si = resolve_seed(cfg);
    const Dataset dataset = build_dataset(cfg.dataset, si.seed);
    RunRecord rec = run_on_dataset(cfg, dataset);
    write_run_outputs(cfg, rec);
    return rec;
}

namespace {

constexpr const char* kCompareCsvHeader =
    "variant,status,best_val_epoch,train_loss_at_best,val_loss_at_best,overfit_gap,"
    "val_acc_at_best,final_train_acc,test_acc";

CompareRow make_compare_row(const RunRecord& rec) {
    CompareRow row;
    row.variant = rec.variant;
    row.status = rec.diverged() ? "diverged@" + std::to_string(rec.diverged_epoch)
                                : "completed";
    const std::size_t best = rec.best_val_epoch();
    if (best == static_cast<std::size_t>(-1)) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.best_val_epoch = 0;
        row.train_loss_at_best = nan;
        row.val_loss_at_best = nan;
        row.overfit_gap = nan;
        row.val_acc_at_best = nan;
        row.final_train_acc = nan;
        row.test_acc = nan;
        return row;
    }
    const EpochRow& b = rec.epochs[best];
    row.best_val_epoch = best;
    row.train_loss_at_best = b.train_loss;
    row.val_loss_at_best = b.val_loss;
    row.overfit_gap = b.val_loss - b.train_loss;
    row.val_acc_at_best = b.val_acc;
    row.final_train_acc = rec.epochs.back().train_acc;
    row.test_acc = rec.diverged() ? std::numeric_limits<double>::quiet_NaN() : rec.test_acc;
    return row;
}

}  // namespace

std::string write_compare_csv(const std::vector<CompareRow>& rows) {
    std::string out = kCompareCsvHeader;
    out.push_back('\n');
    for (const CompareRow& r : rows) {
        out += to_string(r.variant);
        out.push_back(',');
        out += r.status;
        out.push_back(',');
        out += std::to_string(r.best_val_epoch);
        out.push_back(',');
        out += csv::format_double(r.train_loss_at_best);
        out.push_back(',');
        out += csv::format_double(r.val_loss_at_best);
        out.push_back(',');
        out += csv::format_double(r.overfit_gap);
        out.push_back(',');
        out += csv::format_double(r.val_acc_at_best);
        out.push_back(',');
        out += csv::format_double(r.final_train_acc);
        out.push_back(',');
        out += csv::format_double(r.test_acc);
        out.push_back('\n');
    }
    return out;
}

std::vector<CompareRow> parse_compare_csv(const std::string& text) {
    const std::vector<std::string> lines = csv::split_lines(text);
    if (lines.empty() || lines[0] != kCompareCsvHeader) {
        throw std::invalid_argument("csv: missing or wrong compare header");
    }
    std::vector<CompareRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = csv::split_line(lines[i]);
        if (f.size() != 9) {
            throw std::invalid_argument("csv: wrong field count in row " + std::to_string(i));
        }
        CompareRow r;
        r.variant = parse_variant(f[0]);
        r.status = f[1];
        r.best_val_epoch = parse_index(f[2]);
        r.train_loss_at_best = csv::parse_double(f[3]);
        r.val_loss_at_best = csv::parse_double(f[4]);
        r.overfit_gap = csv::parse_double(f[5]);
        r.val_acc_at_best = csv::parse_double(f[6]);
        r.final_train_acc = csv::parse_double(f[7]);
        r.test_acc = csv::parse_double(f[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

CompareResult compare_suite(const ExperimentConfig& base_cfg,
                            const std::vector<NormVariant>& variants) {
    if (variants.empty()) {
        throw std::invalid_argument("compare_suite: variant list is empty");
    }
    const SeedInfo si = resolve_seed(base_cfg);
    const Dataset dataset = build_dataset(base_cfg.dataset, si.seed);

    CompareResult result;
    result.seed_used = si.seed;
    result.dataset_hash = dataset.content_hash();

    for (NormVariant v : variants) {
        ExperimentConfig cfg = base_cfg;
        cfg.variant = v;
        RunRecord rec = run_on_dataset(cfg, dataset);
        if (rec.dataset_hash != result.dataset_hash) {
            throw InvariantViolation("compare_suite: dataset hash changed between runs");
        }
        result.rows.push_back(make_compare_row(rec));
        result.runs.push_back(std::move(rec));
    }

    result.csv = write_compare_csv(result.rows);

    std::ostringstream md;
    md << "# Variant comparison\n\n";
    md << "- seed: " << result.seed_used << "\n";
    md << "- dataset_hash: " << result.dataset_hash << "\n";
    md << "- rng: " << Rng::algorithm() << "\n\n";
    md << "| variant | status | best_val_epoch | train_loss_at_best | val_loss_at_best "
          "| overfit_gap | val_acc_at_best | final_train_acc | test_acc |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const CompareRow& r : result.rows) {
        md << "| " << to_string(r.variant) << " | " << r.status << " | " << r.best_val_epoch
           << " | " << csv::format_double(r.train_loss_at_best) << " | "
           << csv::format_double(r.val_loss_at_best) << " | "
           << csv::format_double(r.overfit_gap) << " | "
           << csv::format_double(r.val_acc_at_best) << " | "
           << csv::format_double(r.final_train_acc) << " | "
           << csv::format_double(r.test_acc) << " |\n";
    }
    result.markdown = md.str();
    return result;
}

}  // namespace normgrad
