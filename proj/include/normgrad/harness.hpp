#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "normgrad/dataset.hpp"
#include "normgrad/net.hpp"
#include "normgrad/norm.hpp"
#include "normgrad/vec.hpp"

#include <nlohmann/json_fwd.hpp>

namespace normgrad {

struct OptimizerConfig {
    enum class Kind { Adam, Sgd };
    Kind kind = Kind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct DatasetConfig {
    enum class Kind { Blobs, Spirals, Mnist };
    Kind kind = Kind::Blobs;
    // blobs
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t dim = 16;
    double spread = 0.2;
    // spirals
    double noise = 0.05;
    // mnist
    std::string images;
    std::string labels;
    std::string test_images;
    std::string test_labels;
    std::size_t val_count = 5000;
};

struct ExperimentConfig {
    NormVariant variant = NormVariant::LayerNorm;
    double ada_C = 1.0;
    double ada_k = 0.1;
    std::size_t depth = 2;
    std::size_t width = 64;
    OptimizerConfig optimizer;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 7;
    DatasetConfig dataset;
    double eps = 1e-5;
    std::optional<double> clip;
    std::string out_dir = "runs/out";

    // Not part of the JSON schema: set programmatically.
    std::vector<std::size_t> widths_override;  // empty -> depth copies of width
    bool check_grads = true;

    std::vector<std::size_t> widths() const {
        return widths_override.empty() ? std::vector<std::size_t>(depth, width)
                                       : widths_override;
    }
};

// Strict parse: unknown keys anywhere are rejected, ada fields are required
// iff variant is adanorm. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double grad_mean_maxabs = 0.0;
    double grad_var_maxviol = 0.0;
    // JSON-only extras (not in the fixed CSV schema).
    double train_acc = 0.0;
    std::uint64_t ada_tail_events = 0;
};

struct RunRecord {
    NormVariant variant = NormVariant::LayerNorm;
    std::vector<EpochRow> epochs;
    enum class Status { Completed, Diverged };
    Status status = Status::Completed;
    std::size_t diverged_epoch = 0;  // meaningful iff status == Diverged
    double test_acc = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t seed_used = 0;
    std::string seed_source;  // "config" or "env"
    std::string rng_algorithm;
    std::uint64_t dataset_hash = 0;

    bool diverged() const { return status == Status::Diverged; }
    // Epoch with the lowest validation loss; npos when no epochs completed.
    std::size_t best_val_epoch() const;
};

// Fixed schema: epoch,train_loss,val_loss,val_acc,grad_mean_maxabs,
// grad_var_maxviol. UTF-8, LF line endings.
std::string write_run_csv(const std::vector<EpochRow>& rows);
std::vector<EpochRow> parse_run_csv(const std::string& text);

nlohmann::json to_json(const RunRecord& rec, const ExperimentConfig& cfg);

// NORMGRAD_SEED overrides the config seed when set.
struct SeedInfo {
    std::uint64_t seed = 0;
    std::string source;
};
SeedInfo resolve_seed(const ExperimentConfig& cfg);

Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t seed);

struct EvalResult {
    double loss = 0.0;
    double acc = 0.0;
};

// Average loss and accuracy over dataset examples [begin, begin + count).
EvalResult evaluate_split(const MlpModel& model, const Dataset& dataset,
                          std::size_t begin, std::size_t count);

// Trains per cfg on a prebuilt dataset; records per-epoch metrics and the
// per-step gradient-moment instrumentation. A non-finite loss (or forward)
// ends the run with Status::Diverged instead of crashing.
RunRecord run_on_dataset(const ExperimentConfig& cfg, const Dataset& dataset);

// Builds the dataset, runs, and writes run-<variant>.csv / .json to out_dir.
RunRecord run_experiment(const ExperimentConfig& cfg);

void write_run_outputs(const ExperimentConfig& cfg, const RunRecord& rec);

struct CompareRow {
    NormVariant variant = NormVariant::LayerNorm;
    std::string status;  // "completed" or "diverged@<epoch>"
    std::size_t best_val_epoch = 0;
    double train_loss_at_best = 0.0;
    double val_loss_at_best = 0.0;
    double overfit_gap = 0.0;  // val_loss - train_loss at the best-val epoch
    double val_acc_at_best = 0.0;
    double final_train_acc = 0.0;
    double test_acc = 0.0;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<RunRecord> runs;
    std::uint64_t seed_used = 0;
    std::uint64_t dataset_hash = 0;
    std::string markdown;
    std::string csv;
};

// Runs each variant on one shared dataset instance with one shared seed and
// tabulates final metrics plus the train-vs-val loss gap.
CompareResult compare_suite(const ExperimentConfig& base_cfg,
                            const std::vector<NormVariant>& variants);

std::vector<CompareRow> parse_compare_csv(const std::string& text);
std::string write_compare_csv(const std::vector<CompareRow>& rows);

}  // namespace normgrad
