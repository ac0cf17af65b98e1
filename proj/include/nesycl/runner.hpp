#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nesycl/analysis.hpp"
#include "nesycl/benchmarks.hpp"
#include "nesycl/continual.hpp"
#include "nesycl/metrics.hpp"

namespace nesycl {

// Fully determines a run given a dataset directory; JSON config keys mirror
// the field names exactly.
struct RunConfig {
    std::string benchmark = "mnadd-shortcut";
    std::string model = "nesy";  // nesy | cbm
    std::string strategy = "naive";
    double alpha = 1.0;
    double beta_replay = 1.0;
    double lambda_ewc = 1.0;
    double lambda_lwf = 1.0;
    double lwf_temperature = 2.0;
    double w_c = 1.0;
    std::size_t buffer_capacity = 200;
    int epochs_per_task = 20;
    int batch_size = 32;
    int replay_batch_size = 0;
    std::vector<int> encoder_hidden = {64};
    std::uint64_t seed = 1;
    double learning_rate = 0.005;
    double lr_decay = 0.95;
    double supervision_fraction = 0.0;
    int train_per_task = 600;
    int val_per_task = 120;
    int test_per_task = 200;
    int ood_size = 200;
    int feature_dim = 16;
    double noise_sigma = 1.0;
    bool zero_final_init = false;
    bool dropout = false;
    bool noise_injection = false;
    std::string out_dir = "out";
    std::string dataset_dir;  // empty -> $NESYCL_DATA_DIR/<benchmark>, else ./data/<benchmark>

    StrategyConfig strategy_config() const;
    AdamConfig adam_config() const;
    StreamSizes sizes() const;
};

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);
std::string config_hash(const RunConfig& config);
std::string default_dataset_dir(const RunConfig& config);

struct RunResult {
    std::string run_dir;
    std::string hash;
    AccuracyMatrix acc_y, acc_c, acc_y_masked, acc_c_masked;
    double class_il_y = 0.0, class_il_c = 0.0;
    double task_il_y = 0.0, task_il_c = 0.0;
    std::optional<double> fwt_y;
    std::optional<double> bwt_y;
    std::optional<double> ood_y, ood_c;
    double val_class_il_y = 0.0;
    std::vector<std::string> checkpoints;
    double wall_clock_sec = 0.0;
};

// Writes dataset CSVs + manifest under <out>/<benchmark>; returns the dir.
std::string cmd_generate(const RunConfig& config);

// Runs the full task sequence; writes metrics.csv, run.json, per-slot
// confusion CSVs and per-task checkpoints under
// <out>/<benchmark>/<strategy>/<seed>/.
RunResult cmd_train(const RunConfig& config);

// Grid sweep: spec carries {"base": <config>, "grid": {param: [values]},
// "seeds": [..]}; runs all (cell, seed) pairs, aggregates mean +- std and
// marks the validation-selected cell. Returns 0 iff every run completed.
int cmd_sweep(const nlohmann::json& sweep_spec, const std::string& out_dir, int parallelism);

// Recomputes summary metrics from per-run metrics.csv files.
int cmd_eval(const std::vector<std::string>& run_dirs, std::ostream& out);

struct AnalyzeResult {
    bool ok = false;
    Theorem1Report theorem1;
    std::vector<BoundReport> theorem2;  // one per trained task checkpoint
    PinskerReport pinsker;
    ShortcutReport shortcut;
};

// Theorem/shortcut reports over a completed run's checkpoints.
AnalyzeResult cmd_analyze(const std::string& run_dir);

// Shared helpers used by tests and the acceptance suite.
Predictor build_predictor(const RunConfig& config, const TaskStream& stream,
                          const CompiledKnowledge* knowledge);
void evaluate_after_task(Predictor& pred, const TaskStream& stream, RunResult& result);

}  // namespace nesycl
