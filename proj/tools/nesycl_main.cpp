#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nesycl/kernels.hpp"
#include "nesycl/runner.hpp"

using nesycl::RunConfig;

namespace {

RunConfig resolve_config(const std::string& config_path, const std::string& benchmark,
                         const std::string& strategy, long long seed, const std::string& out,
                         const std::string& dataset_dir) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = nesycl::load_config_file(config_path);
    if (!benchmark.empty()) cfg.benchmark = benchmark;
    if (!strategy.empty()) cfg.strategy = strategy;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out.empty()) cfg.out_dir = out;
    if (!dataset_dir.empty()) cfg.dataset_dir = dataset_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nesycl: neuro-symbolic continual learning experiments"};
    app.require_subcommand(1);

    std::string config_path, benchmark, strategy, out, dataset_dir, sweep_spec_path;
    long long seed = -1;
    int parallel = 1;
    std::vector<std::string> run_dirs;

    app.add_option("--config", config_path, "JSON config file (keys mirror RunConfig fields)");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--out", out, "output directory");
    app.add_option("--parallel", parallel, "parallel runs for sweep");
    app.add_option("--dataset-dir", dataset_dir, "dataset directory (default $NESYCL_DATA_DIR/<benchmark>)");
    app.add_option("--threads", [](const std::vector<std::string>& v) {
        nesycl::kernels::set_threads(std::stoi(v.back()));
        return true;
    }, "kernel thread budget");

    CLI::App* generate = app.add_subcommand("generate", "generate a benchmark dataset");
    generate->add_option("--benchmark", benchmark, "mnadd-seq | mnadd-shortcut | clevr-like");
    CLI::App* train = app.add_subcommand("train", "train one run");
    train->add_option("--benchmark", benchmark, "benchmark name");
    train->add_option("--strategy", strategy, "continual strategy");
    CLI::App* sweep = app.add_subcommand("sweep", "grid sweep over configs and seeds");
    sweep->add_option("--spec", sweep_spec_path, "sweep spec JSON {base, grid, seeds}")->required();
    CLI::App* eval = app.add_subcommand("eval", "summarize completed runs");
    eval->add_option("runs", run_dirs, "run directories");
    CLI::App* analyze = app.add_subcommand("analyze", "theorem and shortcut reports for a run");
    analyze->add_option("runs", run_dirs, "run directory");
    for (CLI::App* sub : {generate, train, sweep, eval, analyze}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            RunConfig cfg = resolve_config(config_path, benchmark, strategy, seed, out, dataset_dir);
            const std::string dir = nesycl::cmd_generate(cfg);
            std::printf("dataset written to %s\n", dir.c_str());
            return 0;
        }
        if (train->parsed()) {
            RunConfig cfg = resolve_config(config_path, benchmark, strategy, seed, out, dataset_dir);
            const nesycl::RunResult r = nesycl::cmd_train(cfg);
            std::printf("run %s: class_il_y=%.4f class_il_c=%.4f", r.run_dir.c_str(), r.class_il_y,
                        r.class_il_c);
            if (r.ood_y) std::printf(" ood_y=%.4f", *r.ood_y);
            std::printf(" (%.1fs)\n", r.wall_clock_sec);
            return 0;
        }
        if (sweep->parsed()) {
            std::ifstream in(sweep_spec_path);
            if (!in) throw std::runtime_error("cannot open sweep spec: " + sweep_spec_path);
            const nlohmann::json spec = nlohmann::json::parse(in);
            return nesycl::cmd_sweep(spec, out.empty() ? "out/sweep" : out, parallel);
        }
        if (eval->parsed()) return nesycl::cmd_eval(run_dirs, std::cout);
        if (analyze->parsed()) {
            if (run_dirs.empty()) throw std::runtime_error("analyze: run directory required");
            bool ok = true;
            for (const std::string& dir : run_dirs) {
                const nesycl::AnalyzeResult r = nesycl::cmd_analyze(dir);
                ok = ok && r.ok;
                std::printf("%s: theorem2 %zu checkpoints, pinsker %zu/%zu violations, shortcut %s\n",
                            dir.c_str(), r.theorem2.size(), r.pinsker.violations, r.pinsker.checked,
                            r.shortcut.flagged ? "FLAGGED" : "not flagged");
            }
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
