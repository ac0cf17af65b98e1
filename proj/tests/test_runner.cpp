#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nesycl/runner.hpp"
#include "nesycl/stats.hpp"

using namespace nesycl;
namespace fs = std::filesystem;

namespace {

fs::path workspace() {
    const fs::path dir = fs::temp_directory_path() / "nesycl_test_runner";
    fs::create_directories(dir);
    return dir;
}

RunConfig tiny_config(const std::string& strategy, std::uint64_t seed) {
    RunConfig cfg;
    cfg.benchmark = "mnadd-shortcut";
    cfg.strategy = strategy;
    cfg.seed = seed;
    cfg.epochs_per_task = 2;
    cfg.batch_size = 16;
    cfg.buffer_capacity = 48;
    cfg.encoder_hidden = {16};
    cfg.train_per_task = 48;
    cfg.val_per_task = 16;
    cfg.test_per_task = 16;
    cfg.ood_size = 67;
    cfg.supervision_fraction = 0.25;
    cfg.learning_rate = 0.01;
    cfg.out_dir = (workspace() / "runs").string();
    cfg.dataset_dir = (workspace() / "data" / "mnadd-shortcut").string();
    return cfg;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config json round trip mirrors field names") {
    RunConfig cfg = tiny_config("cool", 3);
    cfg.alpha = 2.5;
    cfg.encoder_hidden = {32, 16};
    const nlohmann::json j = config_to_json(cfg);
    CHECK(j.at("benchmark") == "mnadd-shortcut");
    CHECK(j.at("alpha") == 2.5);
    CHECK(j.at("encoder_hidden") == nlohmann::json::array({32, 16}));
    const RunConfig back = config_from_json(j);
    CHECK(config_hash(back) == config_hash(cfg));
    RunConfig changed = back;
    changed.alpha = 1.0;
    CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("generate writes task files plus manifest for each benchmark") {
    RunConfig cfg = tiny_config("naive", 5);
    cfg.out_dir = (workspace() / "gen").string();
    cfg.benchmark = "mnadd-seq";
    cfg.ood_size = 0;
    const std::string seq_dir = cmd_generate(cfg);
    for (int t = 1; t <= 9; ++t) CHECK(fs::exists(fs::path(seq_dir) / ("task_" + std::to_string(t) + ".csv")));
    CHECK(fs::exists(fs::path(seq_dir) / "manifest.json"));
    CHECK(!fs::exists(fs::path(seq_dir) / "ood.csv"));

    cfg.benchmark = "mnadd-shortcut";
    cfg.ood_size = 67;
    const std::string sc_dir = cmd_generate(cfg);
    CHECK(fs::exists(fs::path(sc_dir) / "task_2.csv"));
    CHECK(fs::exists(fs::path(sc_dir) / "ood.csv"));

    cfg.benchmark = "clevr-like";
    cfg.ood_size = 170;
    const std::string cl_dir = cmd_generate(cfg);
    for (int t = 1; t <= 5; ++t) CHECK(fs::exists(fs::path(cl_dir) / ("task_" + std::to_string(t) + ".csv")));
    CHECK(fs::exists(fs::path(cl_dir) / "ood.csv"));

    RunConfig bad = tiny_config("naive", 1);
    bad.benchmark = "bogus";
    CHECK_THROWS_AS((void)cmd_generate(bad), std::invalid_argument);
}

TEST_CASE("train: metrics written, hash matches, determinism is byte exact") {
    RunConfig gen = tiny_config("cool", 7);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);

    RunConfig cfg = tiny_config("cool", 7);
    const RunResult first = cmd_train(cfg);
    CHECK(fs::exists(fs::path(first.run_dir) / "metrics.csv"));
    CHECK(fs::exists(fs::path(first.run_dir) / "run.json"));
    CHECK(fs::exists(fs::path(first.run_dir) / "ckpt_task1.bin"));
    CHECK(fs::exists(fs::path(first.run_dir) / "ckpt_task2.bin"));
    CHECK(fs::exists(fs::path(first.run_dir) / "confusion_digit1.csv"));
    CHECK(first.class_il_y >= 0.0);
    CHECK(first.class_il_y <= 1.0);
    CHECK(first.ood_y.has_value());
    CHECK(first.task_il_y >= first.class_il_y - 1e-12);  // masking can only help

    // config hash recorded in outputs matches a re-hash of the config
    {
        std::ifstream rin(fs::path(first.run_dir) / "run.json");
        const nlohmann::json run = nlohmann::json::parse(rin);
        CHECK(run.at("config_hash") == config_hash(config_from_json(run.at("config"))));
        const std::string metrics = slurp(fs::path(first.run_dir) / "metrics.csv");
        CHECK(metrics.find(run.at("config_hash").get<std::string>()) != std::string::npos);
    }

    const std::string metrics_a = slurp(fs::path(first.run_dir) / "metrics.csv");
    const RunResult second = cmd_train(cfg);
    const std::string metrics_b = slurp(fs::path(second.run_dir) / "metrics.csv");
    CHECK(metrics_a == metrics_b);  // byte-identical

    RunConfig other = cfg;
    other.seed = 8;
    const RunResult third = cmd_train(other);
    CHECK(metrics_a != slurp(fs::path(third.run_dir) / "metrics.csv"));
}

TEST_CASE("train: offline merges the stream into a single task") {
    RunConfig gen = tiny_config("offline", 9);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);
    RunConfig cfg = tiny_config("offline", 9);
    const RunResult r = cmd_train(cfg);
    CHECK(r.checkpoints.size() == 1);
    CHECK(!r.fwt_y.has_value());  // single trained row: FWT undefined
    CHECK(!r.bwt_y.has_value());
}

TEST_CASE("train: every registered strategy completes on the tiny stream") {
    RunConfig gen = tiny_config("naive", 11);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);
    for (const std::string& name : strategy_registry()) {
        RunConfig cfg = tiny_config(name, 11);
        cfg.epochs_per_task = 1;
        const RunResult r = cmd_train(cfg);
        CHECK(r.class_il_y >= 0.0);
    }
}

TEST_CASE("sweep: grid of one equals cmd_train and aggregate is a pure function") {
    RunConfig gen = tiny_config("er", 13);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);

    RunConfig base = tiny_config("er", 13);
    base.epochs_per_task = 1;
    nlohmann::json spec;
    spec["base"] = config_to_json(base);
    spec["grid"]["learning_rate"] = {0.01};
    spec["seeds"] = {13};
    const std::string sweep_dir = (workspace() / "sweep").string();
    CHECK(cmd_sweep(spec, sweep_dir, 1) == 0);
    REQUIRE(fs::exists(fs::path(sweep_dir) / "sweep.csv"));

    RunConfig solo = base;
    solo.out_dir = (workspace() / "solo").string();
    const RunResult r = cmd_train(solo);
    const std::string sweep_csv = slurp(fs::path(sweep_dir) / "sweep.csv");
    char expect[64];
    std::snprintf(expect, sizeof expect, "%.17g", r.val_class_il_y);
    CHECK(sweep_csv.find(expect) != std::string::npos);
    CHECK(sweep_csv.find(",1\n") != std::string::npos);  // the selected cell
}

TEST_CASE("eval summarizes per-run metrics csv files") {
    RunConfig gen = tiny_config("der", 15);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);
    RunConfig cfg = tiny_config("der", 15);
    cfg.epochs_per_task = 1;
    const RunResult r = cmd_train(cfg);

    std::ostringstream out;
    CHECK(cmd_eval({r.run_dir}, out) == 0);
    char expect[64];
    std::snprintf(expect, sizeof expect, "%.17g", r.class_il_y);
    CHECK(out.str().find("der") != std::string::npos);
    CHECK(out.str().find(expect) != std::string::npos);
    std::ostringstream bad;
    CHECK(cmd_eval({"/nonexistent/run"}, bad) == 1);
}

TEST_CASE("analyze emits theorem and shortcut reports for a completed run") {
    RunConfig gen = tiny_config("cool", 17);
    gen.out_dir = (workspace() / "data").string();
    cmd_generate(gen);
    RunConfig cfg = tiny_config("cool", 17);
    cfg.epochs_per_task = 3;
    cfg.supervision_fraction = 0.25;
    const RunResult r = cmd_train(cfg);

    const AnalyzeResult a = cmd_analyze(r.run_dir);
    CHECK(a.theorem2.size() == r.checkpoints.size());
    for (const BoundReport& rep : a.theorem2)
        if (rep.applicable) CHECK(rep.holds);
    CHECK(a.pinsker.violations == 0);
    CHECK(fs::exists(fs::path(r.run_dir) / "analysis.txt"));
    CHECK(fs::exists(fs::path(r.run_dir) / "analysis.csv"));

    CHECK_THROWS_AS((void)cmd_analyze((workspace() / "empty_run").string()), std::runtime_error);
}

#ifdef NESYCL_CLI_PATH
TEST_CASE("cli smoke: generate, train, analyze round trip") {
    const fs::path dir = workspace() / "cli";
    fs::create_directories(dir);
    const std::string data_dir = (dir / "data").string();
    const std::string out_dir = (dir / "out").string();

    RunConfig cfg = tiny_config("er", 19);
    cfg.epochs_per_task = 1;
    cfg.out_dir = out_dir;
    cfg.dataset_dir = data_dir + "/mnadd-shortcut";
    const std::string config_path = (dir / "config.json").string();
    {
        std::ofstream out(config_path);
        out << config_to_json(cfg).dump(2);
    }
    const std::string cli = NESYCL_CLI_PATH;
    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    CHECK(run("generate --config " + config_path + " --out " + (dir / "data").string()) == 0);
    CHECK(run("train --config " + config_path) == 0);
    const std::string run_dir = out_dir + "/mnadd-shortcut/er/19";
    CHECK(fs::exists(fs::path(run_dir) / "metrics.csv"));
    CHECK(run("analyze " + run_dir) == 0);
    CHECK(run("eval " + run_dir) == 0);
    // usage error: unknown benchmark
    CHECK(run("generate --benchmark bogus --out " + (dir / "data2").string()) != 0);
}
#endif
