#include "nesycl/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <omp.h>

#include "nesycl/stats.hpp"

namespace nesycl {

namespace fs = std::filesystem;
using nlohmann::json;

StrategyConfig RunConfig::strategy_config() const {
    StrategyConfig s;
    s.strategy = strategy;
    s.alpha = alpha;
    s.beta_replay = beta_replay;
    s.lambda_ewc = lambda_ewc;
    s.lambda_lwf = lambda_lwf;
    s.lwf_temperature = lwf_temperature;
    s.w_c = w_c;
    s.buffer_capacity = buffer_capacity;
    s.epochs_per_task = epochs_per_task;
    s.batch_size = batch_size;
    s.replay_batch_size = replay_batch_size;
    return s;
}

AdamConfig RunConfig::adam_config() const {
    AdamConfig a;
    a.learning_rate = learning_rate;
    a.epoch_decay = lr_decay;
    return a;
}

StreamSizes RunConfig::sizes() const {
    return StreamSizes{train_per_task, val_per_task, test_per_task, ood_size};
}

json config_to_json(const RunConfig& c) {
    json j;
    j["benchmark"] = c.benchmark;
    j["model"] = c.model;
    j["strategy"] = c.strategy;
    j["alpha"] = c.alpha;
    j["beta_replay"] = c.beta_replay;
    j["lambda_ewc"] = c.lambda_ewc;
    j["lambda_lwf"] = c.lambda_lwf;
    j["lwf_temperature"] = c.lwf_temperature;
    j["w_c"] = c.w_c;
    j["buffer_capacity"] = c.buffer_capacity;
    j["epochs_per_task"] = c.epochs_per_task;
    j["batch_size"] = c.batch_size;
    j["replay_batch_size"] = c.replay_batch_size;
    j["encoder_hidden"] = c.encoder_hidden;
    j["seed"] = c.seed;
    j["learning_rate"] = c.learning_rate;
    j["lr_decay"] = c.lr_decay;
    j["supervision_fraction"] = c.supervision_fraction;
    j["train_per_task"] = c.train_per_task;
    j["val_per_task"] = c.val_per_task;
    j["test_per_task"] = c.test_per_task;
    j["ood_size"] = c.ood_size;
    j["feature_dim"] = c.feature_dim;
    j["noise_sigma"] = c.noise_sigma;
    j["zero_final_init"] = c.zero_final_init;
    j["dropout"] = c.dropout;
    j["noise_injection"] = c.noise_injection;
    j["out_dir"] = c.out_dir;
    j["dataset_dir"] = c.dataset_dir;
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("benchmark", c.benchmark);
    get("model", c.model);
    get("strategy", c.strategy);
    get("alpha", c.alpha);
    get("beta_replay", c.beta_replay);
    get("lambda_ewc", c.lambda_ewc);
    get("lambda_lwf", c.lambda_lwf);
    get("lwf_temperature", c.lwf_temperature);
    get("w_c", c.w_c);
    get("buffer_capacity", c.buffer_capacity);
    get("epochs_per_task", c.epochs_per_task);
    get("batch_size", c.batch_size);
    get("replay_batch_size", c.replay_batch_size);
    get("encoder_hidden", c.encoder_hidden);
    get("seed", c.seed);
    get("learning_rate", c.learning_rate);
    get("lr_decay", c.lr_decay);
    get("supervision_fraction", c.supervision_fraction);
    get("train_per_task", c.train_per_task);
    get("val_per_task", c.val_per_task);
    get("test_per_task", c.test_per_task);
    get("ood_size", c.ood_size);
    get("feature_dim", c.feature_dim);
    get("noise_sigma", c.noise_sigma);
    get("zero_final_init", c.zero_final_init);
    get("dropout", c.dropout);
    get("noise_injection", c.noise_injection);
    get("out_dir", c.out_dir);
    get("dataset_dir", c.dataset_dir);
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    return config_from_json(json::parse(in));
}

std::string config_hash(const RunConfig& config) {
    return hex64(fnv1a(config_to_json(config).dump()));
}

std::string default_dataset_dir(const RunConfig& config) {
    if (!config.dataset_dir.empty()) return config.dataset_dir;
    const char* root = std::getenv("NESYCL_DATA_DIR");
    return (fs::path(root ? root : "data") / config.benchmark).string();
}

std::string cmd_generate(const RunConfig& config) {
    const TaskStream stream = generate_benchmark(config.benchmark, config.sizes(),
                                                 config.supervision_fraction, config.seed,
                                                 config.feature_dim, config.noise_sigma);
    const std::string dir = (fs::path(config.out_dir) / config.benchmark).string();
    write_task_stream(dir, stream);
    return dir;
}

Predictor build_predictor(const RunConfig& config, const TaskStream& stream,
                          const CompiledKnowledge* knowledge) {
    Rng init(derive_seed(config.seed, "init"));
    ConceptModelConfig mc;
    mc.schema = stream.schema;
    mc.fragment_dims = stream.fragment_dims;
    mc.bindings = stream.bindings;
    mc.hidden = config.encoder_hidden;
    mc.zero_final = config.zero_final_init;
    mc.dropout = config.dropout;
    mc.noise = config.noise_injection;
    ConceptModel model(mc, init);
    if (config.model == "cbm") return make_cbm(std::move(model), knowledge);
    if (config.model != "nesy") throw std::invalid_argument("unknown model kind: " + config.model);
    NesyPredictor p;
    p.model = std::move(model);
    p.knowledge = knowledge;
    return p;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct MetricsWriter {
    std::ofstream out;
    std::string strategy;
    std::uint64_t seed;

    void row(const std::string& metric, std::size_t task, const std::string& value) {
        out << strategy << ',' << seed << ',' << metric << ',' << task << ',' << value << '\n';
    }
    void row(const std::string& metric, std::size_t task, double value) {
        row(metric, task, fmt_double(value));
    }
};

std::vector<Task> training_tasks(const TaskStream& stream, const std::string& strategy) {
    if (strategy != "offline") return stream.tasks;
    // single task formed by the union of all task datasets
    Task merged;
    merged.id = 1;
    for (const Task& t : stream.tasks) {
        merged.train.insert(merged.train.end(), t.train.begin(), t.train.end());
        merged.val.insert(merged.val.end(), t.val.begin(), t.val.end());
        merged.test.insert(merged.test.end(), t.test.begin(), t.test.end());
        merged.label_set.insert(merged.label_set.end(), t.label_set.begin(), t.label_set.end());
    }
    std::sort(merged.label_set.begin(), merged.label_set.end());
    merged.label_set.erase(std::unique(merged.label_set.begin(), merged.label_set.end()),
                           merged.label_set.end());
    return {merged};
}

}  // namespace

void evaluate_after_task(Predictor& pred, const TaskStream& stream, RunResult& result) {
    const MarginalsFn mfn = marginals_fn(pred);
    const LabelDistFn lfn = label_dist_fn(pred);
    std::vector<double> y_row, c_row, ym_row, cm_row;
    for (const Task& s : stream.tasks) {
        y_row.push_back(label_accuracy(lfn, s.test));
        c_row.push_back(concept_accuracy(mfn, s.test));
        ym_row.push_back(label_accuracy(lfn, s.test, &s.label_set));
        cm_row.push_back(concept_accuracy(mfn, s.test, &s.slot_value_sets));
    }
    result.acc_y.rows.push_back(std::move(y_row));
    result.acc_c.rows.push_back(std::move(c_row));
    result.acc_y_masked.rows.push_back(std::move(ym_row));
    result.acc_c_masked.rows.push_back(std::move(cm_row));
}

RunResult cmd_train(const RunConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string dataset_dir = default_dataset_dir(config);
    const TaskStream stream = load_task_stream(dataset_dir);
    const CompiledKnowledge ck = compile(knowledge_by_name(stream.knowledge_name));

    RunResult result;
    result.hash = config_hash(config);
    const fs::path run_dir = fs::path(config.out_dir) / config.benchmark / config.strategy /
                             std::to_string(config.seed);
    fs::create_directories(run_dir);
    result.run_dir = run_dir.string();

    Predictor pred = build_predictor(config, stream, &ck);
    RunRngs rngs = make_run_rngs(config.seed);
    TrainState state;
    state.buffer = ReplayBuffer(config.buffer_capacity);
    const KnowledgeResolver resolver = [&ck](int) { return &ck; };

    // seeded untrained baseline row (FWT)
    {
        const LabelDistFn lfn = label_dist_fn(pred);
        const MarginalsFn mfn = marginals_fn(pred);
        for (const Task& s : stream.tasks) {
            result.acc_y.rand_row.push_back(label_accuracy(lfn, s.test));
            result.acc_c.rand_row.push_back(concept_accuracy(mfn, s.test));
        }
        result.acc_y_masked.rand_row = result.acc_y.rand_row;
        result.acc_c_masked.rand_row = result.acc_c.rand_row;
    }

    const StrategyConfig strategy = config.strategy_config();
    const std::vector<Task> tasks = training_tasks(stream, config.strategy);
    for (const Task& task : tasks) {
        train_task(pred, task, ck, strategy, config.adam_config(), resolver, state, rngs);
        evaluate_after_task(pred, stream, result);
        const std::string ckpt = (run_dir / ("ckpt_task" + std::to_string(task.id) + ".bin")).string();
        save_checkpoint(ckpt, pred);
        result.checkpoints.push_back(ckpt);
    }

    // final metrics
    result.class_il_y = class_il(result.acc_y);
    result.class_il_c = class_il(result.acc_c);
    result.task_il_y = task_il(result.acc_y_masked);
    result.task_il_c = task_il(result.acc_c_masked);
    result.fwt_y = fwt(result.acc_y);
    if (result.acc_y.rows.size() == stream.tasks.size() && stream.tasks.size() > 0)
        result.bwt_y = bwt(result.acc_y);
    {
        const LabelDistFn lfn = label_dist_fn(pred);
        const MarginalsFn mfn = marginals_fn(pred);
        double val_acc = 0.0;
        for (const Task& s : stream.tasks) val_acc += label_accuracy(lfn, s.val);
        result.val_class_il_y = val_acc / static_cast<double>(stream.tasks.size());
        if (!stream.ood.empty()) {
            result.ood_y = label_accuracy(lfn, stream.ood);
            result.ood_c = concept_accuracy(mfn, stream.ood);
        }
        // per-slot confusion matrices over the union of test sets
        Dataset all_test;
        for (const Task& s : stream.tasks)
            all_test.insert(all_test.end(), s.test.begin(), s.test.end());
        const auto confusions = concept_confusions(mfn, all_test, stream.schema);
        for (std::size_t j = 0; j < confusions.size(); ++j) {
            std::ofstream cfile(run_dir / ("confusion_" + stream.schema.slots[j].name + ".csv"));
            for (const auto& row : confusions[j]) {
                for (std::size_t v = 0; v < row.size(); ++v) cfile << (v ? "," : "") << row[v];
                cfile << '\n';
            }
        }
    }

    // metrics.csv
    {
        MetricsWriter w{std::ofstream(run_dir / "metrics.csv"), config.strategy, config.seed};
        if (!w.out) throw std::runtime_error("cannot write metrics.csv in " + result.run_dir);
        w.out << "strategy,seed,metric,task,value\n";
        w.row("config_hash", 0, result.hash);
        for (std::size_t s = 1; s <= stream.tasks.size(); ++s) {
            w.row("rand_y", s, result.acc_y.rand_row[s - 1]);
            w.row("rand_c", s, result.acc_c.rand_row[s - 1]);
        }
        for (std::size_t e = 1; e <= result.acc_y.rows.size(); ++e) {
            for (std::size_t s = 1; s <= stream.tasks.size(); ++s) {
                w.row("acc_y_after_" + std::to_string(e), s, result.acc_y.at(e, s));
                w.row("acc_c_after_" + std::to_string(e), s, result.acc_c.at(e, s));
                w.row("acc_y_masked_after_" + std::to_string(e), s, result.acc_y_masked.at(e, s));
                w.row("acc_c_masked_after_" + std::to_string(e), s, result.acc_c_masked.at(e, s));
            }
        }
        const std::size_t T = stream.tasks.size();
        w.row("class_il_y", T, result.class_il_y);
        w.row("class_il_c", T, result.class_il_c);
        w.row("task_il_y", T, result.task_il_y);
        w.row("task_il_c", T, result.task_il_c);
        if (result.fwt_y) w.row("fwt_y", T, *result.fwt_y);
        if (result.bwt_y) w.row("bwt_y", T, *result.bwt_y);
        if (result.ood_y) w.row("ood_y", T, *result.ood_y);
        if (result.ood_c) w.row("ood_c", T, *result.ood_c);
        w.row("val_class_il_y", T, result.val_class_il_y);
    }

    result.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // run.json
    {
        json run;
        run["config"] = config_to_json(config);
        run["config_hash"] = result.hash;
        run["dataset_dir"] = dataset_dir;
        run["checkpoints"] = result.checkpoints;
        run["wall_clock_sec"] = result.wall_clock_sec;
        json metrics;
        metrics["class_il_y"] = result.class_il_y;
        metrics["class_il_c"] = result.class_il_c;
        metrics["task_il_y"] = result.task_il_y;
        metrics["task_il_c"] = result.task_il_c;
        if (result.fwt_y) metrics["fwt_y"] = *result.fwt_y;
        if (result.bwt_y) metrics["bwt_y"] = *result.bwt_y;
        if (result.ood_y) metrics["ood_y"] = *result.ood_y;
        if (result.ood_c) metrics["ood_c"] = *result.ood_c;
        metrics["val_class_il_y"] = result.val_class_il_y;
        run["metrics"] = metrics;
        std::ofstream rout(run_dir / "run.json");
        rout << run.dump(2) << '\n';
    }
    return result;
}

namespace {

struct SweepCell {
    json overrides;
    std::vector<double> val_class_il_y;
    std::vector<double> class_il_y;
    std::vector<double> class_il_c;
    int failures = 0;
};

void expand_grid(const json& grid, std::vector<json>& cells, json current,
                 std::vector<std::string>::const_iterator key, std::vector<std::string>::const_iterator end) {
    if (key == end) {
        cells.push_back(current);
        return;
    }
    for (const auto& v : grid.at(*key)) {
        current[*key] = v;
        expand_grid(grid, cells, current, key + 1, end);
    }
}

}  // namespace

int cmd_sweep(const json& sweep_spec, const std::string& out_dir, int parallelism) {
    const RunConfig base = config_from_json(sweep_spec.at("base"));
    std::vector<std::string> keys;
    if (sweep_spec.contains("grid"))
        for (auto it = sweep_spec.at("grid").begin(); it != sweep_spec.at("grid").end(); ++it)
            keys.push_back(it.key());
    std::vector<json> cells;
    expand_grid(sweep_spec.contains("grid") ? sweep_spec.at("grid") : json::object(), cells,
                json::object(), keys.begin(), keys.end());
    if (cells.empty()) cells.push_back(json::object());
    std::vector<std::uint64_t> seeds;
    if (sweep_spec.contains("seeds"))
        seeds = sweep_spec.at("seeds").get<std::vector<std::uint64_t>>();
    else
        seeds = {base.seed};

    std::vector<SweepCell> results(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        results[i].overrides = cells[i];
        results[i].val_class_il_y.assign(seeds.size(), 0.0);
        results[i].class_il_y.assign(seeds.size(), 0.0);
        results[i].class_il_c.assign(seeds.size(), 0.0);
    }

    struct Job {
        std::size_t cell;
        std::size_t seed_index;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({i, s});

    const int threads = parallelism > 0 ? parallelism : 1;
#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (long long ji = 0; ji < static_cast<long long>(jobs.size()); ++ji) {
        const Job job = jobs[static_cast<std::size_t>(ji)];
        json merged = config_to_json(base);
        for (auto it = results[job.cell].overrides.begin(); it != results[job.cell].overrides.end(); ++it)
            merged[it.key()] = it.value();
        RunConfig cfg = config_from_json(merged);
        cfg.seed = seeds[job.seed_index];
        cfg.out_dir = (fs::path(out_dir) / ("cell_" + std::to_string(job.cell))).string();
        try {
            RunResult r = cmd_train(cfg);
            results[job.cell].val_class_il_y[job.seed_index] = r.val_class_il_y;
            results[job.cell].class_il_y[job.seed_index] = r.class_il_y;
            results[job.cell].class_il_c[job.seed_index] = r.class_il_c;
        } catch (const std::exception& e) {
#pragma omp critical
            {
                ++results[job.cell].failures;
                std::fprintf(stderr, "sweep cell %zu seed %llu failed: %s\n", job.cell,
                             static_cast<unsigned long long>(seeds[job.seed_index]), e.what());
            }
        }
    }

    // pick the validation-selected cell among fully successful ones
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].failures > 0) continue;
        const double m = mean_of(results[i].val_class_il_y);
        if (m > best_val) {
            best_val = m;
            best = i;
        }
    }

    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "sweep.csv");
    out << "cell,overrides,seeds,failures,val_class_il_y_mean,val_class_il_y_std,"
           "class_il_y_mean,class_il_y_std,class_il_c_mean,class_il_c_std,selected\n";
    int failures = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const SweepCell& c = results[i];
        failures += c.failures;
        std::string overrides = c.overrides.dump();
        for (char& ch : overrides)
            if (ch == ',') ch = ';';
        out << i << ',' << overrides << ',' << seeds.size() << ',' << c.failures << ','
            << fmt_double(mean_of(c.val_class_il_y)) << ',' << fmt_double(stddev_of(c.val_class_il_y)) << ','
            << fmt_double(mean_of(c.class_il_y)) << ',' << fmt_double(stddev_of(c.class_il_y)) << ','
            << fmt_double(mean_of(c.class_il_c)) << ',' << fmt_double(stddev_of(c.class_il_c)) << ','
            << (i == best && best_val >= 0.0 ? 1 : 0) << '\n';
    }
    return failures == 0 ? 0 : 1;
}

int cmd_eval(const std::vector<std::string>& run_dirs, std::ostream& out) {
    out << "run_dir,strategy,seed,class_il_y,class_il_c,task_il_y,bwt_y,ood_y\n";
    int rc = 0;
    for (const std::string& dir : run_dirs) {
        std::ifstream in(fs::path(dir) / "metrics.csv");
        if (!in) {
            out << dir << ",error,,,,,,\n";
            rc = 1;
            continue;
        }
        std::string line;
        std::getline(in, line);  // header
        std::map<std::string, std::map<std::size_t, double>> acc;  // metric -> task -> value
        std::string strategy;
        std::string seed;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cols;
            while (std::getline(ss, cell, ',')) cols.push_back(cell);
            if (cols.size() != 5) continue;
            strategy = cols[0];
            seed = cols[1];
            if (cols[2] == "config_hash") continue;
            acc[cols[2]][std::stoul(cols[3])] = std::stod(cols[4]);
        }
        // rebuild the accuracy matrix rows and recompute Class-IL from them
        AccuracyMatrix ay;
        for (std::size_t e = 1;; ++e) {
            auto it = acc.find("acc_y_after_" + std::to_string(e));
            if (it == acc.end()) break;
            std::vector<double> row;
            for (auto& [task, v] : it->second) row.push_back(v);
            ay.rows.push_back(std::move(row));
        }
        if (ay.rows.empty()) {
            rc = 1;
            continue;
        }
        const double cy = class_il(ay);
        auto last = [&](const char* name) -> std::string {
            auto it = acc.find(name);
            if (it == acc.end() || it->second.empty()) return "";
            return fmt_double(it->second.rbegin()->second);
        };
        out << dir << ',' << strategy << ',' << seed << ',' << fmt_double(cy) << ','
            << last("class_il_c") << ',' << last("task_il_y") << ',' << last("bwt_y") << ','
            << last("ood_y") << '\n';
    }
    return rc;
}

AnalyzeResult cmd_analyze(const std::string& run_dir) {
    std::ifstream rin(fs::path(run_dir) / "run.json");
    if (!rin) throw std::runtime_error("missing run.json in " + run_dir);
    const json run = json::parse(rin);
    const RunConfig config = config_from_json(run.at("config"));
    const std::string dataset_dir = run.at("dataset_dir").get<std::string>();
    const TaskStream stream = load_task_stream(dataset_dir);
    const CompiledKnowledge ck = compile(knowledge_by_name(stream.knowledge_name));
    const std::vector<std::string> checkpoints = run.at("checkpoints").get<std::vector<std::string>>();
    if (checkpoints.empty()) throw std::runtime_error("run has no checkpoints: " + run_dir);

    AnalyzeResult result;
    result.ok = true;

    // theta_prev for the first checkpoint is the seeded untrained model
    Predictor prev = build_predictor(config, stream, &ck);
    std::vector<TaskData> tasks;
    for (std::size_t t = 0; t < checkpoints.size(); ++t) {
        Predictor current = build_predictor(config, stream, &ck);
        load_checkpoint(checkpoints[t], current);
        if (t < stream.tasks.size()) tasks.push_back({&stream.tasks[t].train, &ck});
        BoundReport rep = theorem2_check(current, prev, tasks);
        if (rep.applicable && !rep.holds) result.ok = false;
        result.theorem2.push_back(rep);
        prev = std::move(current);
    }

    // final model reports
    Predictor final_model = build_predictor(config, stream, &ck);
    load_checkpoint(checkpoints.back(), final_model);
    Dataset all_train, all_test;
    for (const Task& t : stream.tasks) {
        all_train.insert(all_train.end(), t.train.begin(), t.train.end());
        all_test.insert(all_test.end(), t.test.begin(), t.test.end());
    }
    result.theorem1 = verify_theorem1(marginals_fn(final_model), all_train, ck, 1e-3);
    if (!result.theorem1.biconditional_ok) result.ok = false;

    // pinsker spot-checks on marginal pairs (final vs previous checkpoint)
    {
        Predictor prev_model = build_predictor(config, stream, &ck);
        load_checkpoint(checkpoints[checkpoints.size() > 1 ? checkpoints.size() - 2 : 0], prev_model);
        std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
        for (std::size_t i = 0; i < all_test.size() && pairs.size() < 2000; i += 7) {
            const auto a = predictor_marginals(final_model, all_test[i].fragments);
            const auto b = predictor_marginals(prev_model, all_test[i].fragments);
            for (std::size_t j = 0; j < a.size(); ++j) pairs.emplace_back(a[j], b[j]);
        }
        result.pinsker = pinsker_check(pairs);
        if (result.pinsker.violations > 0) result.ok = false;
    }

    result.shortcut = shortcut_report(marginals_fn(final_model), label_dist_fn(final_model), all_test, ck);

    // human-readable + csv outputs
    {
        std::ofstream txt(fs::path(run_dir) / "analysis.txt");
        txt << "theorem 3.1: biconditional " << (result.theorem1.biconditional_ok ? "ok" : "VIOLATED")
            << " over " << result.theorem1.items.size() << " examples (tol " << result.theorem1.tol << ")\n";
        for (std::size_t t = 0; t < result.theorem2.size(); ++t) {
            const BoundReport& r = result.theorem2[t];
            txt << "theorem 4.1 @ checkpoint " << t + 1 << ": ";
            if (!r.applicable)
                txt << "inapplicable (zero likelihood)\n";
            else
                txt << (r.holds ? "holds" : "VIOLATED") << "  lhs=" << r.lhs << " rhs=" << r.rhs
                    << " beta=" << r.constants.beta_floor << " zeta=" << r.constants.zeta
                    << " gamma=" << r.constants.gamma << "\n";
        }
        txt << "pinsker: " << result.pinsker.violations << " violations over " << result.pinsker.checked
            << " pairs\n";
        txt << "shortcut: label_agreement=" << result.shortcut.label_agreement
            << " concept_agreement=" << result.shortcut.semantics.overall_agreement
            << (result.shortcut.flagged ? "  [REASONING SHORTCUT]" : "") << "\n";

        std::ofstream csv(fs::path(run_dir) / "analysis.csv");
        csv << "check,name,value\n";
        csv << "theorem1,biconditional_ok," << (result.theorem1.biconditional_ok ? 1 : 0) << '\n';
        for (std::size_t t = 0; t < result.theorem2.size(); ++t) {
            csv << "theorem2,holds_ckpt_" << t + 1 << ','
                << (result.theorem2[t].applicable ? (result.theorem2[t].holds ? 1 : 0) : -1) << '\n';
        }
        csv << "pinsker,violations," << result.pinsker.violations << '\n';
        csv << "shortcut,flagged," << (result.shortcut.flagged ? 1 : 0) << '\n';
        csv << "shortcut,label_agreement," << fmt_double(result.shortcut.label_agreement) << '\n';
        csv << "shortcut,concept_agreement," << fmt_double(result.shortcut.semantics.overall_agreement)
            << '\n';
    }
    return result;
}

}  // namespace nesycl
