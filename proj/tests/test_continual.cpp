#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nesycl/continual.hpp"
#include "nesycl/stats.hpp"

using namespace nesycl;

namespace {

BufferItem make_item(int id) {
    BufferItem item;
    item.fragments = {{static_cast<double>(id), 0.5}};
    item.label = static_cast<std::size_t>(id);
    item.task_id = 1;
    return item;
}

// One-slot predictor whose marginal is `probs` for any input; knowledge is
// the identity map Y = C1.
Predictor fixed_predictor(const std::vector<double>& probs, const CompiledKnowledge* ck, Rng& rng) {
    ConceptModelConfig mc;
    mc.schema = ck->schema;
    mc.fragment_dims = {2};
    mc.bindings = {{0, 0}};
    mc.hidden = {};
    mc.zero_final = true;
    ConceptModel model(mc, rng);
    for (std::size_t i = 0; i < probs.size(); ++i) model.params()[1]->data[i] = std::log(probs[i]);
    return NesyPredictor{std::move(model), ck};
}

KnowledgeSpec identity_knowledge(int card) {
    KnowledgeSpec spec;
    spec.name = "identity";
    spec.schema.slots = {{"c1", card}};
    spec.schema.label_cardinalities = {card};
    spec.predicate = [](std::span<const int> c, std::span<const int> y) { return c[0] == y[0]; };
    return spec;
}

GlyphGeneratorConfig tiny_glyphs() {
    GlyphGeneratorConfig gc;
    gc.feature_dim = 12;
    gc.noise = 1.0;
    return gc;
}

StrategyConfig quick_strategy(const std::string& name, int epochs = 3) {
    StrategyConfig s;
    s.strategy = name;
    s.epochs_per_task = epochs;
    s.batch_size = 16;
    s.buffer_capacity = 64;
    return s;
}

std::vector<double> flat_params(Predictor& p) {
    std::vector<double> out;
    for (Tensor* t : predictor_params(p)) out.insert(out.end(), t->data.begin(), t->data.end());
    return out;
}

}  // namespace

TEST_CASE("reservoir: fill phase keeps everything") {
    ReplayBuffer buf(5);
    Rng rng(1);
    for (int i = 0; i < 3; ++i) buf.reservoir_insert(make_item(i), rng);
    CHECK(buf.items().size() == 3);
    CHECK(buf.stream_count() == 3);
}

TEST_CASE("reservoir: capacity 1, stream 2 keeps the second item half the time") {
    int kept_second = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        ReplayBuffer buf(1);
        Rng rng(1000 + t);
        buf.reservoir_insert(make_item(0), rng);
        buf.reservoir_insert(make_item(1), rng);
        if (buf.items()[0].label == 1) ++kept_second;
    }
    const double freq = static_cast<double>(kept_second) / trials;
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
}

TEST_CASE("reservoir: buffer never exceeds capacity and retention is uniform") {
    // marginal retention probability = capacity / stream
    const std::size_t capacity = 100;
    const int stream = 10000;
    std::vector<long> retained(stream, 0);
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        ReplayBuffer buf(capacity);
        Rng rng(500 + t);
        for (int i = 0; i < stream; ++i) buf.reservoir_insert(make_item(i), rng);
        CHECK(buf.items().size() == capacity);
        for (const BufferItem& item : buf.items()) ++retained[item.label];
    }
    // position-binned chi-square
    const int bins = 50;
    const double expected = static_cast<double>(trials) * capacity / bins;
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b) {
        long observed = 0;
        for (int i = b * (stream / bins); i < (b + 1) * (stream / bins); ++i) observed += retained[i];
        chi2 += (observed - expected) * (observed - expected) / expected;
    }
    CHECK(chi_square_pvalue(chi2, bins - 1) > 0.01);
}

TEST_CASE("cool loss: zero when live matches stored and labels are certain") {
    Rng rng(2);
    const CompiledKnowledge ck = compile(identity_knowledge(2));
    std::vector<double> dist = {1.0 - 1e-12, 1e-12};
    Predictor pred = fixed_predictor(dist, &ck, rng);
    BufferItem item = make_item(0);
    item.stored_marginals = {predictor_marginals(pred, item.fragments)[0]};
    const std::vector<const BufferItem*> batch = {&item};
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    Tape tape;
    Var loss = cool_loss(tape, pred, batch, resolver, 1.0, 1.0, nullptr);
    CHECK(tape.value(loss).data[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cool loss: kl evaluation on one binary slot") {
    Rng rng(3);
    const CompiledKnowledge ck = compile(identity_knowledge(2));
    Predictor pred = fixed_predictor({0.5, 0.5}, &ck, rng);
    BufferItem item = make_item(0);
    item.stored_marginals = {{0.25, 0.75}};
    const std::vector<const BufferItem*> batch = {&item};
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    Tape tape;
    Var loss = cool_loss(tape, pred, batch, resolver, 1.0, 0.0, nullptr);
    const double expected = kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75});
    CHECK(tape.value(loss).data[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.1438).epsilon(1e-3));
}

TEST_CASE("cool loss with alpha=0 reduces to weighted replay nll") {
    Rng rng(4);
    const CompiledKnowledge ck = compile(identity_knowledge(3));
    Predictor pred = fixed_predictor({0.2, 0.5, 0.3}, &ck, rng);
    BufferItem item = make_item(1);
    item.stored_marginals = {{0.9, 0.05, 0.05}};
    const std::vector<const BufferItem*> batch = {&item};
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    Tape cool_tape, er_tape;
    const double beta = 0.7;
    Var c = cool_loss(cool_tape, pred, batch, resolver, 0.0, beta, nullptr);
    Var e = er_loss(er_tape, pred, batch, resolver, beta, nullptr);
    CHECK(cool_tape.value(c).data[0] == doctest::Approx(er_tape.value(e).data[0]).epsilon(1e-12));
    CHECK(er_tape.value(e).data[0] == doctest::Approx(beta * -std::log(0.5)).epsilon(1e-9));
}

TEST_CASE("cool/der losses: empty buffer batch gives zero") {
    Rng rng(5);
    const CompiledKnowledge ck = compile(identity_knowledge(2));
    Predictor pred = fixed_predictor({0.5, 0.5}, &ck, rng);
    const std::vector<const BufferItem*> batch;
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    Tape tape;
    CHECK(tape.value(cool_loss(tape, pred, batch, resolver, 1, 1, nullptr)).data[0] == 0.0);
    CHECK(tape.value(der_loss(tape, pred, batch, resolver, false, 1, 1, nullptr)).data[0] == 0.0);
    CHECK(tape.value(er_loss(tape, pred, batch, resolver, 1, nullptr)).data[0] == 0.0);
}

TEST_CASE("der loss: zero when live scores equal stored, oracle value otherwise") {
    Rng rng(6);
    const CompiledKnowledge ck = compile(identity_knowledge(2));
    Predictor pred = fixed_predictor({0.5, 0.5}, &ck, rng);
    BufferItem item = make_item(0);
    item.stored_label_scores = label_scores_eval(pred, item.fragments);
    const std::vector<const BufferItem*> batch = {&item};
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    {
        Tape tape;
        Var loss = der_loss(tape, pred, batch, resolver, false, 1.0, 0.0, nullptr);
        CHECK(tape.value(loss).data[0] == doctest::Approx(0.0).epsilon(1e-15));
    }
    // stored scores [log .25, log .75] vs live [log .5, log .5]; independent
    // oracle: mean of squared log-prob differences
    item.stored_label_scores = {std::log(0.25), std::log(0.75)};
    {
        Tape tape;
        Var loss = der_loss(tape, pred, batch, resolver, false, 1.0, 0.0, nullptr);
        const double d0 = std::log(0.5) - std::log(0.25);
        const double d1 = std::log(0.5) - std::log(0.75);
        const double expected = (d0 * d0 + d1 * d1) / 2.0;
        CHECK(tape.value(loss).data[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(0.322427).epsilon(1e-4));
    }
    // der++ adds the replayed-label cross entropy
    {
        Tape tape;
        item.label = 1;
        Var plain = der_loss(tape, pred, batch, resolver, false, 1.0, 0.5, nullptr);
        Var plus = der_loss(tape, pred, batch, resolver, true, 1.0, 0.5, nullptr);
        const double extra = tape.value(plus).data[0] - tape.value(plain).data[0];
        CHECK(extra == doctest::Approx(0.5 * -std::log(0.5)).epsilon(1e-9));
    }
}

TEST_CASE("ewc penalty values") {
    Rng rng(7);
    const CompiledKnowledge ck = compile(identity_knowledge(2));
    Predictor pred = fixed_predictor({0.5, 0.5}, &ck, rng);
    std::vector<Tensor*> params = predictor_params(pred);

    FisherDiag fisher;
    fisher.present = true;
    for (Tensor* p : params) {
        fisher.values.emplace_back(p->size(), 0.0);
        fisher.reference.push_back(p->data);
    }
    // theta == theta* -> 0
    {
        Tape tape;
        CHECK(tape.value(ewc_penalty(tape, pred, fisher, 1.0)).data[0] == doctest::Approx(0.0));
    }
    // F == 0 -> 0 even when parameters moved
    fisher.reference[0][0] -= 0.5;
    {
        Tape tape;
        CHECK(tape.value(ewc_penalty(tape, pred, fisher, 1.0)).data[0] == doctest::Approx(0.0));
    }
    // single parameter, F=2, delta=0.5, lambda=1 -> 0.5
    fisher.values[0][0] = 2.0;
    {
        Tape tape;
        CHECK(tape.value(ewc_penalty(tape, pred, fisher, 1.0)).data[0] == doctest::Approx(0.5));
    }
    // missing fisher (task 1) -> 0
    {
        Tape tape;
        FisherDiag none;
        CHECK(tape.value(ewc_penalty(tape, pred, none, 1.0)).data[0] == 0.0);
    }
    // strictly increases along a ray with F > 0
    double prev = 0.0;
    for (double step : {0.5, 1.0, 1.5}) {
        fisher.reference[0][0] = params[0]->data[0] - step;
        Tape tape;
        const double v = tape.value(ewc_penalty(tape, pred, fisher, 1.0)).data[0];
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("lwf loss: gradient vanishes when live equals past; lambda 0 recovers naive") {
    Rng rng(8);
    const CompiledKnowledge ck = compile(identity_knowledge(3));
    Predictor pred = fixed_predictor({0.2, 0.5, 0.3}, &ck, rng);
    Predictor past = snapshot(pred);
    Example ex;
    ex.fragments = {{0.1, 0.2}};
    ex.concepts = {1};
    ex.label = 1;
    const std::vector<const Example*> batch = {&ex};

    std::vector<Tensor*> params = predictor_params(pred);
    for (Tensor* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = lwf_loss(tape, pred, past, batch, 1.0, 2.0, nullptr);
        CHECK(tape.value(loss).data[0] > 0.0);  // entropy floor
        tape.backward(loss);
    }
    for (Tensor* p : params)
        for (double g : p->grad) CHECK(std::abs(g) <= 1e-9);

    {
        Tape tape;
        CHECK(tape.value(lwf_loss(tape, pred, past, batch, 0.0, 2.0, nullptr)).data[0] == 0.0);
    }
    // temperature 1 is the plain soft-target cross entropy
    {
        Tape tape;
        Var loss = lwf_loss(tape, pred, past, batch, 1.0, 1.0, nullptr);
        const std::vector<double> target = predictor_label_dist(past, ex.fragments);
        double expected = 0.0;
        for (std::size_t y = 0; y < target.size(); ++y)
            expected -= target[y] * std::log(predictor_label_dist(pred, ex.fragments)[y]);
        CHECK(tape.value(loss).data[0] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("train_task: cool with alpha=beta=0 is bitwise identical to naive") {
    auto run = [](const std::string& strategy) {
        const CompiledKnowledge ck = compile(addition_knowledge());
        TaskStream stream = gen_mnadd_shortcut(tiny_glyphs(), {64, 16, 16, 16}, 0.0, 99);
        Rng init(derive_seed(7, "init"));
        ConceptModelConfig mc;
        mc.schema = stream.schema;
        mc.fragment_dims = stream.fragment_dims;
        mc.bindings = stream.bindings;
        mc.hidden = {16};
        Predictor pred = NesyPredictor{ConceptModel(mc, init), &ck};
        StrategyConfig s = quick_strategy(strategy, 2);
        s.alpha = 0.0;
        s.beta_replay = 0.0;
        s.w_c = 0.0;
        TrainState state;
        state.buffer = ReplayBuffer(s.buffer_capacity);
        RunRngs rngs = make_run_rngs(7);
        const KnowledgeResolver resolver = [&](int) { return &ck; };
        AdamConfig adam;
        adam.learning_rate = 0.01;
        for (const Task& task : stream.tasks)
            train_task(pred, task, ck, s, adam, resolver, state, rngs);
        return flat_params(pred);
    };
    CHECK(run("cool") == run("naive"));
}

TEST_CASE("train_task: restart reinitializes and stays deterministic") {
    auto run = [](const std::string& strategy) {
        const CompiledKnowledge ck = compile(addition_knowledge());
        TaskStream stream = gen_mnadd_shortcut(tiny_glyphs(), {64, 16, 16, 16}, 0.0, 98);
        Rng init(derive_seed(11, "init"));
        ConceptModelConfig mc;
        mc.schema = stream.schema;
        mc.fragment_dims = stream.fragment_dims;
        mc.bindings = stream.bindings;
        mc.hidden = {16};
        Predictor pred = NesyPredictor{ConceptModel(mc, init), &ck};
        StrategyConfig s = quick_strategy(strategy, 2);
        TrainState state;
        state.buffer = ReplayBuffer(s.buffer_capacity);
        RunRngs rngs = make_run_rngs(11);
        const KnowledgeResolver resolver = [&](int) { return &ck; };
        AdamConfig adam;
        adam.learning_rate = 0.01;
        for (const Task& task : stream.tasks)
            train_task(pred, task, ck, s, adam, resolver, state, rngs);
        return flat_params(pred);
    };
    CHECK(run("restart") == run("restart"));  // deterministic
    CHECK(run("restart") != run("naive"));    // and genuinely different
}

TEST_CASE("train_task: buffer contents stay frozen across later training") {
    const CompiledKnowledge ck = compile(addition_knowledge());
    TaskStream stream = gen_mnadd_shortcut(tiny_glyphs(), {64, 16, 16, 16}, 0.1, 97);
    Rng init(derive_seed(13, "init"));
    ConceptModelConfig mc;
    mc.schema = stream.schema;
    mc.fragment_dims = stream.fragment_dims;
    mc.bindings = stream.bindings;
    mc.hidden = {16};
    Predictor pred = NesyPredictor{ConceptModel(mc, init), &ck};
    StrategyConfig s = quick_strategy("cool", 2);
    TrainState state;
    state.buffer = ReplayBuffer(s.buffer_capacity);
    RunRngs rngs = make_run_rngs(13);
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    AdamConfig adam;
    adam.learning_rate = 0.01;

    train_task(pred, stream.tasks[0], ck, s, adam, resolver, state, rngs);
    CHECK(!state.buffer.empty());
    CHECK(state.buffer.items().size() <= s.buffer_capacity);
    std::vector<std::vector<std::vector<double>>> recorded;
    std::vector<int> recorded_tasks;
    for (const BufferItem& item : state.buffer.items()) {
        recorded.push_back(item.stored_marginals);
        recorded_tasks.push_back(item.task_id);
    }
    train_task(pred, stream.tasks[1], ck, s, adam, resolver, state, rngs);
    std::size_t still_task1 = 0;
    for (std::size_t i = 0; i < state.buffer.items().size(); ++i) {
        const BufferItem& item = state.buffer.items()[i];
        if (i < recorded.size() && item.task_id == recorded_tasks[i] && item.task_id == 1) {
            CHECK(item.stored_marginals == recorded[i]);  // frozen q~_c
            ++still_task1;
        }
    }
    CHECK(still_task1 > 0);
}

TEST_CASE("pinsker link on buffered items during training") {
    const CompiledKnowledge ck = compile(addition_knowledge());
    TaskStream stream = gen_mnadd_shortcut(tiny_glyphs(), {64, 16, 16, 16}, 0.0, 96);
    Rng init(derive_seed(17, "init"));
    ConceptModelConfig mc;
    mc.schema = stream.schema;
    mc.fragment_dims = stream.fragment_dims;
    mc.bindings = stream.bindings;
    mc.hidden = {16};
    Predictor pred = NesyPredictor{ConceptModel(mc, init), &ck};
    StrategyConfig s = quick_strategy("cool", 2);
    TrainState state;
    state.buffer = ReplayBuffer(s.buffer_capacity);
    RunRngs rngs = make_run_rngs(17);
    const KnowledgeResolver resolver = [&](int) { return &ck; };
    AdamConfig adam;
    adam.learning_rate = 0.01;
    train_task(pred, stream.tasks[0], ck, s, adam, resolver, state, rngs);
    train_task(pred, stream.tasks[1], ck, s, adam, resolver, state, rngs);

    const double k = 2.0;
    for (const BufferItem& item : state.buffer.items()) {
        const auto live = predictor_marginals(pred, item.fragments);
        double kl_sum = 0.0, l1_sum = 0.0;
        for (std::size_t j = 0; j < live.size(); ++j) {
            kl_sum += kl_divergence(live[j], item.stored_marginals[j]);
            l1_sum += l1_distance(live[j], item.stored_marginals[j]);
        }
        CHECK(kl_sum >= 0.5 * l1_sum * l1_sum / k - 1e-9);
    }
}

TEST_CASE("fisher estimation is nonnegative and shape congruent") {
    Rng rng(19);
    const CompiledKnowledge ck = compile(xor_toy());
    ConceptModelConfig mc;
    mc.schema = ck.schema;
    mc.fragment_dims = {2, 2};
    mc.bindings = {{0, 0}, {1, 0}};
    mc.hidden = {6};
    Predictor pred = NesyPredictor{ConceptModel(mc, rng), &ck};
    Dataset data;
    for (int i = 0; i < 10; ++i) {
        Example e;
        e.fragments = {{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                       {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
        e.concepts = {static_cast<int>(i % 2), static_cast<int>((i / 2) % 2)};
        e.label = static_cast<std::size_t>((i % 2) ^ ((i / 2) % 2));
        data.push_back(e);
    }
    const FisherDiag fisher = estimate_fisher(pred, data, nullptr);
    CHECK(fisher.present);
    std::vector<Tensor*> params = predictor_params(pred);
    REQUIRE(fisher.values.size() == params.size());
    double total = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(fisher.values[i].size() == params[i]->size());
        for (double v : fisher.values[i]) {
            CHECK(v >= 0.0);
            total += v;
        }
    }
    CHECK(total > 0.0);
}
