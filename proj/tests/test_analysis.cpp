#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nesycl/analysis.hpp"
#include "nesycl/rng.hpp"

using namespace nesycl;

namespace {

ConceptModelConfig xor_model_config(bool zero_final = false) {
    ConceptModelConfig mc;
    mc.schema = xor_toy().schema;
    mc.fragment_dims = {2, 2};
    mc.bindings = {{0, 0}, {1, 0}};
    mc.hidden = {6};
    mc.zero_final = zero_final;
    return mc;
}

Dataset xor_dataset(Rng& rng, int n) {
    Dataset d;
    for (int i = 0; i < n; ++i) {
        Example e;
        const int b1 = static_cast<int>(rng.uniform_index(2));
        const int b2 = static_cast<int>(rng.uniform_index(2));
        const double c1 = b1 ? 1.0 : -1.0;
        const double c2 = b2 ? 1.0 : -1.0;
        e.fragments = {{c1 + rng.gaussian(0.0, 0.3), -c1 + rng.gaussian(0.0, 0.3)},
                       {c2 + rng.gaussian(0.0, 0.3), -c2 + rng.gaussian(0.0, 0.3)}};
        e.concepts = {b1, b2};
        e.label = static_cast<std::size_t>(b1 ^ b2);
        d.push_back(e);
    }
    return d;
}

Predictor perturbed(const Predictor& base, Rng& rng, double scale) {
    Predictor copy = base;
    for (Tensor* p : predictor_params(copy))
        for (double& v : p->data) v += rng.gaussian(0.0, scale);
    return copy;
}

}  // namespace

TEST_CASE("pinsker: examples and a property sweep") {
    // p = q -> 0 >= 0
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    pairs.push_back({{0.4, 0.6}, {0.4, 0.6}});
    // KL([1,0] || [.5,.5]) = ln 2 >= 0.5 * 1^2
    pairs.push_back({{1.0, 0.0}, {0.5, 0.5}});
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 2 + rng.uniform_index(5);
        std::vector<double> p(n), q(n);
        double zp = 0, zq = 0;
        for (std::size_t j = 0; j < n; ++j) {
            zp += (p[j] = rng.uniform(0.001, 1.0));
            zq += (q[j] = rng.uniform(0.001, 1.0));
        }
        for (std::size_t j = 0; j < n; ++j) {
            p[j] /= zp;
            q[j] /= zq;
        }
        pairs.push_back({std::move(p), std::move(q)});
    }
    const PinskerReport report = pinsker_check(pairs);
    CHECK(report.checked == pairs.size());
    CHECK(report.violations == 0);
    const double kl = kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5});
    CHECK(kl == doctest::Approx(std::log(2.0)));
    CHECK(kl >= 0.5);
}

TEST_CASE("additive shortcut enumeration matches the exhaustive oracle") {
    // the four-sum system: c0+c6=6, c4+c6=10, c2+c8=10, c4+c8=12
    const std::vector<AdditiveConstraint> system = {{0, 6, 6}, {4, 6, 10}, {2, 8, 10}, {4, 8, 12}};
    const ShortcutSolutionSet solutions = enumerate_additive_shortcuts(system);
    CHECK(solutions.variables == std::vector<int>{0, 2, 4, 6, 8});

    // independent oracle: literal five-deep loop over 10^5 assignments
    long oracle_count = 0;
    bool oracle_has_truth = false, oracle_has_paper_shortcut = false;
    for (int c0 = 0; c0 < 10; ++c0)
        for (int c2 = 0; c2 < 10; ++c2)
            for (int c4 = 0; c4 < 10; ++c4)
                for (int c6 = 0; c6 < 10; ++c6)
                    for (int c8 = 0; c8 < 10; ++c8) {
                        if (c0 + c6 != 6 || c4 + c6 != 10 || c2 + c8 != 10 || c4 + c8 != 12) continue;
                        ++oracle_count;
                        if (c0 == 0 && c2 == 2 && c4 == 4 && c6 == 6 && c8 == 8) oracle_has_truth = true;
                        if (c0 == 5 && c2 == 7 && c4 == 9 && c6 == 1 && c8 == 3)
                            oracle_has_paper_shortcut = true;
                    }
    CHECK(oracle_count == 6);
    CHECK(oracle_has_truth);
    CHECK(oracle_has_paper_shortcut);
    CHECK(solutions.solutions.size() == static_cast<std::size_t>(oracle_count));
    REQUIRE(solutions.ground_truth_index.has_value());
    CHECK(solutions.solutions[*solutions.ground_truth_index] == std::vector<int>{0, 2, 4, 6, 8});
    CHECK(std::find(solutions.solutions.begin(), solutions.solutions.end(),
                    std::vector<int>{5, 7, 9, 1, 3}) != solutions.solutions.end());

    // self-check: every returned assignment satisfies all constraints
    for (const auto& sol : solutions.solutions) {
        auto value_of = [&](int var) {
            for (std::size_t i = 0; i < solutions.variables.size(); ++i)
                if (solutions.variables[i] == var) return sol[i];
            return -1;
        };
        for (const AdditiveConstraint& c : system) CHECK(value_of(c.var_a) + value_of(c.var_b) == c.sum);
    }
}

TEST_CASE("additive shortcut enumeration caps the variable count") {
    std::vector<AdditiveConstraint> too_many;
    for (int i = 0; i < 7; ++i) too_many.push_back({i, i, 2 * i});
    CHECK_THROWS_AS((void)enumerate_additive_shortcuts(too_many), std::invalid_argument);
}

TEST_CASE("map shortcut enumeration on the cardinality-4 toy") {
    // full pair coverage: all C(4,2) mismatching pairs force injectivity
    std::vector<MapObservation> full;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) full.push_back({a, b, false});
    const MapShortcutReport forced = enumerate_map_shortcuts(4, full);
    CHECK(!forced.refused);
    CHECK(forced.consistent_count == 24);  // 4! injective maps
    CHECK(forced.all_injective);
    CHECK(forced.all_injective_on_observed);

    // a single task's two shapes only: non-injective global maps survive
    const MapShortcutReport loose = enumerate_map_shortcuts(4, {{0, 1, false}});
    CHECK(!loose.refused);
    CHECK(loose.consistent_count == 4 * 3 * 4 * 4);
    CHECK(loose.all_injective_on_observed);  // the observed pair is forced apart
    CHECK(!loose.all_injective);             // but unobserved values may collide

    // empty observations: all maps consistent
    const MapShortcutReport all = enumerate_map_shortcuts(4, {});
    CHECK(all.consistent_count == 256);
    CHECK(!all.all_injective);

    // same-pair observations constrain too
    const MapShortcutReport same = enumerate_map_shortcuts(3, {{0, 1, true}});
    CHECK(same.consistent_count == 3 * 3);  // pi(0)=pi(1) free, pi(2) free
}

TEST_CASE("map shortcut enumeration refuses unbounded spaces") {
    const MapShortcutReport report = enumerate_map_shortcuts(10, {}, 1000000ull);
    CHECK(report.refused);
    CHECK(report.refusal_reason.find("cap") != std::string::npos);
}

TEST_CASE("bound constants: addition knowledge has zeta = 1") {
    Rng rng(3);
    const CompiledKnowledge ck = compile(addition_knowledge());
    ConceptModelConfig mc;
    mc.schema = ck.schema;
    mc.fragment_dims = {2, 2};
    mc.bindings = {{0, 0}, {1, 0}};
    mc.hidden = {4};
    Predictor pred = NesyPredictor{ConceptModel(mc, rng), &ck};
    Dataset d;
    Example e;
    e.fragments = {{0.1, 0.2}, {0.3, 0.4}};
    e.concepts = {2, 3};
    e.label = 5;
    d.push_back(e);
    const std::vector<TaskData> tasks = {{&d, &ck}};
    const BoundConstants c = compute_bound_constants({&pred}, tasks);
    CHECK(c.zeta == 1);
    CHECK(c.applicable);
    CHECK(c.beta_floor > 0.0);
    CHECK(c.gamma == doctest::Approx(1.0 / (c.beta_floor * 1.0 * 1.0 * 1.0)));
}

TEST_CASE("lemma a.1: identical models give lhs 0, random pairs respect the bound") {
    Rng rng(5);
    const CompiledKnowledge ck = compile(xor_toy());
    Dataset d1 = xor_dataset(rng, 15);
    Dataset d2 = xor_dataset(rng, 15);
    const std::vector<TaskData> tasks = {{&d1, &ck}, {&d2, &ck}};
    Predictor base = NesyPredictor{ConceptModel(xor_model_config(), rng), &ck};

    const BoundReport same = lemma_a1_check(base, base, tasks);
    CHECK(same.applicable);
    CHECK(same.lhs == doctest::Approx(0.0));
    CHECK(same.holds);

    for (int trial = 0; trial < 25; ++trial) {
        Predictor phi = perturbed(base, rng, 0.3);
        Predictor psi = perturbed(base, rng, 0.3);
        const BoundReport r = lemma_a1_check(phi, psi, tasks);
        REQUIRE(r.applicable);
        CHECK(r.holds);
    }
}

TEST_CASE("lemma a.1 reports inapplicable on zero likelihood") {
    Rng rng(7);
    const CompiledKnowledge ck = compile(xor_toy());
    ConceptModelConfig mc = xor_model_config(/*zero_final=*/true);
    mc.hidden = {};
    Predictor pred = NesyPredictor{ConceptModel(mc, rng), &ck};
    // push the slot-0 logit high enough that exp(-diff) underflows to 0.0
    std::vector<Tensor*> params = predictor_params(pred);
    params[1]->data[0] = 2000.0;
    Dataset d;
    Example e;
    e.fragments = {{0.0, 0.0}, {0.0, 0.0}};
    e.concepts = {0, 1};
    e.label = 1;  // but the model puts ~all mass on (0,0) -> y=0
    d.push_back(e);
    const std::vector<TaskData> tasks = {{&d, &ck}};
    const BoundReport r = lemma_a1_check(pred, pred, tasks);
    CHECK(!r.applicable);
}

TEST_CASE("theorem 4.1: holds when theta == theta_prev and on random drifted pairs") {
    Rng rng(9);
    const CompiledKnowledge ck = compile(xor_toy());
    Dataset d1 = xor_dataset(rng, 12);
    Dataset d2 = xor_dataset(rng, 12);
    const std::vector<TaskData> tasks = {{&d1, &ck}, {&d2, &ck}};
    Predictor theta = NesyPredictor{ConceptModel(xor_model_config(), rng), &ck};

    const BoundReport same = theorem2_check(theta, theta, tasks);
    REQUIRE(same.applicable);
    CHECK(same.drift == doctest::Approx(0.0));
    CHECK(same.holds);

    for (int trial = 0; trial < 25; ++trial) {
        Predictor prev = perturbed(theta, rng, 0.4);
        const BoundReport r = theorem2_check(theta, prev, tasks);
        REQUIRE(r.applicable);
        CHECK(r.holds);
    }
}

TEST_CASE("verify_theorem1 on the xor fixture") {
    const CompiledKnowledge ck = compile(xor_toy());
    Dataset d;
    Example e;
    e.fragments = {{0.0, 0.0}, {0.0, 0.0}};
    e.concepts = {0, 1};
    e.label = 1;
    d.push_back(e);

    // constructed marginals with all mass on the satisfying set -> nll ~ 0
    MarginalsFn mass_one = [](const Example&) {
        return std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}};
    };
    const Theorem1Report good = verify_theorem1(mass_one, d, ck, 1e-3);
    REQUIRE(good.items.size() == 1);
    CHECK(good.items[0].nll <= 1e-9);
    CHECK(good.items[0].mass == doctest::Approx(1.0));
    CHECK(good.biconditional_ok);

    // uniform marginals: mass 0.5 and nll = ln 2, biconditional still holds
    MarginalsFn uniform = [](const Example&) {
        return std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}};
    };
    const Theorem1Report mid = verify_theorem1(uniform, d, ck, 1e-3);
    CHECK(mid.items[0].mass == doctest::Approx(0.5));
    CHECK(mid.items[0].nll == doctest::Approx(std::log(2.0)));
    CHECK(mid.biconditional_ok);
}

TEST_CASE("joint l1 distance over the configuration space") {
    const CompiledKnowledge ck = compile(xor_toy());
    const std::vector<std::vector<double>> p = {{1.0, 0.0}, {1.0, 0.0}};
    const std::vector<std::vector<double>> q = {{0.0, 1.0}, {1.0, 0.0}};
    // joint p = delta(0,0), joint q = delta(1,0): L1 = 2
    CHECK(joint_l1_distance(ck.schema, p, q) == doctest::Approx(2.0));
    CHECK(joint_l1_distance(ck.schema, p, p) == doctest::Approx(0.0));
}
