#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nesycl/metrics.hpp"
#include "nesycl/rng.hpp"

using namespace nesycl;

namespace {

AccuracyMatrix matrix(std::vector<std::vector<double>> rows, std::vector<double> rand_row = {}) {
    AccuracyMatrix a;
    a.rows = std::move(rows);
    a.rand_row = std::move(rand_row);
    return a;
}

Dataset digit_dataset(const std::vector<int>& concepts, const std::vector<std::size_t>& labels) {
    Dataset d;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        Example e;
        e.fragments = {{0.0}};
        e.concepts = {concepts[i]};
        e.label = labels[i];
        d.push_back(e);
    }
    return d;
}

}  // namespace

TEST_CASE("class-il on fixed matrices") {
    CHECK(class_il(matrix({{1.0, 0.5}})) == doctest::Approx(0.75));
    CHECK(class_il(matrix({{0.3, 0.3, 0.3}})) == doctest::Approx(0.3));
    const AccuracyMatrix a = matrix({{0.9, 0.1, 0.2}, {0.7, 0.8, 0.1}, {0.5, 0.6, 0.9}});
    CHECK(class_il(a) == doctest::Approx((0.5 + 0.6 + 0.9) / 3.0));
    CHECK_THROWS_AS((void)class_il(matrix({})), std::invalid_argument);
}

TEST_CASE("fwt on fixed matrices") {
    // single pair: A(theta_1, 2) = 0.6 vs rand 0.1 -> 0.5
    const AccuracyMatrix a = matrix({{0.9, 0.6}, {0.8, 0.9}}, {0.3, 0.1});
    CHECK(fwt(a).value() == doctest::Approx(0.5));
    const AccuracyMatrix b = matrix({{0.9, 0.1}, {0.8, 0.9}}, {0.3, 0.1});
    CHECK(fwt(b).value() == doctest::Approx(0.0));  // no gain over random
    const AccuracyMatrix c = matrix({{0.9, 0.2, 0.1}, {0.7, 0.8, 0.3}, {0.5, 0.6, 0.9}},
                                    {0.1, 0.1, 0.1});
    CHECK(fwt(c).value() == doctest::Approx(((0.2 - 0.1) + (0.3 - 0.1)) / 2.0));
    // negative FWT is representable
    const AccuracyMatrix neg = matrix({{0.9, 0.05}, {0.8, 0.9}}, {0.3, 0.1});
    CHECK(fwt(neg).value() == doctest::Approx(-0.05));
    // single trained row over 2 tasks (offline) -> absent
    CHECK(!fwt(matrix({{0.9, 0.6}}, {0.3, 0.1})).has_value());
}

TEST_CASE("bwt on fixed matrices: positive means forgetting") {
    const AccuracyMatrix b = matrix({{0.9, 0.0}, {0.9, 0.8}});
    CHECK(bwt(b) == doctest::Approx(0.0));  // no forgetting
    // diag [0.9, 0.8], last row [0.7, 0.8] -> 0.1
    const AccuracyMatrix c = matrix({{0.9, 0.1}, {0.7, 0.8}});
    CHECK(bwt(c) == doctest::Approx(0.1));
    // total forgetting to zero accuracy -> mean of the diagonal
    const AccuracyMatrix d = matrix({{0.9, 0.0, 0.0}, {0.0, 0.6, 0.0}, {0.0, 0.0, 0.0}});
    CHECK(bwt(d) == doctest::Approx((0.9 + 0.6 + 0.0) / 3.0));
}

TEST_CASE("task-il masking can only help") {
    Rng rng(4);
    Dataset d = digit_dataset({0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2});
    for (std::size_t i = 0; i < d.size(); ++i) d[i].fragments = {{static_cast<double>(i)}};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> dists;
        for (std::size_t i = 0; i < d.size(); ++i) {
            std::vector<double> v(3);
            double z = 0;
            for (double& x : v) z += (x = rng.uniform(0.01, 1.0));
            for (double& x : v) x /= z;
            dists.push_back(v);
        }
        LabelDistFn fn = [&](const Example& e) {
            return dists[static_cast<std::size_t>(e.fragments[0][0])];
        };
        const double unmasked = label_accuracy(fn, d);
        const std::vector<std::size_t> full_mask = {0, 1, 2};
        CHECK(label_accuracy(fn, d, &full_mask) >= unmasked);
    }
    // singleton mask -> accuracy 1 on that task
    Dataset ones = digit_dataset({1, 1}, {1, 1});
    LabelDistFn uniform = [](const Example&) { return std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}; };
    const std::vector<std::size_t> singleton = {1};
    CHECK(label_accuracy(uniform, ones, &singleton) == doctest::Approx(1.0));
}

TEST_CASE("two-label mask with a uniform predictor gives expected accuracy 0.5") {
    // exactly-uniform distribution, balanced labels: tie-break picks the
    // lowest allowed label, so accuracy equals the label-0 share = 0.5
    Dataset d = digit_dataset({0, 1, 0, 1}, {0, 1, 0, 1});
    LabelDistFn uniform = [](const Example&) { return std::vector<double>{0.5, 0.5}; };
    const std::vector<std::size_t> mask = {0, 1};
    CHECK(label_accuracy(uniform, d, &mask) == doctest::Approx(0.5));

    // seeded random predictor, analytic expectation 0.5
    Rng rng(9);
    Dataset big;
    std::vector<std::vector<double>> scores;
    for (int i = 0; i < 4000; ++i) {
        Example e;
        e.fragments = {{static_cast<double>(i)}};
        e.concepts = {i % 2};
        e.label = static_cast<std::size_t>(i % 2);
        big.push_back(e);
        const double a = rng.uniform();
        scores.push_back({a, 1.0 - a});
    }
    LabelDistFn noisy = [&](const Example& e) {
        return scores[static_cast<std::size_t>(e.fragments[0][0])];
    };
    CHECK(label_accuracy(noisy, big, &mask) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("semantic equivalence") {
    Dataset d = digit_dataset({0, 5, 2, 7, 9}, {0, 0, 0, 0, 0});
    MarginalsFn perfect = [](const Example& e) {
        std::vector<double> m(10, 0.0);
        m[static_cast<std::size_t>(e.concepts[0])] = 1.0;
        return std::vector<std::vector<double>>{m};
    };
    const auto report = semantic_equivalence(perfect, d);
    CHECK(report.equivalent);
    CHECK(report.overall_agreement == doctest::Approx(1.0));

    // the additive shortcut map 0->5, 2->7, 4->9, 6->1, 8->3 (odds fixed)
    MarginalsFn shortcut = [](const Example& e) {
        static const int map[10] = {5, 1, 7, 3, 9, 5, 1, 7, 3, 9};
        std::vector<double> m(10, 0.0);
        const int c = e.concepts[0];
        m[static_cast<std::size_t>(c % 2 == 0 ? map[c] : c)] = 1.0;
        return std::vector<std::vector<double>>{m};
    };
    CHECK(!semantic_equivalence(shortcut, d).equivalent);

    // all but one record agree -> false with rate (N-1)/N
    MarginalsFn off_by_one = [&](const Example& e) {
        std::vector<double> m(10, 0.0);
        const bool last = &e == &d.back();
        m[static_cast<std::size_t>(last ? (e.concepts[0] + 1) % 10 : e.concepts[0])] = 1.0;
        return std::vector<std::vector<double>>{m};
    };
    const auto nearly = semantic_equivalence(off_by_one, d);
    CHECK(!nearly.equivalent);
    CHECK(nearly.per_slot_agreement[0] == doctest::Approx(4.0 / 5.0));
}

TEST_CASE("shortcut report: the additive shortcut is flagged, identity is not") {
    const CompiledKnowledge ck = compile(addition_knowledge());
    Dataset d;
    const std::vector<std::pair<int, int>> types = {{0, 6}, {4, 6}, {2, 8}, {4, 8}};
    for (auto [a, b] : types) {
        Example e;
        e.fragments = {{0.0}, {0.0}};
        e.concepts = {a, b};
        e.label = static_cast<std::size_t>(a + b);
        d.push_back(e);
    }
    static const int map[10] = {5, 1, 7, 3, 9, 5, 1, 7, 3, 9};
    auto delta = [](int v) {
        std::vector<double> m(10, 0.0);
        m[static_cast<std::size_t>(v)] = 1.0;
        return m;
    };
    // shortcut predictor: sums 5+1, 9+1, 7+3, 9+3 all remain correct
    MarginalsFn shortcut_m = [&](const Example& e) {
        return std::vector<std::vector<double>>{delta(map[e.concepts[0]]), delta(map[e.concepts[1]])};
    };
    LabelDistFn shortcut_l = [&](const Example& e) { return label_distribution(ck, shortcut_m(e)); };
    const auto flagged = shortcut_report(shortcut_m, shortcut_l, d, ck);
    CHECK(flagged.label_agreement == doctest::Approx(1.0));
    CHECK(flagged.flagged);

    MarginalsFn identity_m = [&](const Example& e) {
        return std::vector<std::vector<double>>{delta(e.concepts[0]), delta(e.concepts[1])};
    };
    LabelDistFn identity_l = [&](const Example& e) { return label_distribution(ck, identity_m(e)); };
    CHECK(!shortcut_report(identity_m, identity_l, d, ck).flagged);

    // shifted concepts break the sums: bad model, not a shortcut
    MarginalsFn bad_m = [&](const Example& e) {
        return std::vector<std::vector<double>>{delta((e.concepts[0] + 3) % 10),
                                                delta((e.concepts[1] + 5) % 10)};
    };
    LabelDistFn bad_l = [&](const Example& e) { return label_distribution(ck, bad_m(e)); };
    const auto bad = shortcut_report(bad_m, bad_l, d, ck);
    CHECK(bad.label_agreement < 0.95);
    CHECK(!bad.flagged);
}

TEST_CASE("shortcut report never flags when semantics are equivalent") {
    const CompiledKnowledge ck = compile(xor_toy());
    Dataset d;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            Example e;
            e.fragments = {{0.0}, {0.0}};
            e.concepts = {a, b};
            e.label = static_cast<std::size_t>(a ^ b);
            d.push_back(e);
        }
    MarginalsFn m = [](const Example& e) {
        return std::vector<std::vector<double>>{
            {e.concepts[0] == 0 ? 1.0 : 0.0, e.concepts[0] == 1 ? 1.0 : 0.0},
            {e.concepts[1] == 0 ? 1.0 : 0.0, e.concepts[1] == 1 ? 1.0 : 0.0}};
    };
    LabelDistFn l = [&](const Example& e) { return label_distribution(ck, m(e)); };
    const auto report = shortcut_report(m, l, d, ck);
    CHECK(report.semantics.equivalent);
    CHECK(!report.flagged);
}

TEST_CASE("confusion matrices: row sums equal true-class supports") {
    const CompiledKnowledge ck = compile(addition_knowledge());
    Rng rng(31);
    Dataset d;
    std::vector<long> support0(10, 0), support1(10, 0);
    for (int i = 0; i < 200; ++i) {
        Example e;
        e.fragments = {{0.0}, {0.0}};
        e.concepts = {static_cast<int>(rng.uniform_index(10)), static_cast<int>(rng.uniform_index(10))};
        e.label = static_cast<std::size_t>(e.concepts[0] + e.concepts[1]);
        ++support0[static_cast<std::size_t>(e.concepts[0])];
        ++support1[static_cast<std::size_t>(e.concepts[1])];
        d.push_back(e);
    }
    MarginalsFn noisy = [&](const Example& e) {
        std::vector<std::vector<double>> m(2, std::vector<double>(10, 0.05));
        m[0][static_cast<std::size_t>((e.concepts[0] + 1) % 10)] = 0.55;
        m[1][static_cast<std::size_t>(e.concepts[1])] = 0.55;
        return m;
    };
    const auto confusions = concept_confusions(noisy, d, ck.schema);
    REQUIRE(confusions.size() == 2);
    for (int v = 0; v < 10; ++v) {
        long row0 = 0, row1 = 0;
        for (int p = 0; p < 10; ++p) {
            row0 += confusions[0][v][p];
            row1 += confusions[1][v][p];
        }
        CHECK(row0 == support0[v]);
        CHECK(row1 == support1[v]);
    }
}
