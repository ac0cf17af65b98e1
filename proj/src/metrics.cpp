#include "nesycl/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include <omp.h>

#include "nesycl/kernels.hpp"

namespace nesycl {

MarginalsFn marginals_fn(const Predictor& pred) {
    return [&pred](const Example& e) { return predictor_marginals(pred, e.fragments); };
}

LabelDistFn label_dist_fn(const Predictor& pred) {
    return [&pred](const Example& e) { return predictor_label_dist(pred, e.fragments); };
}

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t argmax_masked(std::span<const double> v, std::span<const std::size_t> allowed) {
    std::size_t best = allowed[0];
    for (std::size_t i : allowed)
        if (v[i] > v[best]) best = i;
    return best;
}

double label_accuracy(const LabelDistFn& fn, const Dataset& data,
                      const std::vector<std::size_t>* label_mask) {
    if (data.empty()) return 0.0;
    long correct = 0;
#pragma omp parallel for num_threads(kernels::threads()) schedule(static) reduction(+ : correct)
    for (long long i = 0; i < static_cast<long long>(data.size()); ++i) {
        const Example& e = data[static_cast<std::size_t>(i)];
        const std::vector<double> dist = fn(e);
        const std::size_t pred = label_mask ? argmax_masked(dist, *label_mask) : argmax_lowest(dist);
        if (pred == e.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double concept_accuracy(const MarginalsFn& fn, const Dataset& data,
                        const std::vector<std::vector<int>>* slot_value_mask) {
    if (data.empty()) return 0.0;
    const std::size_t k = data.front().concepts.size();
    std::vector<long> correct(k, 0);
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
    for (long long i = 0; i < static_cast<long long>(data.size()); ++i) {
        const Example& e = data[static_cast<std::size_t>(i)];
        const auto marginals = fn(e);
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t pred;
            if (slot_value_mask) {
                const std::vector<int>& allowed = (*slot_value_mask)[j];
                std::vector<std::size_t> idx(allowed.begin(), allowed.end());
                pred = argmax_masked(marginals[j], idx);
            } else {
                pred = argmax_lowest(marginals[j]);
            }
            if (pred == static_cast<std::size_t>(e.concepts[j])) {
#pragma omp atomic
                ++correct[j];
            }
        }
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j)
        acc += static_cast<double>(correct[j]) / static_cast<double>(data.size());
    return acc / static_cast<double>(k);
}

namespace {

void require_complete(const AccuracyMatrix& a) {
    if (a.rows.empty()) throw std::invalid_argument("accuracy matrix: no trained-task rows");
    const std::size_t t = a.rows.front().size();
    for (const auto& row : a.rows)
        if (row.size() != t) throw std::invalid_argument("accuracy matrix: ragged rows");
}

}  // namespace

double class_il(const AccuracyMatrix& a) {
    require_complete(a);
    const auto& last = a.rows.back();
    double acc = 0.0;
    for (double v : last) acc += v;
    return acc / static_cast<double>(last.size());
}

double task_il(const AccuracyMatrix& a_masked) { return class_il(a_masked); }

std::optional<double> fwt(const AccuracyMatrix& a) {
    require_complete(a);
    const std::size_t t_total = a.tasks_total();
    if (t_total < 2 || a.rows.size() < t_total) return std::nullopt;
    if (a.rand_row.size() != t_total) throw std::invalid_argument("fwt: missing random-baseline row");
    double acc = 0.0;
    for (std::size_t t = 1; t <= t_total - 1; ++t) acc += a.at(t, t + 1) - a.rand_row[t];
    return acc / static_cast<double>(t_total - 1);
}

double bwt(const AccuracyMatrix& a) {
    require_complete(a);
    const std::size_t t_total = a.tasks_total();
    if (a.rows.size() < t_total) throw std::invalid_argument("bwt: diagonal incomplete");
    double acc = 0.0;
    for (std::size_t t = 1; t <= t_total; ++t) acc += a.at(t, t) - a.at(t_total, t);
    return acc / static_cast<double>(t_total);
}

std::vector<ConfusionMatrix> concept_confusions(const MarginalsFn& fn, const Dataset& data,
                                                const ConceptSchema& schema) {
    const std::size_t k = schema.num_slots();
    std::vector<ConfusionMatrix> out(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t card = static_cast<std::size_t>(schema.slots[j].cardinality);
        out[j].assign(card, std::vector<long>(card, 0));
    }
    for (const Example& e : data) {
        const auto marginals = fn(e);
        for (std::size_t j = 0; j < k; ++j)
            ++out[j][static_cast<std::size_t>(e.concepts[j])][argmax_lowest(marginals[j])];
    }
    return out;
}

SemanticEquivalenceReport semantic_equivalence(const MarginalsFn& fn, const Dataset& data) {
    SemanticEquivalenceReport report;
    if (data.empty()) return report;
    const std::size_t k = data.front().concepts.size();
    std::vector<long> agree(k, 0);
    for (const Example& e : data) {
        const auto marginals = fn(e);
        for (std::size_t j = 0; j < k; ++j)
            if (argmax_lowest(marginals[j]) == static_cast<std::size_t>(e.concepts[j])) ++agree[j];
    }
    report.per_slot_agreement.resize(k);
    report.equivalent = true;
    for (std::size_t j = 0; j < k; ++j) {
        report.per_slot_agreement[j] = static_cast<double>(agree[j]) / static_cast<double>(data.size());
        report.overall_agreement += report.per_slot_agreement[j];
        if (agree[j] != static_cast<long>(data.size())) report.equivalent = false;
    }
    report.overall_agreement /= static_cast<double>(k);
    return report;
}

ShortcutReport shortcut_report(const MarginalsFn& marginals, const LabelDistFn& labels,
                               const Dataset& data, const CompiledKnowledge& ck, double threshold) {
    ShortcutReport report;
    report.threshold = threshold;
    if (data.empty()) return report;
    long agree = 0;
    for (const Example& e : data) {
        // ground-truth MAP label: reason over the true concept tuple
        std::vector<std::vector<double>> truth(ck.k());
        for (std::size_t j = 0; j < ck.k(); ++j) {
            truth[j].assign(static_cast<std::size_t>(ck.schema.slots[j].cardinality), 0.0);
            truth[j][static_cast<std::size_t>(e.concepts[j])] = 1.0;
        }
        const std::size_t truth_label = map_label(ck, truth);
        const std::size_t model_label = argmax_lowest(labels(e));
        if (truth_label == model_label) ++agree;
    }
    report.label_agreement = static_cast<double>(agree) / static_cast<double>(data.size());
    report.semantics = semantic_equivalence(marginals, data);
    report.confusions = concept_confusions(marginals, data, ck.schema);
    report.flagged = report.label_agreement >= threshold && !report.semantics.equivalent;
    return report;
}

}  // namespace nesycl
