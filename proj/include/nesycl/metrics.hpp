#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nesycl/data.hpp"
#include "nesycl/knowledge.hpp"
#include "nesycl/models.hpp"

namespace nesycl {

using MarginalsFn = std::function<std::vector<std::vector<double>>(const Example&)>;
using LabelDistFn = std::function<std::vector<double>(const Example&)>;

MarginalsFn marginals_fn(const Predictor& pred);
LabelDistFn label_dist_fn(const Predictor& pred);

// argmax with ties broken by lowest index
std::size_t argmax_lowest(std::span<const double> v);
// argmax restricted to `allowed` indices (Task-IL masking)
std::size_t argmax_masked(std::span<const double> v, std::span<const std::size_t> allowed);

double label_accuracy(const LabelDistFn& fn, const Dataset& data,
                      const std::vector<std::size_t>* label_mask = nullptr);
// mean over slots of per-slot argmax accuracy; optional per-slot value masks
double concept_accuracy(const MarginalsFn& fn, const Dataset& data,
                        const std::vector<std::vector<int>>* slot_value_mask = nullptr);

// A[e][s]: accuracy after training task e (1-based rows as they are
// appended), evaluated on task s's test set; plus the seeded untrained
// baseline row used by FWT.
struct AccuracyMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<double> rand_row;

    std::size_t tasks_trained() const { return rows.size(); }
    std::size_t tasks_total() const { return rows.empty() ? rand_row.size() : rows.front().size(); }
    double at(std::size_t e, std::size_t s) const { return rows.at(e - 1).at(s - 1); }
};

// Class-IL = mean of the last row.
double class_il(const AccuracyMatrix& a);
// Task-IL is class_il over a matrix built with masked evaluation.
double task_il(const AccuracyMatrix& a_masked);
// FWT = mean_t [ A(theta_t, t+1) - A_rand(t+1) ]; absent when T < 2.
std::optional<double> fwt(const AccuracyMatrix& a);
// BWT = mean_t [ A(theta_t, t) - A(theta_T, t) ]; positive means forgetting
// (the formula's literal sign convention).
double bwt(const AccuracyMatrix& a);

// counts[true][predicted] per concept slot
using ConfusionMatrix = std::vector<std::vector<long>>;
std::vector<ConfusionMatrix> concept_confusions(const MarginalsFn& fn, const Dataset& data,
                                                const ConceptSchema& schema);

struct SemanticEquivalenceReport {
    bool equivalent = false;              // argmax agreement on every record and slot
    std::vector<double> per_slot_agreement;
    double overall_agreement = 0.0;       // mean over slots
};
SemanticEquivalenceReport semantic_equivalence(const MarginalsFn& fn, const Dataset& data);

struct ShortcutReport {
    bool flagged = false;
    double label_agreement = 0.0;         // model MAP label vs ground-truth MAP label
    double threshold = 0.95;
    SemanticEquivalenceReport semantics;
    std::vector<ConfusionMatrix> confusions;
};

// Flags a reasoning shortcut iff label argmax agreement >= threshold while
// the concepts are not semantically equivalent to the ground truth.
ShortcutReport shortcut_report(const MarginalsFn& marginals, const LabelDistFn& labels,
                               const Dataset& data, const CompiledKnowledge& ck,
                               double threshold = 0.95);

}  // namespace nesycl
