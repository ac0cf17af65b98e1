#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nesycl/data.hpp"
#include "nesycl/knowledge.hpp"
#include "nesycl/metrics.hpp"
#include "nesycl/models.hpp"

namespace nesycl {

struct TaskData {
    const Dataset* data = nullptr;
    const CompiledKnowledge* knowledge = nullptr;
};

// Constants of the likelihood-difference bound: beta_floor is the minimum
// label likelihood over both models and all data, zeta the minimum positive
// model count over tasks, gamma = max_s 1/(beta_floor * zeta * |D^s| * t).
struct BoundConstants {
    double beta_floor = 0.0;
    int zeta = 0;
    double gamma = 0.0;
    bool applicable = false;  // false when some example gets zero likelihood
};

BoundConstants compute_bound_constants(const std::vector<const Predictor*>& models,
                                       const std::vector<TaskData>& tasks);

// L1 distance between two factorized concept distributions over the joint
// configuration space of `schema`.
double joint_l1_distance(const ConceptSchema& schema,
                         const std::vector<std::vector<double>>& p,
                         const std::vector<std::vector<double>>& q);

// Average NLL risk of Eq.-2 form: mean over tasks of per-task mean NLL.
double average_risk(const Predictor& model, const std::vector<TaskData>& tasks);

struct Theorem1Item {
    double nll = 0.0;
    double mass = 0.0;
};

struct Theorem1Report {
    std::vector<Theorem1Item> items;
    double tol = 0.0;
    bool biconditional_ok = true;  // (nll <= tol) == (mass >= 1 - tol) per item
};

// Per-example satisfying mass vs NLL; the empirical Theorem-3.1 biconditional.
// mass >= p(y|x) = exp(-nll), so nll <= tol forces mass >= 1 - tol.
Theorem1Report verify_theorem1(const MarginalsFn& fn, const Dataset& data,
                               const CompiledKnowledge& ck, double tol);

struct BoundReport {
    bool applicable = false;
    bool holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double drift = 0.0;  // summed joint L1 concept drift
    BoundConstants constants;
};

// |L(phi) - L(psi)| <= gamma * sum_s sum_(x,y) ||p_phi(C|x) - p_psi(C|x)||_1
BoundReport lemma_a1_check(const Predictor& phi, const Predictor& psi,
                           const std::vector<TaskData>& tasks);

// Average risk of theta on tasks 1..t against the concept-drift upper bound
// built from theta_prev (current-task risk + past model's past risk +
// gamma-weighted L1 drift).
BoundReport theorem2_check(const Predictor& theta, const Predictor& theta_prev,
                           const std::vector<TaskData>& tasks);

struct PinskerReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double min_slack = 0.0;  // min over pairs of KL - 0.5*L1^2
};

PinskerReport pinsker_check(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs);

// --- brute-force shortcut enumeration ---

// One equation c_a + c_b = sum over digit-valued variables.
struct AdditiveConstraint {
    int var_a = 0;
    int var_b = 0;
    int sum = 0;
};

struct ShortcutSolutionSet {
    std::vector<int> variables;               // sorted distinct variable names
    std::vector<std::vector<int>> solutions;  // assignments, aligned with `variables`
    std::optional<std::size_t> ground_truth_index;  // solution with c_v = v for all v
};

// Exhaustive enumeration over domain {0..domain_size-1}; at most 6 distinct
// variables (10^6 assignments).
ShortcutSolutionSet enumerate_additive_shortcuts(const std::vector<AdditiveConstraint>& constraints,
                                                 int domain_size = 10);

struct MapObservation {
    int a = 0;
    int b = 0;
    bool same = false;  // whether the pair was observed as same-valued
};

struct MapShortcutReport {
    bool refused = false;
    std::string refusal_reason;
    unsigned long long consistent_count = 0;
    bool all_injective = true;              // injective on the full domain
    bool all_injective_on_observed = true;  // injective restricted to observed values
    std::vector<int> observed_values;
    std::vector<std::vector<int>> examples;  // up to a handful of consistent maps
};

// Counts deterministic concept maps pi: {0..card-1} -> {0..card-1} consistent
// with the observations, and reports whether every consistent map is
// injective on the observed values. Backtracking with a visited-node cap.
MapShortcutReport enumerate_map_shortcuts(int cardinality, const std::vector<MapObservation>& observations,
                                          unsigned long long node_cap = 30000000ull);

}  // namespace nesycl
