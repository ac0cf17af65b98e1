#include "nesycl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "nesycl/tape.hpp"

namespace nesycl {

BoundConstants compute_bound_constants(const std::vector<const Predictor*>& models,
                                       const std::vector<TaskData>& tasks) {
    BoundConstants c;
    c.beta_floor = 1.0;
    c.zeta = 0;
    for (const TaskData& task : tasks) {
        const int z = task.knowledge->min_positive_model_count();
        if (c.zeta == 0 || z < c.zeta) c.zeta = z;
    }
    const double t = static_cast<double>(tasks.size());
    bool positive = true;
    for (const TaskData& task : tasks) {
        for (const Example& e : *task.data) {
            for (const Predictor* m : models) {
                std::vector<std::vector<double>> marginals = predictor_marginals(*m, e.fragments);
                const std::vector<double> dist = label_distribution(*task.knowledge, marginals);
                const double p = dist[e.label];
                if (p <= 0.0) positive = false;
                c.beta_floor = std::min(c.beta_floor, p);
            }
        }
    }
    c.applicable = positive && c.beta_floor > 0.0;
    c.gamma = 0.0;
    for (const TaskData& task : tasks) {
        const double g = 1.0 / (c.beta_floor * static_cast<double>(c.zeta) *
                                static_cast<double>(task.data->size()) * t);
        c.gamma = std::max(c.gamma, g);
    }
    return c;
}

double joint_l1_distance(const ConceptSchema& schema,
                         const std::vector<std::vector<double>>& p,
                         const std::vector<std::vector<double>>& q) {
    const std::size_t configs = schema.num_configs();
    const std::size_t k = schema.num_slots();
    std::vector<int> tuple(k);
    double acc = 0.0;
    for (std::size_t ci = 0; ci < configs; ++ci) {
        schema.unpack_config(ci, tuple);
        double pp = 1.0, qq = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            pp *= p[j][static_cast<std::size_t>(tuple[j])];
            qq *= q[j][static_cast<std::size_t>(tuple[j])];
        }
        acc += std::abs(pp - qq);
    }
    return acc;
}

double average_risk(const Predictor& model, const std::vector<TaskData>& tasks) {
    double acc = 0.0;
    for (const TaskData& task : tasks) {
        double task_risk = 0.0;
        for (const Example& e : *task.data) {
            const std::vector<std::vector<double>> marginals = predictor_marginals(model, e.fragments);
            const std::vector<double> dist = label_distribution(*task.knowledge, marginals);
            task_risk += nll_scalar(dist[e.label]);
        }
        acc += task_risk / static_cast<double>(task.data->size());
    }
    return acc / static_cast<double>(tasks.size());
}

Theorem1Report verify_theorem1(const MarginalsFn& fn, const Dataset& data,
                               const CompiledKnowledge& ck, double tol) {
    Theorem1Report report;
    report.tol = tol;
    for (const Example& e : data) {
        const auto marginals = fn(e);
        const std::vector<double> dist = label_distribution(ck, marginals);
        Theorem1Item item;
        item.nll = nll_scalar(dist[e.label]);
        item.mass = satisfying_mass(ck, marginals, e.label);
        const bool nll_ok = item.nll <= tol;
        const bool mass_ok = item.mass >= 1.0 - tol;
        if (nll_ok != mass_ok) report.biconditional_ok = false;
        report.items.push_back(item);
    }
    return report;
}

namespace {

double total_drift(const Predictor& a, const Predictor& b, const std::vector<TaskData>& tasks) {
    double acc = 0.0;
    for (const TaskData& task : tasks) {
        for (const Example& e : *task.data) {
            const auto pa = predictor_marginals(a, e.fragments);
            const auto pb = predictor_marginals(b, e.fragments);
            acc += joint_l1_distance(task.knowledge->schema, pa, pb);
        }
    }
    return acc;
}

}  // namespace

BoundReport lemma_a1_check(const Predictor& phi, const Predictor& psi,
                           const std::vector<TaskData>& tasks) {
    BoundReport report;
    report.constants = compute_bound_constants({&phi, &psi}, tasks);
    if (!report.constants.applicable) return report;  // precondition violated, not a failure
    report.applicable = true;
    report.lhs = std::abs(average_risk(phi, tasks) - average_risk(psi, tasks));
    report.drift = total_drift(phi, psi, tasks);
    report.rhs = report.constants.gamma * report.drift;
    report.holds = report.lhs <= report.rhs + 1e-9;
    return report;
}

BoundReport theorem2_check(const Predictor& theta, const Predictor& theta_prev,
                           const std::vector<TaskData>& tasks) {
    if (tasks.empty()) throw std::invalid_argument("theorem2_check: no tasks");
    BoundReport report;
    report.constants = compute_bound_constants({&theta, &theta_prev}, tasks);
    if (!report.constants.applicable) return report;
    report.applicable = true;

    const double t = static_cast<double>(tasks.size());
    report.lhs = average_risk(theta, tasks);

    const std::vector<TaskData> current(tasks.end() - 1, tasks.end());
    const double current_risk = average_risk(theta, current);
    double past_risk = 0.0;
    if (tasks.size() > 1) {
        const std::vector<TaskData> past(tasks.begin(), tasks.end() - 1);
        past_risk = average_risk(theta_prev, past);
    }
    report.drift = total_drift(theta, theta_prev, tasks);
    report.rhs = current_risk / t + (t - 1.0) / t * past_risk + report.constants.gamma * report.drift;
    report.holds = report.lhs <= report.rhs + 1e-9;
    return report;
}

PinskerReport pinsker_check(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    PinskerReport report;
    report.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& [p, q] : pairs) {
        const double kl = kl_divergence(p, q);
        const double l1 = l1_distance(p, q);
        const double slack = kl - 0.5 * l1 * l1;
        report.min_slack = std::min(report.min_slack, slack);
        ++report.checked;
        if (slack < -1e-12) ++report.violations;
    }
    return report;
}

ShortcutSolutionSet enumerate_additive_shortcuts(const std::vector<AdditiveConstraint>& constraints,
                                                 int domain_size) {
    std::set<int> var_set;
    for (const AdditiveConstraint& c : constraints) {
        var_set.insert(c.var_a);
        var_set.insert(c.var_b);
    }
    ShortcutSolutionSet out;
    out.variables.assign(var_set.begin(), var_set.end());
    const std::size_t n = out.variables.size();
    if (n > 6) throw std::invalid_argument("enumerate_additive_shortcuts: more than 6 distinct variables");

    auto var_index = [&](int v) {
        return static_cast<std::size_t>(std::lower_bound(out.variables.begin(), out.variables.end(), v) -
                                        out.variables.begin());
    };

    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(domain_size);
    std::vector<int> assign(n, 0);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t rem = code;
        for (std::size_t i = n; i-- > 0;) {
            assign[i] = static_cast<int>(rem % static_cast<std::size_t>(domain_size));
            rem /= static_cast<std::size_t>(domain_size);
        }
        bool ok = true;
        for (const AdditiveConstraint& c : constraints) {
            if (assign[var_index(c.var_a)] + assign[var_index(c.var_b)] != c.sum) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        bool is_truth = true;
        for (std::size_t i = 0; i < n; ++i)
            if (assign[i] != out.variables[i]) is_truth = false;
        if (is_truth) out.ground_truth_index = out.solutions.size();
        out.solutions.push_back(assign);
    }
    return out;
}

MapShortcutReport enumerate_map_shortcuts(int cardinality, const std::vector<MapObservation>& observations,
                                          unsigned long long node_cap) {
    MapShortcutReport report;
    std::set<int> observed;
    for (const MapObservation& o : observations) {
        observed.insert(o.a);
        observed.insert(o.b);
    }
    report.observed_values.assign(observed.begin(), observed.end());

    // constraints indexed by the later-assigned value
    std::vector<std::vector<std::pair<int, bool>>> incident(cardinality);
    for (const MapObservation& o : observations) {
        const int lo = std::min(o.a, o.b), hi = std::max(o.a, o.b);
        if (lo == hi) {
            if (!o.same) {  // pi(a) != pi(a) is unsatisfiable
                report.consistent_count = 0;
                return report;
            }
            continue;
        }
        incident[hi].push_back({lo, o.same});
    }

    std::vector<int> image(cardinality, -1);
    unsigned long long visited = 0;
    bool aborted = false;

    auto rec = [&](auto&& self, int v) -> void {
        if (aborted) return;
        if (v == cardinality) {
            ++report.consistent_count;
            std::set<int> seen_observed, seen_all;
            bool injective_observed = true, injective_all = true;
            for (int ov : report.observed_values)
                if (!seen_observed.insert(image[ov]).second) injective_observed = false;
            for (int v = 0; v < cardinality; ++v)
                if (!seen_all.insert(image[v]).second) injective_all = false;
            if (!injective_observed) report.all_injective_on_observed = false;
            if (!injective_all) report.all_injective = false;
            if (report.examples.size() < 5) report.examples.push_back(image);
            return;
        }
        for (int target = 0; target < cardinality; ++target) {
            if (++visited > node_cap) {
                aborted = true;
                return;
            }
            bool ok = true;
            for (const auto& [other, same] : incident[v]) {
                if (same != (image[other] == target)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            image[v] = target;
            self(self, v + 1);
            image[v] = -1;
            if (aborted) return;
        }
    };
    rec(rec, 0);
    if (aborted) {
        report.refused = true;
        report.refusal_reason = "combinatorial cap exceeded after " + std::to_string(visited) + " nodes";
        report.consistent_count = 0;
        report.examples.clear();
    }
    return report;
}

}  // namespace nesycl
