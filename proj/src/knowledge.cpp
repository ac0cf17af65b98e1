#include "nesycl/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <omp.h>

#include "nesycl/kernels.hpp"

namespace nesycl {

std::size_t ConceptSchema::num_configs() const {
    std::size_t n = 1;
    for (const Slot& s : slots) n *= static_cast<std::size_t>(s.cardinality);
    return n;
}

std::size_t ConceptSchema::num_labels() const {
    std::size_t n = 1;
    for (int c : label_cardinalities) n *= static_cast<std::size_t>(c);
    return n;
}

void ConceptSchema::unpack_config(std::size_t index, std::span<int> out) const {
    for (std::size_t j = slots.size(); j-- > 0;) {
        const std::size_t card = static_cast<std::size_t>(slots[j].cardinality);
        out[j] = static_cast<int>(index % card);
        index /= card;
    }
}

std::size_t ConceptSchema::pack_config(std::span<const int> c) const {
    std::size_t index = 0;
    for (std::size_t j = 0; j < slots.size(); ++j)
        index = index * static_cast<std::size_t>(slots[j].cardinality) + static_cast<std::size_t>(c[j]);
    return index;
}

void ConceptSchema::unpack_label(std::size_t index, std::span<int> out) const {
    for (std::size_t j = label_cardinalities.size(); j-- > 0;) {
        const std::size_t card = static_cast<std::size_t>(label_cardinalities[j]);
        out[j] = static_cast<int>(index % card);
        index /= card;
    }
}

std::size_t ConceptSchema::pack_label(std::span<const int> y) const {
    std::size_t index = 0;
    for (std::size_t j = 0; j < label_cardinalities.size(); ++j)
        index = index * static_cast<std::size_t>(label_cardinalities[j]) + static_cast<std::size_t>(y[j]);
    return index;
}

int CompiledKnowledge::min_positive_model_count() const {
    int z = 0;
    for (int v : model_count)
        if (v > 0 && (z == 0 || v < z)) z = v;
    return z;
}

CompiledKnowledge compile(const KnowledgeSpec& spec, std::size_t enumeration_cap) {
    const ConceptSchema& schema = spec.schema;
    for (const auto& s : schema.slots)
        if (s.cardinality < 2) throw std::invalid_argument("compile: slot cardinality must be >= 2");
    if (schema.label_cardinalities.empty())
        throw std::invalid_argument("compile: schema needs at least one label variable");
    const std::size_t configs = schema.num_configs();
    if (configs > enumeration_cap)
        throw std::invalid_argument("compile: configuration count " + std::to_string(configs) +
                                    " exceeds enumeration cap " + std::to_string(enumeration_cap));
    const std::size_t labels = schema.num_labels();
    const std::size_t k = schema.num_slots();

    CompiledKnowledge ck;
    ck.schema = schema;
    ck.name = spec.name;
    ck.satisfying.assign(labels, {});
    ck.model_count.assign(configs, 0);
    ck.config_values.assign(configs * k, 0);

    std::vector<int> c(k);
    std::vector<int> y(schema.label_cardinalities.size());
    for (std::size_t ci = 0; ci < configs; ++ci) {
        schema.unpack_config(ci, c);
        for (std::size_t j = 0; j < k; ++j) ck.config_values[ci * k + j] = c[j];
        for (std::size_t yi = 0; yi < labels; ++yi) {
            schema.unpack_label(yi, y);
            if (spec.predicate(c, y)) {
                ck.satisfying[yi].push_back(static_cast<int>(ci));
                ++ck.model_count[ci];
            }
        }
    }
    return ck;
}

double u_k(const CompiledKnowledge& ck, std::size_t label_index, std::size_t config_index) {
    const int z = ck.model_count[config_index];
    if (z == 0) return 0.0;
    const auto& sat = ck.satisfying[label_index];
    const bool models = std::find(sat.begin(), sat.end(), static_cast<int>(config_index)) != sat.end();
    return models ? 1.0 / static_cast<double>(z) : 0.0;
}

namespace {

void check_marginals(const CompiledKnowledge& ck, std::span<const std::vector<double>> marginals) {
    if (marginals.size() != ck.k()) throw std::invalid_argument("label_distribution: slot count mismatch");
    for (std::size_t j = 0; j < marginals.size(); ++j) {
        if (marginals[j].size() != static_cast<std::size_t>(ck.schema.slots[j].cardinality))
            throw std::invalid_argument("label_distribution: marginal cardinality mismatch");
        double sum = 0.0;
        for (double v : marginals[j]) sum += v;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("label_distribution: marginal for slot " + std::to_string(j) +
                                        " sums to " + std::to_string(sum));
    }
}

inline double mass_of_label(const CompiledKnowledge& ck,
                            std::span<const std::vector<double>> marginals,
                            std::size_t yi, bool weight_by_uk) {
    const std::size_t k = ck.k();
    double acc = 0.0;
    for (int ci : ck.satisfying[yi]) {
        const int* tuple = ck.config(static_cast<std::size_t>(ci));
        double prod = weight_by_uk ? 1.0 / static_cast<double>(ck.model_count[ci]) : 1.0;
        for (std::size_t j = 0; j < k; ++j) prod *= marginals[j][static_cast<std::size_t>(tuple[j])];
        acc += prod;
    }
    return acc;
}

}  // namespace

void label_distribution_serial(const CompiledKnowledge& ck,
                               std::span<const std::vector<double>> marginals,
                               std::span<double> out) {
    for (std::size_t yi = 0; yi < ck.num_labels(); ++yi)
        out[yi] = mass_of_label(ck, marginals, yi, /*weight_by_uk=*/true);
}

std::vector<double> label_distribution(const CompiledKnowledge& ck,
                                       std::span<const std::vector<double>> marginals) {
    check_marginals(ck, marginals);
    std::vector<double> out(ck.num_labels(), 0.0);
#pragma omp parallel for num_threads(kernels::threads()) schedule(static) if (ck.num_labels() > 8)
    for (long long yi = 0; yi < static_cast<long long>(ck.num_labels()); ++yi)
        out[static_cast<std::size_t>(yi)] =
            mass_of_label(ck, marginals, static_cast<std::size_t>(yi), /*weight_by_uk=*/true);
    return out;
}

std::size_t map_label(const CompiledKnowledge& ck, std::span<const std::vector<double>> marginals) {
    const std::vector<double> dist = label_distribution(ck, marginals);
    std::size_t best = 0;
    for (std::size_t yi = 1; yi < dist.size(); ++yi)
        if (dist[yi] > dist[best]) best = yi;
    return best;
}

double satisfying_mass(const CompiledKnowledge& ck, std::span<const std::vector<double>> marginals,
                       std::size_t label_index) {
    check_marginals(ck, marginals);
    return mass_of_label(ck, marginals, label_index, /*weight_by_uk=*/false);
}

Var reasoning_layer(Tape& tape, const CompiledKnowledge& ck, std::span<const Var> slot_marginals) {
    const std::size_t k = ck.k();
    if (slot_marginals.size() != k) throw std::invalid_argument("reasoning_layer: slot count mismatch");
    std::vector<std::vector<double>> rows(k);
    std::vector<Var> parents(slot_marginals.begin(), slot_marginals.end());
    for (std::size_t j = 0; j < k; ++j) rows[j] = tape.value(slot_marginals[j]).data;

    std::vector<double> dist(ck.num_labels(), 0.0);
    label_distribution_serial(ck, rows, dist);

    const CompiledKnowledge* kb = &ck;
    auto backward = [kb](Tape& t, int id) {
        const Tape::Node& node = t.node(id);
        const std::size_t slots = kb->k();
        for (std::size_t yi = 0; yi < kb->num_labels(); ++yi) {
            const double gy = node.grad[yi];
            if (gy == 0.0) continue;
            for (int ci : kb->satisfying[yi]) {
                const int* tuple = kb->config(static_cast<std::size_t>(ci));
                const double w = 1.0 / static_cast<double>(kb->model_count[ci]);
                for (std::size_t j = 0; j < slots; ++j) {
                    double prod = w;
                    for (std::size_t i = 0; i < slots; ++i) {
                        if (i == j) continue;
                        prod *= t.node(node.custom_parents[i]).value.data[static_cast<std::size_t>(tuple[i])];
                    }
                    t.grad({node.custom_parents[j]})[static_cast<std::size_t>(tuple[j])] += gy * prod;
                }
            }
        }
    };
    return tape.custom(Tensor::row(std::move(dist)), parents, backward);
}

KnowledgeSpec addition_knowledge(int digits) {
    KnowledgeSpec spec;
    spec.name = "mnist-add";
    spec.schema.slots = {{"digit1", digits}, {"digit2", digits}};
    spec.schema.label_cardinalities = {2 * digits - 1};
    spec.predicate = [](std::span<const int> c, std::span<const int> y) {
        return c[0] + c[1] == y[0];
    };
    return spec;
}

KnowledgeSpec clevr_knowledge(int shapes, int colors) {
    KnowledgeSpec spec;
    spec.name = "clevr-samecolor-sameshape";
    spec.schema.slots = {{"shape1", shapes}, {"shape2", shapes}, {"color1", colors}, {"color2", colors}};
    spec.schema.label_cardinalities = {2, 2, 2};  // (same_shape, same_color, same)
    spec.predicate = [](std::span<const int> c, std::span<const int> y) {
        const bool same_shape = c[0] == c[1];
        const bool same_color = c[2] == c[3];
        return y[0] == (same_shape ? 1 : 0) && y[1] == (same_color ? 1 : 0) &&
               y[2] == ((same_shape && same_color) ? 1 : 0);
    };
    return spec;
}

KnowledgeSpec xor_toy() {
    KnowledgeSpec spec;
    spec.name = "xor";
    spec.schema.slots = {{"bit1", 2}, {"bit2", 2}};
    spec.schema.label_cardinalities = {2};
    spec.predicate = [](std::span<const int> c, std::span<const int> y) {
        return (c[0] ^ c[1]) == y[0];
    };
    return spec;
}

KnowledgeSpec knowledge_by_name(const std::string& name) {
    if (name == "mnist-add") return addition_knowledge();
    if (name == "clevr-samecolor-sameshape") return clevr_knowledge();
    if (name == "xor") return xor_toy();
    throw std::invalid_argument("unknown knowledge: " + name);
}

}  // namespace nesycl
