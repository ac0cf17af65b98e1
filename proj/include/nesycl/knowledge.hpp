#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nesycl/tape.hpp"

namespace nesycl {

// Ordered categorical concept slots plus a (possibly multi-variable) label.
struct ConceptSchema {
    struct Slot {
        std::string name;
        int cardinality = 0;
    };
    std::vector<Slot> slots;
    std::vector<int> label_cardinalities;

    std::size_t num_slots() const { return slots.size(); }
    std::size_t num_configs() const;
    std::size_t num_labels() const;
    void unpack_config(std::size_t index, std::span<int> out) const;
    std::size_t pack_config(std::span<const int> c) const;
    void unpack_label(std::size_t index, std::span<int> out) const;
    std::size_t pack_label(std::span<const int> y) const;
};

// A constraint over (concept tuple, label tuple); the predicate must be pure
// and deterministic.
struct KnowledgeSpec {
    ConceptSchema schema;
    std::function<bool(std::span<const int> c, std::span<const int> y)> predicate;
    std::string name;
};

// Enumerated model table: per label the set of satisfying concept configs,
// plus model counts Z(c;K). Immutable after compile and safe to share.
struct CompiledKnowledge {
    ConceptSchema schema;
    std::string name;
    std::vector<std::vector<int>> satisfying;  // [label index] -> config indices
    std::vector<int> model_count;              // Z per config index
    std::vector<int> config_values;            // num_configs * k, unpacked tuples

    std::size_t num_configs() const { return model_count.size(); }
    std::size_t num_labels() const { return satisfying.size(); }
    std::size_t k() const { return schema.num_slots(); }
    const int* config(std::size_t index) const { return config_values.data() + index * k(); }
    // min Z over configs with Z > 0 (the bound constant zeta for this K)
    int min_positive_model_count() const;
};

inline constexpr std::size_t kDefaultEnumerationCap = 1000000;

// Exhaustive enumeration of the predicate over every (c, y) pair.
CompiledKnowledge compile(const KnowledgeSpec& spec, std::size_t enumeration_cap = kDefaultEnumerationCap);

// u_K(y | c) = 1[(c,y) |= K] / Z(c;K); 0 when Z(c;K) = 0.
double u_k(const CompiledKnowledge& ck, std::size_t label_index, std::size_t config_index);

// p(y) = sum_{c in satisfying(y)} u_K(y|c) * prod_j marginal_j(c_j), for all y.
// Marginal rows must each sum to 1 within 1e-9.
std::vector<double> label_distribution(const CompiledKnowledge& ck,
                                       std::span<const std::vector<double>> marginals);
void label_distribution_serial(const CompiledKnowledge& ck,
                               std::span<const std::vector<double>> marginals,
                               std::span<double> out);

// argmax_y of label_distribution; ties broken by lowest label index.
std::size_t map_label(const CompiledKnowledge& ck, std::span<const std::vector<double>> marginals);

// Probability that sampled concepts satisfy K[Y/y].
double satisfying_mass(const CompiledKnowledge& ck, std::span<const std::vector<double>> marginals,
                       std::size_t label_index);

// Differentiable reasoning layer: takes one marginal row Var per slot and
// emits the label distribution as a (1 x num_labels) row.
Var reasoning_layer(Tape& tape, const CompiledKnowledge& ck, std::span<const Var> slot_marginals);

// Built-in knowledge registry (names usable from CLI/config):
//   "mnist-add"                  two digits, Y = C1 + C2 over {0..18}
//   "clevr-samecolor-sameshape"  shape/color pairs with (Y1,Y2,Y3) classes
//   "xor"                        two binary concepts, Y = C1 xor C2
KnowledgeSpec knowledge_by_name(const std::string& name);
KnowledgeSpec addition_knowledge(int digits = 10);
KnowledgeSpec clevr_knowledge(int shapes = 10, int colors = 10);
KnowledgeSpec xor_toy();

}  // namespace nesycl
