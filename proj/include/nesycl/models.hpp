#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nesycl/knowledge.hpp"
#include "nesycl/rng.hpp"
#include "nesycl/tape.hpp"
#include "nesycl/tensor.hpp"

namespace nesycl {

struct MlpConfig {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 0;
    bool zero_final = false;  // uniform starting marginals when set
};

class Mlp {
  public:
    Mlp() = default;
    Mlp(MlpConfig config, Rng& rng);

    Var forward(Tape& tape, Var x, Rng* dropout_rng = nullptr, double dropout_p = 0.5);
    std::vector<double> forward_eval(std::span<const double> x) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    void reinit(Rng& rng);
    const MlpConfig& config() const { return config_; }

  private:
    MlpConfig config_;
    std::vector<Tensor> weights_;  // (in x out)
    std::vector<Tensor> biases_;   // (1 x out)
};

// Which input fragment a slot reads and which encoder network produces its
// logits. Slots with identical semantics share an encoder index.
struct SlotBinding {
    int fragment = 0;
    int encoder = 0;
};

struct ConceptModelConfig {
    ConceptSchema schema;
    std::vector<int> fragment_dims;       // input dim per fragment
    std::vector<SlotBinding> bindings;    // one per slot
    std::vector<int> hidden = {64};
    bool zero_final = false;
    bool dropout = false;                 // opt-in, default off
    double dropout_p = 0.5;
    bool noise = false;                   // opt-in post-encoder gaussian noise
    double noise_std = 0.1;
};

// Per-slot factorized concept extractor: p(C|x) = prod_j p(C_j | x_{f(j)}).
class ConceptModel {
  public:
    ConceptModel() = default;
    ConceptModel(ConceptModelConfig config, Rng& rng);

    // Differentiable per-slot marginals (each a 1 x cardinality row).
    std::vector<Var> marginals(Tape& tape, const std::vector<std::vector<double>>& fragments, Rng* rng);
    // Evaluation path without a tape; dropout/noise disabled.
    std::vector<std::vector<double>> marginals_eval(const std::vector<std::vector<double>>& fragments) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    void reinit(Rng& rng);
    const ConceptModelConfig& config() const { return config_; }

  private:
    ConceptModelConfig config_;
    std::vector<Mlp> encoders_;
};

// Mean over masked slots of -log marginal_j(c_true_j); empty mask -> 0.
Var concept_supervision_loss(Tape& tape, std::span<const Var> marginals,
                             std::span<const int> c_true, std::span<const std::uint8_t> mask);

// DeepProbLog-style predictor: encoders + exact reasoning layer.
struct NesyPredictor {
    ConceptModel model;
    const CompiledKnowledge* knowledge = nullptr;

    std::vector<double> label_dist_eval(const std::vector<std::vector<double>>& fragments) const;
    Var label_dist(Tape& tape, std::span<const Var> marginals) const;
};

// Concept-bottleneck baseline: encoders + learnable bilinear head
// softmax(z1^T W^y z2); no consistency guarantee with the knowledge.
struct CbmPredictor {
    ConceptModel model;
    const CompiledKnowledge* knowledge = nullptr;  // label space reference only
    Tensor weights;                                // (classes, d1, d2)

    std::vector<double> label_dist_eval(const std::vector<std::vector<double>>& fragments) const;
    Var label_dist(Tape& tape, std::span<const Var> marginals);
};

CbmPredictor make_cbm(ConceptModel model, const CompiledKnowledge* knowledge);

using Predictor = std::variant<NesyPredictor, CbmPredictor>;

std::vector<Tensor*> predictor_params(Predictor& p);
ConceptModel& predictor_model(Predictor& p);
const ConceptModel& predictor_model(const Predictor& p);
const CompiledKnowledge* predictor_knowledge(const Predictor& p);
std::size_t predictor_num_labels(const Predictor& p);
std::vector<std::vector<double>> predictor_marginals(const Predictor& p,
                                                     const std::vector<std::vector<double>>& fragments);
std::vector<double> predictor_label_dist(const Predictor& p,
                                         const std::vector<std::vector<double>>& fragments);
// Builds marginals + label distribution on the tape; outputs both.
struct ForwardVars {
    std::vector<Var> marginals;
    Var label_dist;
};
ForwardVars predictor_forward(Predictor& p, Tape& tape,
                              const std::vector<std::vector<double>>& fragments, Rng* rng);
// Deep frozen copy; later training never mutates the snapshot.
Predictor snapshot(const Predictor& p);
void predictor_reinit(Predictor& p, Rng& rng);

// Flat binary checkpoint: "NSCL" magic, version, schema hash, then parameter
// tensors in declaration order as 64-bit little-endian reals.
std::uint64_t predictor_schema_hash(const Predictor& p);
void save_checkpoint(const std::string& path, const Predictor& p);
void load_checkpoint(const std::string& path, Predictor& p);

}  // namespace nesycl
