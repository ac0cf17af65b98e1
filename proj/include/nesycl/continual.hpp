#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nesycl/benchmarks.hpp"
#include "nesycl/models.hpp"
#include "nesycl/optim.hpp"
#include "nesycl/rng.hpp"

namespace nesycl {

// Exact strings used in config files and CSV output.
const std::vector<std::string>& strategy_registry();
bool strategy_uses_buffer(const std::string& strategy);

struct StrategyConfig {
    std::string strategy = "naive";
    double alpha = 1.0;           // concept-rehearsal (cool) / distillation (der, derpp) weight
    double beta_replay = 1.0;     // label-replay weight (cool, derpp, er)
    double lambda_ewc = 1.0;
    double lambda_lwf = 1.0;
    double lwf_temperature = 2.0;
    double w_c = 1.0;             // concept-supervision weight
    std::size_t buffer_capacity = 200;
    int epochs_per_task = 20;
    int batch_size = 32;
    int replay_batch_size = 0;    // 0 -> batch_size
};

struct BufferItem {
    std::vector<std::vector<double>> fragments;
    std::size_t label = 0;
    int task_id = 0;
    std::vector<std::vector<double>> stored_marginals;  // q~_c, frozen at insertion
    std::vector<double> stored_label_scores;            // log-probs (nesy) / bilinear scores (cbm)
    bool has_annotation = false;
    std::vector<int> c_true;
    std::vector<std::uint8_t> mask;
};

// Vitter's algorithm R over the stream of offered items.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void reservoir_insert(BufferItem item, Rng& rng);
    std::vector<const BufferItem*> sample_batch(std::size_t n, Rng& rng) const;

    const std::vector<BufferItem>& items() const { return items_; }
    std::size_t capacity() const { return capacity_; }
    long stream_count() const { return stream_count_; }
    bool empty() const { return items_.empty(); }

  private:
    std::size_t capacity_;
    std::vector<BufferItem> items_;
    long stream_count_ = 0;
};

struct FisherDiag {
    bool present = false;
    std::vector<std::vector<double>> values;     // >= 0, shape-congruent with params
    std::vector<std::vector<double>> reference;  // theta* at estimation time
};

using KnowledgeResolver = std::function<const CompiledKnowledge*(int task_id)>;

// L_cool over a replay mini-batch: alpha * per-slot KL(live || stored),
// summed over slots, plus beta * replayed NLL under the item's origin-task
// knowledge; both averaged over the batch. Empty batch -> 0.
Var cool_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
              const KnowledgeResolver& resolver, double alpha, double beta_replay, Rng* model_rng);

// DER: alpha * MSE between live and stored label scores; DER++ additionally
// replays the true label with weight beta. Empty batch -> 0.
Var der_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
             const KnowledgeResolver& resolver, bool plus_plus, double alpha, double beta_replay,
             Rng* model_rng);

// Plain experience replay: beta * NLL of the stored labels.
Var er_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
            const KnowledgeResolver& resolver, double beta_replay, Rng* model_rng);

// lambda * sum_i F_i (theta_i - theta*_i)^2; 0 when no fisher yet (task 1).
Var ewc_penalty(Tape& tape, Predictor& pred, const FisherDiag& fisher, double lambda);

// Temperature-scaled distillation from the past snapshot on current-task
// inputs; 0 on task 1.
Var lwf_loss(Tape& tape, Predictor& live, const Predictor& past,
             std::span<const Example* const> batch, double lambda, double temperature, Rng* model_rng);

// Empirical Fisher: squared NLL gradients averaged over the task train set.
FisherDiag estimate_fisher(Predictor& pred, const Dataset& train, Rng* model_rng);

// Label scores used as DER distillation targets: label log-probabilities for
// the NeSy predictor, bilinear pre-softmax scores for the CBM.
std::vector<double> label_scores_eval(const Predictor& pred,
                                      const std::vector<std::vector<double>>& fragments);

// Mutable cross-task state owned by one run.
struct TrainState {
    ReplayBuffer buffer{200};
    std::optional<Predictor> past;  // theta^(t-1), immutable snapshot
    FisherDiag fisher;
};

struct RunRngs {
    Rng data;    // shuffling / batch order
    Rng buffer;  // reservoir + replay draws
    Rng model;   // dropout / noise injection
    Rng reinit;  // restart re-initialization
};

RunRngs make_run_rngs(std::uint64_t seed);

// One task of the continual loop: per minibatch the total loss is the
// current-task NLL (+ weighted concept supervision on annotated examples)
// plus the strategy terms; the buffer is fed during the final epoch so the
// stored q~_c reflect the learned task model; at task end a snapshot is
// taken and, for ewc, the Fisher diagonal is estimated.
void train_task(Predictor& pred, const Task& task, const CompiledKnowledge& knowledge,
                const StrategyConfig& strategy, const AdamConfig& adam,
                const KnowledgeResolver& resolver, TrainState& state, RunRngs& rngs);

}  // namespace nesycl
