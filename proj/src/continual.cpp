#include "nesycl/continual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nesycl {

const std::vector<std::string>& strategy_registry() {
    static const std::vector<std::string> names = {"naive", "restart", "offline", "lwf", "ewc",
                                                   "er",    "der",     "derpp",   "cool"};
    return names;
}

bool strategy_uses_buffer(const std::string& strategy) {
    return strategy == "er" || strategy == "der" || strategy == "derpp" || strategy == "cool";
}

void ReplayBuffer::reservoir_insert(BufferItem item, Rng& rng) {
    ++stream_count_;
    if (items_.size() < capacity_) {
        items_.push_back(std::move(item));
        return;
    }
    const std::uint64_t j = rng.uniform_index(static_cast<std::uint64_t>(stream_count_));
    if (j < capacity_) items_[j] = std::move(item);
}

std::vector<const BufferItem*> ReplayBuffer::sample_batch(std::size_t n, Rng& rng) const {
    std::vector<std::size_t> order(items_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<const BufferItem*> out;
    out.reserve(std::min(n, items_.size()));
    for (std::size_t i = 0; i < std::min(n, items_.size()); ++i) out.push_back(&items_[order[i]]);
    return out;
}

namespace {

// NLL of `label` under the predictor's label distribution, on the tape.
Var replay_nll(Tape& tape, Predictor& pred, const BufferItem& item,
               const KnowledgeResolver& resolver, Rng* model_rng) {
    if (auto* nesy = std::get_if<NesyPredictor>(&pred)) {
        const CompiledKnowledge* ck = resolver(item.task_id);
        auto marginals = nesy->model.marginals(tape, item.fragments, model_rng);
        Var dist = reasoning_layer(tape, *ck, marginals);
        return tape.nll(tape.pick(dist, item.label));
    }
    ForwardVars fv = predictor_forward(pred, tape, item.fragments, model_rng);
    return tape.nll(tape.pick(fv.label_dist, item.label));
}

Var live_label_scores(Tape& tape, Predictor& pred, const BufferItem& item,
                      const KnowledgeResolver& resolver, Rng* model_rng) {
    if (auto* nesy = std::get_if<NesyPredictor>(&pred)) {
        const CompiledKnowledge* ck = resolver(item.task_id);
        auto marginals = nesy->model.marginals(tape, item.fragments, model_rng);
        Var dist = reasoning_layer(tape, *ck, marginals);
        return tape.log_floored(dist);
    }
    auto* cbm = std::get_if<CbmPredictor>(&pred);
    auto marginals = cbm->model.marginals(tape, item.fragments, model_rng);
    return tape.bilinear(marginals[0], marginals[1], tape.leaf(&cbm->weights));
}

}  // namespace

std::vector<double> label_scores_eval(const Predictor& pred,
                                      const std::vector<std::vector<double>>& fragments) {
    if (const auto* nesy = std::get_if<NesyPredictor>(&pred)) {
        std::vector<double> dist = nesy->label_dist_eval(fragments);
        for (double& v : dist) v = floored_log(v);
        return dist;
    }
    const auto* cbm = std::get_if<CbmPredictor>(&pred);
    const auto z = cbm->model.marginals_eval(fragments);
    const std::size_t classes = cbm->weights.shape[0], d1 = cbm->weights.shape[1], d2 = cbm->weights.shape[2];
    std::vector<double> scores(classes, 0.0);
    for (std::size_t y = 0; y < classes; ++y) {
        const double* wy = cbm->weights.data.data() + y * d1 * d2;
        for (std::size_t a = 0; a < d1; ++a)
            for (std::size_t b = 0; b < d2; ++b) scores[y] += z[0][a] * wy[a * d2 + b] * z[1][b];
    }
    return scores;
}

Var cool_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
              const KnowledgeResolver& resolver, double alpha, double beta_replay, Rng* model_rng) {
    if (batch.empty()) return tape.scalar(0.0);
    Var acc = tape.scalar(0.0);
    for (const BufferItem* item : batch) {
        if (alpha != 0.0) {
            auto marginals = predictor_model(pred).marginals(tape, item->fragments, model_rng);
            Var kl = tape.scalar(0.0);
            for (std::size_t j = 0; j < marginals.size(); ++j)
                kl = tape.add(kl, tape.kl_to_const(marginals[j], item->stored_marginals[j]));
            acc = tape.add(acc, tape.scale(kl, alpha));
        }
        if (beta_replay != 0.0)
            acc = tape.add(acc, tape.scale(replay_nll(tape, pred, *item, resolver, model_rng), beta_replay));
    }
    return tape.scale(acc, 1.0 / static_cast<double>(batch.size()));
}

Var der_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
             const KnowledgeResolver& resolver, bool plus_plus, double alpha, double beta_replay,
             Rng* model_rng) {
    if (batch.empty()) return tape.scalar(0.0);
    Var acc = tape.scalar(0.0);
    for (const BufferItem* item : batch) {
        Var scores = live_label_scores(tape, pred, *item, resolver, model_rng);
        acc = tape.add(acc, tape.scale(tape.mse_to_const(scores, item->stored_label_scores), alpha));
        if (plus_plus && beta_replay != 0.0)
            acc = tape.add(acc, tape.scale(replay_nll(tape, pred, *item, resolver, model_rng), beta_replay));
    }
    return tape.scale(acc, 1.0 / static_cast<double>(batch.size()));
}

Var er_loss(Tape& tape, Predictor& pred, std::span<const BufferItem* const> batch,
            const KnowledgeResolver& resolver, double beta_replay, Rng* model_rng) {
    if (batch.empty() || beta_replay == 0.0) return tape.scalar(0.0);
    Var acc = tape.scalar(0.0);
    for (const BufferItem* item : batch)
        acc = tape.add(acc, replay_nll(tape, pred, *item, resolver, model_rng));
    return tape.scale(acc, beta_replay / static_cast<double>(batch.size()));
}

Var ewc_penalty(Tape& tape, Predictor& pred, const FisherDiag& fisher, double lambda) {
    if (!fisher.present || lambda == 0.0) return tape.scalar(0.0);
    std::vector<Tensor*> params = predictor_params(pred);
    if (params.size() != fisher.values.size())
        throw std::invalid_argument("ewc_penalty: fisher is not shape-congruent with the parameters");
    Var acc = tape.scalar(0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var p = tape.leaf(params[i]);
        Var d = tape.sub_const(p, fisher.reference[i]);
        Var weighted = tape.mul_const(tape.mul(d, d), fisher.values[i]);
        acc = tape.add(acc, tape.sum(weighted));
    }
    return tape.scale(acc, lambda);
}

namespace {

std::vector<double> soften(std::vector<double> dist, double temperature) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double& v : dist) {
        v = floored_log(v) / temperature;
        mx = std::max(mx, v);
    }
    double z = 0.0;
    for (double& v : dist) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : dist) v /= z;
    return dist;
}

}  // namespace

Var lwf_loss(Tape& tape, Predictor& live, const Predictor& past,
             std::span<const Example* const> batch, double lambda, double temperature, Rng* model_rng) {
    if (batch.empty() || lambda == 0.0) return tape.scalar(0.0);
    Var acc = tape.scalar(0.0);
    for (const Example* ex : batch) {
        const std::vector<double> target = soften(predictor_label_dist(past, ex->fragments), temperature);
        ForwardVars fv = predictor_forward(live, tape, ex->fragments, model_rng);
        Var soft_live = tape.softmax_rows(tape.scale(tape.log_floored(fv.label_dist), 1.0 / temperature));
        Var ce = tape.scale(tape.sum(tape.mul_const(tape.log_floored(soft_live), target)), -1.0);
        acc = tape.add(acc, ce);
    }
    return tape.scale(acc, lambda / static_cast<double>(batch.size()));
}

FisherDiag estimate_fisher(Predictor& pred, const Dataset& train, Rng* model_rng) {
    FisherDiag fisher;
    std::vector<Tensor*> params = predictor_params(pred);
    fisher.values.reserve(params.size());
    fisher.reference.reserve(params.size());
    for (Tensor* p : params) {
        fisher.values.emplace_back(p->size(), 0.0);
        fisher.reference.push_back(p->data);
    }
    for (const Example& ex : train) {
        for (Tensor* p : params) p->zero_grad();
        Tape tape;
        ForwardVars fv = predictor_forward(pred, tape, ex.fragments, model_rng);
        Var loss = tape.nll(tape.pick(fv.label_dist, ex.label));
        tape.backward(loss);
        for (std::size_t i = 0; i < params.size(); ++i)
            for (std::size_t v = 0; v < params[i]->size(); ++v)
                fisher.values[i][v] += params[i]->grad[v] * params[i]->grad[v];
    }
    const double inv = train.empty() ? 0.0 : 1.0 / static_cast<double>(train.size());
    for (auto& vals : fisher.values)
        for (double& v : vals) v *= inv;
    for (Tensor* p : params) p->zero_grad();
    fisher.present = true;
    return fisher;
}

RunRngs make_run_rngs(std::uint64_t seed) {
    return RunRngs{Rng(derive_seed(seed, "data")), Rng(derive_seed(seed, "buffer")),
                   Rng(derive_seed(seed, "model")), Rng(derive_seed(seed, "reinit"))};
}

void train_task(Predictor& pred, const Task& task, const CompiledKnowledge& knowledge,
                const StrategyConfig& strategy, const AdamConfig& adam_cfg,
                const KnowledgeResolver& resolver, TrainState& state, RunRngs& rngs) {
    (void)knowledge;
    const bool uses_buffer = strategy_uses_buffer(strategy.strategy);
    const bool model_noise = predictor_model(pred).config().dropout || predictor_model(pred).config().noise;
    Rng* model_rng = model_noise ? &rngs.model : nullptr;

    if (strategy.strategy == "restart") predictor_reinit(pred, rngs.reinit);

    Adam opt(predictor_params(pred), adam_cfg);
    const std::size_t replay_n = strategy.replay_batch_size > 0
                                     ? static_cast<std::size_t>(strategy.replay_batch_size)
                                     : static_cast<std::size_t>(strategy.batch_size);

    std::vector<std::size_t> order(task.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < strategy.epochs_per_task; ++epoch) {
        const bool final_epoch = epoch + 1 == strategy.epochs_per_task;
        rngs.data.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += strategy.batch_size) {
            const std::size_t stop = std::min(order.size(), start + strategy.batch_size);
            opt.zero_grad();
            Tape tape;

            Var nll_acc = tape.scalar(0.0);
            Var sup_acc = tape.scalar(0.0);
            int annotated = 0;
            std::vector<const Example*> batch_examples;
            for (std::size_t i = start; i < stop; ++i) {
                const Example& ex = task.train[order[i]];
                batch_examples.push_back(&ex);
                ForwardVars fv = predictor_forward(pred, tape, ex.fragments, model_rng);
                nll_acc = tape.add(nll_acc, tape.nll(tape.pick(fv.label_dist, ex.label)));
                if (ex.supervised && strategy.w_c != 0.0) {
                    ++annotated;
                    const std::vector<std::uint8_t> mask(ex.concepts.size(), 1);
                    sup_acc = tape.add(sup_acc,
                                       concept_supervision_loss(tape, fv.marginals, ex.concepts, mask));
                }
            }
            Var loss = tape.scale(nll_acc, 1.0 / static_cast<double>(stop - start));
            if (annotated > 0)
                loss = tape.add(loss,
                                tape.scale(sup_acc, strategy.w_c / static_cast<double>(annotated)));

            if (strategy.strategy == "lwf" && state.past)
                loss = tape.add(loss, lwf_loss(tape, pred, *state.past, batch_examples,
                                               strategy.lambda_lwf, strategy.lwf_temperature, model_rng));
            if (strategy.strategy == "ewc")
                loss = tape.add(loss, ewc_penalty(tape, pred, state.fisher, strategy.lambda_ewc));
            if (uses_buffer && !state.buffer.empty()) {
                const bool any_weight =
                    strategy.strategy == "cool" ? (strategy.alpha != 0.0 || strategy.beta_replay != 0.0)
                    : strategy.strategy == "er" ? strategy.beta_replay != 0.0
                                                : strategy.alpha != 0.0 || strategy.beta_replay != 0.0;
                if (any_weight) {
                    auto replay = state.buffer.sample_batch(replay_n, rngs.buffer);
                    if (strategy.strategy == "cool")
                        loss = tape.add(loss, cool_loss(tape, pred, replay, resolver, strategy.alpha,
                                                        strategy.beta_replay, model_rng));
                    else if (strategy.strategy == "er")
                        loss = tape.add(loss,
                                        er_loss(tape, pred, replay, resolver, strategy.beta_replay, model_rng));
                    else
                        loss = tape.add(loss, der_loss(tape, pred, replay, resolver,
                                                       strategy.strategy == "derpp", strategy.alpha,
                                                       strategy.beta_replay, model_rng));
                }
            }

            tape.backward(loss);
            opt.step();

            // Stream this batch into the reservoir during the final epoch so
            // stored marginals/scores come from the learned task model.
            if (uses_buffer && final_epoch) {
                for (std::size_t i = start; i < stop; ++i) {
                    const Example& ex = task.train[order[i]];
                    BufferItem item;
                    item.fragments = ex.fragments;
                    item.label = ex.label;
                    item.task_id = task.id;
                    item.stored_marginals = predictor_marginals(pred, ex.fragments);
                    item.stored_label_scores = label_scores_eval(pred, ex.fragments);
                    if (ex.supervised) {
                        item.has_annotation = true;
                        item.c_true = ex.concepts;
                        item.mask.assign(ex.concepts.size(), 1);
                    }
                    state.buffer.reservoir_insert(std::move(item), rngs.buffer);
                }
            }
        }
        opt.end_epoch();
    }

    state.past = snapshot(pred);
    if (strategy.strategy == "ewc") state.fisher = estimate_fisher(pred, task.train, model_rng);
}

}  // namespace nesycl
