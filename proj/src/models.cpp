#include "nesycl/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "nesycl/kernels.hpp"

namespace nesycl {

Mlp::Mlp(MlpConfig config, Rng& rng) : config_(std::move(config)) {
    std::vector<int> dims;
    dims.push_back(config_.input_dim);
    for (int h : config_.hidden) dims.push_back(h);
    dims.push_back(config_.output_dim);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Tensor w = Tensor::zeros({static_cast<std::size_t>(dims[l]), static_cast<std::size_t>(dims[l + 1])});
        Tensor b = Tensor::zeros({1, static_cast<std::size_t>(dims[l + 1])});
        w.set_requires_grad(true);
        b.set_requires_grad(true);
        weights_.push_back(std::move(w));
        biases_.push_back(std::move(b));
    }
    reinit(rng);
}

void Mlp::reinit(Rng& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Tensor& w = weights_[l];
        const bool zero = config_.zero_final && l + 1 == weights_.size();
        const double fan_in = static_cast<double>(w.rows());
        const double fan_out = static_cast<double>(w.cols());
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : w.data) v = zero ? 0.0 : rng.uniform(-a, a);
        for (double& v : biases_[l].data) v = 0.0;
        w.zero_grad();
        biases_[l].zero_grad();
    }
}

Var Mlp::forward(Tape& tape, Var x, Rng* dropout_rng, double dropout_p) {
    Var h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Var w = tape.leaf(&weights_[l]);
        Var b = tape.leaf(&biases_[l]);
        h = tape.add_rowvec(tape.matmul(h, w), b);
        if (l + 1 < weights_.size()) {
            h = tape.relu(h);
            if (dropout_rng) {
                std::vector<double> mask(tape.value(h).size());
                const double keep = 1.0 - dropout_p;
                for (double& m : mask) m = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                h = tape.mul_const(h, mask);
            }
        }
    }
    return h;
}

std::vector<double> Mlp::forward_eval(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const Tensor& w = weights_[l];
        std::vector<double> next(w.cols(), 0.0);
        kernels::matmul_serial(cur.data(), w.data.data(), next.data(), 1, w.rows(), w.cols(), false);
        for (std::size_t j = 0; j < next.size(); ++j) next[j] += biases_[l].data[j];
        if (l + 1 < weights_.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur = std::move(next);
    }
    return cur;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

ConceptModel::ConceptModel(ConceptModelConfig config, Rng& rng) : config_(std::move(config)) {
    if (config_.bindings.size() != config_.schema.num_slots())
        throw std::invalid_argument("concept model: one binding per slot required");
    int encoders = 0;
    for (const SlotBinding& b : config_.bindings) encoders = std::max(encoders, b.encoder + 1);
    encoders_.resize(encoders);
    std::vector<bool> built(encoders, false);
    for (std::size_t j = 0; j < config_.bindings.size(); ++j) {
        const SlotBinding& b = config_.bindings[j];
        const int in_dim = config_.fragment_dims.at(b.fragment);
        const int card = config_.schema.slots[j].cardinality;
        if (!built[b.encoder]) {
            MlpConfig mc;
            mc.input_dim = in_dim;
            mc.hidden = config_.hidden;
            mc.output_dim = card;
            mc.zero_final = config_.zero_final;
            encoders_[b.encoder] = Mlp(mc, rng);
            built[b.encoder] = true;
        } else {
            const MlpConfig& mc = encoders_[b.encoder].config();
            if (mc.input_dim != in_dim || mc.output_dim != card)
                throw std::invalid_argument("concept model: shared encoder shape conflict");
        }
    }
}

std::vector<Var> ConceptModel::marginals(Tape& tape, const std::vector<std::vector<double>>& fragments, Rng* rng) {
    std::vector<Var> out;
    out.reserve(config_.bindings.size());
    for (std::size_t j = 0; j < config_.bindings.size(); ++j) {
        const SlotBinding& b = config_.bindings[j];
        const std::vector<double>& frag = fragments.at(b.fragment);
        if (frag.size() != static_cast<std::size_t>(config_.fragment_dims[b.fragment]))
            throw std::invalid_argument("concept model: fragment dimension mismatch");
        Var x = tape.constant_row(frag);
        Rng* dropout = config_.dropout ? rng : nullptr;
        Var logits = encoders_[b.encoder].forward(tape, x, dropout, config_.dropout_p);
        if (config_.noise && rng) {
            std::vector<double> eps(tape.value(logits).size());
            for (double& e : eps) e = rng->gaussian(0.0, config_.noise_std);
            logits = tape.add(logits, tape.constant_row(eps));
        }
        out.push_back(tape.softmax_rows(logits));
    }
    return out;
}

std::vector<std::vector<double>> ConceptModel::marginals_eval(
    const std::vector<std::vector<double>>& fragments) const {
    std::vector<std::vector<double>> out;
    out.reserve(config_.bindings.size());
    for (std::size_t j = 0; j < config_.bindings.size(); ++j) {
        const SlotBinding& b = config_.bindings[j];
        if (fragments.at(b.fragment).size() != static_cast<std::size_t>(config_.fragment_dims[b.fragment]))
            throw std::invalid_argument("concept model: fragment dimension mismatch");
        std::vector<double> logits = encoders_[b.encoder].forward_eval(fragments.at(b.fragment));
        std::vector<double> probs(logits.size());
        kernels::softmax_rows_serial(logits.data(), probs.data(), 1, logits.size());
        out.push_back(std::move(probs));
    }
    return out;
}

std::vector<Tensor*> ConceptModel::params() {
    std::vector<Tensor*> out;
    for (Mlp& e : encoders_)
        for (Tensor* t : e.params()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> ConceptModel::params() const {
    std::vector<const Tensor*> out;
    for (const Mlp& e : encoders_)
        for (const Tensor* t : e.params()) out.push_back(t);
    return out;
}

void ConceptModel::reinit(Rng& rng) {
    for (Mlp& e : encoders_) e.reinit(rng);
}

Var concept_supervision_loss(Tape& tape, std::span<const Var> marginals,
                             std::span<const int> c_true, std::span<const std::uint8_t> mask) {
    Var acc = tape.scalar(0.0);
    int annotated = 0;
    for (std::size_t j = 0; j < marginals.size(); ++j) {
        if (!mask[j]) continue;
        ++annotated;
        acc = tape.add(acc, tape.nll(tape.pick(marginals[j], static_cast<std::size_t>(c_true[j]))));
    }
    if (annotated == 0) return tape.scalar(0.0);  // vacuous mean
    return tape.scale(acc, 1.0 / static_cast<double>(annotated));
}

std::vector<double> NesyPredictor::label_dist_eval(const std::vector<std::vector<double>>& fragments) const {
    return label_distribution(*knowledge, model.marginals_eval(fragments));
}

Var NesyPredictor::label_dist(Tape& tape, std::span<const Var> marginals) const {
    return reasoning_layer(tape, *knowledge, marginals);
}

std::vector<double> CbmPredictor::label_dist_eval(const std::vector<std::vector<double>>& fragments) const {
    const auto z = model.marginals_eval(fragments);
    const std::size_t classes = weights.shape[0], d1 = weights.shape[1], d2 = weights.shape[2];
    std::vector<double> scores(classes, 0.0);
    for (std::size_t y = 0; y < classes; ++y) {
        const double* wy = weights.data.data() + y * d1 * d2;
        double acc = 0.0;
        for (std::size_t a = 0; a < d1; ++a)
            for (std::size_t b = 0; b < d2; ++b) acc += z[0][a] * wy[a * d2 + b] * z[1][b];
        scores[y] = acc;
    }
    std::vector<double> probs(classes);
    kernels::softmax_rows_serial(scores.data(), probs.data(), 1, classes);
    return probs;
}

Var CbmPredictor::label_dist(Tape& tape, std::span<const Var> marginals) {
    Var scores = tape.bilinear(marginals[0], marginals[1], tape.leaf(&weights));
    return tape.softmax_rows(scores);
}

CbmPredictor make_cbm(ConceptModel model, const CompiledKnowledge* knowledge) {
    if (model.config().schema.num_slots() != 2)
        throw std::invalid_argument("cbm: bilinear head requires exactly two concept slots");
    CbmPredictor p;
    const std::size_t d1 = static_cast<std::size_t>(model.config().schema.slots[0].cardinality);
    const std::size_t d2 = static_cast<std::size_t>(model.config().schema.slots[1].cardinality);
    p.weights = Tensor::zeros({knowledge->num_labels(), d1, d2});
    p.weights.set_requires_grad(true);
    p.model = std::move(model);
    p.knowledge = knowledge;
    return p;
}

std::vector<Tensor*> predictor_params(Predictor& p) {
    if (auto* nesy = std::get_if<NesyPredictor>(&p)) return nesy->model.params();
    auto* cbm = std::get_if<CbmPredictor>(&p);
    std::vector<Tensor*> out = cbm->model.params();
    out.push_back(&cbm->weights);
    return out;
}

ConceptModel& predictor_model(Predictor& p) {
    if (auto* nesy = std::get_if<NesyPredictor>(&p)) return nesy->model;
    return std::get_if<CbmPredictor>(&p)->model;
}

const ConceptModel& predictor_model(const Predictor& p) {
    if (const auto* nesy = std::get_if<NesyPredictor>(&p)) return nesy->model;
    return std::get_if<CbmPredictor>(&p)->model;
}

const CompiledKnowledge* predictor_knowledge(const Predictor& p) {
    if (const auto* nesy = std::get_if<NesyPredictor>(&p)) return nesy->knowledge;
    return std::get_if<CbmPredictor>(&p)->knowledge;
}

std::size_t predictor_num_labels(const Predictor& p) {
    if (const auto* cbm = std::get_if<CbmPredictor>(&p)) return cbm->weights.shape[0];
    return predictor_knowledge(p)->num_labels();
}

std::vector<std::vector<double>> predictor_marginals(const Predictor& p,
                                                     const std::vector<std::vector<double>>& fragments) {
    return predictor_model(p).marginals_eval(fragments);
}

std::vector<double> predictor_label_dist(const Predictor& p,
                                         const std::vector<std::vector<double>>& fragments) {
    if (const auto* nesy = std::get_if<NesyPredictor>(&p)) return nesy->label_dist_eval(fragments);
    return std::get_if<CbmPredictor>(&p)->label_dist_eval(fragments);
}

ForwardVars predictor_forward(Predictor& p, Tape& tape,
                              const std::vector<std::vector<double>>& fragments, Rng* rng) {
    ForwardVars out;
    out.marginals = predictor_model(p).marginals(tape, fragments, rng);
    if (auto* nesy = std::get_if<NesyPredictor>(&p))
        out.label_dist = nesy->label_dist(tape, out.marginals);
    else
        out.label_dist = std::get_if<CbmPredictor>(&p)->label_dist(tape, out.marginals);
    return out;
}

Predictor snapshot(const Predictor& p) { return p; }

void predictor_reinit(Predictor& p, Rng& rng) {
    predictor_model(p).reinit(rng);
    if (auto* cbm = std::get_if<CbmPredictor>(&p)) {
        for (double& v : cbm->weights.data) v = 0.0;
        cbm->weights.zero_grad();
    }
}

namespace {

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace

std::uint64_t predictor_schema_hash(const Predictor& p) {
    const ConceptModelConfig& cfg = predictor_model(p).config();
    std::uint64_t h = 0x4E53434Cull;  // "NSCL"
    h = hash_mix(h, std::holds_alternative<CbmPredictor>(p) ? 2 : 1);
    for (const auto& slot : cfg.schema.slots) {
        for (char c : slot.name) h = hash_mix(h, static_cast<std::uint64_t>(c));
        h = hash_mix(h, static_cast<std::uint64_t>(slot.cardinality));
    }
    for (int c : cfg.schema.label_cardinalities) h = hash_mix(h, static_cast<std::uint64_t>(c));
    for (int d : cfg.fragment_dims) h = hash_mix(h, static_cast<std::uint64_t>(d));
    for (const SlotBinding& b : cfg.bindings) {
        h = hash_mix(h, static_cast<std::uint64_t>(b.fragment));
        h = hash_mix(h, static_cast<std::uint64_t>(b.encoder));
    }
    for (int w : cfg.hidden) h = hash_mix(h, static_cast<std::uint64_t>(w));
    return h;
}

void save_checkpoint(const std::string& path, const Predictor& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const char magic[4] = {'N', 'S', 'C', 'L'};
    out.write(magic, 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    const std::uint64_t schema = predictor_schema_hash(p);
    out.write(reinterpret_cast<const char*>(&schema), sizeof schema);
    std::vector<const Tensor*> params;
    {
        Predictor& mut = const_cast<Predictor&>(p);
        for (Tensor* t : predictor_params(mut)) params.push_back(t);
    }
    const std::uint64_t count = params.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const Tensor* t : params) {
        const std::uint64_t n = t->size();
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(reinterpret_cast<const char*>(t->data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path, Predictor& p) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NSCL", 4) != 0)
        throw std::runtime_error("checkpoint has bad magic: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    std::uint64_t schema = 0;
    in.read(reinterpret_cast<char*>(&schema), sizeof schema);
    if (schema != predictor_schema_hash(p))
        throw std::runtime_error("checkpoint schema hash mismatch: " + path);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    std::vector<Tensor*> params = predictor_params(p);
    if (count != params.size()) throw std::runtime_error("checkpoint tensor count mismatch");
    for (Tensor* t : params) {
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof n);
        if (n != t->size()) throw std::runtime_error("checkpoint tensor size mismatch");
        in.read(reinterpret_cast<char*>(t->data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
}

}  // namespace nesycl
