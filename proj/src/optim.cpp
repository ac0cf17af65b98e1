#include "nesycl/optim.hpp"

#include <cmath>

namespace nesycl {

Adam::Adam(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

double Adam::effective_lr() const {
    return config_.learning_rate * std::pow(config_.epoch_decay, epochs_elapsed_);
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

void Adam::step() {
    ++step_count_;
    const double lr = effective_lr();
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t t = 0; t < params_.size(); ++t) {
        Tensor* p = params_[t];
        if (!p->requires_grad) continue;
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            m_[t][i] = config_.beta1 * m_[t][i] + (1.0 - config_.beta1) * g;
            v_[t][i] = config_.beta2 * v_[t][i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m_[t][i] / bc1;
            const double vhat = v_[t][i] / bc2;
            p->data[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }
}

void Adam::begin_task() {
    epochs_elapsed_ = 0;
    step_count_ = 0;
    for (auto& m : m_) std::fill(m.begin(), m.end(), 0.0);
    for (auto& v : v_) std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace nesycl
