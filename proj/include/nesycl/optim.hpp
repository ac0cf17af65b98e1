#pragma once

#include <vector>

#include "nesycl/tensor.hpp"

namespace nesycl {

struct AdamConfig {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Per-epoch exponential decay; the effective rate is restored to the
    // base at every task boundary.
    double epoch_decay = 0.95;
};

// Adam with bias correction. Owns first/second-moment accumulators
// shape-congruent with the registered parameters.
class Adam {
  public:
    Adam(std::vector<Tensor*> params, AdamConfig config);

    // effective lr = base * decay^(epochs elapsed in the current task)
    double effective_lr() const;

    void zero_grad();
    void step();

    // Call after each completed epoch.
    void end_epoch() { ++epochs_elapsed_; }
    // Restores the base learning rate and clears moment state.
    void begin_task();

    int epochs_elapsed() const { return epochs_elapsed_; }
    long step_count() const { return step_count_; }

  private:
    std::vector<Tensor*> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long step_count_ = 0;
    int epochs_elapsed_ = 0;
};

}  // namespace nesycl
