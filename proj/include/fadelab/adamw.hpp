#pragma once

#include "fadelab/tape.hpp"

#include <map>
#include <string>

namespace fadelab {

// Adaptive-moment optimizer with decoupled weight decay. Moment estimates are
// bias-corrected; the decay term multiplies the parameter directly and never
// enters the moment state.
class AdamW {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    AdamW() = default;
    explicit AdamW(Config cfg) : cfg_(cfg) {}

    const Config& config() const noexcept { return cfg_; }
    long step_count() const noexcept { return step_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    // One update over every parameter in `params`. Gradients must be keyed
    // exactly like the parameter store.
    void step(ParamStore& params, const GradMap& grads);

private:
    struct Slot {
        Tensor2 m;
        Tensor2 v;
    };

    Config cfg_;
    std::map<std::string, Slot> slots_;
    long step_ = 0;
};

} // namespace fadelab
