#include "fadelab/adamw.hpp"

#include <cmath>

namespace fadelab {

void AdamW::step(ParamStore& params, const GradMap& grads) {
    require(cfg_.lr >= 0.0, ErrorKind::contract, "adamw: learning rate must be non-negative");
    require(grads.size() == params.size(), ErrorKind::contract,
            "adamw: gradient map has " + std::to_string(grads.size()) + " entries for " +
                std::to_string(params.size()) + " parameters");

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (auto& p : params.items()) {
        auto git = grads.find(p.name);
        require(git != grads.end(), ErrorKind::contract, "adamw: no gradient for parameter '" + p.name + "'");
        const Tensor2& g = git->second;
        require_same_shape(p.value, g, "adamw");

        auto [sit, inserted] = slots_.try_emplace(p.name);
        if (inserted) {
            sit->second.m = Tensor2(g.rows(), g.cols());
            sit->second.v = Tensor2(g.rows(), g.cols());
        }
        Tensor2& m = sit->second.m;
        Tensor2& v = sit->second.v;

        for (std::size_t i = 0; i < g.size(); ++i) {
            const double gi = g.raw()[i];
            m.raw()[i] = cfg_.beta1 * m.raw()[i] + (1.0 - cfg_.beta1) * gi;
            v.raw()[i] = cfg_.beta2 * v.raw()[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m.raw()[i] / bc1;
            const double vhat = v.raw()[i] / bc2;
            double& w = p.value.raw()[i];
            w *= 1.0 - cfg_.lr * cfg_.weight_decay;
            w -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

} // namespace fadelab
