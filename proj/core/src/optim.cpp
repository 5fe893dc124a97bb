#include "acfseg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace acfseg {

float poly_lr(int iter, const OptimConfig& config) {
    if (iter < 0 || iter > config.max_iter)
        throw std::invalid_argument("poly_lr: iter out of [0, max_iter]");
    const float frac = 1.0f - float(iter) / float(config.max_iter);
    return config.lr0 * std::pow(frac, config.poly_power);
}

SgdOptimizer::SgdOptimizer(ParamRegistry& registry, OptimConfig config)
    : registry_(registry), config_(config) {
    momentum_.reserve(registry_.params().size());
    for (const auto& e : registry_.params()) momentum_.emplace_back(e.node->value.shape);
}

void SgdOptimizer::step(float lr) {
    const auto& params = registry_.params();
    for (size_t i = 0; i < params.size(); ++i) {
        Node& p = *params[i].node;
        if (!p.has_grad()) continue;  // parameter unused this step
        Tensor& buf = momentum_[i];
        const float wd = params[i].weight_decay ? config_.weight_decay : 0.0f;
        for (int64_t j = 0; j < p.value.size(); ++j) {
            buf[j] = config_.momentum * buf[j] + p.grad[j] + wd * p.value[j];
            p.value[j] -= lr * buf[j];
        }
    }
}

std::vector<std::pair<std::string, Tensor*>> SgdOptimizer::named_buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    const auto& params = registry_.params();
    for (size_t i = 0; i < params.size(); ++i)
        out.emplace_back("optim/" + params[i].node->name, &momentum_[i]);
    return out;
}

}  // namespace acfseg
