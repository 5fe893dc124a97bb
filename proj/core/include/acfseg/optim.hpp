#pragma once

#include <vector>

#include "acfseg/layers.hpp"

namespace acfseg {

struct OptimConfig {
    float lr0 = 0.01f;
    float momentum = 0.9f;
    float weight_decay = 0.0005f;
    int max_iter = 1000;
    float poly_power = 0.9f;
};

// lr(iter) = lr0 * (1 - iter/max_iter)^power
float poly_lr(int iter, const OptimConfig& config);

// SGD with momentum and decoupled per-parameter weight-decay flag:
//   buf <- momentum * buf + grad + weight_decay * param   (decay only where flagged)
//   param <- param - lr * buf
class SgdOptimizer {
public:
    SgdOptimizer(ParamRegistry& registry, OptimConfig config);

    void step(float lr);
    const OptimConfig& config() const { return config_; }

    // Momentum buffers, exposed for checkpointing under the "optim/" prefix.
    std::vector<std::pair<std::string, Tensor*>> named_buffers();

private:
    ParamRegistry& registry_;
    OptimConfig config_;
    std::vector<Tensor> momentum_;
};

}  // namespace acfseg
