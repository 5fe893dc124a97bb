#include "acfseg/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace acfseg {

NodePtr ParamRegistry::add_param(const std::string& name, Tensor value, bool weight_decay) {
    for (const auto& e : params_)
        if (e.node->name == name) throw std::invalid_argument("duplicate parameter name " + name);
    auto node = parameter(std::move(value), name);
    params_.push_back({node, weight_decay});
    return node;
}

void ParamRegistry::add_buffer(const std::string& name, Tensor* buffer) {
    buffers_.emplace_back(name, buffer);
}

NodePtr ParamRegistry::find(const std::string& name) const {
    for (const auto& e : params_)
        if (e.node->name == name) return e.node;
    return nullptr;
}

void ParamRegistry::zero_grads() {
    for (auto& e : params_) e.node->zero_grad();
}

Tensor he_normal_init(const Shape& shape, int fan_in, std::mt19937_64& rng) {
    Tensor t(shape);
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / float(fan_in)));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, int cin, int cout, int kernel,
               int stride_, int padding_, int dilation_, std::mt19937_64& rng)
    : stride(stride_), padding(padding_), dilation(dilation_) {
    weight = reg.add_param(name + ".weight",
                           he_normal_init({cout, cin, kernel, kernel}, cin * kernel * kernel, rng),
                           /*weight_decay=*/true);
    bias = reg.add_param(name + ".bias", Tensor({cout}), /*weight_decay=*/false);
}

BatchNorm2d::BatchNorm2d(ParamRegistry& reg, const std::string& name, int channels) {
    gamma = reg.add_param(name + ".gamma", Tensor({channels}, 1.0f), /*weight_decay=*/false);
    beta = reg.add_param(name + ".beta", Tensor({channels}), /*weight_decay=*/false);
    stats = std::make_shared<BatchNormStats>();
    stats->running_mean = Tensor({channels});
    stats->running_var = Tensor({channels}, 1.0f);
    reg.add_buffer(name + ".running_mean", &stats->running_mean);
    reg.add_buffer(name + ".running_var", &stats->running_var);
}

}  // namespace acfseg
