#pragma once

#include <random>
#include <string>
#include <vector>

#include "acfseg/ops.hpp"

namespace acfseg {

// Owns every named parameter and persistent buffer of a model, in
// registration order. Checkpointing and the optimizer walk this list.
class ParamRegistry {
public:
    struct Entry {
        NodePtr node;
        bool weight_decay;  // conv weights only; norm affine and biases excluded
    };

    NodePtr add_param(const std::string& name, Tensor value, bool weight_decay);
    void add_buffer(const std::string& name, Tensor* buffer);

    const std::vector<Entry>& params() const { return params_; }
    const std::vector<std::pair<std::string, Tensor*>>& buffers() const { return buffers_; }

    NodePtr find(const std::string& name) const;
    void zero_grads();

private:
    std::vector<Entry> params_;
    std::vector<std::pair<std::string, Tensor*>> buffers_;
};

Tensor he_normal_init(const Shape& shape, int fan_in, std::mt19937_64& rng);

struct Conv2d {
    NodePtr weight, bias;
    int stride = 1, padding = 0, dilation = 1;

    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, int cin, int cout, int kernel, int stride,
           int padding, int dilation, std::mt19937_64& rng);
    NodePtr operator()(const NodePtr& x) const { return conv2d(x, weight, bias, stride, padding, dilation); }
};

struct BatchNorm2d {
    NodePtr gamma, beta;
    // heap-allocated so the registry's buffer pointers survive moves of the layer
    std::shared_ptr<BatchNormStats> stats;
    float momentum = 0.9f;
    float epsilon = 1e-5f;

    BatchNorm2d() = default;
    BatchNorm2d(ParamRegistry& reg, const std::string& name, int channels);
    NodePtr operator()(const NodePtr& x, bool train) {
        return batchnorm2d(x, gamma, beta, *stats, train, momentum, epsilon);
    }
};

// conv -> batchnorm -> relu, the building block used everywhere.
struct ConvBnRelu {
    Conv2d conv;
    BatchNorm2d bn;

    ConvBnRelu() = default;
    ConvBnRelu(ParamRegistry& reg, const std::string& name, int cin, int cout, int kernel,
               int stride, int padding, int dilation, std::mt19937_64& rng)
        : conv(reg, name + ".conv", cin, cout, kernel, stride, padding, dilation, rng),
          bn(reg, name + ".bn", cout) {}
    NodePtr operator()(const NodePtr& x, bool train) { return relu(bn(conv(x), train)); }
};

}  // namespace acfseg
