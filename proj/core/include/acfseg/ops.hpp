#pragma once

#include "acfseg/graph.hpp"

namespace acfseg {

// Elementwise / reduction
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, float s);
NodePtr sum_all(const NodePtr& a);  // -> scalar node of shape {1}
NodePtr relu(const NodePtr& a);
NodePtr softmax(const NodePtr& a, int axis);

// Linear algebra / shape
NodePtr matmul(const NodePtr& a, const NodePtr& b);  // MxK * KxN
NodePtr transpose(const NodePtr& a, const std::vector<int>& axes);
NodePtr reshape(const NodePtr& a, const Shape& shape);
NodePtr concat(const std::vector<NodePtr>& parts, int axis);

// Spatial ops on B x C x H x W
NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias, int stride,
               int padding, int dilation);
NodePtr upsample_bilinear(const NodePtr& input, int out_h, int out_w, bool align_corners = true);
NodePtr avg_pool2d(const NodePtr& input, int kernel, int stride);
NodePtr global_avg_pool(const NodePtr& input);

struct BatchNormStats {
    Tensor running_mean;  // shape {C}
    Tensor running_var;   // shape {C}
};

// Train mode normalizes with batch statistics and updates `stats` in place
// (running = momentum * running + (1 - momentum) * batch). Eval mode uses
// the running statistics.
NodePtr batchnorm2d(const NodePtr& input, const NodePtr& gamma, const NodePtr& beta,
                    BatchNormStats& stats, bool train, float momentum = 0.9f,
                    float epsilon = 1e-5f);

// Forward-only tensor utilities shared with augmentation / inference.
Tensor bilinear_resize_chw(const Tensor& chw, int out_h, int out_w);  // align-corners
Tensor softmax_tensor(const Tensor& t, int axis);

}  // namespace acfseg
