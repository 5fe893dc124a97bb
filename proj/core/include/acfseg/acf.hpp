#pragma once

#include "acfseg/layers.hpp"

namespace acfseg {

// Probability-weighted class centers. `feature` is B x C' x H x W, `probs`
// is B x N x H x W with each pixel's class distribution summing to 1.
// Row i of the result is sum_j probs[i,j] * feature[:,j] / (sum_j probs[i,j] + eps),
// so a class with zero total probability yields a zero center.
NodePtr class_center(const NodePtr& feature, const NodePtr& probs, float eps = 1e-6f);

// Per-pixel weighted sum of class centers, weights = that pixel's class
// probabilities. centers: B x N x C', probs: B x N x H x W -> B x C' x H x W.
NodePtr class_attention_sum(const NodePtr& centers, const NodePtr& probs);

// Weighted concatenation of class centers, class-major channel order:
// channels [i*C', (i+1)*C') hold probs[i,j] * centers[i]. -> B x (N*C') x H x W.
NodePtr class_attention_concat(const NodePtr& centers, const NodePtr& probs);

// Tiles each image's N x C' center matrix across all pixels (class-major),
// used by the center-only ablation. -> B x (N*C') x H x W.
NodePtr broadcast_centers(const NodePtr& centers, int h, int w);

enum class AcfVariant { Sum, Concat, CenterOnly, None };

AcfVariant acf_variant_from_string(const std::string& s);
std::string to_string(AcfVariant v);

// Attentional class feature module: channel reduction, class center block,
// class attention block and fusion with the reduced base feature.
class AcfModule {
public:
    AcfModule() = default;
    AcfModule(ParamRegistry& reg, const std::string& name, int in_channels, int reduced_channels,
              int num_classes, AcfVariant variant, std::mt19937_64& rng);

    // probs must share spatial dims with feature. Returns the fused feature
    // (out_channels == reduced_channels) feeding the fine classifier.
    NodePtr forward(const NodePtr& feature, const NodePtr& probs, bool train);

    AcfVariant variant() const { return variant_; }
    int reduced_channels() const { return reduced_; }

private:
    AcfVariant variant_ = AcfVariant::Sum;
    int reduced_ = 0;
    int num_classes_ = 0;
    ConvBnRelu reduce_;
    ConvBnRelu refine_;  // sum variant only
    ConvBnRelu fuse_;
};

}  // namespace acfseg
