#pragma once

#include <cstdint>

#include "acfseg/acf.hpp"

namespace acfseg {

struct NetworkConfig {
    int num_classes = 4;
    int base_channels = 16;      // stage widths: c, 2c, 4c, 4c
    int reduced_channels = 32;   // C' entering the ACF module
    bool use_aspp = true;
    std::vector<int> aspp_dilations = {2, 4, 6};  // large-scale profile uses {12, 24, 36}
    int aspp_branch_channels = 32;
    AcfVariant variant = AcfVariant::Sum;
    int output_stride = 8;  // fixed; validated

    void validate() const;
};

// Dilated backbone + optional ASPP + coarse/aux heads + ACF + fine head.
class AcfNet {
public:
    explicit AcfNet(const NetworkConfig& config, uint64_t init_seed = 0);

    struct Outputs {
        NodePtr aux_logits;     // B x N x H x W
        NodePtr coarse_logits;  // B x N x H x W
        NodePtr fine_logits;    // B x N x H x W, null for the baseline variant
        NodePtr top_feature;    // pre-coarse-head feature at 1/8 resolution
        NodePtr fused_feature;  // pre-fine-classifier feature, null for baseline
    };

    // H and W must be divisible by the output stride.
    Outputs forward(const NodePtr& image, bool train);

    ParamRegistry& registry() { return registry_; }
    const ParamRegistry& registry() const { return registry_; }
    const NetworkConfig& config() const { return config_; }

private:
    NodePtr aspp(const NodePtr& top, bool train);

    NetworkConfig config_;
    ParamRegistry registry_;

    // backbone: stages 1-2 stride down to 1/8, stages 3-4 hold 1/8 with dilation 2 then 4
    ConvBnRelu s1a_, s1b_, s2a_, s2b_, s3a_, s3b_, s4a_, s4b_;

    std::vector<ConvBnRelu> aspp_branches_;
    ConvBnRelu aspp_project_;

    ConvBnRelu coarse_conv_;
    Conv2d coarse_cls_;
    ConvBnRelu aux_conv_;
    Conv2d aux_cls_;

    AcfModule acf_;
    Conv2d fine_cls_;
};

}  // namespace acfseg
