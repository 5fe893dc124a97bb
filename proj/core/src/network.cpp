#include "acfseg/network.hpp"

#include <stdexcept>

#include "acfseg/rng.hpp"

namespace acfseg {

void NetworkConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (reduced_channels < 1) throw std::invalid_argument("reduced_channels must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
    if (output_stride != 8) throw std::invalid_argument("output_stride is fixed at 8");
    if (use_aspp && aspp_dilations.size() != 3)
        throw std::invalid_argument("aspp_dilations must list the three 3x3 branch rates");
}

AcfNet::AcfNet(const NetworkConfig& config, uint64_t init_seed) : config_(config) {
    config_.validate();
    auto rng = split_rng(init_seed, "init");
    const int c = config_.base_channels;
    const int c2 = 2 * c, c4 = 4 * c;

    s1a_ = ConvBnRelu(registry_, "backbone.s1a", 3, c, 3, 2, 1, 1, rng);
    s1b_ = ConvBnRelu(registry_, "backbone.s1b", c, c, 3, 1, 1, 1, rng);
    s2a_ = ConvBnRelu(registry_, "backbone.s2a", c, c2, 3, 2, 1, 1, rng);
    s2b_ = ConvBnRelu(registry_, "backbone.s2b", c2, c2, 3, 1, 1, 1, rng);
    s3a_ = ConvBnRelu(registry_, "backbone.s3a", c2, c4, 3, 2, 1, 1, rng);
    s3b_ = ConvBnRelu(registry_, "backbone.s3b", c4, c4, 3, 1, 2, 2, rng);
    s4a_ = ConvBnRelu(registry_, "backbone.s4a", c4, c4, 3, 1, 4, 4, rng);
    s4b_ = ConvBnRelu(registry_, "backbone.s4b", c4, c4, 3, 1, 4, 4, rng);

    if (config_.use_aspp) {
        const int cb = config_.aspp_branch_channels;
        aspp_branches_.emplace_back(registry_, "aspp.branch0", c4, cb, 1, 1, 0, 1, rng);
        for (size_t i = 0; i < config_.aspp_dilations.size(); ++i) {
            const int d = config_.aspp_dilations[i];
            aspp_branches_.emplace_back(registry_, "aspp.branch" + std::to_string(i + 1), c4, cb, 3,
                                        1, d, d, rng);
        }
        aspp_project_ = ConvBnRelu(registry_, "aspp.project",
                                   static_cast<int>(aspp_branches_.size()) * cb, c4, 1, 1, 0, 1, rng);
    }

    const int n = config_.num_classes;
    coarse_conv_ = ConvBnRelu(registry_, "coarse_head.conv", c4, c4, 3, 1, 1, 1, rng);
    coarse_cls_ = Conv2d(registry_, "coarse_head.cls", c4, n, 1, 1, 0, 1, rng);
    aux_conv_ = ConvBnRelu(registry_, "aux_head.conv", c4, c4, 3, 1, 1, 1, rng);
    aux_cls_ = Conv2d(registry_, "aux_head.cls", c4, n, 1, 1, 0, 1, rng);

    if (config_.variant != AcfVariant::None) {
        acf_ = AcfModule(registry_, "acf", c4, config_.reduced_channels, n, config_.variant, rng);
        fine_cls_ = Conv2d(registry_, "fine_head.cls", config_.reduced_channels, n, 1, 1, 0, 1, rng);
    }
}

NodePtr AcfNet::aspp(const NodePtr& top, bool train) {
    std::vector<NodePtr> outs;
    outs.reserve(aspp_branches_.size());
    for (auto& branch : aspp_branches_) outs.push_back(branch(top, train));
    return aspp_project_(concat(outs, 1), train);
}

AcfNet::Outputs AcfNet::forward(const NodePtr& image, bool train) {
    if (image->value.rank() != 4 || image->value.dim(1) != 3)
        throw std::invalid_argument("forward: image must be B x 3 x H x W");
    const int H = image->value.dim(2), W = image->value.dim(3);
    if (H % config_.output_stride != 0 || W % config_.output_stride != 0)
        throw std::invalid_argument("forward: H and W must be divisible by " +
                                    std::to_string(config_.output_stride));

    NodePtr x = s1b_(s1a_(image, train), train);
    x = s2b_(s2a_(x, train), train);
    NodePtr mid = s3b_(s3a_(x, train), train);
    NodePtr top = s4b_(s4a_(mid, train), train);

    if (config_.use_aspp) top = aspp(top, train);

    Outputs out;
    out.top_feature = top;

    NodePtr coarse_lowres = coarse_cls_(coarse_conv_(top, train));
    NodePtr aux_lowres = aux_cls_(aux_conv_(mid, train));
    out.coarse_logits = upsample_bilinear(coarse_lowres, H, W);
    out.aux_logits = upsample_bilinear(aux_lowres, H, W);

    if (config_.variant != AcfVariant::None) {
        // Coarse probabilities at feature resolution act as the attention map;
        // they stay attached so the fine loss reaches the coarse head.
        NodePtr probs = softmax(coarse_lowres, 1);
        out.fused_feature = acf_.forward(top, probs, train);
        out.fine_logits = upsample_bilinear(fine_cls_(out.fused_feature), H, W);
    }
    return out;
}

}  // namespace acfseg
