#pragma once

#include <cstdint>
#include <vector>

#include "acfseg/graph.hpp"

namespace acfseg {

constexpr int32_t kIgnoreId = 255;

struct LossWeights {
    float lambda_aux = 0.4f;
    float lambda_coarse = 0.6f;
    float lambda_fine = 0.7f;
};

struct BootstrapConfig {
    bool enabled = false;
    float theta = 0.7f;
    int64_t min_k = 100000;
};

// Per-batch inverse-frequency class weights: w_i = total / (N * count_i),
// clamped to [0.1, 10]; classes absent from the batch get weight 1.
std::vector<float> inverse_frequency_weights(const std::vector<int32_t>& labels, int num_classes,
                                             int32_t ignore_id = kIgnoreId);

// Online bootstrapping pixel selection: keep pixels whose correct-class
// probability is below theta; if fewer than min_k qualify, take the min_k
// lowest-probability valid pixels (all valid pixels when fewer exist).
std::vector<uint8_t> bootstrap_select(const std::vector<float>& correct_probs,
                                      const std::vector<uint8_t>& valid,
                                      const BootstrapConfig& config);

// Class-balanced cross entropy over non-ignored pixels, optionally
// restricted to bootstrapped hard pixels. labels has B*H*W entries in
// row-major batch order. Returns a scalar node; all pixels ignored yields
// zero loss with zero gradient.
NodePtr balanced_ce(const NodePtr& logits, const std::vector<int32_t>& labels,
                    const std::vector<float>& class_weights, int32_t ignore_id = kIgnoreId,
                    const BootstrapConfig& bootstrap = {});

// L = lambda_a * la + lambda_c * lc + lambda_f * lf; `fine` may be null
// (baseline variant), dropping the last term.
NodePtr total_loss(const NodePtr& aux, const NodePtr& coarse, const NodePtr& fine,
                   const LossWeights& weights);

}  // namespace acfseg
