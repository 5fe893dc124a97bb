#include "acfseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "acfseg/ops.hpp"

namespace acfseg {

std::vector<float> inverse_frequency_weights(const std::vector<int32_t>& labels, int num_classes,
                                             int32_t ignore_id) {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    int64_t total = 0;
    for (int32_t y : labels) {
        if (y == ignore_id) continue;
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("label value " + std::to_string(y) + " out of range");
        ++counts[static_cast<size_t>(y)];
        ++total;
    }
    std::vector<float> w(static_cast<size_t>(num_classes), 1.0f);
    for (int i = 0; i < num_classes; ++i) {
        if (counts[static_cast<size_t>(i)] == 0) continue;
        float wi = float(total) / (float(num_classes) * float(counts[static_cast<size_t>(i)]));
        w[static_cast<size_t>(i)] = std::clamp(wi, 0.1f, 10.0f);
    }
    return w;
}

std::vector<uint8_t> bootstrap_select(const std::vector<float>& correct_probs,
                                      const std::vector<uint8_t>& valid,
                                      const BootstrapConfig& config) {
    if (correct_probs.size() != valid.size())
        throw std::invalid_argument("bootstrap_select: size mismatch");
    const size_t n = correct_probs.size();
    std::vector<uint8_t> mask(n, 0);
    if (!config.enabled) {
        mask = valid;
        return mask;
    }
    int64_t selected = 0, n_valid = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        ++n_valid;
        if (correct_probs[i] < config.theta) {
            mask[i] = 1;
            ++selected;
        }
    }
    if (selected >= config.min_k || selected == n_valid) return mask;

    // Floor rule: top up with the lowest-probability valid pixels.
    std::vector<size_t> idx;
    idx.reserve(static_cast<size_t>(n_valid));
    for (size_t i = 0; i < n; ++i)
        if (valid[i]) idx.push_back(i);
    const int64_t want = std::min<int64_t>(config.min_k, n_valid);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return correct_probs[a] < correct_probs[b]; });
    std::fill(mask.begin(), mask.end(), 0);
    for (int64_t i = 0; i < want; ++i) mask[idx[static_cast<size_t>(i)]] = 1;
    return mask;
}

NodePtr balanced_ce(const NodePtr& logits, const std::vector<int32_t>& labels,
                    const std::vector<float>& class_weights, int32_t ignore_id,
                    const BootstrapConfig& bootstrap) {
    if (logits->value.rank() != 4)
        throw std::invalid_argument("balanced_ce: logits must be B x N x H x W");
    const int B = logits->value.dim(0), N = logits->value.dim(1);
    const int H = logits->value.dim(2), W = logits->value.dim(3);
    const int64_t HW = int64_t(H) * W;
    if (static_cast<int64_t>(labels.size()) != int64_t(B) * HW)
        throw std::invalid_argument("balanced_ce: labels size does not match logits");
    if (static_cast<int>(class_weights.size()) != N)
        throw std::invalid_argument("balanced_ce: need one class weight per class");

    // Per-pixel softmax kept for the backward pass.
    Tensor probs = softmax_tensor(logits->value, 1);

    std::vector<float> correct(labels.size(), 1.0f);
    std::vector<uint8_t> valid(labels.size(), 0);
    for (int b = 0; b < B; ++b)
        for (int64_t j = 0; j < HW; ++j) {
            const size_t pix = static_cast<size_t>(int64_t(b) * HW + j);
            const int32_t y = labels[pix];
            if (y == ignore_id) continue;
            if (y < 0 || y >= N)
                throw std::invalid_argument("balanced_ce: label " + std::to_string(y) +
                                            " out of range [0," + std::to_string(N) + ")");
            valid[pix] = 1;
            correct[pix] = probs[(int64_t(b) * N + y) * HW + j];
        }

    std::vector<uint8_t> mask = bootstrap_select(correct, valid, bootstrap);
    int64_t m = std::accumulate(mask.begin(), mask.end(), int64_t{0});

    double loss = 0.0;
    if (m > 0) {
        for (size_t pix = 0; pix < mask.size(); ++pix) {
            if (!mask[pix]) continue;
            const float w = class_weights[static_cast<size_t>(labels[pix])];
            loss += double(w) * -std::log(std::max(correct[pix], 1e-30f));
        }
        loss /= double(m);
    }

    Tensor out({1});
    out[0] = static_cast<float>(loss);
    return make_op(
        std::move(out), {logits},
        [logits, labels, class_weights, probs, mask, m, B, N, HW](Node& n) {
            if (m == 0) return;
            Tensor& gx = logits->ensure_grad();
            const float g = n.grad[0] / float(m);
            for (int b = 0; b < B; ++b)
                for (int64_t j = 0; j < HW; ++j) {
                    const size_t pix = static_cast<size_t>(int64_t(b) * HW + j);
                    if (!mask[pix]) continue;
                    const int32_t y = labels[pix];
                    const float wg = class_weights[static_cast<size_t>(y)] * g;
                    for (int c = 0; c < N; ++c) {
                        const int64_t idx = (int64_t(b) * N + c) * HW + j;
                        gx[idx] += wg * (probs[idx] - (c == y ? 1.0f : 0.0f));
                    }
                }
        },
        "balanced_ce");
}

NodePtr total_loss(const NodePtr& aux, const NodePtr& coarse, const NodePtr& fine,
                   const LossWeights& weights) {
    NodePtr l = add(scale(aux, weights.lambda_aux), scale(coarse, weights.lambda_coarse));
    if (fine) l = add(l, scale(fine, weights.lambda_fine));
    return l;
}

}  // namespace acfseg
