#include "acfseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "acfseg/loss.hpp"
#include "acfseg/ops.hpp"

namespace acfseg {

Sample flip_horizontal(const Sample& s) {
    Sample out = s;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
                out.image.data[static_cast<size_t>((int64_t(c) * s.height + y) * s.width + x)] =
                    s.image.data[static_cast<size_t>((int64_t(c) * s.height + y) * s.width +
                                                     (s.width - 1 - x))];
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            out.labels[static_cast<size_t>(int64_t(y) * s.width + x)] =
                s.labels[static_cast<size_t>(int64_t(y) * s.width + (s.width - 1 - x))];
    return out;
}

Sample rescale(const Sample& s, float factor) {
    if (factor <= 0.0f) throw std::invalid_argument("rescale: factor must be positive");
    const int nh = std::max(1, static_cast<int>(std::lround(s.height * factor)));
    const int nw = std::max(1, static_cast<int>(std::lround(s.width * factor)));
    Sample out;
    out.height = nh;
    out.width = nw;
    out.image = bilinear_resize_chw(s.image, nh, nw);
    out.labels.resize(static_cast<size_t>(int64_t(nh) * nw));
    // nearest neighbour keeps the label value set intact
    for (int y = 0; y < nh; ++y) {
        const int sy = std::min(s.height - 1,
                                static_cast<int>(std::lround(nh > 1 ? double(y) * (s.height - 1) / (nh - 1) : 0.0)));
        for (int x = 0; x < nw; ++x) {
            const int sx = std::min(s.width - 1,
                                    static_cast<int>(std::lround(nw > 1 ? double(x) * (s.width - 1) / (nw - 1) : 0.0)));
            out.labels[static_cast<size_t>(int64_t(y) * nw + x)] =
                s.labels[static_cast<size_t>(int64_t(sy) * s.width + sx)];
        }
    }
    return out;
}

namespace {

Sample crop_or_pad(const Sample& s, int crop, std::mt19937_64& rng) {
    float mean[3] = {0.0f, 0.0f, 0.0f};
    const int64_t hw = int64_t(s.height) * s.width;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int64_t i = 0; i < hw; ++i) acc += s.image.data[static_cast<size_t>(c * hw + i)];
        mean[c] = static_cast<float>(acc / double(hw));
    }
    Sample out;
    out.height = out.width = crop;
    out.image = Tensor({3, crop, crop});
    out.labels.assign(static_cast<size_t>(int64_t(crop) * crop), kIgnoreId);
    for (int c = 0; c < 3; ++c)
        std::fill_n(out.image.data.begin() + int64_t(c) * crop * crop, int64_t(crop) * crop, mean[c]);

    const int off_y = s.height > crop
                          ? std::uniform_int_distribution<int>(0, s.height - crop)(rng)
                          : 0;
    const int off_x = s.width > crop
                          ? std::uniform_int_distribution<int>(0, s.width - crop)(rng)
                          : 0;
    const int copy_h = std::min(crop, s.height);
    const int copy_w = std::min(crop, s.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < copy_h; ++y)
            for (int x = 0; x < copy_w; ++x)
                out.image.data[static_cast<size_t>((int64_t(c) * crop + y) * crop + x)] =
                    s.image.data[static_cast<size_t>((int64_t(c) * s.height + y + off_y) * s.width +
                                                     x + off_x)];
    for (int y = 0; y < copy_h; ++y)
        for (int x = 0; x < copy_w; ++x)
            out.labels[static_cast<size_t>(int64_t(y) * crop + x)] =
                s.labels[static_cast<size_t>(int64_t(y + off_y) * s.width + x + off_x)];
    return out;
}

}  // namespace

Sample augment(const Sample& s, const AugmentConfig& config, std::mt19937_64& rng) {
    if (!config.enabled) return s;
    Sample cur = s;
    if (config.flip && std::uniform_real_distribution<float>(0.0f, 1.0f)(rng) < 0.5f)
        cur = flip_horizontal(cur);
    const float factor =
        std::uniform_real_distribution<float>(config.scale_min, config.scale_max)(rng);
    if (factor != 1.0f) cur = rescale(cur, factor);
    return crop_or_pad(cur, config.crop, rng);
}

SegBatch stack_samples(const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("stack_samples: empty batch");
    const int h = samples[0].height, w = samples[0].width;
    const int b = static_cast<int>(samples.size());
    SegBatch batch;
    batch.images = Tensor({b, 3, h, w});
    batch.labels.resize(static_cast<size_t>(int64_t(b) * h * w));
    for (int i = 0; i < b; ++i) {
        const Sample& s = samples[static_cast<size_t>(i)];
        if (s.height != h || s.width != w)
            throw std::invalid_argument("stack_samples: mixed sample sizes");
        std::copy(s.image.data.begin(), s.image.data.end(),
                  batch.images.data.begin() + int64_t(i) * 3 * h * w);
        std::copy(s.labels.begin(), s.labels.end(), batch.labels.begin() + int64_t(i) * h * w);
    }
    return batch;
}

}  // namespace acfseg
