#pragma once

#include <random>

#include "acfseg/data.hpp"

namespace acfseg {

struct AugmentConfig {
    bool enabled = true;
    bool flip = true;             // horizontal, p = 0.5
    float scale_min = 0.5f;
    float scale_max = 2.0f;
    int crop = 64;                // output side; short sides padded
};

Sample flip_horizontal(const Sample& s);
Sample rescale(const Sample& s, float factor);  // bilinear image, nearest labels

// flip -> scale -> crop; pads with the image's mean color and the ignore id
// when the scaled sample is smaller than the crop.
Sample augment(const Sample& s, const AugmentConfig& config, std::mt19937_64& rng);

// Stacks equally sized samples into a batch tensor plus flat label vector.
struct SegBatch {
    Tensor images;                // B x 3 x H x W
    std::vector<int32_t> labels;  // B*H*W
};
SegBatch stack_samples(const std::vector<Sample>& samples);

}  // namespace acfseg
