#pragma once

#include "acfseg/data.hpp"
#include "acfseg/metrics.hpp"
#include "acfseg/network.hpp"

namespace acfseg {

struct EvalConfig {
    std::vector<float> scales = {1.0f};
    bool flip = false;
};

struct InferProbs {
    Tensor coarse;  // N x H x W, per-pixel distribution
    Tensor fine;    // empty for the baseline variant
};

// Multi-scale + flip inference on one image (3 x H x W). Each run resizes
// to the scaled shape rounded to a multiple of the output stride, forwards
// in eval mode, softmaxes, undoes the flip, resizes probabilities back and
// averages over all runs.
InferProbs ms_flip_infer(AcfNet& model, const Tensor& image, const EvalConfig& config);

std::vector<int32_t> argmax_classes(const Tensor& probs_nhw);

struct EvalReport {
    ConfusionMatrix cm_coarse;
    ConfusionMatrix cm_fine;  // zero counts for baseline
    bool has_fine = false;

    double miou_coarse() const { return cm_coarse.miou(); }
    double miou_fine() const { return cm_fine.miou(); }
};

EvalReport evaluate(AcfNet& model, const DatasetManifest& dataset, const EvalConfig& config);

// CSV: class_id,class_name,iou_coarse,iou_fine rows plus summary rows.
void write_report_csv(const std::string& path, const EvalReport& report,
                      const std::vector<std::string>& class_names);

// Cosine similarity of every pixel's feature against the anchor pixel.
// Zero-norm vectors yield similarity 0. feature is C x H x W.
Tensor feature_similarity_map(const Tensor& feature, int row, int col);

// v in [-1,1] -> round((v+1)/2*255)
Raster similarity_to_pgm(const Tensor& map_hw);

}  // namespace acfseg
