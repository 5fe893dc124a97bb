#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acfseg/netpbm.hpp"
#include "acfseg/tensor.hpp"

namespace acfseg {

// One image/label pair in memory: image is 3 x H x W in [0,1], labels are
// row-major class ids (plus the ignore id).
struct Sample {
    Tensor image;
    std::vector<int32_t> labels;
    int height = 0;
    int width = 0;
};

Sample raster_to_sample(const Raster& image, const Raster& labels);
Raster image_to_raster(const Tensor& chw);  // clamps to [0,1]

struct DatasetManifest {
    std::string root;
    std::vector<std::pair<std::string, std::string>> pairs;  // image path, label path
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    size_t size() const { return pairs.size(); }
    Sample load(size_t index) const;  // validates matching dimensions
};

// Manifest file: "classes = a,b,c" line followed by one
// "<image-path> <label-path>" pair per line, paths relative to the
// manifest's directory. Verifies every referenced file exists.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

struct SyntheticSpec {
    int train_images = 200;
    int val_images = 50;
    int image_size = 64;
    int num_classes = 4;  // background + up to 3 shape kinds
    float noise_sigma = 0.04f;
    uint64_t seed = 0;
};

// Writes PPM images, PGM label maps and train/val manifests under out_dir.
// Deterministic for a given spec. Returns the two manifests.
std::pair<DatasetManifest, DatasetManifest> generate_synthetic(const SyntheticSpec& spec,
                                                               const std::string& out_dir);

}  // namespace acfseg
