#pragma once

#include <cstdint>
#include <vector>

namespace acfseg {

// counts[gt][pred], ignore-id pixels excluded at accumulation time.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    void add(int32_t gt, int32_t pred);
    void add_map(const std::vector<int32_t>& gt, const std::vector<int32_t>& pred,
                 int32_t ignore_id);
    void merge(const ConfusionMatrix& other);  // elementwise addition

    int num_classes() const { return n_; }
    int64_t at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * n_ + pred]; }
    int64_t total() const;

    // IoU_i = tp / (row + col - tp); classes with empty denominator are
    // excluded from the mean. Throws when no class was evaluated.
    std::vector<double> per_class_iou() const;
    double miou() const;
    double pixel_accuracy() const;

private:
    int n_;
    std::vector<int64_t> counts_;
};

}  // namespace acfseg
