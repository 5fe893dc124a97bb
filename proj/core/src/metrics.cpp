#include "acfseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace acfseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : n_(num_classes), counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
    if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::add(int32_t gt, int32_t pred) {
    if (gt < 0 || gt >= n_ || pred < 0 || pred >= n_)
        throw std::invalid_argument("ConfusionMatrix: class id out of range");
    ++counts_[static_cast<size_t>(gt) * n_ + pred];
}

void ConfusionMatrix::add_map(const std::vector<int32_t>& gt, const std::vector<int32_t>& pred,
                              int32_t ignore_id) {
    if (gt.size() != pred.size())
        throw std::invalid_argument("ConfusionMatrix: gt/pred size mismatch");
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == ignore_id) continue;
        add(gt[i], pred[i]);
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw std::invalid_argument("ConfusionMatrix: class count mismatch");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), int64_t{0});
}

std::vector<double> ConfusionMatrix::per_class_iou() const {
    std::vector<double> iou(static_cast<size_t>(n_), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < n_; ++i) {
        int64_t row = 0, col = 0;
        for (int j = 0; j < n_; ++j) {
            row += at(i, j);
            col += at(j, i);
        }
        const int64_t tp = at(i, i);
        const int64_t denom = row + col - tp;
        if (denom > 0) iou[static_cast<size_t>(i)] = double(tp) / double(denom);
    }
    return iou;
}

double ConfusionMatrix::miou() const {
    auto iou = per_class_iou();
    double sum = 0.0;
    int count = 0;
    for (double v : iou)
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    if (count == 0) throw std::runtime_error("miou: no evaluated pixels");
    return sum / count;
}

double ConfusionMatrix::pixel_accuracy() const {
    const int64_t t = total();
    if (t == 0) throw std::runtime_error("pixel_accuracy: no evaluated pixels");
    int64_t correct = 0;
    for (int i = 0; i < n_; ++i) correct += at(i, i);
    return double(correct) / double(t);
}

}  // namespace acfseg
