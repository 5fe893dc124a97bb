#include "acfseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "acfseg/loss.hpp"
#include "acfseg/ops.hpp"

namespace acfseg {

namespace {

int round_to_stride(int v, int stride) {
    int r = static_cast<int>(std::lround(double(v) / stride)) * stride;
    return std::max(stride, r);
}

Tensor flip_chw(const Tensor& t) {
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    Tensor out(t.shape);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.data[static_cast<size_t>((int64_t(c) * H + y) * W + x)] =
                    t.data[static_cast<size_t>((int64_t(c) * H + y) * W + (W - 1 - x))];
    return out;
}

Tensor squeeze_batch(const Tensor& bchw) {
    Tensor out({bchw.dim(1), bchw.dim(2), bchw.dim(3)});
    out.data = bchw.data;
    return out;
}

}  // namespace

InferProbs ms_flip_infer(AcfNet& model, const Tensor& image, const EvalConfig& config) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("ms_flip_infer: image must be 3 x H x W");
    if (config.scales.empty()) throw std::invalid_argument("ms_flip_infer: no scales");
    for (float s : config.scales)
        if (s <= 0.0f) throw std::invalid_argument("ms_flip_infer: scales must be positive");
    const int H = image.dim(1), W = image.dim(2);
    const int stride = model.config().output_stride;
    const int N = model.config().num_classes;
    const bool has_fine = model.config().variant != AcfVariant::None;

    Tensor acc_coarse({N, H, W});
    Tensor acc_fine = has_fine ? Tensor({N, H, W}) : Tensor();
    int runs = 0;

    auto one_run = [&](const Tensor& img, bool mirrored) {
        Tensor batched({1, 3, img.dim(1), img.dim(2)});
        batched.data = img.data;
        auto out = model.forward(constant(batched), /*train=*/false);
        auto accumulate = [&](const NodePtr& logits, Tensor& acc) {
            Tensor probs = softmax_tensor(squeeze_batch(logits->value), 0);
            if (mirrored) probs = flip_chw(probs);
            if (probs.dim(1) != H || probs.dim(2) != W) probs = bilinear_resize_chw(probs, H, W);
            for (int64_t i = 0; i < acc.size(); ++i) acc[i] += probs[i];
        };
        accumulate(out.coarse_logits, acc_coarse);
        if (has_fine) accumulate(out.fine_logits, acc_fine);
        ++runs;
    };

    for (float s : config.scales) {
        const int sh = round_to_stride(static_cast<int>(std::lround(H * s)), stride);
        const int sw = round_to_stride(static_cast<int>(std::lround(W * s)), stride);
        Tensor scaled = (sh == H && sw == W) ? image : bilinear_resize_chw(image, sh, sw);
        one_run(scaled, false);
        if (config.flip) one_run(flip_chw(scaled), true);
    }

    const float inv = 1.0f / float(runs);
    for (int64_t i = 0; i < acc_coarse.size(); ++i) acc_coarse[i] *= inv;
    if (has_fine)
        for (int64_t i = 0; i < acc_fine.size(); ++i) acc_fine[i] *= inv;

    InferProbs out;
    out.coarse = std::move(acc_coarse);
    out.fine = std::move(acc_fine);
    return out;
}

std::vector<int32_t> argmax_classes(const Tensor& probs_nhw) {
    const int N = probs_nhw.dim(0);
    const int64_t hw = int64_t(probs_nhw.dim(1)) * probs_nhw.dim(2);
    std::vector<int32_t> pred(static_cast<size_t>(hw));
    for (int64_t j = 0; j < hw; ++j) {
        int best = 0;
        float bv = probs_nhw[j];
        for (int c = 1; c < N; ++c) {
            const float v = probs_nhw[c * hw + j];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        pred[static_cast<size_t>(j)] = best;
    }
    return pred;
}

namespace {

int worker_thread_cap() {
    const char* env = std::getenv("ACFSEG_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n < 1 ? 1 : n;
}

}  // namespace

EvalReport evaluate(AcfNet& model, const DatasetManifest& dataset, const EvalConfig& config) {
    if (dataset.size() == 0) throw std::runtime_error("evaluate: empty dataset");
    const int N = model.config().num_classes;
    EvalReport report{ConfusionMatrix(N), ConfusionMatrix(N),
                      model.config().variant != AcfVariant::None};

    const int threads = std::min<int>(worker_thread_cap(), static_cast<int>(dataset.size()));
    std::vector<ConfusionMatrix> coarse(static_cast<size_t>(threads), ConfusionMatrix(N));
    std::vector<ConfusionMatrix> fine(static_cast<size_t>(threads), ConfusionMatrix(N));
    auto work = [&](int t) {
        // eval-mode forwards only read shared parameters
        for (size_t i = static_cast<size_t>(t); i < dataset.size(); i += static_cast<size_t>(threads)) {
            Sample s = dataset.load(i);
            InferProbs probs = ms_flip_infer(model, s.image, config);
            coarse[static_cast<size_t>(t)].add_map(s.labels, argmax_classes(probs.coarse), kIgnoreId);
            if (report.has_fine)
                fine[static_cast<size_t>(t)].add_map(s.labels, argmax_classes(probs.fine), kIgnoreId);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    // merge order is fixed, and merging is commutative anyway
    for (int t = 0; t < threads; ++t) {
        report.cm_coarse.merge(coarse[static_cast<size_t>(t)]);
        if (report.has_fine) report.cm_fine.merge(fine[static_cast<size_t>(t)]);
    }
    return report;
}

void write_report_csv(const std::string& path, const EvalReport& report,
                      const std::vector<std::string>& class_names) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write report");
    out << "class_id,class_name,iou_coarse,iou_fine\n";
    auto iou_c = report.cm_coarse.per_class_iou();
    auto iou_f = report.has_fine ? report.cm_fine.per_class_iou()
                                 : std::vector<double>(iou_c.size(), std::nan(""));
    for (size_t i = 0; i < iou_c.size(); ++i) {
        out << i << "," << (i < class_names.size() ? class_names[i] : "class" + std::to_string(i));
        for (double v : {iou_c[i], iou_f[i]}) {
            out << ",";
            if (!std::isnan(v)) out << v;
        }
        out << "\n";
    }
    out << "summary,miou," << report.miou_coarse() << ",";
    if (report.has_fine) out << report.miou_fine();
    out << "\n";
    out << "summary,pixel_accuracy," << report.cm_coarse.pixel_accuracy() << ",";
    if (report.has_fine) out << report.cm_fine.pixel_accuracy();
    out << "\n";
}

Tensor feature_similarity_map(const Tensor& feature, int row, int col) {
    if (feature.rank() != 3) throw std::invalid_argument("feature_similarity_map: need C x H x W");
    const int C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
    if (row < 0 || row >= H || col < 0 || col >= W)
        throw std::invalid_argument("feature_similarity_map: anchor out of bounds");
    const int64_t hw = int64_t(H) * W;
    const int64_t anchor = int64_t(row) * W + col;
    double anorm = 0.0;
    for (int c = 0; c < C; ++c) {
        const double v = feature[c * hw + anchor];
        anorm += v * v;
    }
    anorm = std::sqrt(anorm);
    Tensor out({H, W});
    if (anorm == 0.0) return out;
    for (int64_t j = 0; j < hw; ++j) {
        double dot = 0.0, norm = 0.0;
        for (int c = 0; c < C; ++c) {
            const double f = feature[c * hw + j];
            dot += f * feature[c * hw + anchor];
            norm += f * f;
        }
        norm = std::sqrt(norm);
        out[j] = norm == 0.0 ? 0.0f : static_cast<float>(dot / (norm * anorm));
    }
    return out;
}

Raster similarity_to_pgm(const Tensor& map_hw) {
    if (map_hw.rank() != 2) throw std::invalid_argument("similarity_to_pgm: need H x W");
    Raster r;
    r.channels = 1;
    r.height = map_hw.dim(0);
    r.width = map_hw.dim(1);
    r.data.resize(static_cast<size_t>(int64_t(r.height) * r.width));
    for (int64_t i = 0; i < map_hw.size(); ++i) {
        const float v = std::clamp(map_hw[i], -1.0f, 1.0f);
        r.data[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround((v + 1.0f) / 2.0f * 255.0f));
    }
    return r;
}

}  // namespace acfseg
