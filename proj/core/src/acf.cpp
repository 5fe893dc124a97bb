#include "acfseg/acf.hpp"

#include <stdexcept>

namespace acfseg {

namespace {

void check_acf_shapes(const Tensor& feature, const Tensor& probs) {
    if (feature.rank() != 4 || probs.rank() != 4)
        throw std::invalid_argument("acf: feature and probs must be rank 4");
    if (feature.dim(0) != probs.dim(0) || feature.dim(2) != probs.dim(2) ||
        feature.dim(3) != probs.dim(3))
        throw std::invalid_argument("acf: feature " + shape_str(feature.shape) +
                                    " and probs " + shape_str(probs.shape) + " disagree");
}

}  // namespace

NodePtr class_center(const NodePtr& feature, const NodePtr& probs, float eps) {
    check_acf_shapes(feature->value, probs->value);
    const int B = feature->value.dim(0), C = feature->value.dim(1);
    const int H = feature->value.dim(2), W = feature->value.dim(3);
    const int N = probs->value.dim(1);
    const int64_t HW = int64_t(H) * W;

    Tensor out({B, N, C});
    Tensor denom({B, N});  // kept for backward
    for (int b = 0; b < B; ++b) {
        const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
        const float* F = &feature->value.data[static_cast<size_t>(int64_t(b) * C * HW)];
        for (int i = 0; i < N; ++i) {
            const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
            double d = 0.0;
            for (int64_t j = 0; j < HW; ++j) d += prow[j];
            const float dn = static_cast<float>(d) + eps;
            denom.at2(b, i) = dn;
            float* orow = &out.data[static_cast<size_t>((int64_t(b) * N + i) * C)];
            for (int c = 0; c < C; ++c) {
                const float* frow = &F[static_cast<size_t>(int64_t(c) * HW)];
                double s = 0.0;
                for (int64_t j = 0; j < HW; ++j) s += double(prow[j]) * frow[j];
                orow[c] = static_cast<float>(s) / dn;
            }
        }
    }
    return make_op(
        std::move(out), {feature, probs},
        [feature, probs, denom, B, C, N, HW](Node& n) {
            for (int b = 0; b < B; ++b) {
                const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
                const float* F = &feature->value.data[static_cast<size_t>(int64_t(b) * C * HW)];
                const float* G = &n.grad.data[static_cast<size_t>(int64_t(b) * N * C)];
                const float* O = &n.value.data[static_cast<size_t>(int64_t(b) * N * C)];
                if (feature->requires_grad) {
                    Tensor& gf = feature->ensure_grad();
                    float* GF = &gf.data[static_cast<size_t>(int64_t(b) * C * HW)];
                    for (int i = 0; i < N; ++i) {
                        const float inv_d = 1.0f / denom.at2(b, i);
                        const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
                        for (int c = 0; c < C; ++c) {
                            const float gc = G[int64_t(i) * C + c] * inv_d;
                            if (gc == 0.0f) continue;
                            float* gfrow = &GF[static_cast<size_t>(int64_t(c) * HW)];
                            for (int64_t j = 0; j < HW; ++j) gfrow[j] += gc * prow[j];
                        }
                    }
                }
                if (probs->requires_grad) {
                    Tensor& gp = probs->ensure_grad();
                    float* GP = &gp.data[static_cast<size_t>(int64_t(b) * N * HW)];
                    for (int i = 0; i < N; ++i) {
                        const float inv_d = 1.0f / denom.at2(b, i);
                        // d(out_i)/d(denom_i) term: -<g_i, out_i> / denom_i
                        float ddot = 0.0f;
                        for (int c = 0; c < C; ++c)
                            ddot += G[int64_t(i) * C + c] * O[int64_t(i) * C + c];
                        const float dd = -ddot * inv_d;
                        float* gprow = &GP[static_cast<size_t>(int64_t(i) * HW)];
                        for (int c = 0; c < C; ++c) {
                            const float gc = G[int64_t(i) * C + c] * inv_d;
                            if (gc == 0.0f) continue;
                            const float* frow = &F[static_cast<size_t>(int64_t(c) * HW)];
                            for (int64_t j = 0; j < HW; ++j) gprow[j] += gc * frow[j];
                        }
                        for (int64_t j = 0; j < HW; ++j) gprow[j] += dd;
                    }
                }
            }
        },
        "class_center");
}

namespace {

void check_centers_probs(const Tensor& centers, const Tensor& probs) {
    if (centers.rank() != 3 || probs.rank() != 4)
        throw std::invalid_argument("class_attention: centers must be B x N x C', probs B x N x H x W");
    if (centers.dim(0) != probs.dim(0) || centers.dim(1) != probs.dim(1))
        throw std::invalid_argument("class_attention: centers " + shape_str(centers.shape) +
                                    " and probs " + shape_str(probs.shape) + " disagree on B or N");
}

}  // namespace

NodePtr class_attention_sum(const NodePtr& centers, const NodePtr& probs) {
    check_centers_probs(centers->value, probs->value);
    const int B = centers->value.dim(0), N = centers->value.dim(1), C = centers->value.dim(2);
    const int H = probs->value.dim(2), W = probs->value.dim(3);
    const int64_t HW = int64_t(H) * W;

    Tensor out({B, C, H, W});
    for (int b = 0; b < B; ++b) {
        const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
        const float* Fc = &centers->value.data[static_cast<size_t>(int64_t(b) * N * C)];
        float* O = &out.data[static_cast<size_t>(int64_t(b) * C * HW)];
        for (int i = 0; i < N; ++i) {
            const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
            for (int c = 0; c < C; ++c) {
                const float fc = Fc[int64_t(i) * C + c];
                if (fc == 0.0f) continue;
                float* orow = &O[static_cast<size_t>(int64_t(c) * HW)];
                for (int64_t j = 0; j < HW; ++j) orow[j] += fc * prow[j];
            }
        }
    }
    return make_op(
        std::move(out), {centers, probs},
        [centers, probs, B, N, C, HW](Node& n) {
            for (int b = 0; b < B; ++b) {
                const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
                const float* Fc = &centers->value.data[static_cast<size_t>(int64_t(b) * N * C)];
                const float* G = &n.grad.data[static_cast<size_t>(int64_t(b) * C * HW)];
                if (centers->requires_grad) {
                    Tensor& gc = centers->ensure_grad();
                    float* GC = &gc.data[static_cast<size_t>(int64_t(b) * N * C)];
                    for (int i = 0; i < N; ++i) {
                        const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
                        for (int c = 0; c < C; ++c) {
                            const float* grow = &G[static_cast<size_t>(int64_t(c) * HW)];
                            double acc = 0.0;
                            for (int64_t j = 0; j < HW; ++j) acc += double(prow[j]) * grow[j];
                            GC[int64_t(i) * C + c] += static_cast<float>(acc);
                        }
                    }
                }
                if (probs->requires_grad) {
                    Tensor& gp = probs->ensure_grad();
                    float* GP = &gp.data[static_cast<size_t>(int64_t(b) * N * HW)];
                    for (int i = 0; i < N; ++i) {
                        float* gprow = &GP[static_cast<size_t>(int64_t(i) * HW)];
                        for (int c = 0; c < C; ++c) {
                            const float fc = Fc[int64_t(i) * C + c];
                            if (fc == 0.0f) continue;
                            const float* grow = &G[static_cast<size_t>(int64_t(c) * HW)];
                            for (int64_t j = 0; j < HW; ++j) gprow[j] += fc * grow[j];
                        }
                    }
                }
            }
        },
        "class_attention_sum");
}

NodePtr class_attention_concat(const NodePtr& centers, const NodePtr& probs) {
    check_centers_probs(centers->value, probs->value);
    const int B = centers->value.dim(0), N = centers->value.dim(1), C = centers->value.dim(2);
    const int H = probs->value.dim(2), W = probs->value.dim(3);
    const int64_t HW = int64_t(H) * W;

    Tensor out({B, N * C, H, W});
    for (int b = 0; b < B; ++b) {
        const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
        const float* Fc = &centers->value.data[static_cast<size_t>(int64_t(b) * N * C)];
        float* O = &out.data[static_cast<size_t>(int64_t(b) * N * C * HW)];
        for (int i = 0; i < N; ++i) {
            const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
            for (int c = 0; c < C; ++c) {
                const float fc = Fc[int64_t(i) * C + c];
                float* orow = &O[static_cast<size_t>((int64_t(i) * C + c) * HW)];
                for (int64_t j = 0; j < HW; ++j) orow[j] = fc * prow[j];
            }
        }
    }
    return make_op(
        std::move(out), {centers, probs},
        [centers, probs, B, N, C, HW](Node& n) {
            for (int b = 0; b < B; ++b) {
                const float* P = &probs->value.data[static_cast<size_t>(int64_t(b) * N * HW)];
                const float* Fc = &centers->value.data[static_cast<size_t>(int64_t(b) * N * C)];
                const float* G = &n.grad.data[static_cast<size_t>(int64_t(b) * N * C * HW)];
                if (centers->requires_grad) {
                    Tensor& gc = centers->ensure_grad();
                    float* GC = &gc.data[static_cast<size_t>(int64_t(b) * N * C)];
                    for (int i = 0; i < N; ++i)
                        for (int c = 0; c < C; ++c) {
                            const float* prow = &P[static_cast<size_t>(int64_t(i) * HW)];
                            const float* grow = &G[static_cast<size_t>((int64_t(i) * C + c) * HW)];
                            double acc = 0.0;
                            for (int64_t j = 0; j < HW; ++j) acc += double(prow[j]) * grow[j];
                            GC[int64_t(i) * C + c] += static_cast<float>(acc);
                        }
                }
                if (probs->requires_grad) {
                    Tensor& gp = probs->ensure_grad();
                    float* GP = &gp.data[static_cast<size_t>(int64_t(b) * N * HW)];
                    for (int i = 0; i < N; ++i) {
                        float* gprow = &GP[static_cast<size_t>(int64_t(i) * HW)];
                        for (int c = 0; c < C; ++c) {
                            const float fc = Fc[int64_t(i) * C + c];
                            if (fc == 0.0f) continue;
                            const float* grow = &G[static_cast<size_t>((int64_t(i) * C + c) * HW)];
                            for (int64_t j = 0; j < HW; ++j) gprow[j] += fc * grow[j];
                        }
                    }
                }
            }
        },
        "class_attention_concat");
}

NodePtr broadcast_centers(const NodePtr& centers, int h, int w) {
    if (centers->value.rank() != 3)
        throw std::invalid_argument("broadcast_centers: centers must be B x N x C'");
    const int B = centers->value.dim(0), N = centers->value.dim(1), C = centers->value.dim(2);
    const int64_t HW = int64_t(h) * w;
    Tensor out({B, N * C, h, w});
    for (int b = 0; b < B; ++b) {
        const float* Fc = &centers->value.data[static_cast<size_t>(int64_t(b) * N * C)];
        float* O = &out.data[static_cast<size_t>(int64_t(b) * N * C * HW)];
        for (int64_t ch = 0; ch < int64_t(N) * C; ++ch) {
            const float v = Fc[ch];
            float* orow = &O[static_cast<size_t>(ch * HW)];
            for (int64_t j = 0; j < HW; ++j) orow[j] = v;
        }
    }
    return make_op(
        std::move(out), {centers},
        [centers, B, N, C, HW](Node& n) {
            Tensor& gc = centers->ensure_grad();
            for (int b = 0; b < B; ++b) {
                float* GC = &gc.data[static_cast<size_t>(int64_t(b) * N * C)];
                const float* G = &n.grad.data[static_cast<size_t>(int64_t(b) * N * C * HW)];
                for (int64_t ch = 0; ch < int64_t(N) * C; ++ch) {
                    const float* grow = &G[static_cast<size_t>(ch * HW)];
                    double acc = 0.0;
                    for (int64_t j = 0; j < HW; ++j) acc += grow[j];
                    GC[ch] += static_cast<float>(acc);
                }
            }
        },
        "broadcast_centers");
}

AcfVariant acf_variant_from_string(const std::string& s) {
    if (s == "sum") return AcfVariant::Sum;
    if (s == "concat") return AcfVariant::Concat;
    if (s == "center-only") return AcfVariant::CenterOnly;
    if (s == "none") return AcfVariant::None;
    throw std::invalid_argument("unknown acf variant '" + s + "' (sum|concat|center-only|none)");
}

std::string to_string(AcfVariant v) {
    switch (v) {
        case AcfVariant::Sum: return "sum";
        case AcfVariant::Concat: return "concat";
        case AcfVariant::CenterOnly: return "center-only";
        case AcfVariant::None: return "none";
    }
    return "?";
}

AcfModule::AcfModule(ParamRegistry& reg, const std::string& name, int in_channels,
                     int reduced_channels, int num_classes, AcfVariant variant,
                     std::mt19937_64& rng)
    : variant_(variant), reduced_(reduced_channels), num_classes_(num_classes) {
    if (variant == AcfVariant::None) return;
    reduce_ = ConvBnRelu(reg, name + ".reduce", in_channels, reduced_, 1, 1, 0, 1, rng);
    int attn_channels = 0;
    switch (variant) {
        case AcfVariant::Sum:
            refine_ = ConvBnRelu(reg, name + ".refine", reduced_, reduced_, 1, 1, 0, 1, rng);
            attn_channels = reduced_;
            break;
        case AcfVariant::Concat:
        case AcfVariant::CenterOnly:
            attn_channels = num_classes_ * reduced_;
            break;
        case AcfVariant::None: break;
    }
    // 3x3 so the fine branch sees the same spatial context the coarse head gets
    fuse_ = ConvBnRelu(reg, name + ".fuse", attn_channels + reduced_, reduced_, 3, 1, 1, 1, rng);
}

NodePtr AcfModule::forward(const NodePtr& feature, const NodePtr& probs, bool train) {
    if (variant_ == AcfVariant::None)
        throw std::logic_error("AcfModule::forward called on the baseline variant");
    NodePtr reduced = reduce_(feature, train);
    NodePtr centers = class_center(reduced, probs);
    NodePtr attn;
    switch (variant_) {
        case AcfVariant::Sum:
            attn = refine_(class_attention_sum(centers, probs), train);
            break;
        case AcfVariant::Concat:
            attn = class_attention_concat(centers, probs);
            break;
        case AcfVariant::CenterOnly:
            attn = broadcast_centers(centers, probs->value.dim(2), probs->value.dim(3));
            break;
        case AcfVariant::None: break;
    }
    return fuse_(concat({attn, reduced}, 1), train);
}

}  // namespace acfseg
