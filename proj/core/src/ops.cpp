#include "acfseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acfseg {

namespace {

void require_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
    if (a->value.shape != b->value.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->value.shape) + " vs " + shape_str(b->value.shape));
}

void require_rank(const NodePtr& a, int rank, const char* op) {
    if (a->value.rank() != rank)
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                    ", got shape " + shape_str(a->value.shape));
}

}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a, b, "add");
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_op(
        std::move(out), {a, b},
        [a, b](Node& n) {
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                for (int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t i = 0; i < n.grad.size(); ++i) gb[i] += n.grad[i];
            }
        },
        "add");
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    return make_op(
        std::move(out), {a, b},
        [a, b](Node& n) {
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                for (int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * b->value[i];
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t i = 0; i < n.grad.size(); ++i) gb[i] += n.grad[i] * a->value[i];
            }
        },
        "mul");
}

NodePtr scale(const NodePtr& a, float s) {
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * s;
    return make_op(
        std::move(out), {a},
        [a, s](Node& n) {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * s;
        },
        "scale");
}

NodePtr sum_all(const NodePtr& a) {
    double acc = 0.0;
    for (int64_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
    Tensor out({1});
    out[0] = static_cast<float>(acc);
    return make_op(
        std::move(out), {a},
        [a](Node& n) {
            Tensor& ga = a->ensure_grad();
            float g = n.grad[0];
            for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
        },
        "sum_all");
}

NodePtr relu(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] > 0.0f ? a->value[i] : 0.0f;
    return make_op(
        std::move(out), {a},
        [a](Node& n) {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i)
                if (a->value[i] > 0.0f) ga[i] += n.grad[i];
        },
        "relu");
}

namespace {

// Decompose a shape around `axis` into outer * len * inner.
void axis_split(const Shape& shape, int axis, int64_t& outer, int64_t& len, int64_t& inner) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " +
                                    shape_str(shape));
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
    len = shape[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Tensor softmax_tensor(const Tensor& t, int axis) {
    int64_t outer, len, inner;
    axis_split(t.shape, axis, outer, len, inner);
    Tensor out(t.shape);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            float mx = t[base];
            for (int64_t k = 1; k < len; ++k) mx = std::max(mx, t[base + k * inner]);
            float denom = 0.0f;
            for (int64_t k = 0; k < len; ++k) {
                float e = std::exp(t[base + k * inner] - mx);
                out[base + k * inner] = e;
                denom += e;
            }
            float inv = 1.0f / denom;
            for (int64_t k = 0; k < len; ++k) out[base + k * inner] *= inv;
        }
    }
    return out;
}

NodePtr softmax(const NodePtr& a, int axis) {
    Tensor out = softmax_tensor(a->value, axis);
    Shape shape = a->value.shape;
    return make_op(
        std::move(out), {a},
        [a, axis, shape](Node& n) {
            // dx = y * (g - sum_k(g_k * y_k)) along the softmax axis
            int64_t outer, len, inner;
            axis_split(shape, axis, outer, len, inner);
            Tensor& ga = a->ensure_grad();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    float dot = 0.0f;
                    for (int64_t k = 0; k < len; ++k)
                        dot += n.grad[base + k * inner] * n.value[base + k * inner];
                    for (int64_t k = 0; k < len; ++k) {
                        const int64_t idx = base + k * inner;
                        ga[idx] += n.value[idx] * (n.grad[idx] - dot);
                    }
                }
            }
        },
        "softmax");
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int m = a->value.dim(0), k = a->value.dim(1);
    const int k2 = b->value.dim(0), nn = b->value.dim(1);
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a->value.shape) +
                                    " vs " + shape_str(b->value.shape));
    Tensor out({m, nn});
    for (int i = 0; i < m; ++i) {
        float* orow = &out.data[static_cast<size_t>(i) * nn];
        for (int p = 0; p < k; ++p) {
            const float av = a->value.at2(i, p);
            const float* brow = &b->value.data[static_cast<size_t>(p) * nn];
            for (int j = 0; j < nn; ++j) orow[j] += av * brow[j];
        }
    }
    return make_op(
        std::move(out), {a, b},
        [a, b, m, k, nn](Node& n) {
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                // dA = G * B^T
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        float acc = 0.0f;
                        const float* grow = &n.grad.data[static_cast<size_t>(i) * nn];
                        const float* brow = &b->value.data[static_cast<size_t>(p) * nn];
                        for (int j = 0; j < nn; ++j) acc += grow[j] * brow[j];
                        ga.at2(i, p) += acc;
                    }
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                // dB = A^T * G
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const float av = a->value.at2(i, p);
                        float* gbrow = &gb.data[static_cast<size_t>(p) * nn];
                        const float* grow = &n.grad.data[static_cast<size_t>(i) * nn];
                        for (int j = 0; j < nn; ++j) gbrow[j] += av * grow[j];
                    }
            }
        },
        "matmul");
}

namespace {

std::vector<int64_t> row_major_strides(const Shape& shape) {
    std::vector<int64_t> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        st[static_cast<size_t>(i)] = st[static_cast<size_t>(i) + 1] * shape[static_cast<size_t>(i) + 1];
    return st;
}

}  // namespace

NodePtr transpose(const NodePtr& a, const std::vector<int>& axes) {
    const Shape& in_shape = a->value.shape;
    const int r = a->value.rank();
    if (static_cast<int>(axes.size()) != r)
        throw std::invalid_argument("transpose: axes length must equal rank");
    std::vector<bool> seen(static_cast<size_t>(r), false);
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        int ax = axes[static_cast<size_t>(i)];
        if (ax < 0 || ax >= r || seen[static_cast<size_t>(ax)])
            throw std::invalid_argument("transpose: invalid axes permutation");
        seen[static_cast<size_t>(ax)] = true;
        out_shape[static_cast<size_t>(i)] = in_shape[static_cast<size_t>(ax)];
    }
    auto in_strides = row_major_strides(in_shape);
    auto out_strides = row_major_strides(out_shape);
    Tensor out(out_shape);
    const int64_t n = out.size();
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t rem = flat, src = 0;
        for (int i = 0; i < r; ++i) {
            int64_t coord = rem / out_strides[static_cast<size_t>(i)];
            rem %= out_strides[static_cast<size_t>(i)];
            src += coord * in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
        }
        out[flat] = a->value[src];
    }
    return make_op(
        std::move(out), {a},
        [a, axes, in_shape, out_shape](Node& n) {
            auto in_strides = row_major_strides(in_shape);
            auto out_strides = row_major_strides(out_shape);
            Tensor& ga = a->ensure_grad();
            const int r = static_cast<int>(in_shape.size());
            for (int64_t flat = 0; flat < n.grad.size(); ++flat) {
                int64_t rem = flat, src = 0;
                for (int i = 0; i < r; ++i) {
                    int64_t coord = rem / out_strides[static_cast<size_t>(i)];
                    rem %= out_strides[static_cast<size_t>(i)];
                    src += coord * in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
                }
                ga[src] += n.grad[flat];
            }
        },
        "transpose");
}

NodePtr reshape(const NodePtr& a, const Shape& shape) {
    if (numel(shape) != a->value.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a->value.shape) + " as " +
                                    shape_str(shape));
    Tensor out(shape, a->value.data);
    return make_op(
        std::move(out), {a},
        [a](Node& n) {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
        },
        "reshape");
}

NodePtr concat(const std::vector<NodePtr>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& first = parts[0]->value.shape;
    const int r = static_cast<int>(first.size());
    if (axis < 0 || axis >= r) throw std::invalid_argument("concat: axis out of range");
    Shape out_shape = first;
    out_shape[static_cast<size_t>(axis)] = 0;
    for (const auto& p : parts) {
        if (p->value.rank() != r)
            throw std::invalid_argument("concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && p->value.dim(i) != first[static_cast<size_t>(i)])
                throw std::invalid_argument("concat: shape mismatch off the concat axis");
        out_shape[static_cast<size_t>(axis)] += p->value.dim(axis);
    }
    int64_t outer, len, inner;
    axis_split(out_shape, axis, outer, len, inner);
    (void)len;
    Tensor out(out_shape);
    int64_t offset = 0;  // running offset along the concat axis
    struct Piece {
        int64_t axis_len, start;
    };
    std::vector<Piece> pieces;
    for (const auto& p : parts) {
        const int64_t plen = p->value.dim(axis);
        pieces.push_back({plen, offset});
        for (int64_t o = 0; o < outer; ++o) {
            const float* src = &p->value.data[static_cast<size_t>(o * plen * inner)];
            float* dst = &out.data[static_cast<size_t>((o * out_shape[static_cast<size_t>(axis)] + offset) * inner)];
            std::copy(src, src + plen * inner, dst);
        }
        offset += plen;
    }
    const int64_t total_len = out_shape[static_cast<size_t>(axis)];
    return make_op(
        std::move(out), parts,
        [parts, pieces, outer, inner, total_len](Node& n) {
            for (size_t pi = 0; pi < parts.size(); ++pi) {
                const auto& p = parts[pi];
                if (!p->requires_grad) continue;
                Tensor& gp = p->ensure_grad();
                const auto& pc = pieces[pi];
                for (int64_t o = 0; o < outer; ++o) {
                    const float* src =
                        &n.grad.data[static_cast<size_t>((o * total_len + pc.start) * inner)];
                    float* dst = &gp.data[static_cast<size_t>(o * pc.axis_len * inner)];
                    for (int64_t i = 0; i < pc.axis_len * inner; ++i) dst[i] += src[i];
                }
            }
        },
        "concat");
}

namespace {

// conv2d is computed as a matrix product against an im2col buffer: col has one
// row per (ci, kh, kw) tap, each row holding that tap's input value for every
// output position. The same buffer layout serves the forward pass, the weight
// gradient (dot products of grad rows with col rows) and the input gradient
// (accumulate into a grad-col buffer, then scatter back with col2im_add).

void im2col(const float* xbase, int Cin, int H, int W, int k, int stride, int padding,
            int dilation, int OH, int OW, float* col) {
    const int64_t M = int64_t(OH) * OW;
    float* crow = col;
    for (int ci = 0; ci < Cin; ++ci) {
        const float* xplane = xbase + int64_t(ci) * H * W;
        for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw, crow += M) {
                const int iw0 = -padding + kw * dilation;
                for (int oh = 0; oh < OH; ++oh) {
                    float* dst = crow + int64_t(oh) * OW;
                    const int ih = oh * stride - padding + kh * dilation;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + OW, 0.0f);
                        continue;
                    }
                    const float* xrow = xplane + int64_t(ih) * W;
                    if (stride == 1) {
                        const int lo = std::min(OW, std::max(0, -iw0));
                        const int hi = std::max(lo, std::min(OW, W - iw0));
                        std::fill(dst, dst + lo, 0.0f);
                        std::copy(xrow + iw0 + lo, xrow + iw0 + hi, dst + lo);
                        std::fill(dst + hi, dst + OW, 0.0f);
                    } else {
                        for (int ow = 0; ow < OW; ++ow) {
                            const int iw = iw0 + ow * stride;
                            dst[ow] = (iw >= 0 && iw < W) ? xrow[iw] : 0.0f;
                        }
                    }
                }
            }
    }
}

void col2im_add(const float* col, int Cin, int H, int W, int k, int stride, int padding,
                int dilation, int OH, int OW, float* gxbase) {
    const int64_t M = int64_t(OH) * OW;
    const float* crow = col;
    for (int ci = 0; ci < Cin; ++ci) {
        float* gxplane = gxbase + int64_t(ci) * H * W;
        for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw, crow += M) {
                const int iw0 = -padding + kw * dilation;
                for (int oh = 0; oh < OH; ++oh) {
                    const float* src = crow + int64_t(oh) * OW;
                    const int ih = oh * stride - padding + kh * dilation;
                    if (ih < 0 || ih >= H) continue;
                    float* gxrow = gxplane + int64_t(ih) * W;
                    if (stride == 1) {
                        const int lo = std::min(OW, std::max(0, -iw0));
                        const int hi = std::max(lo, std::min(OW, W - iw0));
                        for (int ow = lo; ow < hi; ++ow) gxrow[iw0 + ow] += src[ow];
                    } else {
                        for (int ow = 0; ow < OW; ++ow) {
                            const int iw = iw0 + ow * stride;
                            if (iw >= 0 && iw < W) gxrow[iw] += src[ow];
                        }
                    }
                }
            }
    }
}

// out[r][j] += sum_q w[r*rs + q*qs] * col[q][j] for r in [0, NB). NB is a
// compile-time constant so the r loop unrolls and the j loop vectorizes.
template <int NB>
void fma_rows(const float* w, int64_t rs, int64_t qs, int64_t K, const float* col, int64_t M,
              float* out, int64_t os) {
    for (int64_t q = 0; q < K; ++q) {
        const float* c = col + q * M;
        float wv[NB];
        for (int r = 0; r < NB; ++r) wv[r] = w[r * rs + q * qs];
        for (int64_t j = 0; j < M; ++j) {
            const float cj = c[j];
            for (int r = 0; r < NB; ++r) out[r * os + j] += wv[r] * cj;
        }
    }
}

void fma_block(const float* w, int64_t rs, int64_t qs, int64_t K, const float* col, int64_t M,
               float* out, int64_t os, int nrows) {
    int r = 0;
    for (; r + 4 <= nrows; r += 4) fma_rows<4>(w + r * rs, rs, qs, K, col, M, out + r * os, os);
    switch (nrows - r) {
        case 3: fma_rows<3>(w + r * rs, rs, qs, K, col, M, out + r * os, os); break;
        case 2: fma_rows<2>(w + r * rs, rs, qs, K, col, M, out + r * os, os); break;
        case 1: fma_rows<1>(w + r * rs, rs, qs, K, col, M, out + r * os, os); break;
        default: break;
    }
}

// gw[r*ws + q] += dot(g[r], col[q]). Explicit lane accumulators let the
// reduction vectorize without reassociating a single scalar sum.
template <int NB>
void dot_rows(const float* g, int64_t gs, const float* col, int64_t K, int64_t M, float* gw,
              int64_t ws) {
    constexpr int L = 16;
    for (int64_t q = 0; q < K; ++q) {
        const float* c = col + q * M;
        float lanes[NB][L] = {};
        int64_t j = 0;
        for (; j + L <= M; j += L)
            for (int r = 0; r < NB; ++r)
                for (int l = 0; l < L; ++l) lanes[r][l] += g[r * gs + j + l] * c[j + l];
        float tail[NB] = {};
        for (; j < M; ++j)
            for (int r = 0; r < NB; ++r) tail[r] += g[r * gs + j] * c[j];
        for (int r = 0; r < NB; ++r) {
            float s = tail[r];
            for (int l = 0; l < L; ++l) s += lanes[r][l];
            gw[r * ws + q] += s;
        }
    }
}

void dot_block(const float* g, int64_t gs, const float* col, int64_t K, int64_t M, float* gw,
               int64_t ws, int nrows) {
    int r = 0;
    for (; r + 4 <= nrows; r += 4) dot_rows<4>(g + r * gs, gs, col, K, M, gw + r * ws, ws);
    switch (nrows - r) {
        case 3: dot_rows<3>(g + r * gs, gs, col, K, M, gw + r * ws, ws); break;
        case 2: dot_rows<2>(g + r * gs, gs, col, K, M, gw + r * ws, ws); break;
        case 1: dot_rows<1>(g + r * gs, gs, col, K, M, gw + r * ws, ws); break;
        default: break;
    }
}

std::vector<float>& conv_scratch(size_t n) {
    static thread_local std::vector<float> buf;
    if (buf.size() < n) buf.resize(n);
    return buf;
}

std::vector<float>& conv_scratch2(size_t n) {
    static thread_local std::vector<float> buf;
    if (buf.size() < n) buf.resize(n);
    return buf;
}

}  // namespace

NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias, int stride,
               int padding, int dilation) {
    require_rank(input, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    const int B = input->value.dim(0), Cin = input->value.dim(1);
    const int H = input->value.dim(2), W = input->value.dim(3);
    const int Cout = weight->value.dim(0), k = weight->value.dim(2);
    if (weight->value.dim(1) != Cin)
        throw std::invalid_argument("conv2d: input has " + std::to_string(Cin) +
                                    " channels but weight expects " +
                                    std::to_string(weight->value.dim(1)));
    if (weight->value.dim(3) != k) throw std::invalid_argument("conv2d: non-square kernel");
    if (bias->value.shape != Shape{Cout})
        throw std::invalid_argument("conv2d: bias shape must be {Cout}");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    const int eff = dilation * (k - 1) + 1;
    if (H + 2 * padding < eff || W + 2 * padding < eff)
        throw std::invalid_argument("conv2d: spatial dims too small for effective kernel " +
                                    std::to_string(eff) + "; lower the dilation");
    const int OH = (H + 2 * padding - eff) / stride + 1;
    const int OW = (W + 2 * padding - eff) / stride + 1;

    Tensor out({B, Cout, OH, OW});
    const float* x = input->value.data.data();
    const float* wt = weight->value.data.data();
    const int64_t K = int64_t(Cin) * k * k;
    const int64_t M = int64_t(OH) * OW;
    const bool identity = (k == 1 && stride == 1 && padding == 0);
    float* col = identity ? nullptr : conv_scratch(static_cast<size_t>(K * M)).data();
    for (int b = 0; b < B; ++b) {
        const float* xbase = x + int64_t(b) * Cin * H * W;
        const float* colp = xbase;
        if (!identity) {
            im2col(xbase, Cin, H, W, k, stride, padding, dilation, OH, OW, col);
            colp = col;
        }
        float* obase = out.data.data() + int64_t(b) * Cout * M;
        for (int co = 0; co < Cout; ++co)
            std::fill(obase + co * M, obase + (co + 1) * M, bias->value[co]);
        fma_block(wt, K, 1, K, colp, M, obase, M, Cout);
    }
    return make_op(
        std::move(out), {input, weight, bias},
        [input, weight, bias, B, Cin, Cout, H, W, OH, OW, k, stride, padding, dilation](Node& n) {
            const float* g = n.grad.data.data();
            const float* x = input->value.data.data();
            const float* wt = weight->value.data.data();
            if (bias->requires_grad) {
                Tensor& gb = bias->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int co = 0; co < Cout; ++co) {
                        const float* gplane = &g[static_cast<size_t>(((int64_t(b) * Cout + co) * OH) * OW)];
                        float acc = 0.0f;
                        for (int64_t i = 0; i < int64_t(OH) * OW; ++i) acc += gplane[i];
                        gb[co] += acc;
                    }
            }
            const int64_t K = int64_t(Cin) * k * k;
            const int64_t M = int64_t(OH) * OW;
            const bool identity = (k == 1 && stride == 1 && padding == 0);
            float* col = identity ? nullptr : conv_scratch(static_cast<size_t>(K * M)).data();
            if (weight->requires_grad) {
                Tensor& gw = weight->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    const float* xbase = x + int64_t(b) * Cin * H * W;
                    const float* colp = xbase;
                    if (!identity) {
                        im2col(xbase, Cin, H, W, k, stride, padding, dilation, OH, OW, col);
                        colp = col;
                    }
                    dot_block(g + int64_t(b) * Cout * M, M, colp, K, M, gw.data.data(), K, Cout);
                }
            }
            if (input->requires_grad) {
                Tensor& gx = input->ensure_grad();
                float* gcol =
                    identity ? nullptr : conv_scratch2(static_cast<size_t>(K * M)).data();
                for (int b = 0; b < B; ++b) {
                    const float* gplane = g + int64_t(b) * Cout * M;
                    float* gxbase = gx.data.data() + int64_t(b) * Cin * H * W;
                    if (identity) {
                        // gx rows accumulate the weight-transposed product directly
                        fma_block(wt, 1, K, Cout, gplane, M, gxbase, M, static_cast<int>(K));
                    } else {
                        std::fill(gcol, gcol + K * M, 0.0f);
                        fma_block(wt, 1, K, Cout, gplane, M, gcol, M, static_cast<int>(K));
                        col2im_add(gcol, Cin, H, W, k, stride, padding, dilation, OH, OW, gxbase);
                    }
                }
            }
        },
        "conv2d");
}

namespace {

struct LerpWeights {
    int lo, hi;
    float w_lo, w_hi;
};

// align-corners sampling positions for resizing `in` points to `out` points
std::vector<LerpWeights> lerp_grid(int in, int out) {
    std::vector<LerpWeights> g(static_cast<size_t>(out));
    const double step = out > 1 ? double(in - 1) / double(out - 1) : 0.0;
    for (int i = 0; i < out; ++i) {
        double pos = i * step;
        int lo = static_cast<int>(pos);
        if (lo >= in - 1) lo = in - 1;
        int hi = std::min(lo + 1, in - 1);
        float frac = static_cast<float>(pos - lo);
        g[static_cast<size_t>(i)] = {lo, hi, 1.0f - frac, frac};
    }
    return g;
}

}  // namespace

NodePtr upsample_bilinear(const NodePtr& input, int out_h, int out_w, bool align_corners) {
    require_rank(input, 4, "upsample_bilinear");
    if (!align_corners)
        throw std::invalid_argument("upsample_bilinear: only align_corners=true is supported");
    const int B = input->value.dim(0), C = input->value.dim(1);
    const int H = input->value.dim(2), W = input->value.dim(3);
    auto gh = lerp_grid(H, out_h);
    auto gw = lerp_grid(W, out_w);
    Tensor out({B, C, out_h, out_w});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* src = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
            float* dst = &out.data[static_cast<size_t>(((int64_t(b) * C + c) * out_h) * out_w)];
            for (int oh = 0; oh < out_h; ++oh) {
                const auto& lh = gh[static_cast<size_t>(oh)];
                const float* r0 = &src[static_cast<size_t>(lh.lo) * W];
                const float* r1 = &src[static_cast<size_t>(lh.hi) * W];
                float* drow = &dst[static_cast<size_t>(oh) * out_w];
                for (int ow = 0; ow < out_w; ++ow) {
                    const auto& lw = gw[static_cast<size_t>(ow)];
                    drow[ow] = lh.w_lo * (lw.w_lo * r0[lw.lo] + lw.w_hi * r0[lw.hi]) +
                               lh.w_hi * (lw.w_lo * r1[lw.lo] + lw.w_hi * r1[lw.hi]);
                }
            }
        }
    return make_op(
        std::move(out), {input},
        [input, B, C, H, W, out_h, out_w, gh, gw](Node& n) {
            Tensor& gx = input->ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    float* dst = &gx.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                    const float* g = &n.grad.data[static_cast<size_t>(((int64_t(b) * C + c) * out_h) * out_w)];
                    for (int oh = 0; oh < out_h; ++oh) {
                        const auto& lh = gh[static_cast<size_t>(oh)];
                        for (int ow = 0; ow < out_w; ++ow) {
                            const auto& lw = gw[static_cast<size_t>(ow)];
                            const float gv = g[static_cast<size_t>(oh) * out_w + ow];
                            dst[static_cast<size_t>(lh.lo) * W + lw.lo] += lh.w_lo * lw.w_lo * gv;
                            dst[static_cast<size_t>(lh.lo) * W + lw.hi] += lh.w_lo * lw.w_hi * gv;
                            dst[static_cast<size_t>(lh.hi) * W + lw.lo] += lh.w_hi * lw.w_lo * gv;
                            dst[static_cast<size_t>(lh.hi) * W + lw.hi] += lh.w_hi * lw.w_hi * gv;
                        }
                    }
                }
        },
        "upsample_bilinear");
}

Tensor bilinear_resize_chw(const Tensor& chw, int out_h, int out_w) {
    if (chw.rank() != 3) throw std::invalid_argument("bilinear_resize_chw: expected rank-3 tensor");
    const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
    auto gh = lerp_grid(H, out_h);
    auto gw = lerp_grid(W, out_w);
    Tensor out({C, out_h, out_w});
    for (int c = 0; c < C; ++c) {
        const float* src = &chw.data[static_cast<size_t>(int64_t(c) * H * W)];
        float* dst = &out.data[static_cast<size_t>(int64_t(c) * out_h * out_w)];
        for (int oh = 0; oh < out_h; ++oh) {
            const auto& lh = gh[static_cast<size_t>(oh)];
            for (int ow = 0; ow < out_w; ++ow) {
                const auto& lw = gw[static_cast<size_t>(ow)];
                dst[static_cast<size_t>(oh) * out_w + ow] =
                    lh.w_lo * (lw.w_lo * src[static_cast<size_t>(lh.lo) * W + lw.lo] +
                               lw.w_hi * src[static_cast<size_t>(lh.lo) * W + lw.hi]) +
                    lh.w_hi * (lw.w_lo * src[static_cast<size_t>(lh.hi) * W + lw.lo] +
                               lw.w_hi * src[static_cast<size_t>(lh.hi) * W + lw.hi]);
            }
        }
    }
    return out;
}

NodePtr avg_pool2d(const NodePtr& input, int kernel, int stride) {
    require_rank(input, 4, "avg_pool2d");
    const int B = input->value.dim(0), C = input->value.dim(1);
    const int H = input->value.dim(2), W = input->value.dim(3);
    if (kernel < 1 || stride < 1 || kernel > H || kernel > W)
        throw std::invalid_argument("avg_pool2d: invalid kernel/stride");
    const int OH = (H - kernel) / stride + 1;
    const int OW = (W - kernel) / stride + 1;
    const float inv = 1.0f / float(kernel * kernel);
    Tensor out({B, C, OH, OW});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    float acc = 0.0f;
                    for (int kh = 0; kh < kernel; ++kh)
                        for (int kw = 0; kw < kernel; ++kw)
                            acc += input->value.at4(b, c, oh * stride + kh, ow * stride + kw);
                    out.at4(b, c, oh, ow) = acc * inv;
                }
    return make_op(
        std::move(out), {input},
        [input, B, C, OH, OW, kernel, stride, inv](Node& n) {
            Tensor& gx = input->ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c)
                    for (int oh = 0; oh < OH; ++oh)
                        for (int ow = 0; ow < OW; ++ow) {
                            const float gv = n.grad.at4(b, c, oh, ow) * inv;
                            for (int kh = 0; kh < kernel; ++kh)
                                for (int kw = 0; kw < kernel; ++kw)
                                    gx.at4(b, c, oh * stride + kh, ow * stride + kw) += gv;
                        }
        },
        "avg_pool2d");
}

NodePtr global_avg_pool(const NodePtr& input) {
    require_rank(input, 4, "global_avg_pool");
    const int B = input->value.dim(0), C = input->value.dim(1);
    const int H = input->value.dim(2), W = input->value.dim(3);
    const float inv = 1.0f / float(H * W);
    Tensor out({B, C, 1, 1});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            float acc = 0.0f;
            const float* plane = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
            for (int64_t i = 0; i < int64_t(H) * W; ++i) acc += plane[i];
            out.at4(b, c, 0, 0) = acc * inv;
        }
    return make_op(
        std::move(out), {input},
        [input, B, C, H, W, inv](Node& n) {
            Tensor& gx = input->ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const float gv = n.grad.at4(b, c, 0, 0) * inv;
                    float* plane = &gx.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                    for (int64_t i = 0; i < int64_t(H) * W; ++i) plane[i] += gv;
                }
        },
        "global_avg_pool");
}

NodePtr batchnorm2d(const NodePtr& input, const NodePtr& gamma, const NodePtr& beta,
                    BatchNormStats& stats, bool train, float momentum, float epsilon) {
    require_rank(input, 4, "batchnorm2d");
    const int B = input->value.dim(0), C = input->value.dim(1);
    const int H = input->value.dim(2), W = input->value.dim(3);
    if (gamma->value.shape != Shape{C} || beta->value.shape != Shape{C})
        throw std::invalid_argument("batchnorm2d: gamma/beta must have shape {C}");
    if (train && int64_t(B) * H * W < 2)
        throw std::invalid_argument("batchnorm2d: train mode needs at least 2 samples per channel");

    Tensor mean({C}), var({C});
    if (train) {
        const double inv_m = 1.0 / (double(B) * H * W);
        for (int c = 0; c < C; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int b = 0; b < B; ++b) {
                const float* plane = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                for (int64_t i = 0; i < int64_t(H) * W; ++i) {
                    s += plane[i];
                    s2 += double(plane[i]) * plane[i];
                }
            }
            const double mu = s * inv_m;
            mean[c] = static_cast<float>(mu);
            var[c] = static_cast<float>(std::max(0.0, s2 * inv_m - mu * mu));
        }
        for (int c = 0; c < C; ++c) {
            stats.running_mean[c] = momentum * stats.running_mean[c] + (1.0f - momentum) * mean[c];
            stats.running_var[c] = momentum * stats.running_var[c] + (1.0f - momentum) * var[c];
        }
    } else {
        mean = stats.running_mean;
        var = stats.running_var;
    }

    Tensor inv_std({C});
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0f / std::sqrt(var[c] + epsilon);

    Tensor out({B, C, H, W});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* src = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
            float* dst = &out.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
            const float a = gamma->value[c] * inv_std[c];
            const float d = beta->value[c] - a * mean[c];
            for (int64_t i = 0; i < int64_t(H) * W; ++i) dst[i] = a * src[i] + d;
        }
    return make_op(
        std::move(out), {input, gamma, beta},
        [input, gamma, beta, mean, inv_std, train, B, C, H, W](Node& n) {
            const int64_t m = int64_t(B) * H * W;
            const float inv_m = 1.0f / float(m);
            Tensor dgamma({C}), dbeta({C});
            for (int c = 0; c < C; ++c) {
                double sg = 0.0, sgx = 0.0;
                for (int b = 0; b < B; ++b) {
                    const float* g = &n.grad.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                    const float* x = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                    for (int64_t i = 0; i < int64_t(H) * W; ++i) {
                        sg += g[i];
                        sgx += double(g[i]) * (x[i] - mean[c]) * inv_std[c];
                    }
                }
                dbeta[c] = static_cast<float>(sg);
                dgamma[c] = static_cast<float>(sgx);
            }
            if (gamma->requires_grad) {
                Tensor& gg = gamma->ensure_grad();
                for (int c = 0; c < C; ++c) gg[c] += dgamma[c];
            }
            if (beta->requires_grad) {
                Tensor& gb = beta->ensure_grad();
                for (int c = 0; c < C; ++c) gb[c] += dbeta[c];
            }
            if (input->requires_grad) {
                Tensor& gx = input->ensure_grad();
                for (int c = 0; c < C; ++c) {
                    const float a = gamma->value[c] * inv_std[c];
                    const float mg = dbeta[c] * inv_m;
                    const float mgx = dgamma[c] * inv_m;
                    for (int b = 0; b < B; ++b) {
                        const float* g = &n.grad.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                        const float* x = &input->value.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                        float* d = &gx.data[static_cast<size_t>(((int64_t(b) * C + c) * H) * W)];
                        if (train) {
                            for (int64_t i = 0; i < int64_t(H) * W; ++i) {
                                const float xhat = (x[i] - mean[c]) * inv_std[c];
                                d[i] += a * (g[i] - mg - xhat * mgx);
                            }
                        } else {
                            for (int64_t i = 0; i < int64_t(H) * W; ++i) d[i] += a * g[i];
                        }
                    }
                }
            }
        },
        "batchnorm2d");
}

}  // namespace acfseg
