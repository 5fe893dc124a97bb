#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acfseg {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f32 tensor. The universal value type of the engine.
struct Tensor {
    Shape shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), 0.0f) {}
    Tensor(Shape s, float fill)
        : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), fill) {}
    Tensor(Shape s, std::vector<float> d);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 4-d accessors for the common B x C x H x W layout.
    float& at4(int b, int c, int h, int w) {
        return data[static_cast<size_t>(((int64_t(b) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    float at4(int b, int c, int h, int w) const {
        return data[static_cast<size_t>(((int64_t(b) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    float& at2(int r, int c) { return data[static_cast<size_t>(int64_t(r) * shape[1] + c)]; }
    float at2(int r, int c) const { return data[static_cast<size_t>(int64_t(r) * shape[1] + c)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

// Throws std::invalid_argument on mismatch; `what` names the operand.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace acfseg
