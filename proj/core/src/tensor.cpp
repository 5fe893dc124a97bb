#include "acfseg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace acfseg {

int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape != expected)
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(expected) +
                                    ", got " + shape_str(t.shape));
}

}  // namespace acfseg
