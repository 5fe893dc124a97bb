#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "acfseg/tensor.hpp"

namespace acfseg {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. `backward_fn` consumes this node's
// gradient and accumulates into the parents' gradients.
struct Node {
    Tensor value;
    Tensor grad;  // materialized lazily, same shape as value
    bool requires_grad = false;
    std::string name;  // non-empty for named parameters
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    bool has_grad() const { return !grad.shape.empty() || value.shape.empty(); }
    Tensor& ensure_grad() {
        if (grad.data.size() != value.data.size() || grad.shape != value.shape)
            grad = Tensor(value.shape);
        return grad;
    }
    void zero_grad() { grad = Tensor(); }
};

NodePtr constant(Tensor value);
NodePtr parameter(Tensor value, std::string name);

// Enables the all-values-finite check after each forward op. On by default
// in tests; training turns it on to get a named diagnostic on divergence.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Internal helper used by op implementations.
NodePtr make_op(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn,
                const char* op_name);

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively,
// so a node used twice receives the sum of both path gradients.
void backward(const NodePtr& loss);

}  // namespace acfseg
