#include "acfseg/graph.hpp"

#include <stdexcept>
#include <unordered_set>

namespace acfseg {

namespace {
bool g_finite_checks = false;
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

NodePtr constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

NodePtr parameter(Tensor value, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

NodePtr make_op(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn,
                const char* op_name) {
    if (g_finite_checks && !value.all_finite())
        throw std::runtime_error(std::string("non-finite values in output of ") + op_name);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

namespace {

// Iterative post-order DFS; the graph is a DAG by construction.
void topo_sort(const NodePtr& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const NodePtr& loss) {
    if (numel(loss->value.shape) != 1)
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    shape_str(loss->value.shape));
    if (!loss->requires_grad) return;

    std::vector<Node*> order;
    topo_sort(loss, order);

    loss->ensure_grad();
    loss->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
}

}  // namespace acfseg
