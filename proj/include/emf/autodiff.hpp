#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "emf/tensor.hpp"

// Reverse-mode engine. A graph is a DAG of shared_ptr<Node> built fresh for
// every training step; backward() walks it once and returns a gradient map.
// There is no global tape and no mutable engine state.
namespace emf::ad {

struct Node;
using Value = std::shared_ptr<Node>;

// Accumulates contributions into parent_grads (same order as self.parents,
// pre-zeroed to the parents' shapes).
using BackFn = std::function<void(const Node& self, const Tensor& g, std::vector<Tensor>& parent_grads)>;

struct Node {
    Tensor value;
    std::vector<Value> parents;
    BackFn back;             // empty for constants / leaves
    bool stop_grad = false;
};

Value constant(Tensor v);
inline Value leaf(Tensor v) { return constant(std::move(v)); } // parameters; grads looked up by node

// Identity forward; backward treats the node as a constant. Gradients of any
// ancestor reached only through here are exactly zero (the path is never walked).
Value stop_gradient(const Value& v);

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);          // elementwise
Value smul(const Value& a, double s);
Value matmul(const Value& a, const Value& b);
Value linear(const Value& x, const Value& w, const Value& b);
Value tanh_op(const Value& a);
Value silu_op(const Value& a);
Value sum_all(const Value& a);
Value mean_all(const Value& a);
Value row_sqnorm(const Value& a);                   // (B,D) -> (B)
Value sqnorm_all(const Value& a);                   // scalar
Value concat_cols(const std::vector<Value>& parts);
Value gather_rows(const Value& table, std::vector<int> idx);

using GradMap = std::unordered_map<const Node*, Tensor>;

// root must be scalar (contract violation otherwise). Pure: may be called
// repeatedly on the same graph with identical results.
GradMap backward(const Value& root);

// nullptr if v received no gradient (e.g. behind a stop_gradient)
const Tensor* grad_of(const GradMap& grads, const Value& v);

} // namespace emf::ad
