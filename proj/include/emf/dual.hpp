#pragma once

#include <functional>
#include <span>
#include <vector>

#include "emf/tensor.hpp"

// Forward-mode engine: dual tensors carry (value, directional derivative).
// Used for the MeanFlow target and the assumption monitors; never combined
// with reverse-mode except through stop-gradient boundaries.
namespace emf {

struct DualTensor {
    Tensor v; // primal
    Tensor d; // tangent, same shape

    static DualTensor constant(Tensor value) {
        Tensor zero = Tensor::zeros(value.shape());
        return {std::move(value), std::move(zero)};
    }
    static DualTensor seeded(Tensor value, Tensor tangent) {
        contract(value.same_shape(tangent), "DualTensor: value/tangent shape mismatch");
        return {std::move(value), std::move(tangent)};
    }
};

DualTensor d_add(const DualTensor& a, const DualTensor& b);
DualTensor d_sub(const DualTensor& a, const DualTensor& b);
DualTensor d_mul(const DualTensor& a, const DualTensor& b);
DualTensor d_smul(const DualTensor& a, double s);
DualTensor d_matmul(const DualTensor& a, const DualTensor& b);
DualTensor d_linear(const DualTensor& x, const DualTensor& w, const DualTensor& b);
DualTensor d_tanh(const DualTensor& a);
DualTensor d_silu(const DualTensor& a);
DualTensor d_sum(const DualTensor& a);
DualTensor d_mean(const DualTensor& a);
DualTensor d_row_sqnorm(const DualTensor& a);
DualTensor d_sqnorm(const DualTensor& a);
DualTensor d_concat_cols(const std::vector<DualTensor>& parts);
DualTensor d_gather_rows(const DualTensor& table, const std::vector<int>& idx);

// Jacobian-vector product of f at `inputs` along `tangents`
// (returns primal output and its directional derivative).
std::pair<Tensor, Tensor> jvp(const std::function<DualTensor(std::span<const DualTensor>)>& f,
                              const std::vector<Tensor>& inputs,
                              const std::vector<Tensor>& tangents);

// Central finite differences; the gradient oracle used by tests/validation.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double step);

} // namespace emf
