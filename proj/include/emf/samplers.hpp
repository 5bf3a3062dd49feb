#pragma once

#include <functional>

#include "emf/network.hpp"

namespace emf {

// generic drivers (unit-tested against exact fields)
using FlowMapFn = std::function<Tensor(const Tensor& x, double a, double b)>; // phi_{a->b}
using FieldFn = std::function<Tensor(const Tensor& x, double t)>;             // instantaneous velocity

// composes phi over the uniform grid 0 = t_0 < ... < t_k = 1
Tensor drive_k_step(const FlowMapFn& phi, const Tensor& x0, int k);
// Euler integration: x <- x + h * f(x, t), h = 1/n
Tensor drive_ode(const FieldFn& field, const Tensor& x0, int n_steps);

// network-backed samplers (pass the EMA parameter set via `use` for inference)
Tensor sample_one_step(const FlowNetwork& net, const Tensor& x0, const std::vector<int>* cls = nullptr,
                       const ParamSet* use = nullptr);
Tensor sample_k_step(const FlowNetwork& net, const Tensor& x0, int k, const std::vector<int>* cls = nullptr,
                     const ParamSet* use = nullptr);
Tensor sample_ode(const FlowNetwork& net, const Tensor& x0, int n_steps, const std::vector<int>* cls = nullptr,
                  const ParamSet* use = nullptr);

} // namespace emf
