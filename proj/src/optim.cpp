#include "emf/optim.hpp"

#include <cmath>

namespace emf {

Adam::Adam(const AdamConfig& c, const ParamSet& params) : cfg(c) {
    m.reserve(params.count());
    v.reserve(params.count());
    for (const Tensor& t : params.tensors) {
        m.push_back(Tensor::zeros(t.shape()));
        v.push_back(Tensor::zeros(t.shape()));
    }
}

void Adam::step(ParamSet& params, const std::vector<Tensor>& grads) {
    contract(grads.size() == params.count() && m.size() == params.count(),
             "Adam::step: gradient/parameter count mismatch");
    step_count++;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
    for (std::size_t k = 0; k < params.count(); ++k) {
        Tensor& p = params.tensors[k];
        contract(grads[k].same_shape(p), "Adam::step: gradient shape mismatch at " + params.names[k]);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double g = grads[k][i];
            m[k][i] = cfg.beta1 * m[k][i] + (1.0 - cfg.beta1) * g;
            v[k][i] = cfg.beta2 * v[k][i] + (1.0 - cfg.beta2) * g * g;
            const double mh = m[k][i] / bc1;
            const double vh = v[k][i] / bc2;
            p[i] -= cfg.lr * (mh / (std::sqrt(vh) + cfg.eps) + cfg.weight_decay * p[i]);
        }
    }
}

} // namespace emf
