#include "emf/samplers.hpp"

#include "emf/objectives.hpp"

namespace emf {

Tensor drive_k_step(const FlowMapFn& phi, const Tensor& x0, int k) {
    contract(k >= 1, "drive_k_step: k must be >= 1");
    Tensor x = x0;
    for (int i = 0; i < k; ++i) {
        const double a = static_cast<double>(i) / k;
        const double b = static_cast<double>(i + 1) / k;
        x = phi(x, a, b);
    }
    return x;
}

Tensor drive_ode(const FieldFn& field, const Tensor& x0, int n_steps) {
    contract(n_steps >= 1, "drive_ode: n_steps must be >= 1");
    const double h = 1.0 / n_steps;
    Tensor x = x0;
    for (int i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) / n_steps;
        const Tensor f = field(x, t);
        for (std::size_t j = 0; j < x.numel(); ++j) x[j] += h * f[j];
    }
    return x;
}

Tensor sample_one_step(const FlowNetwork& net, const Tensor& x0, const std::vector<int>* cls,
                       const ParamSet* use) {
    const std::vector<double> zeros(x0.rows(), 0.0), ones(x0.rows(), 1.0);
    Tensor out = net.forward_values(x0, zeros, ones, cls, nullptr, use);
    if (net.cfg.prediction == PredictionKind::x1) return out; // the endpoint prediction itself
    return t_add(x0, out);
}

Tensor sample_k_step(const FlowNetwork& net, const Tensor& x0, int k, const std::vector<int>* cls,
                     const ParamSet* use) {
    return drive_k_step(
        [&](const Tensor& x, double a, double b) { return flow_map_values(net, x, a, b, cls, use); }, x0, k);
}

Tensor sample_ode(const FlowNetwork& net, const Tensor& x0, int n_steps, const std::vector<int>* cls,
                  const ParamSet* use) {
    return drive_ode(
        [&](const Tensor& x, double t) {
            const std::vector<double> ts(x.rows(), t);
            Tensor out = net.forward_values(x, ts, ts, cls, nullptr, use);
            if (net.cfg.prediction == PredictionKind::x1) {
                const double inv = 1.0 / clamped_gap(t);
                for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (out[i] - x[i]) * inv;
            }
            return out;
        },
        x0, n_steps);
}

} // namespace emf
