#pragma once

#include "emf/network.hpp"

namespace emf {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // decoupled
};

class Adam {
public:
    Adam(const AdamConfig& cfg, const ParamSet& params);

    void step(ParamSet& params, const std::vector<Tensor>& grads);

    // checkpoint access
    AdamConfig cfg;
    std::vector<Tensor> m, v;
    long step_count = 0;
};

} // namespace emf
