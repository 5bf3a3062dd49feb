#pragma once

#include "emf/flow_core.hpp"
#include "emf/network.hpp"

namespace emf {

struct ObjectiveConfig {
    double delta_t = 0.01;
    bool adaptive = false;         // adaptive loss weight 1/(||res||^2 + c)^p, constant under differentiation
    double adaptive_c = 1e-3;
    double adaptive_p = 1.0;
    bool time_weight = true;       // x1 objective: 1/max(1-t, 0.02)^2
    bool time_weight_use_r = false;
    double mu1 = 1.0, mu2 = 1.0;   // aux composite mix
    bool force_full_path = false;  // run the (t+dt, r) pass even when every row is clamped
    GuidanceConfig guidance;
};

struct ObjectiveReport {
    double loss = 0.0;
    std::vector<double> sq_err;    // per-sample squared residual norm (unweighted)
    std::vector<double> weight;    // per-sample weight used in the mean
    int r_equal_t = 0;
    int clamped_rows = 0;          // rows with (r - t - delta_t)_+ == 0
    bool bootstrap_pass_ran = false;
    double aux_fm_loss = 0.0;      // aux composite only
};

struct ObjectiveResult {
    ad::Value loss;                     // scalar root for backward()
    FlowNetwork::TapeBinding binding;   // parameter leaves of the trainable pass
    ObjectiveReport report;
};

// All objectives build the target side from plain (stop-gradient) forward
// passes — the whole target is constant under differentiation. `sg_params`
// optionally redirects those target-side passes to a different parameter set
// (used by the stop-gradient semantics tests); the trainable pass always uses
// the network's own parameters.

// Flow Matching. u-prediction: residual against the (possibly CFG-combined)
// conditional velocity at r = t. x1-prediction: residual against x1 with the
// time weight applied.
ObjectiveResult fm_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                        const ParamSet* sg_params = nullptr);

// Euler mean-flow objective (u-prediction): anchor + clamped bootstrap target.
ObjectiveResult emf_u_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                           const ParamSet* sg_params = nullptr);

// x1-prediction variant: endpoint anchor, (1-t)/(1-r) bootstrap scaling, time weight.
ObjectiveResult emf_x1_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                            const ParamSet* sg_params = nullptr);

// MeanFlow baseline: target v - (r-t) * d/dt u^theta via one jvp with tangent
// (v, 1, 0) over (x, t, r); target under stop-gradient.
ObjectiveResult meanflow_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                              const ParamSet* sg_params = nullptr);

// Aux composite: mu1 * (emf-style loss anchored on the detached aux output)
// + mu2 * flow matching on the aux head. One trunk forward serves both heads.
ObjectiveResult emf_aux_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                             const ParamSet* sg_params = nullptr);

// Approximated trajectory-consistency loss: emf_u structure with the model's
// own u_{t->t}(x) (stop-gradient) as anchor instead of the conditional velocity.
ObjectiveResult approx_consistency_loss(const FlowNetwork& net, const TrainingBatch& b,
                                        const ObjectiveConfig& oc, const ParamSet* sg_params = nullptr);

// Discrete consistency loss with s = t + dt, same stop-gradient placement as
// approx_consistency_loss (anchor u_{t->t+dt}); gradient target of the
// dt-order sweep.
ObjectiveResult euler_consistency_loss(const FlowNetwork& net, const TrainingBatch& b,
                                       const ObjectiveConfig& oc, const ParamSet* sg_params = nullptr);

// Exact two-hop trajectory-consistency residual (weight == 1) evaluated by
// composing reconstructed flow maps; x may hold several rows (mean is returned).
double consistency_loss(const FlowNetwork& net, const TimeTriple& triple, const Tensor& x,
                        const std::vector<int>* cls = nullptr, const ParamSet* use = nullptr);

// Mean consistency residual over a fixed evaluation protocol (n draws of
// (t,s,r,x_t) from the dataset's interpolant); rng passed by value on purpose.
double consistency_eval(const FlowNetwork& net, const DatasetConfig& data, int n, Rng rng,
                        const ParamSet* use = nullptr);

// flow map reconstructed from the network head: phi_{a->b}(x)
Tensor flow_map_values(const FlowNetwork& net, const Tensor& x, double a, double b,
                       const std::vector<int>* cls = nullptr, const ParamSet* use = nullptr);

} // namespace emf
