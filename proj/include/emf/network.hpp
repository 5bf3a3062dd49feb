#pragma once

#include <span>
#include <string>
#include <vector>

#include "emf/autodiff.hpp"
#include "emf/dual.hpp"
#include "emf/rng.hpp"
#include "emf/tensor.hpp"

namespace emf {

enum class Activation { silu, tanh };
enum class PredictionKind { u, x1 };

struct NetworkConfig {
    int input_dim = 2;
    int hidden_width = 128;
    int depth = 4;          // hidden layers
    int time_features = 6;  // sin/cos frequency pairs per time input
    Activation activation = Activation::silu;
    int num_classes = 0;    // 0 = unconditional; else classes 0..n-1 plus null label n
    int aux_head_depth = 0; // 0 = no auxiliary branch
    PredictionKind prediction = PredictionKind::u;

    int feature_dim() const; // width of the concatenated trunk input
    int null_label() const { return num_classes; }
};

struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    std::size_t count() const { return tensors.size(); }
    std::size_t total_size() const;
    std::vector<double> flatten() const;
};

// per-network evaluation bookkeeping (cost accounting)
struct EvalCounters {
    long trunk_forwards = 0; // trunk evaluations regardless of backend
    long tape_forwards = 0;  // trainable (graph-building) passes
    long value_forwards = 0; // stop-gradient passes
    long jvp_forwards = 0;   // forward-mode passes
    void reset() { *this = EvalCounters{}; }
};

// sinusoidal features: [sin(2^j pi t), cos(2^j pi t)] for j = 0..F-1, per sample
Tensor time_features(std::span<const double> t, int freqs);
Tensor time_features_dt(std::span<const double> t, int freqs); // elementwise d/dt

enum class FinalInit { zero, random }; // random final layer used by test/validation harnesses

// MLP over (x, t, r [, class]) predicting either mean velocity u_{t->r} or the
// flow-map endpoint x_tilde_{t->r}, depending on cfg.prediction. Forward passes
// exist in three backends sharing one code path: tape (trainable), plain value
// (stop-gradient role) and dual (jvp).
class FlowNetwork {
public:
    NetworkConfig cfg;
    ParamSet params;
    mutable EvalCounters counters;

    static FlowNetwork init(const NetworkConfig& cfg, Rng& rng, FinalInit final_init = FinalInit::zero);

    bool conditional() const { return cfg.num_classes > 0; }

    // stop-gradient forward: no graph, plain tensors
    Tensor forward_values(const Tensor& x, std::span<const double> t, std::span<const double> r,
                          const std::vector<int>* cls = nullptr, Tensor* aux_out = nullptr,
                          const ParamSet* use = nullptr) const;

    // trainable forward: parameter leaves live in the binding so gradients can
    // be looked up after backward(); reuse one binding to share leaves across
    // several forwards in the same graph
    struct TapeBinding {
        std::vector<ad::Value> leaves;
        bool bound() const { return !leaves.empty(); }
    };
    ad::Value forward_tape(TapeBinding& bind, const Tensor& x, std::span<const double> t,
                           std::span<const double> r, const std::vector<int>* cls = nullptr,
                           ad::Value* aux_out = nullptr, const ParamSet* use = nullptr) const;

    // forward-mode: tangents for x / t / r and optionally for the parameters
    DualTensor forward_dual(const Tensor& x, const Tensor& x_dot, std::span<const double> t,
                            std::span<const double> t_dot, std::span<const double> r,
                            std::span<const double> r_dot, const std::vector<int>* cls = nullptr,
                            const std::vector<Tensor>* param_tangents = nullptr,
                            DualTensor* aux_out = nullptr, const ParamSet* use = nullptr) const;

    // gradients aligned with params.tensors (zeros where no gradient flowed)
    std::vector<Tensor> collect_grads(const TapeBinding& bind, const ad::GradMap& grads) const;
};

// parameter layout helper shared by init / checkpoint code
ParamSet make_param_layout(const NetworkConfig& cfg);

struct EmaState {
    double decay = 0.999;
    ParamSet shadow;

    void init_from(const ParamSet& live) { shadow = live; }
    void update(const ParamSet& live);
};

} // namespace emf
