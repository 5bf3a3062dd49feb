#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "emf/datasets.hpp"
#include "emf/rng.hpp"
#include "emf/tensor.hpp"

namespace emf {

// every division by (1 - t) or (1 - r) is clamped at this floor
inline constexpr double kTimeClampEps = 0.02;
inline double clamped_gap(double t) { return std::max(1.0 - t, kTimeClampEps); }

// ---- time sampling ----------------------------------------------------------

enum class TimeDist { uniform, lognormal };

struct TimeConfig {
    TimeDist dist = TimeDist::uniform;
    double mu = -0.4;   // lognormal parameters, mapped through the logistic
    double sigma = 1.0;
    double alpha = 0.5; // fraction of samples with r = t
};

struct TimePair {
    double t = 0.0, r = 0.0; // invariant t <= r
};

TimePair sample_time_pair(Rng& rng, const TimeConfig& cfg);

struct TimeTriple {
    double t, s, r;
};
// contract: t <= s <= r, all within [0,1]
TimeTriple make_time_triple(double t, double s, double r);

// ---- interpolant and velocities ---------------------------------------------

// x_t = (1 - t) x0 + t x1, row i uses t[i]
Tensor interpolate(const Tensor& x0, const Tensor& x1, std::span<const double> t);

// u_t(x | x1) = (x1 - x) / max(1 - t, 0.02)
Tensor conditional_velocity(const Tensor& x, const Tensor& x1, std::span<const double> t);

// ---- classifier-free guidance -------------------------------------------------

struct GuidanceConfig {
    bool enabled = false;
    double w = 1.0;
    double k = 0.0;
    double dropout_prob = 0.1;

    // documented effective guidance scale
    double effective_scale() const {
        contract(k < 1.0, "guidance: k must be < 1");
        return w / (1.0 - k);
    }
};

// (1 - w - k) * u_uncond + k * u_cond + w * v,  rowwise
Tensor cfg_target_u(const Tensor& u_uncond, const Tensor& u_cond, const Tensor& v, double w, double k);
// (1 - w - k) * x_uncond + k * x_cond + w * x1, rowwise
Tensor cfg_target_x1(const Tensor& x_uncond, const Tensor& x_cond, const Tensor& x1, double w, double k);

// ---- training batches ---------------------------------------------------------

struct TrainingBatch {
    Tensor x0, x1, xt;            // (B, 2) each
    std::vector<double> t, r;
    std::vector<int> cls;         // effective labels (dropout applied); empty when unconditional
    std::size_t size() const { return t.size(); }
};

// Draw order per sample is fixed (x1, x0, time pair, dropout) so a batch is a
// pure function of the incoming RNG state. Dropout replaces a label with the
// null label `null_label` with probability guidance.dropout_prob, only when
// guidance is enabled.
TrainingBatch make_training_batch(const DatasetConfig& data, const TimeConfig& times,
                                  const GuidanceConfig& guidance, int batch, Rng& rng,
                                  int null_label);

} // namespace emf
