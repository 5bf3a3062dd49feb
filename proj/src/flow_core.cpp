#include "emf/flow_core.hpp"

#include <cmath>

namespace emf {

namespace {

double draw_time(Rng& rng, const TimeConfig& cfg) {
    if (cfg.dist == TimeDist::uniform) return rng.uniform();
    // lognormal schedule: normal draw squashed through the logistic
    const double z = cfg.mu + cfg.sigma * rng.gauss();
    return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

TimePair sample_time_pair(Rng& rng, const TimeConfig& cfg) {
    contract(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "TimeConfig: alpha must lie in [0,1]");
    if (rng.uniform() < cfg.alpha) {
        const double t = draw_time(rng, cfg);
        return {t, t};
    }
    double a = draw_time(rng, cfg);
    double b = draw_time(rng, cfg);
    if (a > b) std::swap(a, b);
    return {a, b};
}

TimeTriple make_time_triple(double t, double s, double r) {
    contract(0.0 <= t && t <= s && s <= r && r <= 1.0,
             "TimeTriple requires 0 <= t <= s <= r <= 1");
    return {t, s, r};
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, std::span<const double> t) {
    contract(x0.same_shape(x1), "interpolate: x0/x1 shape mismatch");
    contract(t.size() == x0.rows(), "interpolate: t length must match rows");
    Tensor out = x0;
    const std::size_t d = x0.cols();
    for (std::size_t i = 0; i < x0.rows(); ++i) {
        contract(t[i] >= 0.0 && t[i] <= 1.0, "interpolate: t must lie in [0,1]");
        for (std::size_t j = 0; j < d; ++j)
            out[i * d + j] = (1.0 - t[i]) * x0[i * d + j] + t[i] * x1[i * d + j];
    }
    return out;
}

Tensor conditional_velocity(const Tensor& x, const Tensor& x1, std::span<const double> t) {
    contract(x.same_shape(x1), "conditional_velocity: shape mismatch");
    contract(t.size() == x.rows(), "conditional_velocity: t length must match rows");
    Tensor out = x;
    const std::size_t d = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double inv = 1.0 / clamped_gap(t[i]);
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (x1[i * d + j] - x[i * d + j]) * inv;
    }
    return out;
}

namespace {

Tensor cfg_combine(const Tensor& un, const Tensor& cond, const Tensor& third, double w, double k) {
    contract(un.same_shape(cond) && un.same_shape(third), "cfg target: shape mismatch");
    Tensor out = un;
    const double a = 1.0 - w - k;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * un[i] + k * cond[i] + w * third[i];
    return out;
}

} // namespace

Tensor cfg_target_u(const Tensor& u_uncond, const Tensor& u_cond, const Tensor& v, double w, double k) {
    return cfg_combine(u_uncond, u_cond, v, w, k);
}

Tensor cfg_target_x1(const Tensor& x_uncond, const Tensor& x_cond, const Tensor& x1, double w, double k) {
    return cfg_combine(x_uncond, x_cond, x1, w, k);
}

TrainingBatch make_training_batch(const DatasetConfig& data, const TimeConfig& times,
                                  const GuidanceConfig& guidance, int batch, Rng& rng,
                                  int null_label) {
    contract(batch > 0, "make_training_batch: batch must be > 0");
    TrainingBatch b;
    b.x0 = Tensor({static_cast<std::size_t>(batch), 2});
    b.x1 = Tensor({static_cast<std::size_t>(batch), 2});
    b.t.resize(batch);
    b.r.resize(batch);
    if (data.labeled()) b.cls.resize(batch);

    for (int i = 0; i < batch; ++i) {
        DataBatch point = sample_data(data, rng, 1);
        b.x1.at(i, 0) = point.x.at(0, 0);
        b.x1.at(i, 1) = point.x.at(0, 1);
        b.x0.at(i, 0) = rng.gauss();
        b.x0.at(i, 1) = rng.gauss();
        const TimePair tp = sample_time_pair(rng, times);
        b.t[i] = tp.t;
        b.r[i] = tp.r;
        if (data.labeled()) {
            int label = point.labels[0];
            if (guidance.enabled && rng.bernoulli(guidance.dropout_prob)) label = null_label;
            b.cls[i] = label;
        }
    }
    b.xt = interpolate(b.x0, b.x1, b.t);
    return b;
}

} // namespace emf
