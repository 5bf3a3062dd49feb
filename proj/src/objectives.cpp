#include "emf/objectives.hpp"

#include <cmath>

namespace emf {

namespace {

const std::vector<int>* batch_classes(const FlowNetwork& net, const TrainingBatch& b) {
    if (!net.conditional()) return nullptr;
    contract(b.cls.size() == b.size(), "conditional network requires a labeled batch");
    return &b.cls;
}

// residual reduction shared by every objective: loss = mean_i w_i * ||pred_i - target_i||^2
struct Reduction {
    ad::Value node;
    std::vector<double> sq_err;
    std::vector<double> weight;
};

Reduction reduce_weighted(const FlowNetwork& net, const ad::Value& pred, const Tensor& target,
                          std::vector<double> base_weight, const ObjectiveConfig& oc, bool allow_adaptive) {
    Reduction red;
    ad::Value rows = ad::row_sqnorm(ad::sub(pred, ad::constant(target)));
    red.sq_err = rows->value.raw();
    red.weight = std::move(base_weight);
    if (allow_adaptive && oc.adaptive) {
        for (std::size_t i = 0; i < red.weight.size(); ++i)
            red.weight[i] /= std::pow(red.sq_err[i] + oc.adaptive_c, oc.adaptive_p);
    }
    red.node = ad::mean_all(ad::mul(rows, ad::constant(Tensor::from_vector(red.weight))));
    (void)net;
    return red;
}

std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

std::vector<double> x1_time_weights(const TrainingBatch& b, const ObjectiveConfig& oc) {
    std::vector<double> w(b.size(), 1.0);
    if (!oc.time_weight) return w;
    const std::vector<double>& times = oc.time_weight_use_r ? b.r : b.t;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = clamped_gap(times[i]);
        w[i] = 1.0 / (g * g);
    }
    return w;
}

void count_rows(const TrainingBatch& b, double dt, ObjectiveReport& rep) {
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b.r[i] == b.t[i]) rep.r_equal_t++;
        if (b.r[i] - b.t[i] - dt <= 0.0) rep.clamped_rows++;
    }
}

std::vector<int> null_labels(const FlowNetwork& net, std::size_t n) {
    return std::vector<int>(n, net.cfg.null_label());
}

// x' = x + dt * field (rowwise)
Tensor euler_shift(const Tensor& x, const Tensor& field, double dt) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += dt * field[i];
    return out;
}

void check_common(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc) {
    contract(b.size() > 0, "objective: empty batch");
    contract(oc.delta_t > 0.0, "objective: delta_t must be > 0");
    if (oc.guidance.enabled)
        contract(net.conditional(), "guidance requires a conditional network");
    for (std::size_t i = 0; i < b.size(); ++i)
        contract(b.t[i] <= b.r[i], "objective: requires t <= r per sample");
}

enum class UAnchor {
    data,       // conditional velocity (possibly CFG-combined)  -> emf_u / fm reduction
    model_t,    // u_{t->t}(x) under stop-gradient               -> approximated consistency
    model_t_dt, // u_{t->t+dt}(x) under stop-gradient            -> discrete consistency (sweep)
};

ObjectiveResult emf_u_core(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                           UAnchor mode, const ParamSet* sgp) {
    contract(net.cfg.prediction == PredictionKind::u, "u-prediction objective on x1-prediction network");
    check_common(net, b, oc);
    const std::size_t n = b.size();
    const std::vector<int>* cls = batch_classes(net, b);

    ObjectiveResult res;
    ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.r, cls);
    const Tensor& main_val = main->value;

    // target-side (stop-gradient) passes
    Tensor anchor, step_field;
    std::vector<double> t_shift(n);
    for (std::size_t i = 0; i < n; ++i) t_shift[i] = std::min(b.t[i] + oc.delta_t, 1.0);

    switch (mode) {
        case UAnchor::data: {
            Tensor u_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
            Tensor v = conditional_velocity(b.xt, b.x1, b.t);
            if (oc.guidance.enabled) {
                const std::vector<int> nulls = null_labels(net, n);
                Tensor u_un = net.forward_values(b.xt, b.t, b.t, &nulls, nullptr, sgp);
                v = cfg_target_u(u_un, u_tt, v, oc.guidance.w, oc.guidance.k);
            }
            anchor = std::move(v);
            step_field = std::move(u_tt);
            break;
        }
        case UAnchor::model_t: {
            Tensor u_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
            anchor = u_tt;
            step_field = std::move(u_tt);
            break;
        }
        case UAnchor::model_t_dt: {
            Tensor u_td = net.forward_values(b.xt, b.t, t_shift, cls, nullptr, sgp);
            anchor = u_td;
            step_field = std::move(u_td);
            break;
        }
    }

    // bootstrap term, clamped at zero for r - t <= dt
    std::vector<double> clamp(n);
    bool any_active = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = b.r[i] - b.t[i] - oc.delta_t;
        clamp[i] = c > 0.0 ? c : 0.0;
        any_active = any_active || clamp[i] > 0.0;
    }

    Tensor target = anchor;
    if (any_active || oc.force_full_path) {
        const Tensor xp = euler_shift(b.xt, step_field, oc.delta_t);
        const Tensor u3 = net.forward_values(xp, t_shift, b.r, cls, nullptr, sgp);
        res.report.bootstrap_pass_ran = true;
        const std::size_t d = target.cols();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                target[i * d + j] = anchor[i * d + j] + clamp[i] * (u3[i * d + j] - main_val[i * d + j]) / oc.delta_t;
    }

    Reduction red = reduce_weighted(net, main, target, unit_weights(n), oc, true);
    res.loss = red.node;
    res.report.loss = red.node->value.item();
    res.report.sq_err = std::move(red.sq_err);
    res.report.weight = std::move(red.weight);
    count_rows(b, oc.delta_t, res.report);
    return res;
}

} // namespace

ObjectiveResult fm_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                        const ParamSet* sgp) {
    check_common(net, b, oc);
    const std::size_t n = b.size();
    const std::vector<int>* cls = batch_classes(net, b);
    ObjectiveResult res;

    if (net.cfg.prediction == PredictionKind::u) {
        ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.t, cls);
        Tensor v = conditional_velocity(b.xt, b.x1, b.t);
        if (oc.guidance.enabled) {
            const std::vector<int> nulls = null_labels(net, n);
            Tensor u_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
            Tensor u_un = net.forward_values(b.xt, b.t, b.t, &nulls, nullptr, sgp);
            v = cfg_target_u(u_un, u_tt, v, oc.guidance.w, oc.guidance.k);
        }
        Reduction red = reduce_weighted(net, main, v, unit_weights(n), oc, true);
        res.loss = red.node;
        res.report.loss = red.node->value.item();
        res.report.sq_err = std::move(red.sq_err);
        res.report.weight = std::move(red.weight);
    } else {
        ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.t, cls);
        Tensor tgt = b.x1;
        if (oc.guidance.enabled) {
            const std::vector<int> nulls = null_labels(net, n);
            Tensor x_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
            Tensor x_un = net.forward_values(b.xt, b.t, b.t, &nulls, nullptr, sgp);
            tgt = cfg_target_x1(x_un, x_tt, b.x1, oc.guidance.w, oc.guidance.k);
        }
        Reduction red = reduce_weighted(net, main, tgt, x1_time_weights(b, oc), oc, true);
        res.loss = red.node;
        res.report.loss = red.node->value.item();
        res.report.sq_err = std::move(red.sq_err);
        res.report.weight = std::move(red.weight);
    }
    count_rows(b, oc.delta_t, res.report);
    return res;
}

ObjectiveResult emf_u_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                           const ParamSet* sgp) {
    return emf_u_core(net, b, oc, UAnchor::data, sgp);
}

ObjectiveResult approx_consistency_loss(const FlowNetwork& net, const TrainingBatch& b,
                                        const ObjectiveConfig& oc, const ParamSet* sgp) {
    return emf_u_core(net, b, oc, UAnchor::model_t, sgp);
}

ObjectiveResult euler_consistency_loss(const FlowNetwork& net, const TrainingBatch& b,
                                       const ObjectiveConfig& oc, const ParamSet* sgp) {
    return emf_u_core(net, b, oc, UAnchor::model_t_dt, sgp);
}

ObjectiveResult emf_x1_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                            const ParamSet* sgp) {
    contract(net.cfg.prediction == PredictionKind::x1, "emf_x1_loss requires an x1-prediction network");
    check_common(net, b, oc);
    const std::size_t n = b.size();
    const std::vector<int>* cls = batch_classes(net, b);

    ObjectiveResult res;
    ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.r, cls);
    const Tensor& main_val = main->value;

    Tensor x_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
    Tensor anchor = b.x1;
    if (oc.guidance.enabled) {
        const std::vector<int> nulls = null_labels(net, n);
        Tensor x_un = net.forward_values(b.xt, b.t, b.t, &nulls, nullptr, sgp);
        anchor = cfg_target_x1(x_un, x_tt, b.x1, oc.guidance.w, oc.guidance.k);
    }

    std::vector<double> clamp(n), t_shift(n);
    bool any_active = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = b.r[i] - b.t[i] - oc.delta_t;
        clamp[i] = c > 0.0 ? c : 0.0;
        any_active = any_active || clamp[i] > 0.0;
        t_shift[i] = std::min(b.t[i] + oc.delta_t, 1.0);
    }

    Tensor target = anchor;
    if (any_active || oc.force_full_path) {
        // x' = x + dt * (x_tilde_{t->t}(x) - x) / max(1-t, 0.02)
        Tensor xp = b.xt;
        const std::size_t d = xp.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const double inv = oc.delta_t / clamped_gap(b.t[i]);
            for (std::size_t j = 0; j < d; ++j) xp[i * d + j] += inv * (x_tt[i * d + j] - b.xt[i * d + j]);
        }
        const Tensor x3 = net.forward_values(xp, t_shift, b.r, cls, nullptr, sgp);
        res.report.bootstrap_pass_ran = true;
        const std::size_t dd = target.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = clamp[i] * (clamped_gap(b.t[i]) / clamped_gap(b.r[i])) / oc.delta_t;
            for (std::size_t j = 0; j < dd; ++j)
                target[i * dd + j] = anchor[i * dd + j] + scale * (x3[i * dd + j] - main_val[i * dd + j]);
        }
    }

    Reduction red = reduce_weighted(net, main, target, x1_time_weights(b, oc), oc, true);
    res.loss = red.node;
    res.report.loss = red.node->value.item();
    res.report.sq_err = std::move(red.sq_err);
    res.report.weight = std::move(red.weight);
    count_rows(b, oc.delta_t, res.report);
    return res;
}

ObjectiveResult meanflow_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                              const ParamSet* sgp) {
    contract(net.cfg.prediction == PredictionKind::u, "meanflow_loss requires a u-prediction network");
    check_common(net, b, oc);
    const std::size_t n = b.size();
    const std::vector<int>* cls = batch_classes(net, b);

    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    if (oc.guidance.enabled) {
        const std::vector<int> nulls = null_labels(net, n);
        Tensor u_tt = net.forward_values(b.xt, b.t, b.t, cls, nullptr, sgp);
        Tensor u_un = net.forward_values(b.xt, b.t, b.t, &nulls, nullptr, sgp);
        v = cfg_target_u(u_un, u_tt, v, oc.guidance.w, oc.guidance.k);
    }

    // one jvp along (v, 1, 0) gives the total derivative d/dt u^theta_{t->r}(x_t)
    const std::vector<double> ones(n, 1.0), zeros(n, 0.0);
    const ParamSet& sg_set = sgp ? *sgp : net.params;
    DualTensor ju = net.forward_dual(b.xt, v, b.t, ones, b.r, zeros, cls, nullptr, nullptr, &sg_set);

    Tensor target = v;
    const std::size_t d = target.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = b.r[i] - b.t[i];
        for (std::size_t j = 0; j < d; ++j) target[i * d + j] = v[i * d + j] - gap * ju.d[i * d + j];
    }

    ObjectiveResult res;
    ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.r, cls);
    Reduction red = reduce_weighted(net, main, target, unit_weights(n), oc, true);
    res.loss = red.node;
    res.report.loss = red.node->value.item();
    res.report.sq_err = std::move(red.sq_err);
    res.report.weight = std::move(red.weight);
    count_rows(b, oc.delta_t, res.report);
    return res;
}

ObjectiveResult emf_aux_loss(const FlowNetwork& net, const TrainingBatch& b, const ObjectiveConfig& oc,
                             const ParamSet* sgp) {
    contract(net.cfg.prediction == PredictionKind::u, "emf_aux_loss requires a u-prediction network");
    contract(net.cfg.aux_head_depth > 0, "emf_aux_loss requires a network with an aux head");
    contract(!oc.guidance.enabled, "emf_aux_loss does not support guidance");
    check_common(net, b, oc);
    const std::size_t n = b.size();
    const std::vector<int>* cls = batch_classes(net, b);

    ObjectiveResult res;
    ad::Value aux;
    ad::Value main = net.forward_tape(res.binding, b.xt, b.t, b.r, cls, &aux); // one trunk pass, both heads
    const Tensor& main_val = main->value;
    const Tensor anchor = aux->value; // detached aux prediction of u_{t->t}

    std::vector<double> clamp(n), t_shift(n);
    bool any_active = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = b.r[i] - b.t[i] - oc.delta_t;
        clamp[i] = c > 0.0 ? c : 0.0;
        any_active = any_active || clamp[i] > 0.0;
        t_shift[i] = std::min(b.t[i] + oc.delta_t, 1.0);
    }

    Tensor target = anchor;
    if (any_active || oc.force_full_path) {
        const Tensor xp = euler_shift(b.xt, anchor, oc.delta_t);
        const Tensor u3 = net.forward_values(xp, t_shift, b.r, cls, nullptr, sgp);
        res.report.bootstrap_pass_ran = true;
        const std::size_t d = target.cols();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                target[i * d + j] = anchor[i * d + j] + clamp[i] * (u3[i * d + j] - main_val[i * d + j]) / oc.delta_t;
    }

    Reduction red = reduce_weighted(net, main, target, unit_weights(n), oc, true);
    const Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    ad::Value aux_rows = ad::row_sqnorm(ad::sub(aux, ad::constant(v)));
    ad::Value aux_term = ad::mean_all(aux_rows);

    res.loss = ad::add(ad::smul(red.node, oc.mu1), ad::smul(aux_term, oc.mu2));
    res.report.loss = res.loss->value.item();
    res.report.sq_err = std::move(red.sq_err);
    res.report.weight = std::move(red.weight);
    res.report.aux_fm_loss = aux_term->value.item();
    count_rows(b, oc.delta_t, res.report);
    return res;
}

Tensor flow_map_values(const FlowNetwork& net, const Tensor& x, double a, double bt,
                       const std::vector<int>* cls, const ParamSet* use) {
    const std::vector<double> ta(x.rows(), a), tb(x.rows(), bt);
    Tensor out = net.forward_values(x, ta, tb, cls, nullptr, use);
    Tensor phi = x;
    const std::size_t d = x.cols();
    if (net.cfg.prediction == PredictionKind::u) {
        for (std::size_t i = 0; i < phi.numel(); ++i) phi[i] += (bt - a) * out[i];
    } else {
        const double scale = (bt - a) / clamped_gap(a);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                phi[i * d + j] += scale * (out[i * d + j] - x[i * d + j]);
    }
    return phi;
}

double consistency_loss(const FlowNetwork& net, const TimeTriple& triple, const Tensor& x,
                        const std::vector<int>* cls, const ParamSet* use) {
    const Tensor direct = flow_map_values(net, x, triple.t, triple.r, cls, use);
    const Tensor hop = flow_map_values(net, flow_map_values(net, x, triple.t, triple.s, cls, use),
                                       triple.s, triple.r, cls, use);
    return t_mean(t_row_sqnorm(t_sub(direct, hop))).item();
}

double consistency_eval(const FlowNetwork& net, const DatasetConfig& data, int n, Rng rng,
                        const ParamSet* use) {
    contract(n > 0, "consistency_eval: n must be > 0");
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const DataBatch pt = sample_data(data, rng, 1);
        Tensor x0({1, 2});
        x0[0] = rng.gauss();
        x0[1] = rng.gauss();
        double a = rng.uniform(), bm = rng.uniform(), c = rng.uniform();
        if (a > bm) std::swap(a, bm);
        if (bm > c) std::swap(bm, c);
        if (a > bm) std::swap(a, bm);
        const std::vector<double> tv = {a};
        const Tensor xt = interpolate(x0, pt.x, tv);
        std::vector<int> lab;
        const std::vector<int>* cls = nullptr;
        if (net.conditional() && !pt.labels.empty()) {
            lab = pt.labels;
            cls = &lab;
        }
        acc += consistency_loss(net, make_time_triple(a, bm, c), xt, cls, use);
    }
    return acc / n;
}

} // namespace emf
