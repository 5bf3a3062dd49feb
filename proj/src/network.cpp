#include "emf/network.hpp"

#include <cmath>
#include <numbers>

namespace emf {

int NetworkConfig::feature_dim() const {
    int d = input_dim + 4 * time_features; // x plus sin/cos features for t and r
    if (num_classes > 0) d += hidden_width;
    return d;
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.numel();
    return n;
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const Tensor& t : tensors) out.insert(out.end(), t.raw().begin(), t.raw().end());
    return out;
}

Tensor time_features(std::span<const double> t, int freqs) {
    Tensor out({t.size(), static_cast<std::size_t>(2 * freqs)});
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (int j = 0; j < freqs; ++j) {
            const double w = std::ldexp(std::numbers::pi, j) * t[i]; // 2^j * pi * t
            out.at(i, 2 * j) = std::sin(w);
            out.at(i, 2 * j + 1) = std::cos(w);
        }
    }
    return out;
}

Tensor time_features_dt(std::span<const double> t, int freqs) {
    Tensor out({t.size(), static_cast<std::size_t>(2 * freqs)});
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (int j = 0; j < freqs; ++j) {
            const double f = std::ldexp(std::numbers::pi, j);
            out.at(i, 2 * j) = f * std::cos(f * t[i]);
            out.at(i, 2 * j + 1) = -f * std::sin(f * t[i]);
        }
    }
    return out;
}

ParamSet make_param_layout(const NetworkConfig& cfg) {
    contract(cfg.input_dim > 0 && cfg.hidden_width > 0 && cfg.depth >= 1 && cfg.time_features >= 1,
             "NetworkConfig: input_dim/hidden_width/time_features must be positive, depth >= 1");
    ParamSet p;
    const auto H = static_cast<std::size_t>(cfg.hidden_width);
    const auto D = static_cast<std::size_t>(cfg.input_dim);
    auto push = [&p](const std::string& name, std::vector<std::size_t> shape) {
        p.names.push_back(name);
        p.tensors.emplace_back(std::move(shape));
    };
    push("trunk.w0", {H, static_cast<std::size_t>(cfg.feature_dim())});
    push("trunk.b0", {H});
    for (int i = 1; i < cfg.depth; ++i) {
        push("trunk.w" + std::to_string(i), {H, H});
        push("trunk.b" + std::to_string(i), {H});
    }
    push("trunk.w_out", {D, H});
    push("trunk.b_out", {D});
    if (cfg.num_classes > 0) push("embed.table", {static_cast<std::size_t>(cfg.num_classes) + 1, H});
    for (int i = 0; i < cfg.aux_head_depth; ++i) {
        push("aux.w" + std::to_string(i), {H, H});
        push("aux.b" + std::to_string(i), {H});
    }
    if (cfg.aux_head_depth > 0) {
        push("aux.w_out", {D, H});
        push("aux.b_out", {D});
    }
    return p;
}

FlowNetwork FlowNetwork::init(const NetworkConfig& cfg, Rng& rng, FinalInit final_init) {
    FlowNetwork net;
    net.cfg = cfg;
    net.params = make_param_layout(cfg);
    for (std::size_t k = 0; k < net.params.count(); ++k) {
        const std::string& name = net.params.names[k];
        Tensor& t = net.params.tensors[k];
        const bool is_weight = name.find(".w") != std::string::npos;
        const bool is_out = name.ends_with("w_out") || name.ends_with("b_out");
        if (name == "embed.table") {
            const double s = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_width));
            for (double& x : t.raw()) x = s * rng.gauss();
        } else if (is_weight && (!is_out || final_init == FinalInit::random)) {
            const double fan_in = static_cast<double>(t.cols());
            const double s = std::sqrt(2.0 / fan_in);
            for (double& x : t.raw()) x = s * rng.gauss();
        }
        // biases and (by default) the output layers stay zero
    }
    return net;
}

namespace {

// one forward code path, three backends
struct PlainOps {
    using V = Tensor;
    static V lift(const Tensor& t) { return t; }
    static V linear(const V& x, const V& w, const V& b) { return t_linear(x, w, b); }
    static V tanh_act(const V& a) { return t_tanh(a); }
    static V silu_act(const V& a) { return t_silu(a); }
    static V concat(const std::vector<V>& p) { return t_concat_cols(p); }
    static V gather(const V& tab, const std::vector<int>& idx) { return t_gather_rows(tab, idx); }
};

struct TapeOps {
    using V = ad::Value;
    static V lift(const Tensor& t) { return ad::constant(t); }
    static V linear(const V& x, const V& w, const V& b) { return ad::linear(x, w, b); }
    static V tanh_act(const V& a) { return ad::tanh_op(a); }
    static V silu_act(const V& a) { return ad::silu_op(a); }
    static V concat(const std::vector<V>& p) { return ad::concat_cols(p); }
    static V gather(const V& tab, const std::vector<int>& idx) { return ad::gather_rows(tab, idx); }
};

struct DualOps {
    using V = DualTensor;
    static V lift(const Tensor& t) { return DualTensor::constant(t); }
    static V linear(const V& x, const V& w, const V& b) { return d_linear(x, w, b); }
    static V tanh_act(const V& a) { return d_tanh(a); }
    static V silu_act(const V& a) { return d_silu(a); }
    static V concat(const std::vector<V>& p) { return d_concat_cols(p); }
    static V gather(const V& tab, const std::vector<int>& idx) { return d_gather_rows(tab, idx); }
};

template <class Ops>
typename Ops::V run_trunk(const NetworkConfig& cfg, const std::vector<typename Ops::V>& params,
                          const typename Ops::V& x, const typename Ops::V& tf, const typename Ops::V& rf,
                          const std::vector<int>* cls, typename Ops::V* aux_out) {
    using V = typename Ops::V;
    std::size_t k = 0;
    std::vector<V> feats = {x, tf, rf};
    const std::size_t embed_index = static_cast<std::size_t>(2 * (cfg.depth + 1)); // after trunk params
    if (cfg.num_classes > 0) {
        contract(cls != nullptr, "conditional network requires class ids");
        feats.push_back(Ops::gather(params[embed_index], *cls));
    }
    V h = Ops::concat(feats);
    auto act = [&cfg](const V& a) {
        return cfg.activation == Activation::silu ? Ops::silu_act(a) : Ops::tanh_act(a);
    };
    for (int i = 0; i < cfg.depth; ++i) {
        h = act(Ops::linear(h, params[k], params[k + 1]));
        k += 2;
    }
    V out = Ops::linear(h, params[k], params[k + 1]);
    k += 2;
    if (cfg.num_classes > 0) k += 1; // skip embedding slot
    if (aux_out != nullptr) {
        contract(cfg.aux_head_depth > 0, "aux output requested but network has no aux head");
        V a = h; // shares the trunk's penultimate activation
        for (int i = 0; i < cfg.aux_head_depth; ++i) {
            a = act(Ops::linear(a, params[k], params[k + 1]));
            k += 2;
        }
        *aux_out = Ops::linear(a, params[k], params[k + 1]);
    }
    return out;
}

void check_batch(const NetworkConfig& cfg, const Tensor& x, std::span<const double> t,
                 std::span<const double> r, const std::vector<int>* cls) {
    contract(x.ndim() == 2 && x.cols() == static_cast<std::size_t>(cfg.input_dim),
             "forward: x must be (batch, " + std::to_string(cfg.input_dim) + "), got " + x.shape_str());
    contract(t.size() == x.rows() && r.size() == x.rows(), "forward: t/r length must match batch");
    if (cls != nullptr)
        contract(cls->size() == x.rows(), "forward: class ids length must match batch");
    for (std::size_t i = 0; i < t.size(); ++i)
        contract(t[i] >= 0.0 && t[i] <= 1.0 && r[i] >= 0.0 && r[i] <= 1.0,
                 "forward: times must lie in [0,1]");
}

} // namespace

Tensor FlowNetwork::forward_values(const Tensor& x, std::span<const double> t, std::span<const double> r,
                                   const std::vector<int>* cls, Tensor* aux_out, const ParamSet* use) const {
    check_batch(cfg, x, t, r, cls);
    const ParamSet& p = use ? *use : params;
    counters.trunk_forwards++;
    counters.value_forwards++;
    return run_trunk<PlainOps>(cfg, p.tensors, x, time_features(t, cfg.time_features),
                               time_features(r, cfg.time_features), cls, aux_out);
}

ad::Value FlowNetwork::forward_tape(TapeBinding& bind, const Tensor& x, std::span<const double> t,
                                    std::span<const double> r, const std::vector<int>* cls,
                                    ad::Value* aux_out, const ParamSet* use) const {
    check_batch(cfg, x, t, r, cls);
    const ParamSet& p = use ? *use : params;
    if (!bind.bound()) {
        bind.leaves.reserve(p.count());
        for (const Tensor& tens : p.tensors) bind.leaves.push_back(ad::leaf(tens));
    }
    contract(bind.leaves.size() == p.count(), "forward_tape: binding does not match parameter set");
    counters.trunk_forwards++;
    counters.tape_forwards++;
    return run_trunk<TapeOps>(cfg, bind.leaves, ad::constant(x),
                              ad::constant(time_features(t, cfg.time_features)),
                              ad::constant(time_features(r, cfg.time_features)), cls, aux_out);
}

DualTensor FlowNetwork::forward_dual(const Tensor& x, const Tensor& x_dot, std::span<const double> t,
                                     std::span<const double> t_dot, std::span<const double> r,
                                     std::span<const double> r_dot, const std::vector<int>* cls,
                                     const std::vector<Tensor>* param_tangents, DualTensor* aux_out,
                                     const ParamSet* use) const {
    check_batch(cfg, x, t, r, cls);
    contract(x_dot.same_shape(x), "forward_dual: x tangent shape mismatch");
    contract(t_dot.size() == t.size() && r_dot.size() == r.size(), "forward_dual: time tangent length mismatch");
    const ParamSet& p = use ? *use : params;

    std::vector<DualTensor> duals;
    duals.reserve(p.count());
    if (param_tangents != nullptr) {
        contract(param_tangents->size() == p.count(), "forward_dual: parameter tangent count mismatch");
        for (std::size_t i = 0; i < p.count(); ++i)
            duals.push_back(DualTensor::seeded(p.tensors[i], (*param_tangents)[i]));
    } else {
        for (const Tensor& tens : p.tensors) duals.push_back(DualTensor::constant(tens));
    }

    // chain rule through the sinusoidal features
    auto scale_rows = [](Tensor m, std::span<const double> s) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) *= s[i];
        return m;
    };
    DualTensor tf = DualTensor::seeded(time_features(t, cfg.time_features),
                                       scale_rows(time_features_dt(t, cfg.time_features), t_dot));
    DualTensor rf = DualTensor::seeded(time_features(r, cfg.time_features),
                                       scale_rows(time_features_dt(r, cfg.time_features), r_dot));

    counters.trunk_forwards++;
    counters.jvp_forwards++;
    return run_trunk<DualOps>(cfg, duals, DualTensor::seeded(x, x_dot), tf, rf, cls, aux_out);
}

std::vector<Tensor> FlowNetwork::collect_grads(const TapeBinding& bind, const ad::GradMap& grads) const {
    contract(bind.leaves.size() == params.count(), "collect_grads: unbound tape binding");
    std::vector<Tensor> out;
    out.reserve(params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
        const Tensor* g = ad::grad_of(grads, bind.leaves[i]);
        out.push_back(g ? *g : Tensor::zeros(params.tensors[i].shape()));
    }
    return out;
}

void EmaState::update(const ParamSet& live) {
    contract(shadow.count() == live.count(), "EmaState::update before init_from");
    for (std::size_t i = 0; i < live.count(); ++i) {
        Tensor& s = shadow.tensors[i];
        const Tensor& p = live.tensors[i];
        for (std::size_t j = 0; j < s.numel(); ++j) s[j] = decay * s[j] + (1.0 - decay) * p[j];
    }
}

} // namespace emf
