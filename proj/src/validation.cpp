#include "emf/validation.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "emf/optim.hpp"

namespace emf {

namespace {

Tensor random_unit(std::size_t dim, Rng& rng) {
    Tensor v({dim});
    double n2 = 0.0;
    do {
        for (std::size_t i = 0; i < dim; ++i) v[i] = rng.gauss();
        n2 = t_sqnorm(v).item();
    } while (n2 <= 0.0);
    double inv = 1.0 / std::sqrt(n2);
    for (std::size_t i = 0; i < dim; ++i) v[i] *= inv;
    return v;
}

std::vector<Tensor> unflatten_like(const ParamSet& ps, const Tensor& flat) {
    contract(flat.numel() == ps.total_size(), "unflatten: size mismatch");
    std::vector<Tensor> out;
    out.reserve(ps.count());
    std::size_t off = 0;
    for (const Tensor& p : ps.tensors) {
        Tensor t(p.shape());
        for (std::size_t i = 0; i < p.numel(); ++i) t[i] = flat[off + i];
        off += p.numel();
        out.push_back(std::move(t));
    }
    return out;
}

Tensor row_of(const Tensor& m, std::size_t i) {
    Tensor r({1, m.cols()});
    for (std::size_t j = 0; j < m.cols(); ++j) r.at(0, j) = m.at(i, j);
    return r;
}

std::vector<double> flat_gradient(const FlowNetwork& net, ObjectiveResult res) {
    ad::GradMap gm = ad::backward(res.loss);
    std::vector<Tensor> per_param = net.collect_grads(res.binding, gm);
    std::vector<double> flat;
    flat.reserve(net.params.total_size());
    for (const Tensor& g : per_param)
        for (double v : g.raw()) flat.push_back(v);
    return flat;
}

} // namespace

double estimate_spectral_norm(const std::function<Tensor(const Tensor&)>& action, std::size_t dim,
                              int n1, Rng& rng) {
    contract(dim > 0, "estimate_spectral_norm: dim must be positive");
    contract(n1 > 0, "estimate_spectral_norm: n1 must be positive");
    double best = 0.0;
    for (int i = 0; i < n1; ++i) {
        Tensor out = action(random_unit(dim, rng));
        best = std::max(best, std::sqrt(t_sqnorm(out).item()));
    }
    return best;
}

double power_iteration_norm(const Tensor& mat, int iters) {
    contract(mat.ndim() == 2, "power_iteration_norm: matrix expected");
    contract(iters > 0, "power_iteration_norm: iters must be positive");
    std::size_t n = mat.rows(), m = mat.cols();
    // deterministic, mildly asymmetric start so it is not orthogonal to the top direction
    std::vector<double> v(m);
    for (std::size_t j = 0; j < m; ++j) v[j] = 1.0 + 1e-3 * static_cast<double>(j);
    std::vector<double> w(n);
    double est = 0.0;
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += mat.at(i, j) * v[j];
            w[i] = s;
        }
        double wn = 0.0;
        for (double x : w) wn += x * x;
        est = std::sqrt(wn);
        if (est == 0.0) return 0.0; // v in the null space; matrix may still be nonzero, but
                                    // this only happens for the zero matrix with our start
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += mat.at(i, j) * w[i];
            v[j] = s;
        }
        double vn = 0.0;
        for (double x : v) vn += x * x;
        vn = std::sqrt(vn);
        if (vn == 0.0) return 0.0;
        for (double& x : v) x /= vn;
    }
    return est;
}

bool AssumptionReport::finite() const {
    return std::isfinite(m_g) && std::isfinite(m_x) && std::isfinite(m_t);
}

AssumptionReport estimate_assumption_constants(const FlowNetwork& net, const DatasetConfig& data,
                                               const ValidationConfig& vc, Rng& rng) {
    contract(vc.n1 > 0 && vc.n2 > 0, "assumption constants: n1, n2 must be positive");
    contract(vc.delta_t > 0.0, "assumption constants: delta_t must be positive");

    const bool primed = net.cfg.prediction == PredictionKind::x1;
    const std::size_t m = net.params.total_size();
    const std::vector<double> zero1{0.0};
    const std::vector<double> one1{1.0};
    const Tensor xdot0 = Tensor::zeros({1, 2});

    double acc_g = 0.0, acc_x = 0.0, acc_t = 0.0, acc_pref = 0.0;
    for (int draw = 0; draw < vc.n2; ++draw) {
        DataBatch db = sample_data(data, rng, 1);
        std::vector<int> cls;
        const std::vector<int>* clsp = nullptr;
        if (!db.labels.empty()) {
            cls = db.labels;
            clsp = &cls;
        }
        double a = rng.uniform(), b = rng.uniform();
        double t = std::min(a, b), r = std::max(a, b);
        Tensor x0 = Tensor::randn({1, 2}, rng);
        const std::vector<double> tv{t}, rv{r};
        Tensor xt = interpolate(x0, db.x, tv);

        auto act_g = [&](const Tensor& v) {
            std::vector<Tensor> tang = unflatten_like(net.params, v);
            return net.forward_dual(xt, xdot0, tv, zero1, rv, zero1, clsp, &tang).d;
        };
        double sg = estimate_spectral_norm(act_g, m, vc.n1, rng);
        acc_g += sg * sg / static_cast<double>(m);

        // one Euler step of the reconstructed field, then the spatial Jacobian there
        Tensor head = net.forward_values(xt, tv, tv, clsp);
        Tensor xp = xt;
        if (primed) {
            double g = clamped_gap(t);
            for (std::size_t j = 0; j < 2; ++j)
                xp.at(0, j) += vc.delta_t * (head.at(0, j) - xt.at(0, j)) / g;
        } else {
            for (std::size_t j = 0; j < 2; ++j) xp.at(0, j) += vc.delta_t * head.at(0, j);
        }
        const std::vector<double> t3v{std::min(t + vc.delta_t, 1.0)};
        auto act_x = [&](const Tensor& v) {
            Tensor vr = Tensor::matrix(1, 2, {v[0], v[1]});
            return net.forward_dual(xp, vr, t3v, zero1, rv, zero1, clsp).d;
        };
        double sx = estimate_spectral_norm(act_x, 2, vc.n1, rng);
        acc_x += sx * sx;
        acc_pref += 1.0 / clamped_gap(r);

        DualTensor ds = net.forward_dual(xt, xdot0, tv, zero1, tv, one1, clsp);
        acc_t += t_sqnorm(ds.d).item();
    }

    AssumptionReport rep;
    const double n2d = static_cast<double>(vc.n2);
    rep.m_g = std::sqrt(acc_g / n2d);
    const double base_x = std::sqrt(acc_x / n2d);
    rep.m_x = primed ? (acc_pref / n2d) * base_x : base_x;
    rep.m_t = std::sqrt(acc_t / n2d);
    rep.primed = primed;
    rep.prefactor_form = primed ? "outside_sqrt" : "none";
    rep.n1 = vc.n1;
    rep.n2 = vc.n2;
    rep.delta_t = vc.delta_t;
    return rep;
}

GradCheckReport gradient_rmse(const FlowNetwork& net, const TrainingBatch& batch,
                              const ObjectiveFn& loss_a, const ObjectiveFn& loss_b,
                              bool lemma_bound) {
    std::vector<double> ga = flat_gradient(net, loss_a(net, batch));
    std::vector<double> gb = flat_gradient(net, loss_b(net, batch));
    contract(ga.size() == gb.size() && !ga.empty(), "gradient_rmse: gradient size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
        double d = ga[i] - gb[i];
        acc += d * d;
    }
    GradCheckReport rep;
    rep.rmse = std::sqrt(acc / static_cast<double>(ga.size()));
    if (lemma_bound) {
        rep.bound = anchor_gap_bound(net, batch);
        rep.has_bound = true;
        rep.pass = rep.rmse <= rep.bound;
    } else {
        rep.pass = std::isfinite(rep.rmse);
    }
    return rep;
}

double anchor_gap_bound(const FlowNetwork& net, const TrainingBatch& batch) {
    contract(net.cfg.prediction == PredictionKind::u, "anchor_gap_bound: u-prediction networks only");
    const std::size_t B = batch.size();
    contract(B > 0, "anchor_gap_bound: empty batch");
    const std::size_t m = net.params.total_size();

    double acc_sig = 0.0, acc_gap = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        Tensor xi = row_of(batch.xt, i);
        const std::vector<double> tv{batch.t[i]}, rv{batch.r[i]};
        std::vector<int> cls;
        const std::vector<int>* clsp = nullptr;
        if (!batch.cls.empty()) {
            cls = {batch.cls[i]};
            clsp = &cls;
        }
        // exact spectral norm of the (2 x m) parameter Jacobian from the 2x2
        // Gram matrix of its rows; each row is one reverse pass through the tape
        FlowNetwork::TapeBinding bind;
        ad::Value out = net.forward_tape(bind, xi, tv, rv, clsp);
        std::array<std::vector<double>, 2> rows;
        for (int k = 0; k < 2; ++k) {
            Tensor ek = Tensor::zeros({1, 2});
            ek[static_cast<std::size_t>(k)] = 1.0;
            ad::GradMap gm = ad::backward(ad::sum_all(ad::mul(out, ad::constant(ek))));
            std::vector<Tensor> per_param = net.collect_grads(bind, gm);
            rows[static_cast<std::size_t>(k)].reserve(m);
            for (const Tensor& g : per_param)
                for (double gv : g.raw()) rows[static_cast<std::size_t>(k)].push_back(gv);
        }
        double g00 = 0.0, g01 = 0.0, g11 = 0.0;
        for (std::size_t j = 0; j < rows[0].size(); ++j) {
            g00 += rows[0][j] * rows[0][j];
            g01 += rows[0][j] * rows[1][j];
            g11 += rows[1][j] * rows[1][j];
        }
        const double mid = 0.5 * (g00 + g11);
        const double rad = std::sqrt(0.25 * (g00 - g11) * (g00 - g11) + g01 * g01);
        acc_sig += (mid + rad) / static_cast<double>(m);

        Tensor utt = net.forward_values(xi, tv, tv, clsp);
        Tensor x1i = row_of(batch.x1, i);
        Tensor v = conditional_velocity(xi, x1i, tv);
        acc_gap += t_sqnorm(t_sub(utt, v)).item();
    }
    const double Bd = static_cast<double>(B);
    // the compared losses are squared errors, so their gradients carry a factor
    // 2 relative to the per-residual Jacobian products the bound is built from
    return 2.0 * std::sqrt(acc_sig / Bd) * std::sqrt(acc_gap / Bd);
}

TrainingBatch make_sweep_batch(const DatasetConfig& data, int batch, Rng& rng) {
    contract(batch > 0, "make_sweep_batch: batch must be positive");
    const std::size_t B = static_cast<std::size_t>(batch);
    TrainingBatch b;
    b.x0 = Tensor({B, 2});
    b.x1 = Tensor({B, 2});
    b.t.resize(B);
    b.r.resize(B);
    for (std::size_t i = 0; i < B; ++i) {
        DataBatch db = sample_data(data, rng, 1);
        if (!db.labels.empty()) {
            if (b.cls.empty()) b.cls.resize(B, 0);
            b.cls[i] = db.labels[0];
        }
        b.x1.at(i, 0) = db.x.at(0, 0);
        b.x1.at(i, 1) = db.x.at(0, 1);
        b.x0.at(i, 0) = rng.gauss();
        b.x0.at(i, 1) = rng.gauss();
        // keep (r - t) bounded away from the largest swept dt so the bootstrap
        // term stays active at every point of the sweep
        b.t[i] = rng.uniform(0.0, 0.5);
        b.r[i] = rng.uniform(b.t[i] + 0.2, 1.0);
    }
    b.xt = interpolate(b.x0, b.x1, b.t);
    return b;
}

SweepResult delta_t_order_sweep(const FlowNetwork& net, const TrainingBatch& batch,
                                const std::vector<double>& dts) {
    contract(dts.size() >= 3, "delta_t_order_sweep: need at least three dt values");
    bool any_distinct = false;
    for (double dt : dts)
        if (dt != dts[0]) any_distinct = true;
    contract(any_distinct, "delta_t_order_sweep: dt values must not all be equal (slope undefined)");
    SweepResult out;
    for (double dt : dts) {
        contract(dt > 0.0, "delta_t_order_sweep: dt must be positive");
        ObjectiveConfig oc;
        oc.delta_t = dt;
        double rmse = gradient_rmse(
                          net, batch,
                          [&oc](const FlowNetwork& n, const TrainingBatch& b) { return approx_consistency_loss(n, b, oc); },
                          [&oc](const FlowNetwork& n, const TrainingBatch& b) { return euler_consistency_loss(n, b, oc); })
                          .rmse;
        if (rmse <= 0.0) out.degenerate = true;
        out.points.push_back({dt, rmse});
    }
    if (out.degenerate) {
        out.slope = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(out.points.size());
    for (const SweepPoint& p : out.points) {
        double lx = std::log(p.delta_t), ly = std::log(p.rmse);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return out;
}

namespace {

// fixed draw set over the collapsed (single-point) data distribution
TrainingBatch lemma_batch(const LemmaHarnessConfig& hc, Rng& rng) {
    const std::size_t B = static_cast<std::size_t>(hc.batch);
    TrainingBatch b;
    b.x0 = Tensor({B, 2});
    b.x1 = Tensor({B, 2});
    b.t.resize(B);
    b.r.resize(B);
    TimeConfig times; // uniform pairs, some with r = t
    times.alpha = 0.25;
    for (std::size_t i = 0; i < B; ++i) {
        b.x1.at(i, 0) = hc.x1_x;
        b.x1.at(i, 1) = hc.x1_y;
        b.x0.at(i, 0) = rng.gauss();
        b.x0.at(i, 1) = rng.gauss();
        TimePair tp = sample_time_pair(rng, times);
        b.t[i] = tp.t;
        b.r[i] = tp.r;
    }
    b.xt = interpolate(b.x0, b.x1, b.t);
    return b;
}

double anchor_gap_value(const FlowNetwork& net, const TrainingBatch& b) {
    Tensor utt = net.forward_values(b.xt, b.t, b.t);
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    return t_mean(t_row_sqnorm(t_sub(utt, v))).item();
}

LemmaCaseResult lemma_case(const LemmaHarnessConfig& hc, const FlowNetwork& net,
                           const TrainingBatch& b, int case_id, bool pretrained) {
    ObjectiveConfig oc;
    oc.delta_t = hc.delta_t;
    GradCheckReport rep = gradient_rmse(
        net, b,
        [&oc](const FlowNetwork& n, const TrainingBatch& bb) { return emf_u_loss(n, bb, oc); },
        [&oc](const FlowNetwork& n, const TrainingBatch& bb) { return approx_consistency_loss(n, bb, oc); },
        true);
    LemmaCaseResult res;
    res.case_id = case_id;
    res.pretrained = pretrained;
    res.fm_value = anchor_gap_value(net, b);
    res.rmse = rep.rmse;
    res.bound = rep.bound;
    res.pass = rep.pass;
    return res;
}

} // namespace

std::vector<LemmaCaseResult> run_lemma_harness(const LemmaHarnessConfig& hc, std::uint64_t seed) {
    contract(hc.n_random_cases > 0 && hc.batch > 0, "lemma harness: counts must be positive");
    contract(hc.pretrain_tol > 0.0 && hc.pretrain_lr > 0.0, "lemma harness: pretrain settings must be positive");

    Rng root(seed);
    Rng draw_rng = root.fork(0);
    const TrainingBatch b = lemma_batch(hc, draw_rng);

    NetworkConfig nc;
    nc.hidden_width = hc.hidden_width;
    nc.depth = hc.depth;
    nc.time_features = hc.time_features;

    std::vector<LemmaCaseResult> out;
    for (int c = 0; c < hc.n_random_cases; ++c) {
        Rng rng = root.fork(static_cast<std::uint64_t>(1 + c));
        FlowNetwork net = FlowNetwork::init(nc, rng, FinalInit::random);
        out.push_back(lemma_case(hc, net, b, c, false));
    }

    // pre-trained case: full-batch flow matching on the same fixed draws until
    // the anchor gap (== the FM loss here) is below tolerance
    Rng rng = root.fork(static_cast<std::uint64_t>(1 + hc.n_random_cases));
    FlowNetwork net = FlowNetwork::init(nc, rng);
    AdamConfig ac;
    ac.lr = hc.pretrain_lr;
    Adam opt(ac, net.params);
    ObjectiveConfig oc;
    oc.delta_t = hc.delta_t;
    for (long step = 0; step < hc.pretrain_max_steps; ++step) {
        ObjectiveResult res = fm_loss(net, b, oc);
        if (res.report.loss < hc.pretrain_tol) break;
        ad::GradMap gm = ad::backward(res.loss);
        std::vector<Tensor> grads = net.collect_grads(res.binding, gm);
        opt.step(net.params, grads);
    }
    out.push_back(lemma_case(hc, net, b, hc.n_random_cases, true));
    return out;
}

namespace {

double scalar_loss_value(const FlowNetwork& net, const ParamSet& use, const Tensor& x,
                         std::span<const double> t, std::span<const double> r,
                         const std::vector<int>* cls, const Tensor& target, const Tensor* aux_target) {
    Tensor aux;
    Tensor pred = net.forward_values(x, t, r, cls, aux_target ? &aux : nullptr, &use);
    double v = t_mean(t_row_sqnorm(t_sub(pred, target))).item();
    if (aux_target) v += t_mean(t_row_sqnorm(t_sub(aux, *aux_target))).item();
    return v;
}

} // namespace

GradcheckReport run_gradcheck(int n_models, std::uint64_t seed, double fd_step, double tol) {
    contract(n_models > 0, "gradcheck: n_models must be positive");
    contract(fd_step > 0.0 && tol > 0.0, "gradcheck: fd_step and tol must be positive");

    GradcheckReport rep;
    rep.models = n_models;
    rep.tolerance = tol;
    Rng root(seed);

    for (int mi = 0; mi < n_models; ++mi) {
        Rng rng = root.fork(static_cast<std::uint64_t>(mi));
        NetworkConfig nc;
        nc.hidden_width = 16;
        nc.depth = 2;
        nc.time_features = 2;
        nc.activation = (mi % 2 == 0) ? Activation::silu : Activation::tanh;
        nc.num_classes = (mi % 3 == 0) ? 3 : 0;
        nc.aux_head_depth = (mi % 4 == 0) ? 1 : 0;
        nc.prediction = (mi % 5 == 0) ? PredictionKind::x1 : PredictionKind::u;
        FlowNetwork net = FlowNetwork::init(nc, rng, FinalInit::random);

        const std::size_t B = 3;
        Tensor x = Tensor::randn({B, 2}, rng);
        std::vector<double> t(B), r(B);
        for (std::size_t i = 0; i < B; ++i) {
            // inside [0.05, 0.95] so finite-difference probes stay in range
            double a = rng.uniform(0.05, 0.95), b = rng.uniform(0.05, 0.95);
            t[i] = std::min(a, b);
            r[i] = std::max(a, b);
        }
        std::vector<int> cls;
        const std::vector<int>* clsp = nullptr;
        if (nc.num_classes > 0) {
            cls.resize(B);
            for (std::size_t i = 0; i < B; ++i) cls[i] = rng.uniform_int(nc.num_classes + 1);
            clsp = &cls;
        }
        Tensor target = Tensor::randn({B, 2}, rng);
        Tensor aux_target;
        const bool has_aux = nc.aux_head_depth > 0;
        if (has_aux) aux_target = Tensor::randn({B, 2}, rng);

        // reverse mode against central differences, every parameter coordinate
        FlowNetwork::TapeBinding bind;
        ad::Value aux_node;
        ad::Value pred = net.forward_tape(bind, x, t, r, clsp, has_aux ? &aux_node : nullptr);
        ad::Value loss = ad::mean_all(ad::row_sqnorm(ad::sub(pred, ad::constant(target))));
        if (has_aux)
            loss = ad::add(loss, ad::mean_all(ad::row_sqnorm(ad::sub(aux_node, ad::constant(aux_target)))));
        ad::GradMap gm = ad::backward(loss);
        std::vector<Tensor> grads = net.collect_grads(bind, gm);

        ParamSet mod = net.params;
        for (std::size_t pi = 0; pi < net.params.count(); ++pi) {
            for (std::size_t ei = 0; ei < net.params.tensors[pi].numel(); ++ei) {
                const double save = mod.tensors[pi][ei];
                mod.tensors[pi][ei] = save + fd_step;
                double fp = scalar_loss_value(net, mod, x, t, r, clsp, target,
                                              has_aux ? &aux_target : nullptr);
                mod.tensors[pi][ei] = save - fd_step;
                double fm = scalar_loss_value(net, mod, x, t, r, clsp, target,
                                              has_aux ? &aux_target : nullptr);
                mod.tensors[pi][ei] = save;
                double fd = (fp - fm) / (2.0 * fd_step);
                double rel = std::abs(grads[pi][ei] - fd) / std::max(1.0, std::abs(fd));
                rep.max_rel_err_reverse = std::max(rep.max_rel_err_reverse, rel);
            }
        }

        // jvp against a finite-difference directional derivative through
        // (x, t, r, params) jointly
        Tensor xdot = Tensor::randn({B, 2}, rng);
        std::vector<double> tdot(B), rdot(B);
        for (std::size_t i = 0; i < B; ++i) {
            tdot[i] = rng.gauss();
            rdot[i] = rng.gauss();
        }
        std::vector<Tensor> ptang;
        ptang.reserve(net.params.count());
        for (const Tensor& p : net.params.tensors) ptang.push_back(Tensor::randn(p.shape(), rng));

        DualTensor dout = net.forward_dual(x, xdot, t, tdot, r, rdot, clsp, &ptang);

        auto shifted_value = [&](double h) {
            ParamSet ps = net.params;
            for (std::size_t pi = 0; pi < ps.count(); ++pi)
                axpy(h, ptang[pi], ps.tensors[pi]);
            Tensor xs = x;
            axpy(h, xdot, xs);
            std::vector<double> ts(B), rs(B);
            for (std::size_t i = 0; i < B; ++i) {
                ts[i] = t[i] + h * tdot[i];
                rs[i] = r[i] + h * rdot[i];
            }
            return net.forward_values(xs, ts, rs, clsp, nullptr, &ps);
        };
        Tensor plus = shifted_value(fd_step);
        Tensor minus = shifted_value(-fd_step);
        for (std::size_t i = 0; i < dout.d.numel(); ++i) {
            double fd = (plus[i] - minus[i]) / (2.0 * fd_step);
            double rel = std::abs(dout.d[i] - fd) / std::max(1.0, std::abs(fd));
            rep.max_rel_err_jvp = std::max(rep.max_rel_err_jvp, rel);
        }
    }

    rep.pass = rep.max_rel_err_reverse < tol && rep.max_rel_err_jvp < tol;
    return rep;
}

} // namespace emf
