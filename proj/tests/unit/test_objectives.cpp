#include <cmath>

#include "doctest.h"
#include "emf/objectives.hpp"

using namespace emf;

namespace {

NetworkConfig small_net(PredictionKind pk = PredictionKind::u) {
    NetworkConfig c;
    c.hidden_width = 8;
    c.depth = 2;
    c.time_features = 2;
    c.prediction = pk;
    return c;
}

// batch with hand-picked times over a random coupling
TrainingBatch craft_batch(std::uint64_t seed, const std::vector<double>& t,
                          const std::vector<double>& r, int n_classes = 0) {
    const std::size_t n = t.size();
    Rng rng(seed);
    TrainingBatch b;
    b.x0 = Tensor::randn({n, 2}, rng);
    b.x1 = Tensor::randn({n, 2}, rng, 2.0);
    b.t = t;
    b.r = r;
    if (n_classes > 0) {
        b.cls.resize(n);
        for (std::size_t i = 0; i < n; ++i) b.cls[i] = rng.uniform_int(n_classes);
    }
    b.xt = interpolate(b.x0, b.x1, b.t);
    return b;
}

std::vector<Tensor> grads_of(const FlowNetwork& net, ObjectiveResult& res) {
    ad::GradMap g = ad::backward(res.loss);
    return net.collect_grads(res.binding, g);
}

bool grads_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b, double tol = 0.0) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].numel(); ++i)
            if (std::abs(a[k][i] - b[k][i]) > tol) return false;
    return true;
}

double zero_net_fm_oracle(const TrainingBatch& b) {
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    return t_mean(t_row_sqnorm(v)).item();
}

} // namespace

TEST_SUITE("objectives") {

TEST_CASE("emf_u reduces to fm bit-for-bit when r = t") {
    Rng rng(1);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.1, 0.4, 0.77, 0.95};
    TrainingBatch b = craft_batch(2, t, t);
    ObjectiveConfig oc;

    ObjectiveResult e = emf_u_loss(net, b, oc);
    ObjectiveResult f = fm_loss(net, b, oc);
    CHECK(e.report.loss == f.report.loss); // bit-identical
    CHECK(e.report.r_equal_t == 4);
    CHECK(grads_equal(grads_of(net, e), grads_of(net, f)));
}

TEST_CASE("emf_x1 reduces to the weighted x1 fm objective when r = t") {
    Rng rng(3);
    FlowNetwork net = FlowNetwork::init(small_net(PredictionKind::x1), rng, FinalInit::random);
    std::vector<double> t = {0.2, 0.5, 0.9};
    TrainingBatch b = craft_batch(4, t, t);
    ObjectiveConfig oc;

    ObjectiveResult e = emf_x1_loss(net, b, oc);
    ObjectiveResult f = fm_loss(net, b, oc);
    CHECK(e.report.loss == f.report.loss);
    CHECK(grads_equal(grads_of(net, e), grads_of(net, f)));
    // the time weight is in effect for both
    CHECK(e.report.weight[0] == doctest::Approx(1.0 / (0.8 * 0.8)));
}

TEST_CASE("bootstrap clamp: fast path and full path agree") {
    Rng rng(5);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    // r - t <= delta_t on every row
    std::vector<double> t = {0.1, 0.3, 0.6};
    std::vector<double> r = {0.105, 0.309, 0.6};
    TrainingBatch b = craft_batch(6, t, r);
    ObjectiveConfig oc;
    oc.delta_t = 0.01;

    ObjectiveResult fast = emf_u_loss(net, b, oc);
    CHECK_FALSE(fast.report.bootstrap_pass_ran);
    CHECK(fast.report.clamped_rows == 3);

    oc.force_full_path = true;
    ObjectiveResult full = emf_u_loss(net, b, oc);
    CHECK(full.report.bootstrap_pass_ran);
    CHECK(std::abs(fast.report.loss - full.report.loss) <= 1e-15);
    CHECK(grads_equal(grads_of(net, fast), grads_of(net, full), 1e-15));
}

TEST_CASE("clamp identity holds for the x1 variant too") {
    Rng rng(7);
    FlowNetwork net = FlowNetwork::init(small_net(PredictionKind::x1), rng, FinalInit::random);
    std::vector<double> t = {0.2, 0.5};
    std::vector<double> r = {0.2005, 0.505};
    TrainingBatch b = craft_batch(8, t, r);
    ObjectiveConfig oc;
    oc.delta_t = 0.01;

    ObjectiveResult fast = emf_x1_loss(net, b, oc);
    CHECK_FALSE(fast.report.bootstrap_pass_ran);
    oc.force_full_path = true;
    ObjectiveResult full = emf_x1_loss(net, b, oc);
    CHECK(full.report.bootstrap_pass_ran);
    CHECK(std::abs(fast.report.loss - full.report.loss) <= 1e-15);
}

TEST_CASE("zero network: fm and emf_u equal the conditional-velocity norm") {
    Rng rng(9);
    FlowNetwork net = FlowNetwork::init(small_net(), rng); // zero final layer
    std::vector<double> t = {0.0, 0.2, 0.5};
    std::vector<double> r = {0.5, 0.6, 0.9};
    TrainingBatch b = craft_batch(10, t, r);
    ObjectiveConfig oc;

    const double want = zero_net_fm_oracle(b);
    ObjectiveResult f = fm_loss(net, b, oc);
    ObjectiveResult e = emf_u_loss(net, b, oc);
    CHECK(f.report.loss == doctest::Approx(want).epsilon(1e-14));
    CHECK(e.report.loss == doctest::Approx(want).epsilon(1e-14));
    // zero net: the bootstrap numerator vanishes identically
    CHECK(e.report.bootstrap_pass_ran);
}

TEST_CASE("constant field: bootstrap contributes nothing") {
    Rng rng(11);
    FlowNetwork net = FlowNetwork::init(small_net(), rng); // zero weights
    // bias the output head: u === (0.7, -0.3) for every input
    net.params.tensors[5][0] = 0.7; // trunk.b_out
    net.params.tensors[5][1] = -0.3;
    REQUIRE(net.params.names[5] == "trunk.b_out");

    std::vector<double> t = {0.1, 0.3};
    std::vector<double> r = {0.8, 0.95};
    TrainingBatch b = craft_batch(12, t, r);
    ObjectiveConfig oc;
    ObjectiveResult e = emf_u_loss(net, b, oc);

    // loss = mean ||c - v||^2
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    double want = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double dx = 0.7 - v.at(i, 0), dy = -0.3 - v.at(i, 1);
        want += dx * dx + dy * dy;
    }
    want /= 2.0;
    CHECK(e.report.loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("per-sample report is consistent with the realized loss") {
    Rng rng(13);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.1, 0.2, 0.5, 0.6};
    std::vector<double> r = {0.4, 0.9, 0.55, 1.0};
    TrainingBatch b = craft_batch(14, t, r);
    ObjectiveConfig oc;
    oc.adaptive = true;
    oc.adaptive_c = 1e-3;
    oc.adaptive_p = 1.0;

    ObjectiveResult e = emf_u_loss(net, b, oc);
    REQUIRE(e.report.sq_err.size() == 4);
    REQUIRE(e.report.weight.size() == 4);
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        // adaptive weight recomputed independently
        CHECK(e.report.weight[i] ==
              doctest::Approx(1.0 / (e.report.sq_err[i] + 1e-3)).epsilon(1e-12));
        acc += e.report.weight[i] * e.report.sq_err[i];
    }
    CHECK(e.report.loss == doctest::Approx(acc / 4.0).epsilon(1e-12));
}

TEST_CASE("adaptive weight closed forms") {
    Rng rng(15);
    FlowNetwork net = FlowNetwork::init(small_net(), rng); // zero net
    // single sample with a crafted squared error
    TrainingBatch b;
    b.x0 = Tensor::matrix(1, 2, {0.0, 0.0});
    b.x1 = Tensor::matrix(1, 2, {0.0, 0.0});
    b.t = {0.0};
    b.r = {0.0};
    b.xt = interpolate(b.x0, b.x1, b.t);
    ObjectiveConfig oc;
    oc.adaptive = true;
    oc.adaptive_c = 1e-3;
    oc.adaptive_p = 1.0;

    // sq_err = 0 (both prediction and velocity are zero) -> weight 1000
    ObjectiveResult z = fm_loss(net, b, oc);
    CHECK(z.report.sq_err[0] == 0.0);
    CHECK(z.report.weight[0] == doctest::Approx(1000.0));

    // sq_err = 0.999 -> weight 1.0
    b.x1 = Tensor::matrix(1, 2, {std::sqrt(0.999), 0.0});
    b.xt = interpolate(b.x0, b.x1, b.t);
    ObjectiveResult o = fm_loss(net, b, oc);
    CHECK(o.report.sq_err[0] == doctest::Approx(0.999).epsilon(1e-12));
    CHECK(o.report.weight[0] == doctest::Approx(1.0).epsilon(1e-12));

    // p = 0 -> weight 1 regardless
    oc.adaptive_p = 0.0;
    ObjectiveResult p0 = fm_loss(net, b, oc);
    CHECK(p0.report.weight[0] == 1.0);
}

TEST_CASE("x1 time weight: value 2500 at t = 0.99 and the use_r switch") {
    Rng rng(17);
    FlowNetwork net = FlowNetwork::init(small_net(PredictionKind::x1), rng, FinalInit::random);
    std::vector<double> t = {0.99};
    std::vector<double> r = {0.999};
    TrainingBatch b = craft_batch(18, t, r);
    ObjectiveConfig oc;

    ObjectiveResult e = emf_x1_loss(net, b, oc);
    CHECK(e.report.weight[0] == 2500.0);

    oc.time_weight_use_r = true;
    ObjectiveResult er = emf_x1_loss(net, b, oc);
    CHECK(er.report.weight[0] == 2500.0); // r also inside the clamp region

    oc.time_weight = false;
    ObjectiveResult ew = emf_x1_loss(net, b, oc);
    CHECK(ew.report.weight[0] == 1.0);
}

TEST_CASE("stop-gradient: gradients equal the frozen-target quadratic") {
    Rng rng(19);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.1, 0.25, 0.5};
    std::vector<double> r = {0.6, 0.8, 0.52};
    TrainingBatch b = craft_batch(20, t, r);
    ObjectiveConfig oc;
    oc.delta_t = 0.01;

    ObjectiveResult e = emf_u_loss(net, b, oc);
    std::vector<Tensor> got = grads_of(net, e);

    // rebuild the documented target with plain (constant) forwards
    const std::size_t n = 3;
    Tensor main_v = net.forward_values(b.xt, b.t, b.r);
    Tensor u_tt = net.forward_values(b.xt, b.t, b.t);
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    Tensor xp = b.xt;
    for (std::size_t i = 0; i < xp.numel(); ++i) xp[i] += oc.delta_t * u_tt[i];
    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i) ts[i] = std::min(b.t[i] + oc.delta_t, 1.0);
    Tensor u3 = net.forward_values(xp, ts, b.r);
    Tensor target = v;
    for (std::size_t i = 0; i < n; ++i) {
        const double clamp = std::max(b.r[i] - b.t[i] - oc.delta_t, 0.0);
        for (std::size_t j = 0; j < 2; ++j)
            target.at(i, j) += clamp * (u3.at(i, j) - main_v.at(i, j)) / oc.delta_t;
    }

    FlowNetwork::TapeBinding bind;
    ad::Value pred = net.forward_tape(bind, b.xt, b.t, b.r);
    ad::Value loss = ad::mean_all(ad::row_sqnorm(ad::sub(pred, ad::constant(target))));
    ad::GradMap g = ad::backward(loss);
    std::vector<Tensor> want = net.collect_grads(bind, g);

    CHECK(grads_equal(got, want, 1e-12));
    CHECK(e.report.loss == doctest::Approx(loss->value.item()).epsilon(1e-15));
}

TEST_CASE("perturbing only the target-side parameters moves the loss, not the gradient rule") {
    Rng rng(21);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.2, 0.3};
    std::vector<double> r = {0.7, 0.9};
    TrainingBatch b = craft_batch(22, t, r);
    ObjectiveConfig oc;

    ObjectiveResult base = emf_u_loss(net, b, oc);

    ParamSet shifted = net.params;
    Rng prng(23);
    for (Tensor& p : shifted.tensors)
        for (std::size_t i = 0; i < p.numel(); ++i) p[i] += 0.05 * prng.gauss();

    ObjectiveResult pert = emf_u_loss(net, b, oc, &shifted);
    CHECK(pert.report.loss != base.report.loss); // the target did change

    // gradient still treats the (new) target as constant: rebuild and compare
    Tensor main_v = net.forward_values(b.xt, b.t, b.r);
    Tensor u_tt = net.forward_values(b.xt, b.t, b.t, nullptr, nullptr, &shifted);
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    Tensor xp = b.xt;
    for (std::size_t i = 0; i < xp.numel(); ++i) xp[i] += oc.delta_t * u_tt[i];
    std::vector<double> ts = {t[0] + oc.delta_t, t[1] + oc.delta_t};
    Tensor u3 = net.forward_values(xp, ts, b.r, nullptr, nullptr, &shifted);
    Tensor target = v;
    for (std::size_t i = 0; i < 2; ++i) {
        const double clamp = std::max(b.r[i] - b.t[i] - oc.delta_t, 0.0);
        for (std::size_t j = 0; j < 2; ++j)
            target.at(i, j) += clamp * (u3.at(i, j) - main_v.at(i, j)) / oc.delta_t;
    }
    FlowNetwork::TapeBinding bind;
    ad::Value pred = net.forward_tape(bind, b.xt, b.t, b.r);
    ad::Value loss = ad::mean_all(ad::row_sqnorm(ad::sub(pred, ad::constant(target))));
    std::vector<Tensor> want = net.collect_grads(bind, ad::backward(loss));
    CHECK(grads_equal(grads_of(net, pert), want, 1e-12));
}

TEST_CASE("meanflow reduces to fm when r = t") {
    Rng rng(25);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.15, 0.55, 0.85};
    TrainingBatch b = craft_batch(26, t, t);
    ObjectiveConfig oc;
    ObjectiveResult m = meanflow_loss(net, b, oc);
    ObjectiveResult f = fm_loss(net, b, oc);
    CHECK(m.report.loss == doctest::Approx(f.report.loss).epsilon(1e-15));
}

TEST_CASE("meanflow jvp term matches finite differences along the trajectory") {
    Rng rng(27);
    FlowNetwork net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    std::vector<double> t = {0.3};
    std::vector<double> r = {0.8};
    TrainingBatch b = craft_batch(28, t, r);

    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    std::vector<double> ones(1, 1.0), zeros(1, 0.0);
    DualTensor ju = net.forward_dual(b.xt, v, b.t, ones, b.r, zeros);

    const double eps = 1e-5;
    Tensor xp = b.xt, xm = b.xt;
    axpy(eps, v, xp);
    axpy(-eps, v, xm);
    std::vector<double> tp = {t[0] + eps}, tm = {t[0] - eps};
    Tensor fp = net.forward_values(xp, tp, r);
    Tensor fm = net.forward_values(xm, tm, r);
    for (std::size_t i = 0; i < 2; ++i) {
        const double fd = (fp[i] - fm[i]) / (2 * eps);
        CHECK(std::abs(ju.d[i] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
    }
}

TEST_CASE("meanflow with a hand-set linear field has a closed-form target") {
    NetworkConfig c = small_net();
    c.depth = 1;
    c.activation = Activation::tanh;
    Rng rng(0);
    FlowNetwork net = FlowNetwork::init(c, rng);
    for (Tensor& p : net.params.tensors)
        for (std::size_t i = 0; i < p.numel(); ++i) p[i] = 0.0;
    const double eps = 1e-6;
    net.params.tensors[0].at(0, 0) = eps; // u(x) = 2x, no time dependence
    net.params.tensors[0].at(1, 1) = eps;
    net.params.tensors[2].at(0, 0) = 2.0 / eps;
    net.params.tensors[2].at(1, 1) = 2.0 / eps;

    std::vector<double> t = {0.25};
    std::vector<double> r = {0.65};
    TrainingBatch b = craft_batch(30, t, r);
    ObjectiveConfig oc;
    ObjectiveResult m = meanflow_loss(net, b, oc);

    // target = v - (r-t) * A v = (1 - 2*(r-t)) v; prediction = 2 x_t
    Tensor v = conditional_velocity(b.xt, b.x1, b.t);
    double want = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        const double tgt = (1.0 - 2.0 * 0.4) * v[j];
        const double diff = 2.0 * b.xt[j] - tgt;
        want += diff * diff;
    }
    CHECK(m.report.loss == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("guidance with w=1, k=0 is bit-identical to the unguided path") {
    Rng rng(31);
    NetworkConfig c = small_net();
    c.num_classes = 4;
    FlowNetwork net = FlowNetwork::init(c, rng, FinalInit::random);
    std::vector<double> t = {0.1, 0.4, 0.6};
    std::vector<double> r = {0.5, 0.9, 0.6};
    TrainingBatch b = craft_batch(32, t, r, 4);

    ObjectiveConfig off;
    ObjectiveConfig on;
    on.guidance.enabled = true;
    on.guidance.w = 1.0;
    on.guidance.k = 0.0;

    for (auto* fn : {&fm_loss, &emf_u_loss, &meanflow_loss}) {
        ObjectiveResult a = (*fn)(net, b, off, nullptr);
        ObjectiveResult g = (*fn)(net, b, on, nullptr);
        CHECK(a.report.loss == g.report.loss);
        CHECK(grads_equal(grads_of(net, a), grads_of(net, g)));
    }

    // x1 variant
    NetworkConfig cx = small_net(PredictionKind::x1);
    cx.num_classes = 4;
    Rng rng2(33);
    FlowNetwork netx = FlowNetwork::init(cx, rng2, FinalInit::random);
    ObjectiveResult a = emf_x1_loss(netx, b, off);
    ObjectiveResult g = emf_x1_loss(netx, b, on);
    CHECK(a.report.loss == g.report.loss);
    CHECK(grads_equal(grads_of(netx, a), grads_of(netx, g)));
}

TEST_CASE("aux composite: component sum and counters") {
    Rng rng(35);
    NetworkConfig c = small_net();
    c.aux_head_depth = 1;
    FlowNetwork net = FlowNetwork::init(c, rng, FinalInit::random);
    std::vector<double> t = {0.2, 0.4};
    std::vector<double> r = {0.6, 0.95};
    TrainingBatch b = craft_batch(36, t, r);

    ObjectiveConfig oc;
    oc.mu1 = 1.0;
    oc.mu2 = 1.0;
    ObjectiveResult both = emf_aux_loss(net, b, oc);
    oc.mu2 = 0.0;
    ObjectiveResult only_emf = emf_aux_loss(net, b, oc);
    oc.mu1 = 0.0;
    oc.mu2 = 1.0;
    ObjectiveResult only_aux = emf_aux_loss(net, b, oc);

    CHECK(both.report.loss ==
          doctest::Approx(only_emf.report.loss + only_aux.report.loss).epsilon(1e-14));
    CHECK(both.report.aux_fm_loss == doctest::Approx(only_aux.report.loss).epsilon(1e-14));

    // cost accounting: one trainable trunk pass (both heads) + one sg pass
    net.counters.reset();
    oc.mu1 = 1.0;
    ObjectiveResult counted = emf_aux_loss(net, b, oc);
    (void)counted;
    CHECK(net.counters.tape_forwards == 1);
    CHECK(net.counters.value_forwards == 1);
    CHECK(net.counters.jvp_forwards == 0);
}

TEST_CASE("per-objective forward-pass accounting") {
    Rng rng(37);
    NetworkConfig c = small_net();
    c.num_classes = 3;
    FlowNetwork net = FlowNetwork::init(c, rng, FinalInit::random);
    std::vector<double> t = {0.1, 0.2};
    std::vector<double> r = {0.7, 0.9}; // bootstrap active
    TrainingBatch b = craft_batch(38, t, r, 3);
    ObjectiveConfig off;
    ObjectiveConfig cfg_on;
    cfg_on.guidance.enabled = true;
    cfg_on.guidance.w = 1.5;
    cfg_on.guidance.k = 0.25;

    net.counters.reset();
    emf_u_loss(net, b, off);
    CHECK(net.counters.tape_forwards == 1);
    CHECK(net.counters.value_forwards == 2); // u_tt and the shifted pass

    net.counters.reset();
    emf_u_loss(net, b, cfg_on);
    CHECK(net.counters.tape_forwards == 1);
    CHECK(net.counters.value_forwards == 3); // + unconditional pass

    net.counters.reset();
    meanflow_loss(net, b, off);
    CHECK(net.counters.tape_forwards == 1);
    CHECK(net.counters.jvp_forwards == 1);
    CHECK(net.counters.value_forwards == 0);

    net.counters.reset();
    meanflow_loss(net, b, cfg_on);
    CHECK(net.counters.jvp_forwards == 1);
    CHECK(net.counters.value_forwards == 2);

    net.counters.reset();
    fm_loss(net, b, off);
    CHECK(net.counters.tape_forwards == 1);
    CHECK(net.counters.value_forwards == 0);
}

TEST_CASE("objective contracts") {
    Rng rng(39);
    FlowNetwork net = FlowNetwork::init(small_net(), rng);
    TrainingBatch empty;
    ObjectiveConfig oc;
    CHECK_THROWS_AS(fm_loss(net, empty, oc), ContractViolation);

    std::vector<double> t = {0.5};
    std::vector<double> r = {0.2}; // r < t
    TrainingBatch bad = craft_batch(40, t, r);
    CHECK_THROWS_AS(emf_u_loss(net, bad, oc), ContractViolation);

    TrainingBatch ok = craft_batch(41, r, t);
    ObjectiveConfig g;
    g.guidance.enabled = true;
    CHECK_THROWS_AS(fm_loss(net, ok, g), ContractViolation); // unconditional net

    FlowNetwork netx = FlowNetwork::init(small_net(PredictionKind::x1), rng);
    CHECK_THROWS_AS(emf_u_loss(netx, ok, oc), ContractViolation);
    CHECK_THROWS_AS(meanflow_loss(netx, ok, oc), ContractViolation);
    CHECK_THROWS_AS(emf_x1_loss(net, ok, oc), ContractViolation);
    CHECK_THROWS_AS(emf_aux_loss(net, ok, oc), ContractViolation); // no aux head
}

TEST_CASE("trajectory consistency: exact cases") {
    Rng rng(43);
    FlowNetwork zero = FlowNetwork::init(small_net(), rng);
    Tensor x = Tensor::randn({4, 2}, rng);

    // zero field: flow maps are the identity
    CHECK(consistency_loss(zero, make_time_triple(0.1, 0.5, 0.9), x) == 0.0);

    // degenerate triple
    FlowNetwork rnd = FlowNetwork::init(small_net(), rng, FinalInit::random);
    CHECK(consistency_loss(rnd, make_time_triple(0.4, 0.4, 0.4), x) == 0.0);

    // constant field: semigroup holds to round-off
    FlowNetwork cnet = FlowNetwork::init(small_net(), rng);
    cnet.params.tensors[5][0] = 1.3;
    cnet.params.tensors[5][1] = -0.2;
    CHECK(consistency_loss(cnet, make_time_triple(0.0, 0.3, 1.0), x) < 1e-24);

    // random net: equals an explicit two-hop recomputation
    const TimeTriple tr = make_time_triple(0.1, 0.45, 0.8);
    const double got = consistency_loss(rnd, tr, x);
    Tensor direct = flow_map_values(rnd, x, tr.t, tr.r);
    Tensor hop = flow_map_values(rnd, flow_map_values(rnd, x, tr.t, tr.s), tr.s, tr.r);
    double want = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double dx = direct.at(i, 0) - hop.at(i, 0);
        const double dy = direct.at(i, 1) - hop.at(i, 1);
        want += dx * dx + dy * dy;
    }
    want /= 4.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("consistency_eval is deterministic and zero for the zero net") {
    Rng rng(45);
    FlowNetwork zero = FlowNetwork::init(small_net(), rng);
    DatasetConfig data = default_dataset(DatasetKind::two_moons);
    CHECK(consistency_eval(zero, data, 16, Rng(7)) == 0.0);

    FlowNetwork rnd = FlowNetwork::init(small_net(), rng, FinalInit::random);
    const double a = consistency_eval(rnd, data, 16, Rng(7));
    const double b = consistency_eval(rnd, data, 16, Rng(7));
    CHECK(a == b);
    CHECK(a > 0.0);
}

TEST_CASE("flow map reconstruction for both prediction kinds") {
    Rng rng(47);
    FlowNetwork u_net = FlowNetwork::init(small_net(), rng, FinalInit::random);
    Tensor x = Tensor::randn({2, 2}, rng);
    Tensor phi = flow_map_values(u_net, x, 0.2, 0.7);
    std::vector<double> ta(2, 0.2), tb(2, 0.7);
    Tensor u = u_net.forward_values(x, ta, tb);
    for (std::size_t i = 0; i < 4; ++i) CHECK(phi[i] == doctest::Approx(x[i] + 0.5 * u[i]).epsilon(1e-14));

    FlowNetwork x_net = FlowNetwork::init(small_net(PredictionKind::x1), rng, FinalInit::random);
    Tensor phix = flow_map_values(x_net, x, 0.2, 0.7);
    Tensor xe = x_net.forward_values(x, ta, tb);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(phix[i] == doctest::Approx(x[i] + 0.5 / 0.8 * (xe[i] - x[i])).epsilon(1e-14));
}

} // TEST_SUITE
