#include "emf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "emf/io.hpp"

namespace emf {

ObjectiveResult dispatch_objective(ObjectiveKind kind, const FlowNetwork& net, const TrainingBatch& b,
                                   const ObjectiveConfig& oc) {
    switch (kind) {
        case ObjectiveKind::fm: return fm_loss(net, b, oc);
        case ObjectiveKind::meanflow: return meanflow_loss(net, b, oc);
        case ObjectiveKind::emf_u: return emf_u_loss(net, b, oc);
        case ObjectiveKind::emf_x1: return emf_x1_loss(net, b, oc);
        case ObjectiveKind::emf_aux: return emf_aux_loss(net, b, oc);
    }
    contract_fail("bad ObjectiveKind");
}

Checkpoint make_checkpoint(const RunConfig& cfg, const FlowNetwork& net, const EmaState& ema,
                           const Adam& opt, const Rng& rng, long step) {
    Checkpoint ck;
    ck.config_text = serialize_config(cfg);
    ck.step = static_cast<std::uint64_t>(step);
    ck.params = net.params;
    ck.ema = ema.shadow;
    ck.adam_m = opt.m;
    ck.adam_v = opt.v;
    ck.adam_step = static_cast<std::uint64_t>(opt.step_count);
    ck.rng_state = rng.serialize();
    return ck;
}

RestoredRun restore_run(const Checkpoint& ck) {
    RunConfig cfg = parse_config(ck.config_text);
    Rng scratch(0);
    RestoredRun run{cfg, FlowNetwork::init(cfg.net, scratch), EmaState{}, static_cast<long>(ck.step)};

    const ParamSet layout = make_param_layout(cfg.net);
    contract(ck.params.names == layout.names, "checkpoint parameters do not match the config's layout");
    contract(ck.ema.names == layout.names, "checkpoint EMA set does not match the config's layout");
    for (std::size_t i = 0; i < layout.count(); ++i) {
        contract(ck.params.tensors[i].same_shape(layout.tensors[i]),
                 "checkpoint tensor '" + layout.names[i] + "' has the wrong shape");
        contract(ck.ema.tensors[i].same_shape(layout.tensors[i]),
                 "checkpoint EMA tensor '" + layout.names[i] + "' has the wrong shape");
    }
    run.net.params = ck.params;
    run.ema.decay = cfg.ema_decay;
    run.ema.shadow = ck.ema;
    return run;
}

FlowNetwork sampling_network(const RestoredRun& run) {
    FlowNetwork net = run.net;
    net.params = run.ema.shadow;
    return net;
}

namespace {

std::string nan_dump_text(long step, const std::string& rng_state, const ObjectiveReport& rep,
                          const std::string& where) {
    std::ostringstream os;
    os << "training aborted: non-finite " << where << "\n";
    os << "step = " << step << "\n";
    os << "loss = " << format_g17(rep.loss) << "\n";
    os << "rng_state_before_batch = " << rng_state << "\n";
    os << "per_sample_sq_err =";
    for (double v : rep.sq_err) os << " " << format_g17(v);
    os << "\n";
    os << "per_sample_weight =";
    for (double v : rep.weight) os << " " << format_g17(v);
    os << "\n";
    return os.str();
}

[[noreturn]] void abort_run(const std::string& out_dir, long step, const std::string& rng_state,
                            const ObjectiveReport& rep, const std::string& where) {
    const std::string text = nan_dump_text(step, rng_state, rep, where);
    std::string dump_path;
    if (!out_dir.empty()) {
        dump_path = out_dir + "/nan_dump.txt";
        write_text_file(dump_path, text);
    }
    std::string msg = "non-finite " + where + " at step " + std::to_string(step);
    if (!dump_path.empty()) msg += " (diagnostics: " + dump_path + ")";
    else msg += "\n" + text;
    throw TrainAbort(msg, dump_path);
}

bool all_finite(const std::vector<Tensor>& ts) {
    for (const Tensor& t : ts)
        if (!t.all_finite()) return false;
    return true;
}

} // namespace

TrainResult train_run(const RunConfig& cfg_in, const std::string& out_dir, const TrainCallbacks* cb,
                      bool quiet) {
    RunConfig cfg = cfg_in;
    cfg.resolve();
    const bool files = !out_dir.empty();
    if (files) std::filesystem::create_directories(out_dir);

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(0);
    FlowNetwork net = FlowNetwork::init(cfg.net, init_rng);
    EmaState ema;
    ema.decay = cfg.ema_decay;
    ema.init_from(net.params);
    Adam opt(cfg.adam, net.params);

    if (cfg.obj.guidance.enabled) {
        const double wp = cfg.obj.guidance.effective_scale();
        std::string line = "guidance: w = " + format_g17(cfg.obj.guidance.w) +
                           ", k = " + format_g17(cfg.obj.guidance.k) +
                           ", effective scale w' = w / (1 - k) = " + format_g17(wp) + "\n";
        if (!quiet) std::fputs(line.c_str(), stdout);
        if (files) write_text_file(out_dir + "/guidance.txt", line);
    }

    // fixed evaluation protocol: same stream every time, independent of the
    // training stream's position
    const std::uint64_t eval_seed = cfg.seed ^ 0x9e3779b97f4a7c15ull;

    TrainResult result{std::move(net), std::move(ema), std::move(opt), rng, {}, 0, 0.0};
    std::vector<std::vector<std::string>> csv_rows;
    double win_sum = 0.0, win_sumsq = 0.0;
    long win_n = 0;

    const auto t0 = std::chrono::steady_clock::now();
    for (long step = 1; step <= cfg.steps; ++step) {
        const std::string state_before = result.rng.serialize();
        TrainingBatch b = make_training_batch(cfg.data, cfg.times, cfg.obj.guidance, cfg.batch,
                                              result.rng, result.net.cfg.null_label());
        ObjectiveResult res = dispatch_objective(cfg.objective, result.net, b, cfg.obj);
        if (!std::isfinite(res.report.loss))
            abort_run(out_dir, step, state_before, res.report, "loss");

        ad::GradMap gm = ad::backward(res.loss);
        std::vector<Tensor> grads = result.net.collect_grads(res.binding, gm);
        if (!all_finite(grads)) abort_run(out_dir, step, state_before, res.report, "gradient");

        result.opt.step(result.net.params, grads);
        result.ema.update(result.net.params);

        win_sum += res.report.loss;
        win_sumsq += res.report.loss * res.report.loss;
        ++win_n;
        if (cb && cb->on_step) cb->on_step(step, res.report);

        if (step % cfg.log_every == 0 || step == cfg.steps) {
            const double mean = win_sum / static_cast<double>(win_n);
            const double var = std::max(0.0, win_sumsq / static_cast<double>(win_n) - mean * mean);
            const double lc = consistency_eval(result.net, cfg.data, cfg.eval_points, Rng(eval_seed));
            TrainLogRow row{step, mean, var, lc};
            result.log.push_back(row);
            csv_rows.push_back({std::to_string(step), format_g17(mean), format_g17(var), format_g17(lc)});
            if (cb && cb->on_log) cb->on_log(row);
            if (!quiet)
                std::printf("step %6ld  loss %.6f  loss_var %.3e  consistency %.6f\n", step, mean, var, lc);
            win_sum = win_sumsq = 0.0;
            win_n = 0;
        }
        if (files && step % cfg.checkpoint_every == 0 && step != cfg.steps) {
            char name[64];
            std::snprintf(name, sizeof name, "/checkpoint_%06ld.emfckpt", step);
            save_checkpoint(out_dir + name,
                            make_checkpoint(cfg, result.net, result.ema, result.opt, result.rng, step));
        }
    }
    result.steps_done = cfg.steps;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (files) {
        write_csv(out_dir + "/metrics.csv", {"step", "loss_mean", "loss_var", "consistency"}, csv_rows);
        save_checkpoint(out_dir + "/checkpoint.emfckpt",
                        make_checkpoint(cfg, result.net, result.ema, result.opt, result.rng, cfg.steps));
    }
    return result;
}

} // namespace emf
