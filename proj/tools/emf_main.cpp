#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emf/checkpoint.hpp"
#include "emf/config.hpp"
#include "emf/io.hpp"
#include "emf/metrics.hpp"
#include "emf/samplers.hpp"
#include "emf/trainer.hpp"
#include "emf/validation.hpp"

namespace {

using namespace emf;

std::string b2s(bool v) { return v ? "true" : "false"; }

int run_train(const std::string& config_path, bool seed_set, std::uint64_t seed, bool steps_set,
              long steps, const std::string& out_opt) {
    RunConfig cfg = load_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (steps_set) cfg.steps = steps;
    const std::string out = out_opt.empty() ? cfg.out_dir : out_opt;
    cfg.out_dir = out;
    cfg.resolve();

    std::printf("train: objective=%s dataset=%s steps=%ld batch=%d seed=%llu out=%s\n",
                to_string(cfg.objective).c_str(), to_string(cfg.data.kind).c_str(), cfg.steps,
                cfg.batch, static_cast<unsigned long long>(cfg.seed), out.c_str());
    TrainResult res = train_run(cfg, out);
    std::printf("done: %ld steps in %.1f s; wrote %s/checkpoint.emfckpt and %s/metrics.csv\n",
                res.steps_done, res.wall_seconds, out.c_str(), out.c_str());
    return 0;
}

// draw labels for a conditional network (uniform over real classes)
std::vector<int> draw_labels(const FlowNetwork& net, int n, Rng& rng) {
    std::vector<int> cls(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cls[static_cast<std::size_t>(i)] = rng.uniform_int(net.cfg.num_classes);
    return cls;
}

int run_sample(const std::string& ckpt_path, std::uint64_t seed, int n, bool steps_set, int steps,
               const std::string& protocol, const std::string& out) {
    contract(protocol == "flow" || protocol == "ode", "sample: --protocol must be flow or ode");
    RestoredRun run = restore_run(load_checkpoint(ckpt_path));
    FlowNetwork net = sampling_network(run);
    const int k = steps_set ? steps : (protocol == "flow" ? 1 : 64);
    contract(k >= 1, "sample: --steps must be >= 1");
    contract(n >= 0, "sample: --n must be >= 0");

    Rng rng(seed);
    Tensor x0 = Tensor::randn({static_cast<std::size_t>(n), 2}, rng);
    std::vector<int> cls;
    const std::vector<int>* clsp = nullptr;
    if (net.conditional()) {
        cls = draw_labels(net, n, rng);
        clsp = &cls;
    }
    Tensor x(std::vector<std::size_t>{static_cast<std::size_t>(n), 2});
    if (n > 0) x = protocol == "flow" ? sample_k_step(net, x0, k, clsp) : sample_ode(net, x0, k, clsp);

    std::filesystem::create_directories(out);
    std::vector<std::string> header = {"x", "y"};
    if (net.conditional()) header.push_back("label");
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> row = {format_g17(x.at(static_cast<std::size_t>(i), 0)),
                                        format_g17(x.at(static_cast<std::size_t>(i), 1))};
        if (net.conditional()) row.push_back(std::to_string(cls[static_cast<std::size_t>(i)]));
        rows.push_back(std::move(row));
    }
    write_csv(out + "/samples.csv", header, rows);

    // overlay: reference draws in one color, generated points in the other
    Rng ref_rng(seed ^ 0x5eedda7a0ull);
    DataBatch ref = sample_data(run.cfg.data, ref_rng, n);
    Tensor both({static_cast<std::size_t>(2 * n), 2});
    std::vector<int> overlay(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
        both.at(static_cast<std::size_t>(i), 0) = ref.x.at(static_cast<std::size_t>(i), 0);
        both.at(static_cast<std::size_t>(i), 1) = ref.x.at(static_cast<std::size_t>(i), 1);
        overlay[static_cast<std::size_t>(i)] = 0;
        both.at(static_cast<std::size_t>(n + i), 0) = x.at(static_cast<std::size_t>(i), 0);
        both.at(static_cast<std::size_t>(n + i), 1) = x.at(static_cast<std::size_t>(i), 1);
        overlay[static_cast<std::size_t>(n + i)] = 1;
    }
    write_scatter_svg(out + "/samples.svg", both, overlay, nominal_bounds(run.cfg.data),
                      to_string(run.cfg.objective) + " " + protocol + " " + std::to_string(k) + "-step",
                      {"reference", "generated"});
    std::printf("sample: wrote %d points to %s/samples.csv (+ samples.svg)\n", n, out.c_str());
    return 0;
}

int run_eval(const std::string& ckpt_path, std::uint64_t seed, int n, const std::string& out) {
    contract(n > 0, "eval: --n must be positive");
    RestoredRun run = restore_run(load_checkpoint(ckpt_path));
    FlowNetwork net = sampling_network(run);

    Rng ref_rng(seed ^ 0xda7a5e7full);
    DataBatch ref = sample_data(run.cfg.data, ref_rng, 4096);
    const std::array<double, 4> bounds = nominal_bounds(run.cfg.data);

    struct Row {
        const char* sampler;
        int steps;
    };
    const Row plan[] = {{"flow", 1}, {"flow", 2}, {"flow", 4}, {"ode", 64}};
    std::vector<std::vector<std::string>> rows;
    std::printf("eval: %s on %s, %d samples per row\n", to_string(run.cfg.objective).c_str(),
                to_string(run.cfg.data.kind).c_str(), n);
    for (std::size_t pi = 0; pi < 4; ++pi) {
        Rng rng = Rng(seed).fork(pi);
        Tensor x0 = Tensor::randn({static_cast<std::size_t>(n), 2}, rng);
        std::vector<int> cls;
        const std::vector<int>* clsp = nullptr;
        if (net.conditional()) {
            cls = draw_labels(net, n, rng);
            clsp = &cls;
        }
        Tensor x = plan[pi].sampler == std::string("flow") ? sample_k_step(net, x0, plan[pi].steps, clsp)
                                                           : sample_ode(net, x0, plan[pi].steps, clsp);
        MetricReport m = compute_metrics(x, ref.x, bounds);
        rows.push_back({plan[pi].sampler, std::to_string(plan[pi].steps), format_g17(m.energy),
                        format_g17(m.mmd), format_g17(m.tv)});
        std::printf("  %-4s %3d-step  energy %.6f  mmd %.6f  tv %.6f\n", plan[pi].sampler,
                    plan[pi].steps, m.energy, m.mmd, m.tv);
    }
    std::filesystem::create_directories(out);
    write_csv(out + "/eval.csv", {"sampler", "steps", "energy", "mmd", "tv"}, rows);
    std::printf("eval: wrote %s/eval.csv\n", out.c_str());
    return 0;
}

int run_validate(const std::string& ckpt_path, std::uint64_t seed, int n, const std::string& protocol,
                 const std::string& out) {
    RestoredRun run = restore_run(load_checkpoint(ckpt_path));
    std::filesystem::create_directories(out);
    Rng rng(seed);

    if (protocol == "assumptions") {
        ValidationConfig vc;
        vc.n2 = n;
        vc.delta_t = run.cfg.obj.delta_t;
        AssumptionReport rep = estimate_assumption_constants(run.net, run.cfg.data, vc, rng);
        write_csv(out + "/assumptions.csv",
                  {"m_g", "m_x", "m_t", "primed", "prefactor_form", "n1", "n2", "delta_t"},
                  {{format_g17(rep.m_g), format_g17(rep.m_x), format_g17(rep.m_t), b2s(rep.primed),
                    rep.prefactor_form, std::to_string(rep.n1), std::to_string(rep.n2),
                    format_g17(rep.delta_t)}});
        std::printf("assumptions: m_g%s = %.6g  m_x%s = %.6g  m_t%s = %.6g  (n1=%d n2=%d)\n",
                    rep.primed ? "'" : "", rep.m_g, rep.primed ? "'" : "", rep.m_x,
                    rep.primed ? "'" : "", rep.m_t, rep.n1, rep.n2);
        std::printf("validate: wrote %s/assumptions.csv\n", out.c_str());
        return 0;
    }

    // the remaining protocols reason about mean-velocity heads
    contract(run.net.cfg.prediction == PredictionKind::u,
             "validate: protocol '" + protocol + "' requires a u-prediction checkpoint");

    if (protocol == "lemma") {
        LemmaHarnessConfig hc;
        std::vector<LemmaCaseResult> results = run_lemma_harness(hc, seed);
        std::vector<std::vector<std::string>> rows;
        int passed = 0;
        for (const LemmaCaseResult& c : results) {
            rows.push_back({std::to_string(c.case_id), b2s(c.pretrained), format_g17(c.fm_value),
                            format_g17(c.rmse), format_g17(c.bound), b2s(c.pass)});
            passed += c.pass ? 1 : 0;
        }
        write_csv(out + "/lemma.csv", {"case", "pretrained", "fm_value", "rmse", "bound", "pass"}, rows);
        const LemmaCaseResult& last = results.back();
        std::printf("lemma: %d/%zu cases satisfy rmse <= bound; pretrained case fm=%.3g rmse=%.3g\n",
                    passed, results.size(), last.fm_value, last.rmse);
        std::printf("validate: wrote %s/lemma.csv\n", out.c_str());
        return 0;
    }
    if (protocol == "sweep") {
        TrainingBatch batch = make_sweep_batch(run.cfg.data, 64, rng);
        SweepResult sw = delta_t_order_sweep(run.net, batch, {0.16, 0.08, 0.04, 0.02});
        std::vector<std::vector<std::string>> rows;
        for (const SweepPoint& p : sw.points) rows.push_back({format_g17(p.delta_t), format_g17(p.rmse)});
        rows.push_back({"slope", format_g17(sw.slope)});
        write_csv(out + "/sweep.csv", {"delta_t", "rmse"}, rows);
        if (sw.degenerate)
            std::printf("sweep: degenerate (some rmse = 0); slope undefined\n");
        else
            std::printf("sweep: fitted log-log slope %.4f\n", sw.slope);
        std::printf("validate: wrote %s/sweep.csv\n", out.c_str());
        return 0;
    }
    contract_fail("validate: --protocol must be assumptions, lemma or sweep");
}

int run_gradcheck_cmd(std::uint64_t seed, int n) {
    GradcheckReport rep = run_gradcheck(n, seed);
    std::printf("gradcheck: %d models, max reverse-mode rel err %.3e, max jvp rel err %.3e (tol %.0e)\n",
                rep.models, rep.max_rel_err_reverse, rep.max_rel_err_jvp, rep.tolerance);
    std::printf("gradcheck: %s\n", rep.pass ? "PASS" : "FAIL");
    return rep.pass ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Euler mean-flow toy lab: train, sample and validate few-step flow models on 2-D data"};
    app.require_subcommand(1);

    // per-subcommand state; sharing one variable would let a later subcommand's
    // default clobber an earlier one's before parsing even starts
    std::string config_path, ckpt_path;
    std::string protocol = "flow", vprotocol = "assumptions";
    std::string out = "out";
    std::uint64_t seed = 0;
    long steps_l = 0;
    int steps = 0;
    int n = 2048, vn = 256, gn = 100;

    CLI::App* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path, "config file path")->required();
    CLI::Option* tr_seed = train->add_option("--seed", seed, "override run.seed");
    CLI::Option* tr_steps = train->add_option("--steps", steps_l, "override opt.steps");
    CLI::Option* tr_out = train->add_option("--out", out, "output directory (default: run.out from the config)");

    CLI::App* sample = app.add_subcommand("sample", "generate points from a checkpoint (EMA weights)");
    sample->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    sample->add_option("--seed", seed, "sampling seed");
    sample->add_option("--n", n, "number of points")->capture_default_str();
    CLI::Option* sm_steps = sample->add_option("--steps", steps, "flow-map steps / ODE steps");
    sample->add_option("--protocol", protocol, "flow|ode")->capture_default_str();
    sample->add_option("--out", out, "output directory")->capture_default_str();

    CLI::App* eval = app.add_subcommand("eval", "two-sample metrics for {1,2,4}-step and 64-step ODE sampling");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval->add_option("--seed", seed, "evaluation seed");
    eval->add_option("--n", n, "samples per row")->capture_default_str();
    eval->add_option("--out", out, "output directory")->capture_default_str();

    CLI::App* validate = app.add_subcommand("validate", "assumption monitors / inequality harness / dt sweep");
    validate->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    validate->add_option("--seed", seed, "validation seed");
    validate->add_option("--n", vn, "Monte-Carlo draws (assumptions)")->capture_default_str();
    validate->add_option("--protocol", vprotocol, "assumptions|lemma|sweep")->capture_default_str();
    validate->add_option("--out", out, "output directory")->capture_default_str();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "engine self-check against finite differences");
    gradcheck->add_option("--seed", seed, "harness seed");
    gradcheck->add_option("--n", gn, "number of random models")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage error
    }

    try {
        if (train->parsed())
            return run_train(config_path, tr_seed->count() > 0, seed, tr_steps->count() > 0, steps_l,
                             tr_out->count() > 0 ? out : std::string());
        if (sample->parsed())
            return run_sample(ckpt_path, seed, n, sm_steps->count() > 0, steps, protocol, out);
        if (eval->parsed()) return run_eval(ckpt_path, seed, n, out);
        if (validate->parsed()) return run_validate(ckpt_path, seed, vn, vprotocol, out);
        if (gradcheck->parsed()) return run_gradcheck_cmd(seed, gn);
    } catch (const TrainAbort& e) {
        std::fprintf(stderr, "aborted: %s\n", e.what());
        return 2;
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
