#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emf/checkpoint.hpp"
#include "emf/config.hpp"
#include "emf/objectives.hpp"
#include "emf/optim.hpp"

namespace emf {

ObjectiveResult dispatch_objective(ObjectiveKind kind, const FlowNetwork& net, const TrainingBatch& b,
                                   const ObjectiveConfig& oc);

struct TrainLogRow {
    long step = 0;
    double loss_mean = 0.0;
    double loss_var = 0.0;
    double lc_eval = 0.0; // mean two-hop consistency residual, fixed protocol, live params
};

struct TrainCallbacks {
    std::function<void(long step, const ObjectiveReport&)> on_step;
    std::function<void(const TrainLogRow&)> on_log;
};

struct TrainResult {
    FlowNetwork net;
    EmaState ema;
    Adam opt;
    Rng rng; // state after the final step
    std::vector<TrainLogRow> log;
    long steps_done = 0;
    double wall_seconds = 0.0;
};

// Runs the configured objective end to end. With a non-empty out_dir it writes
// metrics.csv, periodic checkpoint_<step>.emfckpt files, a final
// checkpoint.emfckpt and (when guidance is on) guidance.txt with the effective
// scale. A non-finite loss or gradient dumps diagnostics and raises TrainAbort.
// `quiet` suppresses the per-log stdout lines.
TrainResult train_run(const RunConfig& cfg, const std::string& out_dir,
                      const TrainCallbacks* cb = nullptr, bool quiet = false);

Checkpoint make_checkpoint(const RunConfig& cfg, const FlowNetwork& net, const EmaState& ema,
                           const Adam& opt, const Rng& rng, long step);

// network + state rebuilt from a checkpoint
struct RestoredRun {
    RunConfig cfg;
    FlowNetwork net; // live parameters
    EmaState ema;
    long step = 0;
};
RestoredRun restore_run(const Checkpoint& ck);

// sampling view: the restored network carrying the EMA parameters
FlowNetwork sampling_network(const RestoredRun& run);

} // namespace emf
