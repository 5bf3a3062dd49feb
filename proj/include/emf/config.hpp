#pragma once

#include <cstdint>
#include <string>

#include "emf/datasets.hpp"
#include "emf/network.hpp"
#include "emf/objectives.hpp"
#include "emf/optim.hpp"

namespace emf {

enum class ObjectiveKind { fm, meanflow, emf_u, emf_x1, emf_aux };

ObjectiveKind objective_from_string(const std::string& s);
std::string to_string(ObjectiveKind k);

// adaptive weighting defaults on for meanflow and off for everything else
enum class AdaptiveMode { automatic, on, off };

struct RunConfig {
    ObjectiveKind objective = ObjectiveKind::emf_u;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    DatasetConfig data;
    NetworkConfig net;   // num_classes / prediction are derived in resolve()
    ObjectiveConfig obj; // obj.adaptive derived from adaptive_mode
    AdaptiveMode adaptive_mode = AdaptiveMode::automatic;
    TimeConfig times;

    AdamConfig adam;
    long steps = 20000;
    int batch = 256;
    double ema_decay = 0.999;

    long log_every = 100;
    long checkpoint_every = 5000;
    int eval_points = 128; // draws per consistency evaluation

    // derive dependent fields and check cross-field contracts; idempotent
    void resolve();
};

// Line-oriented `section.key = value` text, '#' starts a comment. Unknown keys
// or malformed values raise ContractViolation with the line number. resolve()
// is applied before returning.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// canonical text form; parse_config(serialize_config(c)) reproduces c exactly
std::string serialize_config(const RunConfig& cfg);

} // namespace emf
