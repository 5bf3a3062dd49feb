#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emf/network.hpp"

namespace emf {

// Everything needed to resume a run or to sample from it: the canonical config
// text, live and EMA parameters, optimizer moments and the generator state.
struct Checkpoint {
    std::string config_text;
    std::uint64_t step = 0;
    ParamSet params;
    ParamSet ema;
    std::vector<Tensor> adam_m, adam_v;
    std::uint64_t adam_step = 0;
    std::string rng_state;
};

// Fixed binary layout (magic, version, length-prefixed sections, little-endian
// f64 payloads). save(load(p)) writes the identical byte sequence.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// in-memory forms, used by tests and the round-trip guarantee
std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);

} // namespace emf
