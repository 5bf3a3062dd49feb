#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "emf/errors.hpp"

namespace emf {

// Deterministic RNG handle. All state lives in the mt19937_64 engine: uniforms
// come straight off engine draws and gaussians use Box-Muller without caching,
// so serialize()/deserialize() capture the generator completely (checkpoints
// depend on this).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller (two engine draws per call, no spare kept)
    double gauss() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        contract(n > 0, "Rng::uniform_int requires n > 0");
        // rejection-free modulo is fine here: n is tiny vs 2^64
        return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream; splitmix64 finalizer decorrelates ids.
    Rng fork(std::uint64_t stream_id) {
        std::uint64_t z = next_u64() + 0x9e3779b97f4a7c15ull * (stream_id + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void deserialize(const std::string& state) {
        std::istringstream is(state);
        is >> eng_;
        contract(!is.fail(), "Rng::deserialize: malformed engine state");
    }

private:
    std::mt19937_64 eng_;
};

} // namespace emf
