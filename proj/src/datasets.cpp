#include "emf/datasets.hpp"

#include <cmath>
#include <numbers>

namespace emf {

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "eight_gaussians") return DatasetKind::eight_gaussians;
    if (s == "two_moons") return DatasetKind::two_moons;
    if (s == "checkerboard") return DatasetKind::checkerboard;
    if (s == "ring_manifold") return DatasetKind::ring_manifold;
    if (s == "labeled_gaussians") return DatasetKind::labeled_gaussians;
    contract_fail("unknown dataset kind '" + s + "'");
}

std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::eight_gaussians: return "eight_gaussians";
        case DatasetKind::two_moons: return "two_moons";
        case DatasetKind::checkerboard: return "checkerboard";
        case DatasetKind::ring_manifold: return "ring_manifold";
        case DatasetKind::labeled_gaussians: return "labeled_gaussians";
    }
    contract_fail("bad dataset kind");
}

DatasetConfig default_dataset(DatasetKind kind) {
    DatasetConfig c;
    c.kind = kind;
    switch (kind) {
        case DatasetKind::eight_gaussians: c.scale = 4.0; c.noise_std = 0.3; break;
        case DatasetKind::two_moons: c.scale = 2.0; c.noise_std = 0.1; break;
        case DatasetKind::checkerboard: c.scale = 4.0; c.noise_std = 0.0; break;
        case DatasetKind::ring_manifold: c.scale = 2.0; c.noise_std = 0.1; break;
        case DatasetKind::labeled_gaussians: c.scale = 4.0; c.noise_std = 0.3; c.n_classes = 8; break;
    }
    return c;
}

DataBatch sample_data(const DatasetConfig& cfg, Rng& rng, int n) {
    contract(n >= 0, "sample_data: n must be >= 0");
    DataBatch out;
    out.x = Tensor({static_cast<std::size_t>(n), 2});
    if (cfg.labeled()) {
        contract(cfg.n_classes >= 1, "labeled_gaussians: n_classes must be >= 1");
        out.labels.resize(n);
    }

    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        double px = 0.0, py = 0.0;
        switch (cfg.kind) {
            case DatasetKind::eight_gaussians: {
                const int m = rng.uniform_int(8);
                const double a = two_pi * m / 8.0;
                px = cfg.scale * std::cos(a) + cfg.noise_std * rng.gauss();
                py = cfg.scale * std::sin(a) + cfg.noise_std * rng.gauss();
                break;
            }
            case DatasetKind::two_moons: {
                // two interleaved half circles of radius `scale`
                const bool upper = rng.uniform_int(2) == 0;
                const double a = std::numbers::pi * rng.uniform();
                if (upper) {
                    px = cfg.scale * std::cos(a) - cfg.scale * 0.5;
                    py = cfg.scale * std::sin(a) - cfg.scale * 0.25;
                } else {
                    px = cfg.scale * 0.5 - cfg.scale * std::cos(a);
                    py = cfg.scale * 0.25 - cfg.scale * std::sin(a);
                }
                px += cfg.noise_std * rng.gauss();
                py += cfg.noise_std * rng.gauss();
                break;
            }
            case DatasetKind::checkerboard: {
                // alternating unit-ratio cells of an 8x8 board on [-s, s]^2
                const double cell = cfg.scale / 4.0;
                const int ci = rng.uniform_int(8);
                const int half = rng.uniform_int(4);
                const int cj = 2 * half + (ci % 2 == 0 ? 0 : 1); // (ci + cj) even
                px = -cfg.scale + (ci + rng.uniform()) * cell;
                py = -cfg.scale + (cj + rng.uniform()) * cell;
                px += cfg.noise_std * rng.gauss();
                py += cfg.noise_std * rng.gauss();
                break;
            }
            case DatasetKind::ring_manifold: {
                const double a = two_pi * rng.uniform();
                const double rad = cfg.scale + cfg.noise_std * rng.gauss();
                px = rad * std::cos(a);
                py = rad * std::sin(a);
                break;
            }
            case DatasetKind::labeled_gaussians: {
                const int m = rng.uniform_int(cfg.n_classes);
                const double a = two_pi * m / cfg.n_classes;
                px = cfg.scale * std::cos(a) + cfg.noise_std * rng.gauss();
                py = cfg.scale * std::sin(a) + cfg.noise_std * rng.gauss();
                out.labels[i] = m;
                break;
            }
        }
        out.x.at(i, 0) = px;
        out.x.at(i, 1) = py;
    }
    return out;
}

std::array<double, 4> nominal_bounds(const DatasetConfig& cfg) {
    const double s = cfg.scale + 4.0 * cfg.noise_std + 1.0;
    switch (cfg.kind) {
        case DatasetKind::checkerboard: return {-cfg.scale, cfg.scale, -cfg.scale, cfg.scale};
        case DatasetKind::two_moons: return {-1.6 * cfg.scale, 1.6 * cfg.scale, -1.6 * cfg.scale, 1.6 * cfg.scale};
        default: return {-s, s, -s, s};
    }
}

} // namespace emf
