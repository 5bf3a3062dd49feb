#pragma once

#include <array>
#include <string>
#include <vector>

#include "emf/rng.hpp"
#include "emf/tensor.hpp"

namespace emf {

enum class DatasetKind { eight_gaussians, two_moons, checkerboard, ring_manifold, labeled_gaussians };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind k);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::eight_gaussians;
    double scale = 4.0;     // mode radius / board half-width
    double noise_std = 0.3;
    int n_classes = 8;      // labeled_gaussians only

    bool labeled() const { return kind == DatasetKind::labeled_gaussians; }
};

// per-kind default scale/noise
DatasetConfig default_dataset(DatasetKind kind);

struct DataBatch {
    Tensor x;                // (n, 2)
    std::vector<int> labels; // n entries for labeled datasets, else empty
};

DataBatch sample_data(const DatasetConfig& cfg, Rng& rng, int n);

// nominal plotting/histogram box {xmin, xmax, ymin, ymax}
std::array<double, 4> nominal_bounds(const DatasetConfig& cfg);

} // namespace emf
