#pragma once

#include <array>

#include "emf/tensor.hpp"

namespace emf {

// Two-sample discrepancies between point sets (n, 2). All are V-statistics
// (diagonal terms included) computed with plain ordered loops, so results are
// deterministic and symmetric where the math says so.

double energy_distance(const Tensor& a, const Tensor& b);

// squared MMD with RBF kernel exp(-||x-y||^2 / (2 sigma^2)). sigma <= 0
// selects the median heuristic: 0.5 * median pairwise distance of the pooled
// sample a+b (falls back to sigma = 1 when there are no distinct pairs), so
// the metric stays symmetric in (a, b).
double mmd_rbf(const Tensor& a, const Tensor& b, double sigma = 0.0);

double median_pairwise_distance(const Tensor& x);

// half L1 distance between normalized 2-D histograms on `bounds`
// {xmin, xmax, ymin, ymax}; out-of-range points clamp to edge bins
double histogram_tv(const Tensor& a, const Tensor& b, const std::array<double, 4>& bounds, int bins = 50);

struct MetricReport {
    double energy = 0.0;
    double mmd = 0.0;
    double tv = 0.0;
};

MetricReport compute_metrics(const Tensor& samples, const Tensor& reference,
                             const std::array<double, 4>& bounds);

} // namespace emf
