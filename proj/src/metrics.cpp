#include "emf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace emf {

namespace {

void check_points(const Tensor& x, const char* name) {
    contract(x.ndim() == 2 && x.cols() == 2 && x.rows() > 0,
             std::string(name) + ": expects a non-empty (n, 2) point set");
}

double dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    const double dx = a[2 * i] - b[2 * j];
    const double dy = a[2 * i + 1] - b[2 * j + 1];
    return std::sqrt(dx * dx + dy * dy);
}

double mean_cross_distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) s += dist(a, i, b, j);
    return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

} // namespace

double energy_distance(const Tensor& a, const Tensor& b) {
    check_points(a, "energy_distance");
    check_points(b, "energy_distance");
    return 2.0 * mean_cross_distance(a, b) - mean_cross_distance(a, a) - mean_cross_distance(b, b);
}

double median_pairwise_distance(const Tensor& x) {
    check_points(x, "median_pairwise_distance");
    const std::size_t n = x.rows();
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(dist(x, i, x, j));
    if (d.empty()) return 0.0;
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    return (m % 2 == 1) ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

double mmd_rbf(const Tensor& a, const Tensor& b, double sigma) {
    check_points(a, "mmd_rbf");
    check_points(b, "mmd_rbf");
    if (!(sigma > 0.0)) {
        // median heuristic on the pooled sample; keeps the metric symmetric
        Tensor pooled({a.rows() + b.rows(), 2});
        for (std::size_t i = 0; i < a.numel(); ++i) pooled[i] = a[i];
        for (std::size_t i = 0; i < b.numel(); ++i) pooled[a.numel() + i] = b[i];
        sigma = 0.5 * median_pairwise_distance(pooled);
        if (!(sigma > 0.0)) sigma = 1.0;
    }
    const double inv = 1.0 / (2.0 * sigma * sigma);
    auto mean_kernel = [inv](const Tensor& u, const Tensor& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i)
            for (std::size_t j = 0; j < v.rows(); ++j) {
                const double dd = dist(u, i, v, j);
                s += std::exp(-dd * dd * inv);
            }
        return s / (static_cast<double>(u.rows()) * static_cast<double>(v.rows()));
    };
    return mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
}

double histogram_tv(const Tensor& a, const Tensor& b, const std::array<double, 4>& bounds, int bins) {
    check_points(a, "histogram_tv");
    check_points(b, "histogram_tv");
    contract(bins > 0, "histogram_tv: bins must be > 0");
    contract(bounds[1] > bounds[0] && bounds[3] > bounds[2], "histogram_tv: degenerate bounds");

    auto hist = [&](const Tensor& x) {
        std::vector<double> h(static_cast<std::size_t>(bins) * bins, 0.0);
        const double sx = bins / (bounds[1] - bounds[0]);
        const double sy = bins / (bounds[3] - bounds[2]);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            int bx = static_cast<int>((x[2 * i] - bounds[0]) * sx);
            int by = static_cast<int>((x[2 * i + 1] - bounds[2]) * sy);
            bx = std::clamp(bx, 0, bins - 1);
            by = std::clamp(by, 0, bins - 1);
            h[static_cast<std::size_t>(by) * bins + bx] += 1.0 / static_cast<double>(x.rows());
        }
        return h;
    };
    const std::vector<double> ha = hist(a), hb = hist(b);
    double s = 0.0;
    for (std::size_t i = 0; i < ha.size(); ++i) s += std::abs(ha[i] - hb[i]);
    return 0.5 * s;
}

MetricReport compute_metrics(const Tensor& samples, const Tensor& reference,
                             const std::array<double, 4>& bounds) {
    MetricReport r;
    r.energy = energy_distance(samples, reference);
    r.mmd = mmd_rbf(samples, reference);
    r.tv = histogram_tv(samples, reference, bounds);
    return r;
}

} // namespace emf
