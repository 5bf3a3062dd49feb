#include "emf/dual.hpp"

#include <cmath>

namespace emf {

DualTensor d_add(const DualTensor& a, const DualTensor& b) {
    return {t_add(a.v, b.v), t_add(a.d, b.d)};
}

DualTensor d_sub(const DualTensor& a, const DualTensor& b) {
    return {t_sub(a.v, b.v), t_sub(a.d, b.d)};
}

DualTensor d_mul(const DualTensor& a, const DualTensor& b) {
    return {t_mul(a.v, b.v), t_add(t_mul(a.d, b.v), t_mul(a.v, b.d))};
}

DualTensor d_smul(const DualTensor& a, double s) { return {t_smul(a.v, s), t_smul(a.d, s)}; }

DualTensor d_matmul(const DualTensor& a, const DualTensor& b) {
    return {t_matmul(a.v, b.v), t_add(t_matmul(a.d, b.v), t_matmul(a.v, b.d))};
}

DualTensor d_linear(const DualTensor& x, const DualTensor& w, const DualTensor& b) {
    Tensor tangent = t_add(gemm(x.d, w.v, false, true), gemm(x.v, w.d, false, true));
    const std::size_t bn = tangent.rows(), d = tangent.cols();
    for (std::size_t i = 0; i < bn; ++i)
        for (std::size_t j = 0; j < d; ++j) tangent.at(i, j) += b.d[j];
    return {t_linear(x.v, w.v, b.v), std::move(tangent)};
}

DualTensor d_tanh(const DualTensor& a) {
    Tensor y = t_tanh(a.v);
    Tensor dt = t_mul(a.d, t_tanh_prime_from_y(y));
    return {std::move(y), std::move(dt)};
}

DualTensor d_silu(const DualTensor& a) {
    return {t_silu(a.v), t_mul(a.d, t_silu_prime(a.v))};
}

DualTensor d_sum(const DualTensor& a) { return {t_sum(a.v), t_sum(a.d)}; }

DualTensor d_mean(const DualTensor& a) { return {t_mean(a.v), t_mean(a.d)}; }

DualTensor d_row_sqnorm(const DualTensor& a) {
    const std::size_t bn = a.v.rows(), d = a.v.cols();
    Tensor dt({bn});
    for (std::size_t i = 0; i < bn; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += 2.0 * a.v[i * d + j] * a.d[i * d + j];
        dt[i] = s;
    }
    return {t_row_sqnorm(a.v), std::move(dt)};
}

DualTensor d_sqnorm(const DualTensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.numel(); ++i) s += 2.0 * a.v[i] * a.d[i];
    return {t_sqnorm(a.v), Tensor::scalar(s)};
}

DualTensor d_concat_cols(const std::vector<DualTensor>& parts) {
    std::vector<Tensor> vs, ds;
    vs.reserve(parts.size());
    ds.reserve(parts.size());
    for (const DualTensor& p : parts) {
        vs.push_back(p.v);
        ds.push_back(p.d);
    }
    return {t_concat_cols(vs), t_concat_cols(ds)};
}

DualTensor d_gather_rows(const DualTensor& table, const std::vector<int>& idx) {
    return {t_gather_rows(table.v, idx), t_gather_rows(table.d, idx)};
}

std::pair<Tensor, Tensor> jvp(const std::function<DualTensor(std::span<const DualTensor>)>& f,
                              const std::vector<Tensor>& inputs,
                              const std::vector<Tensor>& tangents) {
    contract(inputs.size() == tangents.size(), "jvp: inputs/tangents count mismatch");
    std::vector<DualTensor> duals;
    duals.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        contract(inputs[i].same_shape(tangents[i]),
                 "jvp: tangent shape " + tangents[i].shape_str() + " does not match input " + inputs[i].shape_str());
        duals.push_back(DualTensor::seeded(inputs[i], tangents[i]));
    }
    DualTensor out = f(duals);
    return {std::move(out.v), std::move(out.d)};
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double step) {
    contract(step > 0.0, "finite_difference_gradient: step must be > 0");
    Tensor grad = Tensor::zeros(point.shape());
    Tensor probe = point;
    for (std::size_t i = 0; i < point.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double fp = f(probe);
        probe[i] = orig - step;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

} // namespace emf
