#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "emf/errors.hpp"

namespace emf {

class Rng;

// Dense row-major f64 tensor. Rank 0 (scalar), 1 or 2 is all this project
// needs; shape is kept generic anyway.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor from_vector(std::vector<double> v);           // rank-1
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);
    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }

    // 2-D accessors (rank-1 tensors count as a single row)
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : numel(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double item() const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---- plain (value-level) ops ------------------------------------------------
// These back both the no-tape forward passes and the node closures in the
// reverse-mode engine. Shape mismatches raise ContractViolation.

Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor t_smul(const Tensor& a, double s);
Tensor t_matmul(const Tensor& a, const Tensor& b);       // (n,k) x (k,m)
Tensor t_linear(const Tensor& x, const Tensor& w, const Tensor& b); // x(B,in) w(out,in) b(out)
Tensor t_tanh(const Tensor& a);
Tensor t_silu(const Tensor& a);
Tensor t_sum(const Tensor& a);                           // scalar
Tensor t_mean(const Tensor& a);                          // scalar
Tensor t_row_sqnorm(const Tensor& a);                    // (B,D) -> (B)
Tensor t_sqnorm(const Tensor& a);                        // scalar sum of squares
Tensor t_concat_cols(const std::vector<Tensor>& parts);  // (B,k_i) -> (B, sum k_i)
Tensor t_gather_rows(const Tensor& table, const std::vector<int>& idx); // (C,H),(B) -> (B,H)

// derivative helpers
Tensor t_tanh_prime_from_y(const Tensor& y);             // 1 - y^2 given y = tanh(x)
Tensor t_silu_prime(const Tensor& x);

// C := A(^T) * B(^T); plain ikj kernel, single-threaded by design
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b);
Tensor t_colsum(const Tensor& a);                        // (B,D) -> (D)

inline void axpy(double s, const Tensor& x, Tensor& acc) {
    contract(x.same_shape(acc), "axpy: shape mismatch");
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += s * x[i];
}

} // namespace emf
