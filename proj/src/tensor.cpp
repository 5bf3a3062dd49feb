#include "emf/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "emf/rng.hpp"

namespace emf {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, 0.0);
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {v};
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
    Tensor t;
    t.shape_ = {v.size()};
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    contract(v.size() == r * c, "Tensor::matrix: data size does not match shape");
    Tensor t;
    t.shape_ = {r, c};
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (double& x : t.raw()) x = stddev * rng.gauss();
    return t;
}

double Tensor::item() const {
    contract(numel() == 1, "Tensor::item on non-scalar of shape " + shape_str());
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
}

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name, double (*op)(double, double)) {
    contract(a.same_shape(b), std::string(name) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = op(a[i], b[i]);
    return out;
}

} // namespace

Tensor t_add(const Tensor& a, const Tensor& b) {
    return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
    return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
    return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor t_smul(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return out;
}

Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    contract(a.ndim() == 2 && b.ndim() == 2, "gemm: expects rank-2 operands");
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t k = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    contract(k == kb, "gemm: inner dimension mismatch " + a.shape_str() + " vs " + b.shape_str());

    Tensor c({m, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const std::size_t lda = a.cols(), ldb = b.cols();

    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ap[i * lda + p];
                const double* brow = bp + p * ldb;
                double* crow = cp + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double* arow = ap + i * lda;
                const double* brow = bp + j * ldb;
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
                cp[i * n + j] = s;
            }
    } else if (trans_a && !trans_b) {
        for (std::size_t p = 0; p < k; ++p) {
            const double* arow = ap + p * lda;
            const double* brow = bp + p * ldb;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                double* crow = cp + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += ap[p * lda + i] * bp[j * ldb + p];
                cp[i * n + j] = s;
            }
    }
    return c;
}

Tensor t_matmul(const Tensor& a, const Tensor& b) { return gemm(a, b, false, false); }

Tensor t_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    contract(x.ndim() == 2 && w.ndim() == 2, "linear: x and w must be rank-2");
    contract(x.cols() == w.cols(), "linear: input width " + x.shape_str() + " vs weight " + w.shape_str());
    contract(b.numel() == w.rows(), "linear: bias size mismatch");
    Tensor out = gemm(x, w, false, true); // (B,in)*(out,in)^T
    const std::size_t bn = out.rows(), d = out.cols();
    for (std::size_t i = 0; i < bn; ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) += b[j];
    return out;
}

Tensor t_tanh(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a[i]);
    return out;
}

Tensor t_tanh_prime_from_y(const Tensor& y) {
    Tensor out = y;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 - y[i] * y[i];
    return out;
}

Tensor t_silu(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-a[i]));
        out[i] = a[i] * s;
    }
    return out;
}

Tensor t_silu_prime(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        out[i] = s * (1.0 + x[i] * (1.0 - s));
    }
    return out;
}

Tensor t_sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
    return Tensor::scalar(s);
}

Tensor t_mean(const Tensor& a) {
    contract(a.numel() > 0, "mean of empty tensor");
    return Tensor::scalar(t_sum(a).item() / static_cast<double>(a.numel()));
}

Tensor t_row_sqnorm(const Tensor& a) {
    const std::size_t bn = a.rows(), d = a.cols();
    Tensor out({bn});
    for (std::size_t i = 0; i < bn; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = a[i * d + j];
            s += v * v;
        }
        out[i] = s;
    }
    return out;
}

Tensor t_sqnorm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * a[i];
    return Tensor::scalar(s);
}

Tensor t_concat_cols(const std::vector<Tensor>& parts) {
    contract(!parts.empty(), "concat: no operands");
    const std::size_t bn = parts.front().rows();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        contract(p.rows() == bn, "concat: row count mismatch");
        total += p.cols();
    }
    Tensor out({bn, total});
    for (std::size_t i = 0; i < bn; ++i) {
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            const std::size_t d = p.cols();
            for (std::size_t j = 0; j < d; ++j) out.at(i, off + j) = p[i * d + j];
            off += d;
        }
    }
    return out;
}

Tensor t_gather_rows(const Tensor& table, const std::vector<int>& idx) {
    contract(table.ndim() == 2, "gather_rows: table must be rank-2");
    const std::size_t h = table.cols();
    Tensor out({idx.size(), h});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        contract(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < table.rows(),
                 "gather_rows: index out of range");
        const double* src = table.data() + static_cast<std::size_t>(idx[i]) * h;
        double* dst = out.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
    }
    return out;
}

Tensor t_colsum(const Tensor& a) {
    const std::size_t bn = a.rows(), d = a.cols();
    Tensor out({d});
    for (std::size_t i = 0; i < bn; ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += a[i * d + j];
    return out;
}

} // namespace emf
