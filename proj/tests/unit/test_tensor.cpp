#include <cmath>

#include "doctest.h"
#include "emf/rng.hpp"
#include "emf/tensor.hpp"

using namespace emf;

TEST_SUITE("tensor") {

TEST_CASE("construction and accessors") {
    Tensor t({2, 3});
    CHECK(t.ndim() == 2);
    CHECK(t.numel() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);

    Tensor s = Tensor::scalar(3.5);
    CHECK(s.is_scalar());
    CHECK(s.item() == 3.5);

    Tensor v = Tensor::from_vector({1.0, 2.0});
    CHECK(v.ndim() == 1);
    CHECK(v.rows() == 1);
    CHECK(v.cols() == 2);

    Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
    CHECK(m.at(1, 0) == 3.0);
    CHECK_THROWS_AS(Tensor::matrix(2, 2, {1, 2, 3}), ContractViolation);

    Tensor f = Tensor::full({3}, 7.0);
    CHECK(f[2] == 7.0);

    CHECK_THROWS_AS(t.item(), ContractViolation); // non-scalar
}

TEST_CASE("randn determinism") {
    Rng a(42), b(42);
    Tensor x = Tensor::randn({4, 4}, a);
    Tensor y = Tensor::randn({4, 4}, b);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x[i] == y[i]);
    CHECK(x.all_finite());
}

TEST_CASE("all_finite flags NaN and Inf") {
    Tensor t({2});
    CHECK(t.all_finite());
    t[0] = std::nan("");
    CHECK_FALSE(t.all_finite());
    t[0] = 0.0;
    t[1] = INFINITY;
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("elementwise ops") {
    Tensor a = Tensor::from_vector({1, -2, 3});
    Tensor b = Tensor::from_vector({4, 5, -6});
    Tensor s = t_add(a, b);
    Tensor d = t_sub(a, b);
    Tensor m = t_mul(a, b);
    Tensor k = t_smul(a, -2.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s[i] == a[i] + b[i]);
        CHECK(d[i] == a[i] - b[i]);
        CHECK(m[i] == a[i] * b[i]);
        CHECK(k[i] == -2.0 * a[i]);
    }
    CHECK_THROWS_AS(t_add(a, Tensor::from_vector({1, 2})), ContractViolation);
}

TEST_CASE("matmul against a hand-computed example") {
    Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12});
    Tensor c = t_matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 2);
    CHECK(c.at(0, 0) == 58.0);
    CHECK(c.at(0, 1) == 64.0);
    CHECK(c.at(1, 0) == 139.0);
    CHECK(c.at(1, 1) == 154.0);
    CHECK_THROWS_AS(t_matmul(a, a), ContractViolation);
}

TEST_CASE("gemm transpose variants agree with t_matmul") {
    Rng rng(7);
    Tensor a = Tensor::randn({3, 4}, rng);
    Tensor b = Tensor::randn({4, 5}, rng);
    Tensor at({4, 3});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) at.at(j, i) = a.at(i, j);
    Tensor bt({5, 4});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) bt.at(j, i) = b.at(i, j);

    Tensor ref = t_matmul(a, b);
    Tensor g1 = gemm(a, b, false, false);
    Tensor g2 = gemm(at, b, true, false);
    Tensor g3 = gemm(a, bt, false, true);
    Tensor g4 = gemm(at, bt, true, true);
    for (std::size_t i = 0; i < ref.numel(); ++i) {
        CHECK(g1[i] == doctest::Approx(ref[i]).epsilon(1e-14));
        CHECK(g2[i] == doctest::Approx(ref[i]).epsilon(1e-14));
        CHECK(g3[i] == doctest::Approx(ref[i]).epsilon(1e-14));
        CHECK(g4[i] == doctest::Approx(ref[i]).epsilon(1e-14));
    }
}

TEST_CASE("linear layer is x W^T + b") {
    Tensor x = Tensor::matrix(2, 3, {1, 0, 2, 0, 1, -1});
    Tensor w = Tensor::matrix(2, 3, {1, 2, 3, -1, 0, 1});
    Tensor b = Tensor::from_vector({0.5, -0.5});
    Tensor y = t_linear(x, w, b);
    CHECK(y.at(0, 0) == doctest::Approx(1 * 1 + 0 * 2 + 2 * 3 + 0.5));
    CHECK(y.at(0, 1) == doctest::Approx(1 * -1 + 0 * 0 + 2 * 1 - 0.5));
    CHECK(y.at(1, 0) == doctest::Approx(0 * 1 + 1 * 2 - 1 * 3 + 0.5));
    CHECK(y.at(1, 1) == doctest::Approx(0 * -1 + 1 * 0 - 1 * 1 - 0.5));
}

TEST_CASE("activations and their derivative helpers") {
    Tensor x = Tensor::from_vector({-2.0, -0.5, 0.0, 0.5, 2.0});
    Tensor th = t_tanh(x);
    Tensor si = t_silu(x);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(th[i] == doctest::Approx(std::tanh(x[i])));
        CHECK(si[i] == doctest::Approx(x[i] / (1.0 + std::exp(-x[i]))));
    }
    CHECK(si[2] == 0.0);

    Tensor thp = t_tanh_prime_from_y(th);
    Tensor sip = t_silu_prime(x);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double fd_t = (std::tanh(x[i] + h) - std::tanh(x[i] - h)) / (2 * h);
        auto silu = [](double v) { return v / (1.0 + std::exp(-v)); };
        const double fd_s = (silu(x[i] + h) - silu(x[i] - h)) / (2 * h);
        CHECK(thp[i] == doctest::Approx(fd_t).epsilon(1e-8));
        CHECK(sip[i] == doctest::Approx(fd_s).epsilon(1e-8));
    }
}

TEST_CASE("reductions") {
    Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    CHECK(t_sum(a).item() == 10.0);
    CHECK(t_mean(a).item() == 2.5);
    CHECK(t_sqnorm(a).item() == doctest::Approx(1 + 4 + 9 + 16));
    Tensor rs = t_row_sqnorm(a);
    CHECK(rs.numel() == 2);
    CHECK(rs[0] == doctest::Approx(5.0));
    CHECK(rs[1] == doctest::Approx(25.0));
    Tensor cs = t_colsum(a);
    CHECK(cs[0] == 4.0);
    CHECK(cs[1] == 6.0);
}

TEST_CASE("concat and gather") {
    Tensor a = Tensor::matrix(2, 1, {1, 2});
    Tensor b = Tensor::matrix(2, 2, {3, 4, 5, 6});
    Tensor c = t_concat_cols({a, b});
    CHECK(c.cols() == 3);
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(0, 2) == 4.0);
    CHECK(c.at(1, 1) == 5.0);

    Tensor table = Tensor::matrix(3, 2, {0, 1, 10, 11, 20, 21});
    Tensor g = t_gather_rows(table, {2, 0, 2});
    CHECK(g.rows() == 3);
    CHECK(g.at(0, 1) == 21.0);
    CHECK(g.at(1, 0) == 0.0);
    CHECK(g.at(2, 0) == 20.0);
    CHECK_THROWS_AS(t_gather_rows(table, {3}), ContractViolation);
    CHECK_THROWS_AS(t_gather_rows(table, {-1}), ContractViolation);
}

TEST_CASE("axpy") {
    Tensor x = Tensor::from_vector({1, 2});
    Tensor acc = Tensor::from_vector({10, 20});
    axpy(0.5, x, acc);
    CHECK(acc[0] == 10.5);
    CHECK(acc[1] == 21.0);
    Tensor bad = Tensor::from_vector({1, 2, 3});
    CHECK_THROWS_AS(axpy(1.0, bad, acc), ContractViolation);
}

} // TEST_SUITE
