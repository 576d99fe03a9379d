#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"

#include "milgrade/errors.hpp"
#include "milgrade/matrix.hpp"
#include "milgrade/numerics.hpp"
#include "milgrade/rng.hpp"

using namespace milgrade;

namespace {

// Naive triple-loop reference, kept independent of the library kernels.
Matrix matmul_reference(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
    return m;
}

} // namespace

TEST_CASE("matmul identity and hand example") {
    Matrix eye(2, 2);
    eye(0, 0) = eye(1, 1) = 1.0;
    Matrix a(2, 2);
    a(0, 0) = 3.5;
    a(0, 1) = -1.0;
    a(1, 0) = 0.25;
    a(1, 1) = 7.0;
    const Matrix ia = matmul(eye, a);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ia.data[i] == a.data[i]);

    Matrix b(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = 3;
    a(1, 1) = 4;
    b(0, 0) = 5;
    b(0, 1) = 6;
    b(1, 0) = 7;
    b(1, 1) = 8;
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(19).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(22).epsilon(1e-12));
    CHECK(c(1, 0) == doctest::Approx(43).epsilon(1e-12));
    CHECK(c(1, 1) == doctest::Approx(50).epsilon(1e-12));

    const Matrix zero(2, 3);
    const Matrix az = matmul(a, zero);
    for (double v : az.data) CHECK(v == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    const Matrix a(3, 4);
    const Matrix b(5, 2);
    bool threw = false;
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("3x4") != std::string::npos);
        CHECK(msg.find("5x2") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("matmul variants agree with the triple-loop reference") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 64));
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 64));
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 64));
        const Matrix a = random_matrix(m, k, rng);
        const Matrix b = random_matrix(k, n, rng);
        const Matrix want = matmul_reference(a, b);
        const Matrix got = matmul(a, b);
        for (std::size_t i = 0; i < want.data.size(); ++i) {
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
        }
        // A * B == A * (B^T)^T and (A^T)^T * B through the fused variants.
        const Matrix got_nt = matmul_nt(a, transpose(b));
        const Matrix got_tn = matmul_tn(transpose(a), b);
        for (std::size_t i = 0; i < want.data.size(); ++i) {
            CHECK(got_nt.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
            CHECK(got_tn.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("softmax basics") {
    const std::vector<double> u = softmax({0.0, 0.0, 0.0});
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const std::vector<double> p = softmax({1.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.268941).epsilon(1e-6));

    CHECK_THROWS_AS(softmax({}), DomainError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 40));
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-30.0, 30.0);
        const std::vector<double> p = softmax(v);
        double sum = 0.0;
        for (double x : p) {
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);

        const double shift = rng.uniform(-100.0, 100.0);
        std::vector<double> w = v;
        for (double& x : w) x += shift;
        const std::vector<double> q = softmax(w);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("cross entropy from logits") {
    CHECK(cross_entropy_from_logits({0.0, 0.0}, 0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy_from_logits({0.0, 50.0, 0.0}, 1) < 1e-9);
    CHECK(cross_entropy_from_logits({1.0, 0.0}, 1) == doctest::Approx(1.313262).epsilon(1e-6));
    CHECK_THROWS_AS(cross_entropy_from_logits({0.0, 1.0}, 2), DomainError);
    CHECK_THROWS_AS(cross_entropy_from_logits({0.0, 1.0}, -1), DomainError);

    // Agreement with -log softmax[y] on random vectors.
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 12));
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-20.0, 20.0);
        const int y = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        const double direct = cross_entropy_from_logits(v, y);
        const double via_softmax = -std::log(softmax(v)[static_cast<std::size_t>(y)]);
        CHECK(direct == doctest::Approx(via_softmax).epsilon(1e-12));
        CHECK(direct >= 0.0);
    }
}

TEST_CASE("adam zero gradient leaves parameters bit-identical") {
    Rng rng(3);
    Matrix param = random_matrix(4, 3, rng);
    const Matrix before = param;
    AdamState st = make_adam_state(4, 3, 0.1);
    const Matrix zero(4, 3);
    for (int step = 0; step < 5; ++step) adam_step(param, zero, st);
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        CHECK(param.data[i] == before.data[i]);
    }
    CHECK(st.t == 5);
}

TEST_CASE("adam first step matches the closed form") {
    Matrix param(1, 1);
    param(0, 0) = 1.0;
    Matrix grad(1, 1);
    grad(0, 0) = 1.0;
    AdamState st = make_adam_state(1, 1, 0.1);
    adam_step(param, grad, st);
    // mhat = vhat = 1 at t = 1, so the update is lr / (1 + eps).
    CHECK(param(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(st.t == 1);
}

TEST_CASE("adam identical gradients produce identical updates") {
    Matrix param(2, 1);
    param(0, 0) = 0.7;
    param(1, 0) = 0.7;
    Matrix grad(2, 1);
    grad(0, 0) = -0.3;
    grad(1, 0) = -0.3;
    AdamState st = make_adam_state(2, 1, 0.05);
    for (int step = 0; step < 7; ++step) adam_step(param, grad, st);
    CHECK(param(0, 0) == param(1, 0));

    const Matrix bad(3, 1);
    CHECK_THROWS_AS(adam_step(param, bad, st), DimensionError);
}

TEST_CASE("finite difference gradient oracle") {
    const auto square = [](const std::vector<double>& x) { return x[0] * x[0]; };
    const std::vector<double> g = finite_diff_grad(square, {3.0}, 1e-5);
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

    const auto constant = [](const std::vector<double>&) { return 4.2; };
    for (double v : finite_diff_grad(constant, {1.0, -2.0, 0.5}, 1e-5)) {
        CHECK(v == 0.0);
    }

    const auto total = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    };
    for (double v : finite_diff_grad(total, {0.1, 0.2, 0.3, 0.4}, 1e-5)) {
        CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }

    const auto bad = [](const std::vector<double>& x) { return std::log(x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(bad, {0.0}, 1e-3), NumericError);
}
