#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>
#include <random>

#include "braingnn/encoder.hpp"
#include "doctest.h"
#include "finite_diff.hpp"

using namespace braingnn;
using braingnn::testing::max_rel_err;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

Matrix random_adjacency(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.3, 0.9);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = u(rng);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return a;
}

Matrix permutation_matrix(const std::vector<std::size_t>& perm) {
    Matrix p(perm.size(), perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) p(i, perm[i]) = 1.0;
    return p;
}

/// Independent loop-based D̂⁻¹ Â X Θ.
Matrix mp_oracle(const Matrix& a, const Matrix& x, const Matrix& theta, bool self_loop) {
    const std::size_t n = a.rows();
    Matrix ax(n, x.cols());
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j) + (self_loop && i == j ? 1.0 : 0.0);
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += (a(i, j) + (self_loop && i == j ? 1.0 : 0.0)) * x(j, c);
            ax(i, c) = s / deg;
        }
    }
    Matrix out(n, theta.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < theta.cols(); ++k)
            for (std::size_t c = 0; c < x.cols(); ++c) out(i, k) += ax(i, c) * theta(c, k);
    return out;
}

}  // namespace

TEST_CASE("self loops raise only the diagonal") {
    const Matrix a{{0.0, 0.5}, {0.5, 0.0}};
    const Matrix with = add_self_loops(a, SelfLoop::add);
    CHECK(with(0, 0) == 1.0);
    CHECK(with(0, 1) == 0.5);
    const Matrix without = add_self_loops(a, SelfLoop::keep);
    CHECK(without(0, 0) == 0.0);
    CHECK_THROWS_AS(add_self_loops(Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("propagation operator rows sum to one") {
    std::mt19937_64 rng(5);
    const Matrix a = random_adjacency(7, rng);
    for (SelfLoop mode : {SelfLoop::add, SelfLoop::keep}) {
        const Matrix p = propagation_operator(a, mode);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) s += p(i, j);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("mean pooling reproduces the worked two-node example") {
    const Matrix a{{0.0, 1.0}, {1.0, 0.0}};
    const Matrix x{{1.0}, {3.0}};
    const Matrix theta{{1.0}};
    const Matrix out = mean_pool_propagate(a, x, theta);
    CHECK(out(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(out(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("mean pooling matches the loop oracle") {
    std::mt19937_64 rng(9);
    const Matrix a = random_adjacency(6, rng);
    const Matrix x = random_matrix(6, 4, rng);
    const Matrix theta = random_matrix(4, 3, rng);
    CHECK(max_abs_diff(mean_pool_propagate(a, x, theta, SelfLoop::add),
                       mp_oracle(a, x, theta, true)) <= 1e-12);
    CHECK(max_abs_diff(mean_pool_propagate(a, x, theta, SelfLoop::keep),
                       mp_oracle(a, x, theta, false)) <= 1e-12);
}

TEST_CASE("degenerate degrees are rejected") {
    const Matrix a{{0.0, -1.0}, {-1.0, 0.0}};  // rows of Â sum to 0
    CHECK_THROWS_WITH_AS(propagation_operator(a, SelfLoop::add),
                         doctest::Contains("degenerate"), std::runtime_error);
}

TEST_CASE("encoder weights validate their chain") {
    EncoderWeights w;
    w.theta = {Matrix(10, 8), Matrix(8, 8)};
    w.skip = Matrix(10, 8);
    w.validate(10);
    w.skip = Matrix(10, 4);
    CHECK_THROWS_AS(w.validate(10), std::invalid_argument);
    w.skip = Matrix(10, 8);
    w.theta[1] = Matrix(4, 8);
    CHECK_THROWS_AS(w.validate(10), std::invalid_argument);
    EncoderWeights deep;
    deep.theta = {Matrix(10, 8), Matrix(8, 4), Matrix(4, 4)};
    deep.skip = Matrix(10, 8);
    CHECK_THROWS_WITH_AS(deep.validate(10), doctest::Contains("skip sum"),
                         std::invalid_argument);
}

TEST_CASE("two-layer forward matches a from-scratch computation") {
    std::mt19937_64 rng(13);
    const std::size_t n = 5, in = 4, width = 3;
    const Matrix a = random_adjacency(n, rng);
    const Matrix x = random_matrix(n, in, rng);
    EncoderWeights w;
    w.theta = {random_matrix(in, width, rng), random_matrix(width, width, rng)};
    w.skip = random_matrix(in, width, rng);

    const Matrix h1 = sigmoid(mp_oracle(a, x, w.theta[0], true));
    // Â X W with loops.
    Matrix axw(n, width);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < width; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double xw = 0.0;
                for (std::size_t c = 0; c < in; ++c) xw += x(j, c) * w.skip(c, k);
                s += (a(i, j) + (i == j ? 1.0 : 0.0)) * xw;
            }
            axw(i, k) = s;
        }
    const Matrix h2 = sigmoid(mp_oracle(a, add(h1, axw), w.theta[1], true));

    const GraphOps ops = make_graph_ops(a);
    const Matrix got = encode_plain(x, ops, w);
    CHECK(max_abs_diff(got, h2) <= 1e-12);

    Tape t;
    std::vector<NodeId> theta = {t.leaf(w.theta[0]), t.leaf(w.theta[1])};
    const NodeId h = encode(t, t.constant(x), ops, theta, t.leaf(w.skip));
    CHECK(max_abs_diff(t.value(h), h2) <= 1e-12);
}

TEST_CASE("single-layer encoders ignore the skip weight") {
    std::mt19937_64 rng(17);
    const Matrix a = random_adjacency(4, rng);
    const Matrix x = random_matrix(4, 3, rng);
    EncoderWeights w;
    w.theta = {random_matrix(3, 2, rng)};
    w.skip = random_matrix(3, 2, rng);
    const GraphOps ops = make_graph_ops(a);
    const Matrix base = encode_plain(x, ops, w);
    w.skip = random_matrix(3, 2, rng);
    CHECK(max_abs_diff(encode_plain(x, ops, w), base) == 0.0);
}

TEST_CASE("node permutations commute with the encoder") {
    std::mt19937_64 rng(21);
    const std::size_t n = 8;
    const Matrix a = random_adjacency(n, rng);
    const Matrix x = random_matrix(n, 4, rng);
    EncoderWeights w;
    w.theta = {random_matrix(4, 3, rng), random_matrix(3, 3, rng)};
    w.skip = random_matrix(4, 3, rng);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix p = permutation_matrix(perm);

    const Matrix h = encode_plain(x, make_graph_ops(a), w);
    const Matrix a_perm = matmul(matmul(p, a), transpose(p));
    const Matrix x_perm = matmul(p, x);
    const Matrix h_perm = encode_plain(x_perm, make_graph_ops(a_perm), w);
    CHECK(max_abs_diff(h_perm, matmul(p, h)) <= 1e-12);
}

TEST_CASE("encoder gradients match finite differences") {
    std::mt19937_64 rng(29);
    const Matrix a = random_adjacency(5, rng);
    const Matrix x = random_matrix(5, 3, rng);
    const GraphOps ops = make_graph_ops(a);
    Matrix t1 = random_matrix(3, 2, rng);
    Matrix t2 = random_matrix(2, 2, rng);
    Matrix skip = random_matrix(3, 2, rng);
    auto eval = [&] {
        Tape t;
        std::vector<NodeId> theta = {t.leaf(t1), t.leaf(t2)};
        return t.value(t.sum(encode(t, t.constant(x), ops, theta, t.leaf(skip))))(0, 0);
    };
    Tape t;
    std::vector<NodeId> theta = {t.leaf(t1), t.leaf(t2)};
    const NodeId ns = t.leaf(skip);
    t.backward(t.sum(encode(t, t.constant(x), ops, theta, ns)));
    CHECK(max_rel_err({&t1, &t2, &skip}, {t.grad(theta[0]), t.grad(theta[1]), t.grad(ns)},
                      eval) < 1e-6);
}
