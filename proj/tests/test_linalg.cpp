#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "stokesband/errors.hpp"
#include "stokesband/linalg.hpp"

using namespace stokesband;

namespace {

SparseMatrix dense_to_sparse(const std::vector<std::vector<double>>& d) {
    int n = static_cast<int>(d.size());
    int m = static_cast<int>(d[0].size());
    TripletBuilder t(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (d[i][j] != 0.0) t.add(i, j, d[i][j]);
    return t.compress();
}

SparseMatrix identity(int n) {
    TripletBuilder t(n, n);
    for (int i = 0; i < n; ++i) t.add(i, i, 1.0);
    return t.compress();
}

// 5-point Laplacian on an n x n interior grid
SparseMatrix laplacian_2d(int n) {
    TripletBuilder t(n * n, n * n);
    auto id = [n](int i, int j) { return j * n + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            t.add(id(i, j), id(i, j), 4.0);
            if (i > 0) t.add(id(i, j), id(i - 1, j), -1.0);
            if (i < n - 1) t.add(id(i, j), id(i + 1, j), -1.0);
            if (j > 0) t.add(id(i, j), id(i, j - 1), -1.0);
            if (j < n - 1) t.add(id(i, j), id(i, j + 1), -1.0);
        }
    return t.compress();
}

} // namespace

TEST_CASE("triplet compression sums duplicates and sorts columns") {
    TripletBuilder t(2, 3);
    t.add(1, 2, 1.0);
    t.add(0, 1, 2.0);
    t.add(0, 1, 3.0);
    t.add(0, 0, 1.0);
    SparseMatrix A = t.compress();
    CHECK(A.nnz() == 3);
    CHECK(A.coeff(0, 1) == 5.0);
    CHECK(A.coeff(0, 0) == 1.0);
    CHECK(A.coeff(1, 2) == 1.0);
    auto cols = A.col_indices();
    auto rp = A.row_offsets();
    for (int i = 0; i < A.rows(); ++i)
        for (int k = rp[i] + 1; k < rp[i + 1]; ++k) CHECK(cols[k] > cols[k - 1]);
}

TEST_CASE("factorize and solve basics") {
    SparseMatrix I = identity(3);
    Factorization fi = factorize(I);
    std::vector<double> rhs = {1.0, -2.0, 3.0};
    CHECK(solve(fi, rhs) == rhs);

    SparseMatrix P = dense_to_sparse({{0.0, 1.0}, {1.0, 0.0}});
    auto x = factorize(P).solve(std::vector<double>{1.0, 2.0});
    CHECK(x[0] == doctest::Approx(2.0));
    CHECK(x[1] == doctest::Approx(1.0));

    SparseMatrix D = dense_to_sparse({{2.0, 0.0}, {0.0, 4.0}});
    auto xd = factorize(D).solve(std::vector<double>{2.0, 4.0});
    CHECK(xd[0] == doctest::Approx(1.0));
    CHECK(xd[1] == doctest::Approx(1.0));

    auto zero = factorize(D).solve(std::vector<double>{0.0, 0.0});
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);

    SparseMatrix S = dense_to_sparse({{1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}, {1.0, 0.0, 1.0}});
    CHECK_THROWS_AS(factorize(S), singular_matrix_error);
}

TEST_CASE("random SPD solve residual") {
    std::mt19937 rng(99);
    std::normal_distribution<double> dist;
    const int n = 50;
    std::vector<std::vector<double>> G(n, std::vector<double>(n));
    for (auto& row : G)
        for (auto& v : row) v = dist(rng);
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) A[i][j] += G[k][i] * G[k][j];
            if (i == j) A[i][j] += 1.0;
        }
    SparseMatrix As = dense_to_sparse(A);
    std::vector<double> rhs(n);
    for (auto& v : rhs) v = dist(rng);
    auto x = factorize(As).solve(rhs);
    auto Ax = As.multiply(x);
    double r = 0.0, b = 0.0;
    for (int i = 0; i < n; ++i) {
        r += (Ax[i] - rhs[i]) * (Ax[i] - rhs[i]);
        b += rhs[i] * rhs[i];
    }
    CHECK(std::sqrt(r) <= 1e-10 * std::sqrt(b));
}

TEST_CASE("factorize-solve is a left inverse") {
    SparseMatrix L = laplacian_2d(6);
    Factorization f(L);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> x(L.rows());
        for (auto& v : x) v = dist(rng);
        auto back = f.solve(L.multiply(x));
        for (int i = 0; i < L.rows(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-9));
    }
}

TEST_CASE("condition numbers") {
    CHECK(condition_number(identity(5), ConditionMethod::Dense) == doctest::Approx(1.0));
    SparseMatrix D = dense_to_sparse({{1.0, 0.0}, {0.0, 10.0}});
    CHECK(condition_number(D, ConditionMethod::Dense) == doctest::Approx(10.0));

    SparseMatrix L = laplacian_2d(8);
    double kd = condition_number(L, ConditionMethod::Dense);
    double ki = condition_number(L, ConditionMethod::Iterative);
    CHECK(std::abs(kd - ki) / kd < 0.01);

    // scale invariance up to method tolerance
    TripletBuilder t(L.rows(), L.cols());
    auto rp = L.row_offsets();
    auto ci = L.col_indices();
    auto v = L.values();
    for (int i = 0; i < L.rows(); ++i)
        for (int k = rp[i]; k < rp[i + 1]; ++k) t.add(i, ci[k], 3.0 * v[k]);
    CHECK(std::abs(condition_number(t.compress(), ConditionMethod::Dense) - kd) / kd < 1e-8);

    SparseMatrix S = dense_to_sparse({{1.0, 1.0}, {1.0, 1.0}});
    CHECK(std::isinf(condition_number(S, ConditionMethod::Dense)));
}

TEST_CASE("smallest generalized eigenpair") {
    SparseMatrix M = dense_to_sparse({{2.0, 1.0, 0.0}, {1.0, 2.0, 1.0}, {0.0, 1.0, 2.0}});
    auto same = smallest_generalized_eigenpair(M, M, 0.0);
    CHECK(same.value == doctest::Approx(1.0).epsilon(1e-6));

    SparseMatrix S = dense_to_sparse({{1.0, 0.0}, {0.0, 4.0}});
    auto pair = smallest_generalized_eigenpair(S, identity(2), 0.0);
    CHECK(pair.value == doctest::Approx(1.0).epsilon(1e-6));
    // the eigenvalue tolerance 1e-6 bounds the vector error near 1e-3
    CHECK(std::abs(pair.vector[0]) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(pair.vector[1]) < 5e-3);

    // Rayleigh quotient of the returned vector matches the eigenvalue
    auto Sq = S.multiply(pair.vector);
    auto Mq = identity(2).multiply(pair.vector);
    double rq = vec_dot(pair.vector, Sq) / vec_dot(pair.vector, Mq);
    CHECK(rq == doctest::Approx(pair.value).epsilon(1e-9));
}

TEST_CASE("generalized eigenpair matches a dense oracle") {
    std::mt19937 rng(17);
    std::normal_distribution<double> dist;
    const int n = 5;
    Eigen::MatrixXd G = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return dist(rng); });
    Eigen::MatrixXd H = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return dist(rng); });
    Eigen::MatrixXd Sd = G.transpose() * G + Eigen::MatrixXd::Identity(n, n) * 0.5;
    Eigen::MatrixXd Md = H.transpose() * H + Eigen::MatrixXd::Identity(n, n);

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> oracle(Sd, Md);
    double expected = oracle.eigenvalues().minCoeff();

    std::vector<std::vector<double>> Sv(n, std::vector<double>(n)), Mv(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Sv[i][j] = Sd(i, j);
            Mv[i][j] = Md(i, j);
        }
    auto pair = smallest_generalized_eigenpair(dense_to_sparse(Sv), dense_to_sparse(Mv), 0.0);
    CHECK(pair.value == doctest::Approx(expected).epsilon(1e-6));

    // matrix-free variant agrees
    SparseMatrix Ss = dense_to_sparse(Sv);
    LinearOperator op = [&Ss](std::span<const double> x) { return Ss.multiply(x); };
    auto pair2 = smallest_generalized_eigenpair(op, dense_to_sparse(Mv), 0.0);
    CHECK(pair2.value == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("deflation removes the constant mode") {
    // S = Laplacian with Neumann-like nullspace of constants
    const int n = 4;
    TripletBuilder t(n, n);
    for (int i = 0; i < n; ++i) {
        double d = (i == 0 || i == n - 1) ? 1.0 : 2.0;
        t.add(i, i, d);
        if (i > 0) t.add(i, i - 1, -1.0);
        if (i < n - 1) t.add(i, i + 1, -1.0);
    }
    SparseMatrix S = t.compress();
    std::vector<std::vector<double>> deflate = {std::vector<double>(n, 1.0)};
    LinearOperator op = [&S](std::span<const double> x) { return S.multiply(x); };
    auto pair = smallest_generalized_eigenpair(op, identity(n), 0.0, deflate);
    // smallest nonzero eigenvalue of the 1D chain: 2 - 2 cos(pi/n)
    CHECK(pair.value == doctest::Approx(2.0 - 2.0 * std::cos(M_PI / n)).epsilon(1e-5));
}

TEST_CASE("coordinate export and matvec") {
    SparseMatrix A = dense_to_sparse({{1.0, 2.0}, {0.0, 3.0}});
    auto y = A.multiply(std::vector<double>{1.0, 1.0});
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 3.0);
    auto yt = A.multiply_transpose(std::vector<double>{1.0, 1.0});
    CHECK(yt[0] == 1.0);
    CHECK(yt[1] == 5.0);
    SparseMatrix At = A.transpose();
    CHECK(At.coeff(1, 0) == 2.0);
    CHECK(At.coeff(0, 1) == 0.0);
    CHECK_THROWS_AS(A.multiply(std::vector<double>{1.0}), invalid_parameter_error);

    A.write_coordinate_file("matrix_test.txt");
    std::ifstream f("matrix_test.txt");
    int rows, cols;
    size_t nnz;
    f >> rows >> cols >> nnz;
    CHECK(rows == 2);
    CHECK(cols == 2);
    CHECK(nnz == 3);
    int i, j;
    double v;
    f >> i >> j >> v;
    CHECK(i == 0);
    CHECK(j == 0);
    CHECK(v == 1.0);
}

TEST_CASE("dense condition method is capped") {
    TripletBuilder t(3001, 3001);
    for (int i = 0; i < 3001; ++i) t.add(i, i, 1.0);
    SparseMatrix big = t.compress();
    CHECK_THROWS_AS(condition_number(big, ConditionMethod::Dense), invalid_parameter_error);
    CHECK(condition_number(big, ConditionMethod::Iterative) == doctest::Approx(1.0).epsilon(1e-2));
}
