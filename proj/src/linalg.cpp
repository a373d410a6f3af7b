#include "stokesband/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#ifdef STOKESBAND_USE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "stokesband/errors.hpp"

namespace stokesband {

namespace {

Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& A) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(A.nnz());
    auto rp = A.row_offsets();
    auto ci = A.col_indices();
    auto v = A.values();
    for (int i = 0; i < A.rows(); ++i)
        for (int k = rp[i]; k < rp[i + 1]; ++k)
            trips.emplace_back(i, ci[k], v[k]);
    Eigen::SparseMatrix<double> M(A.rows(), A.cols());
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();
    return M;
}

Eigen::MatrixXd to_dense(const SparseMatrix& A) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    auto rp = A.row_offsets();
    auto ci = A.col_indices();
    auto v = A.values();
    for (int i = 0; i < A.rows(); ++i)
        for (int k = rp[i]; k < rp[i + 1]; ++k) M(i, ci[k]) += v[k];
    return M;
}

} // namespace

double vec_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double vec_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::span<const int> ti,
                                         std::span<const int> tj, std::span<const double> tv) {
    SparseMatrix A(rows, cols);
    std::vector<size_t> order(ti.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (ti[a] != ti[b]) return ti[a] < ti[b];
        return tj[a] < tj[b];
    });
    std::vector<int> counts(rows, 0);
    for (size_t n = 0; n < order.size();) {
        size_t k = order[n];
        int i = ti[k], j = tj[k];
        if (i < 0 || i >= rows || j < 0 || j >= cols)
            throw std::out_of_range("triplet index out of range");
        double v = 0.0;
        while (n < order.size() && ti[order[n]] == i && tj[order[n]] == j)
            v += tv[order[n++]];
        A.col_idx_.push_back(j);
        A.vals_.push_back(v);
        ++counts[i];
    }
    for (int i = 0; i < rows; ++i) A.row_ptr_[i + 1] = A.row_ptr_[i] + counts[i];
    return A;
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cols_)
        throw invalid_parameter_error("matvec dimension mismatch");
    std::vector<double> y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[col_idx_[k]];
        y[i] = s;
    }
    return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != rows_)
        throw invalid_parameter_error("transpose matvec dimension mismatch");
    std::vector<double> y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += vals_[k] * x[i];
    return y;
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<int> ti, tj;
    std::vector<double> tv;
    ti.reserve(nnz());
    tj.reserve(nnz());
    tv.reserve(nnz());
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            ti.push_back(col_idx_[k]);
            tj.push_back(i);
            tv.push_back(vals_[k]);
        }
    return from_triplets(cols_, rows_, ti, tj, tv);
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
}

double SparseMatrix::coeff(int i, int j) const {
    for (int k = row_ptr_.at(i); k < row_ptr_[i + 1]; ++k)
        if (col_idx_[k] == j) return vals_[k];
    return 0.0;
}

double SparseMatrix::asymmetry() const {
    double m = 0.0;
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            m = std::max(m, std::abs(vals_[k] - coeff(col_idx_[k], i)));
    return m;
}

void SparseMatrix::write_coordinate_file(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.precision(17);
    f << rows_ << " " << cols_ << " " << nnz() << "\n";
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            f << i << " " << col_idx_[k] << " " << vals_[k] << "\n";
}

struct Factorization::Impl {
    // UmfPackLU solves through the original matrix arrays, so the matrix must
    // outlive the factorization.
    Eigen::SparseMatrix<double> matrix;
#ifdef STOKESBAND_USE_UMFPACK
    Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
#else
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
#endif
};

Factorization::Factorization(const SparseMatrix& A) {
    if (A.rows() != A.cols()) throw invalid_parameter_error("factorize requires a square matrix");
    dim_ = A.rows();
    auto impl = std::make_shared<Impl>();
    impl->matrix = to_eigen(A);
#ifdef STOKESBAND_USE_UMFPACK
    // saddle-point matrices factor orders of magnitude faster with the
    // symmetric (AMD) ordering strategy
    if (A.asymmetry() <= 1e-12 * std::max(1.0, A.max_abs()))
        impl->lu.umfpackControl()[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
#endif
    impl->lu.compute(impl->matrix);
    if (impl->lu.info() != Eigen::Success)
        throw singular_matrix_error("sparse LU failed: matrix is singular");
    impl_ = impl;

    // Near-singularity probe: a pivot below 1e-14 * max|A| makes the smallest
    // singular value of the same order, which an inverse-power step exposes.
    if (dim_ > 0) {
        double amax = A.max_abs();
        if (amax == 0.0) throw singular_matrix_error("zero matrix");
        Eigen::VectorXd z(dim_);
        std::mt19937 rng(12345);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int i = 0; i < dim_; ++i) z[i] = dist(rng);
        z.normalize();
        double growth = 0.0;
        for (int it = 0; it < 2; ++it) {
            Eigen::VectorXd w = impl->lu.solve(z);
            if (!w.allFinite()) throw singular_matrix_error("sparse LU produced non-finite factors");
            growth = w.norm();
            if (growth == 0.0) break;
            z = w / growth;
        }
        if (growth * amax > 1e14)
            throw singular_matrix_error("matrix numerically singular (pivot below 1e-14 * max|A|)");
    }
}

std::vector<double> Factorization::solve(std::span<const double> rhs) const {
    if (static_cast<int>(rhs.size()) != dim_)
        throw invalid_parameter_error("solve dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), rhs.size());
    Eigen::VectorXd x = impl_->lu.solve(b);
    return std::vector<double>(x.data(), x.data() + x.size());
}

Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

std::vector<double> solve(const Factorization& fact, std::span<const double> rhs) {
    return fact.solve(rhs);
}

namespace {

constexpr int kPowerIterationCap = 10000;
constexpr double kPowerTol = 1e-3;

// Largest singular value via power iteration on A^T A.
double sigma_max_power(const SparseMatrix& A) {
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> q(A.cols());
    for (auto& v : q) v = dist(rng);
    double nq = vec_norm(q);
    for (auto& v : q) v /= nq;
    double sigma = 0.0, prev = -1.0;
    for (int it = 0; it < kPowerIterationCap; ++it) {
        auto y = A.multiply(q);
        auto z = A.multiply_transpose(y);
        double nz = vec_norm(z);
        if (nz == 0.0) return 0.0;
        sigma = std::sqrt(nz);
        for (size_t i = 0; i < q.size(); ++i) q[i] = z[i] / nz;
        if (prev > 0.0 && std::abs(sigma - prev) <= kPowerTol * sigma) break;
        prev = sigma;
    }
    return sigma;
}

// Smallest singular value via inverse power iteration on A^T A, solving with
// LU factors of A (and of A^T when A is not symmetric).
double sigma_min_inverse_power(const SparseMatrix& A) {
    Factorization fa(A);
    bool symmetric = A.asymmetry() <= 1e-12 * std::max(1.0, A.max_abs());
    std::optional<Factorization> fat;
    if (!symmetric) fat.emplace(A.transpose());

    std::mt19937 rng(778);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> q(A.rows());
    for (auto& v : q) v = dist(rng);
    double nq = vec_norm(q);
    for (auto& v : q) v /= nq;
    double inv_sigma = 0.0, prev = -1.0;
    for (int it = 0; it < kPowerIterationCap; ++it) {
        // z = (A^T A)^{-1} q = A^{-1} A^{-T} q
        auto y = symmetric ? fa.solve(q) : fat->solve(q);
        auto z = fa.solve(y);
        double nz = vec_norm(z);
        if (nz == 0.0) return 0.0;
        inv_sigma = std::sqrt(nz);
        for (size_t i = 0; i < q.size(); ++i) q[i] = z[i] / nz;
        if (prev > 0.0 && std::abs(inv_sigma - prev) <= kPowerTol * inv_sigma) break;
        prev = inv_sigma;
    }
    return 1.0 / inv_sigma;
}

} // namespace

double condition_number(const SparseMatrix& A, ConditionMethod method) {
    if (A.rows() != A.cols())
        throw invalid_parameter_error("condition number requires a square matrix");
    if (A.rows() == 0) return 1.0;
    const double inf = std::numeric_limits<double>::infinity();

    if (method == ConditionMethod::Dense) {
        if (A.rows() > 3000)
            throw invalid_parameter_error("dense condition method capped at dimension 3000");
        Eigen::MatrixXd M = to_dense(A);
        double smax, smin;
        if (A.asymmetry() <= 1e-12 * std::max(1.0, A.max_abs())) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
            smax = es.eigenvalues().cwiseAbs().maxCoeff();
            smin = es.eigenvalues().cwiseAbs().minCoeff();
        } else {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
            smax = svd.singularValues().maxCoeff();
            smin = svd.singularValues().minCoeff();
        }
        if (smin <= smax * std::numeric_limits<double>::epsilon() * 1e-2) return inf;
        return smax / smin;
    }

    double smax = sigma_max_power(A);
    if (smax == 0.0) return inf;
    try {
        double smin = sigma_min_inverse_power(A);
        if (smin == 0.0) return inf;
        return smax / smin;
    } catch (const singular_matrix_error&) {
        return inf;
    }
}

namespace {

void m_orthogonalize(std::vector<double>& q, const SparseMatrix& M,
                     std::span<const std::vector<double>> deflate) {
    for (const auto& d : deflate) {
        auto Md = M.multiply(d);
        double dd = vec_dot(d, Md);
        if (dd <= 0.0) continue;
        double c = vec_dot(q, Md) / dd;
        for (size_t i = 0; i < q.size(); ++i) q[i] -= c * d[i];
    }
}

using SolveFn = std::function<std::vector<double>(std::span<const double>)>;

EigenPair inverse_power_pencil(const SolveFn& solve_shifted, const SparseMatrix& M,
                               const LinearOperator& apply_S,
                               std::span<const std::vector<double>> deflate) {
    const int n = M.rows();
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> q(n);
    for (auto& v : q) v = dist(rng);
    m_orthogonalize(q, M, deflate);
    {
        auto Mq = M.multiply(q);
        double nq = std::sqrt(std::abs(vec_dot(q, Mq)));
        if (nq == 0.0) throw degenerate_input_error("deflation removed the whole space");
        for (auto& v : q) v /= nq;
    }

    constexpr int cap = 20000;
    constexpr double tol = 1e-6;
    double lambda = 0.0, prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= cap; ++it) {
        auto Mq = M.multiply(q);
        auto z = solve_shifted(Mq);
        m_orthogonalize(z, M, deflate);
        auto Mz = M.multiply(z);
        double nz = std::sqrt(std::abs(vec_dot(z, Mz)));
        if (nz == 0.0) throw convergence_error("inverse iteration collapsed to zero", lambda, q);
        for (size_t i = 0; i < z.size(); ++i) z[i] /= nz;
        q = std::move(z);

        auto Sq = apply_S(q);
        auto Mq2 = M.multiply(q);
        lambda = vec_dot(q, Sq) / vec_dot(q, Mq2);
        if (!std::isnan(prev) && std::abs(lambda - prev) <= tol * std::abs(lambda))
            return {lambda, q, it};
        prev = lambda;
    }
    throw convergence_error("generalized eigensolve did not converge", lambda, q);
}

} // namespace

EigenPair smallest_generalized_eigenpair(const SparseMatrix& S, const SparseMatrix& M,
                                         double shift,
                                         std::span<const std::vector<double>> deflate) {
    if (S.rows() != S.cols() || M.rows() != M.cols() || S.rows() != M.rows())
        throw invalid_parameter_error("pencil dimension mismatch");
    // (S - shift*M) factorized once; iteration solves with it each step.
    std::vector<int> ti, tj;
    std::vector<double> tv;
    auto push_all = [&](const SparseMatrix& X, double scale) {
        auto rp = X.row_offsets();
        auto ci = X.col_indices();
        auto v = X.values();
        for (int i = 0; i < X.rows(); ++i)
            for (int k = rp[i]; k < rp[i + 1]; ++k) {
                ti.push_back(i);
                tj.push_back(ci[k]);
                tv.push_back(scale * v[k]);
            }
    };
    push_all(S, 1.0);
    if (shift != 0.0) push_all(M, -shift);
    SparseMatrix shifted = SparseMatrix::from_triplets(S.rows(), S.cols(), ti, tj, tv);
    Factorization f(shifted);
    SolveFn solver = [&f](std::span<const double> b) { return f.solve(b); };
    LinearOperator apply_S = [&S](std::span<const double> x) { return S.multiply(x); };
    return inverse_power_pencil(solver, M, apply_S, deflate);
}

EigenPair smallest_generalized_eigenpair(const LinearOperator& apply_S, const SparseMatrix& M,
                                         double shift,
                                         std::span<const std::vector<double>> deflate) {
    // Matrix-free variant: inner solves by conjugate gradients. Consistent
    // singular systems are fine as long as the rhs stays orthogonal to the
    // nullspace, which the deflation guarantees.
    const int n = M.rows();
    SolveFn cg = [&, n](std::span<const double> b) {
        std::vector<double> x(n, 0.0), r(b.begin(), b.end()), p(r);
        double rr = vec_dot(r, r);
        double b2 = std::sqrt(rr);
        if (b2 == 0.0) return x;
        const double tol2 = (1e-12 * b2) * (1e-12 * b2);
        for (int it = 0; it < 10 * n + 200; ++it) {
            auto Sp = apply_S(p);
            if (shift != 0.0) {
                auto Mp = M.multiply(p);
                for (int i = 0; i < n; ++i) Sp[i] -= shift * Mp[i];
            }
            double alpha = rr / vec_dot(p, Sp);
            for (int i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * Sp[i];
            }
            double rr_new = vec_dot(r, r);
            if (rr_new <= tol2) break;
            double beta = rr_new / rr;
            rr = rr_new;
            for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        }
        return x;
    };
    return inverse_power_pencil(cg, M, apply_S, deflate);
}

} // namespace stokesband
