#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stokesband {

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and duplicates are summed at build time.
class SparseMatrix {
  public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::span<const int> row_offsets() const { return row_ptr_; }
    std::span<const int> col_indices() const { return col_idx_; }
    std::span<const double> values() const { return vals_; }
    size_t nnz() const { return vals_.size(); }

    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> multiply_transpose(std::span<const double> x) const;
    SparseMatrix transpose() const;
    double max_abs() const;
    /// max_ij |A_ij - A_ji|
    double asymmetry() const;
    double coeff(int i, int j) const;

    /// Coordinate (row, col, value) text export.
    void write_coordinate_file(const std::string& path) const;

    static SparseMatrix from_triplets(int rows, int cols,
                                      std::span<const int> ti, std::span<const int> tj,
                                      std::span<const double> tv);

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<int> row_ptr_;
    std::vector<int> col_idx_;
    std::vector<double> vals_;
};

/// Incremental COO builder; compress() sums duplicates.
class TripletBuilder {
  public:
    TripletBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}
    void add(int i, int j, double v) {
        is_.push_back(i);
        js_.push_back(j);
        vs_.push_back(v);
    }
    SparseMatrix compress() const { return SparseMatrix::from_triplets(rows_, cols_, is_, js_, vs_); }

  private:
    int rows_, cols_;
    std::vector<int> is_, js_;
    std::vector<double> vs_;
};

/// Sparse LU with partial pivoting. Construction throws singular_matrix_error
/// when a pivot falls below 1e-14 * max|A| (detected via an inverse-power
/// probe of the smallest singular value). Immutable; safe for repeated solves.
class Factorization {
  public:
    explicit Factorization(const SparseMatrix& A);
    std::vector<double> solve(std::span<const double> rhs) const;
    int dim() const { return dim_; }

  private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    int dim_ = 0;
};

Factorization factorize(const SparseMatrix& A);
std::vector<double> solve(const Factorization& fact, std::span<const double> rhs);

enum class ConditionMethod { Dense, Iterative };

/// Ratio of extreme singular values. Dense path uses a full decomposition
/// (dimension capped at 3000); iterative path runs power iteration on A^T A
/// and inverse power iteration through the LU factors, both to 1e-3 relative.
/// Returns +inf for singular input.
double condition_number(const SparseMatrix& A, ConditionMethod method);

struct EigenPair {
    double value = 0.0;
    std::vector<double> vector;
    int iterations = 0;
};

using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

/// Smallest eigenvalue above `shift` of S q = lambda M q by shifted inverse
/// power iteration; the eigenvector is returned M-normalized. Vectors in
/// `deflate` are projected out (M-orthogonally) every iteration.
EigenPair smallest_generalized_eigenpair(const SparseMatrix& S, const SparseMatrix& M,
                                         double shift,
                                         std::span<const std::vector<double>> deflate = {});

/// Same iteration with S available only as a matvec; the inner solves use
/// conjugate gradients (S must be symmetric positive definite on the
/// deflated subspace).
EigenPair smallest_generalized_eigenpair(const LinearOperator& apply_S, const SparseMatrix& M,
                                         double shift,
                                         std::span<const std::vector<double>> deflate = {});

// Small dense helpers used by tests and the condition sweep.
double vec_norm(std::span<const double> x);
double vec_dot(std::span<const double> a, std::span<const double> b);

} // namespace stokesband
