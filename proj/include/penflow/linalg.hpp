#pragma once
// ============================================================================
// linalg.hpp - compressed-row sparse matrices and reusable direct solves
//
// The ensemble scheme's whole point is one factorization serving J
// back-substitutions per timestep, so the factorization object is explicit
// and counted: a process-wide factorization counter plus a per-factorization
// solve counter let tests assert the factor-once/solve-many property.
// ============================================================================

#include "penflow/common.hpp"

#include <memory>
#include <vector>

namespace penflow {

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

// Immutable-shape CSR matrix. Column indices are sorted within each row and
// (row, col) pairs are unique; values may be rewritten in place for operators
// whose sparsity pattern is reused across timesteps.
class SparseMatrix {
  public:
    SparseMatrix() = default;
    SparseMatrix(int n_rows, int n_cols, std::vector<int> row_offsets,
                 std::vector<int> col_indices, std::vector<double> values);

    // Builds from an unordered triplet list; duplicate (row, col) entries are
    // summed (the natural reduction for finite-element assembly).
    static SparseMatrix from_triplets(int n_rows, int n_cols, std::vector<Triplet> triplets);

    int n_rows() const { return n_rows_; }
    int n_cols() const { return n_cols_; }
    long nnz() const { return static_cast<long>(values_.size()); }

    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values_mut() { return values_; }

    // Stored entry at (row, col), or 0 if the position is not in the pattern.
    double at(int row, int col) const;

    // y = A x and y = A^T x.
    std::vector<double> apply(const std::vector<double>& x) const;
    std::vector<double> apply_transpose(const std::vector<double>& x) const;

  private:
    int n_rows_ = 0;
    int n_cols_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

// Reusable sparse LU factorization. Copies share the underlying factors and
// the solve counter; the object is immutable after construction and safe for
// concurrent solves.
class Factorization {
  public:
    int dim() const;

    // Number of back-substitutions performed through this factorization.
    long solve_count() const;

    // x = A^{-1} b; increments solve_count by one.
    std::vector<double> solve(const std::vector<double>& b) const;

    // One back-substitution per right-hand side against the same factors;
    // increments solve_count by the list size. Never refactorizes.
    std::vector<std::vector<double>> solve_many(const std::vector<std::vector<double>>& rhs) const;

    struct Impl;  // backend interface, defined in linalg.cpp

  private:
    friend class PatternFactorizer;
    std::shared_ptr<const Impl> impl_;
};

// Factorizes a square, structurally nonsingular matrix. Increments the
// process-wide factorization counter. Throws SingularMatrixError (carrying
// the pivot index when identifiable) on structural or numerical singularity,
// DimensionError on a non-square input.
Factorization factorize(const SparseMatrix& A);

// Factorizes a sequence of matrices that share one sparsity pattern, such as
// the timestepper's coefficient matrix whose values change every step while
// its structure is fixed for a whole run. The fill-reducing ordering and
// symbolic analysis are computed once, at construction; refactorize() then
// performs only the numeric factorization, which is the right cost split
// when the same pattern is factorized hundreds of times.
//
// Instances are not safe for concurrent refactorize() calls, but the
// returned Factorization objects are independent and remain valid after
// later refactorize() calls.
class PatternFactorizer {
  public:
    // Fixes the pattern (and dimension) from `pattern`; its values are only
    // used to seed the analysis. Throws DimensionError on a non-square
    // matrix and SingularMatrixError on a structurally empty row or column.
    explicit PatternFactorizer(const SparseMatrix& pattern);

    // Numeric factorization of A, which must carry exactly the construction
    // pattern (checked). Increments the process-wide factorization counter;
    // throws SingularMatrixError on numerical singularity.
    Factorization refactorize(const SparseMatrix& A);

    int dim() const;

  private:
    struct State;
    std::shared_ptr<State> state_;
};

// Process-wide count of factorize() calls (atomic). Tests take deltas around
// a run to certify the one-factorization-per-step property.
long total_factorizations();

// A^T as a new CSR matrix (counting sort over columns, O(nnz)).
SparseMatrix transpose(const SparseMatrix& A);

}  // namespace penflow
