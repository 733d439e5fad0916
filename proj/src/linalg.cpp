// ============================================================================
// linalg.cpp - CSR construction and direct sparse LU backends
//
// Two factorization backends sit behind Factorization::Impl:
//   * UMFPACK (when available at configure time): multifrontal LU whose
//     automatic strategy detects the structurally symmetric saddle-point
//     pattern produced by the mixed discretization and orders it
//     symmetrically, which is several times faster here than a
//     column-ordering LU. The symbolic analysis is computed once per
//     pattern and reused for every numeric factorization.
//   * Eigen::SparseLU (portable fallback): COLAMD ordering with partial
//     pivoting.
// ============================================================================

#include "penflow/linalg.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#if PENFLOW_HAVE_UMFPACK
#include <umfpack.h>
#endif

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>

namespace penflow {

namespace {
std::atomic<long> g_factorizations{0};
}

SparseMatrix::SparseMatrix(int n_rows, int n_cols, std::vector<int> row_offsets,
                           std::vector<int> col_indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (n_rows_ < 0 || n_cols_ < 0 || row_offsets_.size() != static_cast<std::size_t>(n_rows_) + 1 ||
        col_indices_.size() != values_.size() ||
        row_offsets_.back() != static_cast<int>(values_.size()))
        throw DimensionError("SparseMatrix: inconsistent CSR arrays");
    for (int r = 0; r < n_rows_; ++r) {
        if (row_offsets_[static_cast<std::size_t>(r) + 1] < row_offsets_[static_cast<std::size_t>(r)])
            throw DimensionError("SparseMatrix: row offsets not monotone");
        for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
            const int c = col_indices_[static_cast<std::size_t>(k)];
            if (c < 0 || c >= n_cols_)
                throw DimensionError("SparseMatrix: column index out of range");
            if (k > row_offsets_[static_cast<std::size_t>(r)] && col_indices_[static_cast<std::size_t>(k) - 1] >= c)
                throw DimensionError("SparseMatrix: column indices not strictly increasing in row " +
                                     std::to_string(r));
        }
    }
}

SparseMatrix SparseMatrix::from_triplets(int n_rows, int n_cols, std::vector<Triplet> triplets) {
    for (const Triplet& t : triplets)
        if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
            throw DimensionError("from_triplets: entry (" + std::to_string(t.row) + ", " +
                                 std::to_string(t.col) + ") outside a " + std::to_string(n_rows) +
                                 "x" + std::to_string(n_cols) + " matrix");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    std::vector<int> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
    std::vector<int> cols;
    std::vector<double> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < triplets.size() && triplets[j].row == triplets[i].row && triplets[j].col == triplets[i].col)
            sum += triplets[j++].value;
        cols.push_back(triplets[i].col);
        vals.push_back(sum);
        ++offsets[static_cast<std::size_t>(triplets[i].row) + 1];
        i = j;
    }
    for (int r = 0; r < n_rows; ++r) offsets[static_cast<std::size_t>(r) + 1] += offsets[static_cast<std::size_t>(r)];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

double SparseMatrix::at(int row, int col) const {
    if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_)
        throw DimensionError("SparseMatrix::at: index out of range");
    const auto begin = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(row)];
    const auto end = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(row) + 1];
    const auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

std::vector<double> SparseMatrix::apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != n_cols_)
        throw DimensionError("SparseMatrix::apply: vector length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(n_cols_));
    std::vector<double> y(static_cast<std::size_t>(n_rows_), 0.0);
    for (int r = 0; r < n_rows_; ++r) {
        double acc = 0.0;
        for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
            acc += values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

std::vector<double> SparseMatrix::apply_transpose(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != n_rows_)
        throw DimensionError("SparseMatrix::apply_transpose: vector length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(n_rows_));
    std::vector<double> y(static_cast<std::size_t>(n_cols_), 0.0);
    for (int r = 0; r < n_rows_; ++r)
        for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
            y[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])] +=
                values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(r)];
    return y;
}

// ---------------------------------------------------------------------------
// Factorization backends
// ---------------------------------------------------------------------------

struct Factorization::Impl {
    virtual ~Impl() = default;
    virtual void solve_into(const double* b, double* x) const = 0;
    int dim = 0;
    mutable std::atomic<long> solves{0};
};

int Factorization::dim() const { return impl_ ? impl_->dim : 0; }

long Factorization::solve_count() const { return impl_ ? impl_->solves.load() : 0; }

std::vector<double> Factorization::solve(const std::vector<double>& b) const {
    if (!impl_) throw DomainError("Factorization::solve: empty factorization");
    if (static_cast<int>(b.size()) != impl_->dim)
        throw DimensionError("Factorization::solve: right-hand side length " + std::to_string(b.size()) +
                             ", expected " + std::to_string(impl_->dim));
    std::vector<double> x(b.size());
    impl_->solve_into(b.data(), x.data());
    impl_->solves.fetch_add(1, std::memory_order_relaxed);
    return x;
}

std::vector<std::vector<double>> Factorization::solve_many(const std::vector<std::vector<double>>& rhs) const {
    if (!impl_) throw DomainError("Factorization::solve_many: empty factorization");
    for (std::size_t j = 0; j < rhs.size(); ++j)
        if (static_cast<int>(rhs[j].size()) != impl_->dim)
            throw DimensionError("Factorization::solve_many: member " + std::to_string(j) +
                                 " has length " + std::to_string(rhs[j].size()) + ", expected " +
                                 std::to_string(impl_->dim));
    std::vector<std::vector<double>> out;
    out.reserve(rhs.size());
    for (const auto& b : rhs) out.push_back(solve(b));
    return out;
}

namespace {

// Locates a structurally empty row or column, the only unambiguous pivot
// index we can report before handing the matrix to the numerical
// factorization.
long find_structural_defect(const SparseMatrix& A) {
    std::vector<bool> col_hit(static_cast<std::size_t>(A.n_cols()), false);
    for (int r = 0; r < A.n_rows(); ++r) {
        if (A.row_offsets()[static_cast<std::size_t>(r)] == A.row_offsets()[static_cast<std::size_t>(r) + 1])
            return r;
        for (int k = A.row_offsets()[static_cast<std::size_t>(r)]; k < A.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            if (A.values()[static_cast<std::size_t>(k)] != 0.0)
                col_hit[static_cast<std::size_t>(A.col_indices()[static_cast<std::size_t>(k)])] = true;
    }
    for (int c = 0; c < A.n_cols(); ++c)
        if (!col_hit[static_cast<std::size_t>(c)]) return c;
    return -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// PatternFactorizer
// ---------------------------------------------------------------------------

#if PENFLOW_HAVE_UMFPACK

namespace {

// Pattern-level state shared by the factorizer and every Factorization it
// produces: the compressed-column copy of the pattern, the CSR-to-CSC value
// scatter, the UMFPACK symbolic object, and the control settings.
struct UmfPattern {
    int n = 0;
    std::vector<int> col_ptr;      // CSC column pointers
    std::vector<int> row_ind;      // CSC row indices
    std::vector<double> csc_vals;  // numeric values, refreshed per refactorize
    std::vector<int> scatter;      // CSR value slot -> CSC value slot
    double control[UMFPACK_CONTROL];
    void* symbolic = nullptr;

    ~UmfPattern() {
        if (symbolic) umfpack_di_free_symbolic(&symbolic);
    }
};

struct UmfImpl final : Factorization::Impl {
    std::shared_ptr<const UmfPattern> pattern;
    void* numeric = nullptr;

    ~UmfImpl() override {
        if (numeric) umfpack_di_free_numeric(&numeric);
    }

    void solve_into(const double* b, double* x) const override {
        double info[UMFPACK_INFO];
        // Iterative refinement is disabled in control, so the value array is
        // not consulted; only the factors stored in `numeric` are used.
        const int status = umfpack_di_solve(UMFPACK_A, pattern->col_ptr.data(), pattern->row_ind.data(),
                                            pattern->csc_vals.data(), x, b, numeric,
                                            pattern->control, info);
        if (status != UMFPACK_OK)
            throw Error("Factorization::solve: back-substitution failed (status " +
                        std::to_string(status) + ")");
    }
};

}  // namespace

struct PatternFactorizer::State {
    // CSR pattern retained for the per-call consistency check.
    std::vector<int> row_offsets;
    std::vector<int> col_indices;
    std::shared_ptr<UmfPattern> pattern;
};

PatternFactorizer::PatternFactorizer(const SparseMatrix& pattern) {
    if (pattern.n_rows() != pattern.n_cols())
        throw DimensionError("PatternFactorizer: matrix is " + std::to_string(pattern.n_rows()) +
                             "x" + std::to_string(pattern.n_cols()) + ", expected square");
    const int n = pattern.n_rows();
    std::vector<bool> col_hit(static_cast<std::size_t>(n), false);
    for (int r = 0; r < n; ++r) {
        if (pattern.row_offsets()[static_cast<std::size_t>(r)] ==
            pattern.row_offsets()[static_cast<std::size_t>(r) + 1])
            throw SingularMatrixError("PatternFactorizer: structurally singular matrix", r);
        for (int k = pattern.row_offsets()[static_cast<std::size_t>(r)];
             k < pattern.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            col_hit[static_cast<std::size_t>(pattern.col_indices()[static_cast<std::size_t>(k)])] = true;
    }
    for (int c = 0; c < n; ++c)
        if (!col_hit[static_cast<std::size_t>(c)])
            throw SingularMatrixError("PatternFactorizer: structurally singular matrix", c);

    auto state = std::make_shared<State>();
    state->row_offsets = pattern.row_offsets();
    state->col_indices = pattern.col_indices();

    auto umf = std::make_shared<UmfPattern>();
    umf->n = n;
    const std::size_t nnz = pattern.col_indices().size();
    umf->col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    umf->row_ind.resize(nnz);
    umf->csc_vals.resize(nnz);
    umf->scatter.resize(nnz);
    for (int c : pattern.col_indices()) ++umf->col_ptr[static_cast<std::size_t>(c) + 1];
    for (int c = 0; c < n; ++c)
        umf->col_ptr[static_cast<std::size_t>(c) + 1] += umf->col_ptr[static_cast<std::size_t>(c)];
    {
        std::vector<int> cursor(umf->col_ptr.begin(), umf->col_ptr.end() - 1);
        for (int r = 0; r < n; ++r)
            for (int k = pattern.row_offsets()[static_cast<std::size_t>(r)];
                 k < pattern.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
                const int c = pattern.col_indices()[static_cast<std::size_t>(k)];
                const int slot = cursor[static_cast<std::size_t>(c)]++;
                umf->row_ind[static_cast<std::size_t>(slot)] = r;
                umf->scatter[static_cast<std::size_t>(k)] = slot;
                umf->csc_vals[static_cast<std::size_t>(slot)] = pattern.values()[static_cast<std::size_t>(k)];
            }
    }
    umfpack_di_defaults(umf->control);
    // The factors from the automatic (symmetric-aware) strategy are accurate
    // to working precision on these systems; skip refinement back-solves.
    umf->control[UMFPACK_IRSTEP] = 0;

    double info[UMFPACK_INFO];
    const int status = umfpack_di_symbolic(n, n, umf->col_ptr.data(), umf->row_ind.data(),
                                           umf->csc_vals.data(), &umf->symbolic, umf->control, info);
    if (status != UMFPACK_OK)
        throw Error("PatternFactorizer: symbolic analysis failed (status " +
                    std::to_string(status) + ")");

    state->pattern = std::move(umf);
    state_ = std::move(state);
}

int PatternFactorizer::dim() const { return state_ ? state_->pattern->n : 0; }

Factorization PatternFactorizer::refactorize(const SparseMatrix& A) {
    if (!state_) throw DomainError("PatternFactorizer::refactorize: empty factorizer");
    if (A.n_rows() != state_->pattern->n || A.n_cols() != state_->pattern->n ||
        A.row_offsets() != state_->row_offsets || A.col_indices() != state_->col_indices)
        throw DimensionError("PatternFactorizer::refactorize: matrix pattern differs from the "
                             "analyzed pattern");

    UmfPattern& umf = *state_->pattern;
    for (std::size_t k = 0; k < umf.scatter.size(); ++k)
        umf.csc_vals[static_cast<std::size_t>(umf.scatter[k])] = A.values()[k];

    auto impl = std::make_shared<UmfImpl>();
    impl->dim = umf.n;
    impl->pattern = state_->pattern;
    double info[UMFPACK_INFO];
    const int status = umfpack_di_numeric(umf.col_ptr.data(), umf.row_ind.data(), umf.csc_vals.data(),
                                          umf.symbolic, &impl->numeric, umf.control, info);
    if (status == UMFPACK_WARNING_singular_matrix)
        throw SingularMatrixError("factorize: numerically singular matrix");
    if (status != UMFPACK_OK)
        throw Error("factorize: numeric factorization failed (status " + std::to_string(status) + ")");

    g_factorizations.fetch_add(1, std::memory_order_relaxed);
    Factorization f;
    f.impl_ = std::move(impl);
    return f;
}

#else  // Eigen::SparseLU fallback

namespace {

struct EigenImpl final : Factorization::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;

    void solve_into(const double* b, double* x) const override {
        Eigen::Map<const Eigen::VectorXd> bm(b, dim);
        Eigen::Map<Eigen::VectorXd> xm(x, dim);
        xm = lu.solve(bm);
    }
};

// Eigen reports numerical singularity in prose; pull out the trailing pivot
// index when one is present.
long pivot_from_message(const std::string& message) {
    long value = -1;
    std::size_t i = message.size();
    while (i > 0 && !std::isdigit(static_cast<unsigned char>(message[i - 1]))) --i;
    std::size_t end = i;
    while (i > 0 && std::isdigit(static_cast<unsigned char>(message[i - 1]))) --i;
    if (end > i) value = std::stol(message.substr(i, end - i));
    return value;
}

}  // namespace

struct PatternFactorizer::State {
    std::vector<int> row_offsets;
    std::vector<int> col_indices;
    int n = 0;
};

PatternFactorizer::PatternFactorizer(const SparseMatrix& pattern) {
    if (pattern.n_rows() != pattern.n_cols())
        throw DimensionError("PatternFactorizer: matrix is " + std::to_string(pattern.n_rows()) +
                             "x" + std::to_string(pattern.n_cols()) + ", expected square");
    const int n = pattern.n_rows();
    std::vector<bool> col_hit(static_cast<std::size_t>(n), false);
    for (int r = 0; r < n; ++r) {
        if (pattern.row_offsets()[static_cast<std::size_t>(r)] ==
            pattern.row_offsets()[static_cast<std::size_t>(r) + 1])
            throw SingularMatrixError("PatternFactorizer: structurally singular matrix", r);
        for (int k = pattern.row_offsets()[static_cast<std::size_t>(r)];
             k < pattern.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            col_hit[static_cast<std::size_t>(pattern.col_indices()[static_cast<std::size_t>(k)])] = true;
    }
    for (int c = 0; c < n; ++c)
        if (!col_hit[static_cast<std::size_t>(c)])
            throw SingularMatrixError("PatternFactorizer: structurally singular matrix", c);

    auto state = std::make_shared<State>();
    state->row_offsets = pattern.row_offsets();
    state->col_indices = pattern.col_indices();
    state->n = n;
    state_ = std::move(state);
}

int PatternFactorizer::dim() const { return state_ ? state_->n : 0; }

Factorization PatternFactorizer::refactorize(const SparseMatrix& A) {
    if (!state_) throw DomainError("PatternFactorizer::refactorize: empty factorizer");
    if (A.n_rows() != state_->n || A.n_cols() != state_->n ||
        A.row_offsets() != state_->row_offsets || A.col_indices() != state_->col_indices)
        throw DimensionError("PatternFactorizer::refactorize: matrix pattern differs from the "
                             "analyzed pattern");

    auto impl = std::make_shared<EigenImpl>();
    impl->dim = state_->n;

    using RowMajorMap = Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>>;
    RowMajorMap mapped(A.n_rows(), A.n_cols(), A.nnz(), A.row_offsets().data(),
                       A.col_indices().data(), A.values().data());
    Eigen::SparseMatrix<double> column_major = mapped;

    impl->lu.isSymmetric(false);
    impl->lu.analyzePattern(column_major);
    impl->lu.factorize(column_major);
    if (impl->lu.info() != Eigen::Success) {
        const std::string detail = impl->lu.lastErrorMessage();
        throw SingularMatrixError("factorize: " + (detail.empty() ? "factorization failed" : detail),
                                  pivot_from_message(detail));
    }

    g_factorizations.fetch_add(1, std::memory_order_relaxed);
    Factorization f;
    f.impl_ = std::move(impl);
    return f;
}

#endif  // PENFLOW_HAVE_UMFPACK

Factorization factorize(const SparseMatrix& A) {
    if (A.n_rows() != A.n_cols())
        throw DimensionError("factorize: matrix is " + std::to_string(A.n_rows()) + "x" +
                             std::to_string(A.n_cols()) + ", expected square");
    const long defect = find_structural_defect(A);
    if (defect >= 0)
        throw SingularMatrixError("factorize: structurally singular matrix", defect);
    PatternFactorizer once(A);
    return once.refactorize(A);
}

long total_factorizations() { return g_factorizations.load(); }

SparseMatrix transpose(const SparseMatrix& A) {
    std::vector<int> offsets(static_cast<std::size_t>(A.n_cols()) + 1, 0);
    for (int c : A.col_indices()) ++offsets[static_cast<std::size_t>(c) + 1];
    for (int c = 0; c < A.n_cols(); ++c)
        offsets[static_cast<std::size_t>(c) + 1] += offsets[static_cast<std::size_t>(c)];
    std::vector<int> cols(A.values().size());
    std::vector<double> vals(A.values().size());
    std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
    for (int r = 0; r < A.n_rows(); ++r)
        for (int k = A.row_offsets()[static_cast<std::size_t>(r)]; k < A.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
            const int c = A.col_indices()[static_cast<std::size_t>(k)];
            const int slot = cursor[static_cast<std::size_t>(c)]++;
            cols[static_cast<std::size_t>(slot)] = r;
            vals[static_cast<std::size_t>(slot)] = A.values()[static_cast<std::size_t>(k)];
        }
    return SparseMatrix(A.n_cols(), A.n_rows(), std::move(offsets), std::move(cols), std::move(vals));
}

}  // namespace penflow
