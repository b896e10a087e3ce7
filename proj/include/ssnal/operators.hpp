#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ssnal/errors.hpp"

namespace ssnal {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Sorted, duplicate-free subset of {0, ..., universe-1}.
class IndexSet {
public:
    IndexSet() = default;

    /// Validates sortedness, uniqueness and range.
    IndexSet(std::vector<Index> indices, Index universe)
        : indices_(std::move(indices)), universe_(universe)
    {
        for (std::size_t k = 0; k < indices_.size(); ++k) {
            const Index i = indices_[k];
            if (i < 0 || i >= universe_) {
                throw dimension_error("IndexSet: index " + std::to_string(i)
                                      + " outside [0, " + std::to_string(universe_) + ")");
            }
            if (k > 0 && indices_[k - 1] >= i) {
                throw std::invalid_argument("IndexSet: indices must be strictly increasing");
            }
        }
    }

    static IndexSet all(Index universe)
    {
        std::vector<Index> idx(static_cast<std::size_t>(universe));
        for (Index i = 0; i < universe; ++i) idx[static_cast<std::size_t>(i)] = i;
        IndexSet s;
        s.indices_ = std::move(idx);
        s.universe_ = universe;
        return s;
    }

    static IndexSet empty(Index universe)
    {
        IndexSet s;
        s.universe_ = universe;
        return s;
    }

    Index size() const { return static_cast<Index>(indices_.size()); }
    bool empty() const { return indices_.empty(); }
    Index universe() const { return universe_; }
    Index operator[](Index k) const { return indices_[static_cast<std::size_t>(k)]; }
    std::span<const Index> indices() const { return indices_; }
    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    bool operator==(const IndexSet&) const = default;

private:
    std::vector<Index> indices_;
    Index universe_ = 0;
};

enum class Backend { dense, sparse, black_box };

inline const char* to_string(Backend b)
{
    switch (b) {
        case Backend::dense: return "dense";
        case Backend::sparse: return "sparse";
        case Backend::black_box: return "black-box";
    }
    return "?";
}

/**
 * Linear map A: R^n -> R^m with forward and adjoint application.
 *
 * Dense and compressed-sparse-column backends also expose column
 * subselection and Gram products; black-box operators only apply.
 * The wrapped data is immutable and shared between copies, so an operator
 * can be applied from several threads at once. Matrix-vector products run
 * single-threaded with Eigen's column-major accumulation order, which makes
 * every product bit-reproducible on a given build.
 */
class LinearOperator {
public:
    using Apply = std::function<void(const Vector& in, Vector& out)>;

    static LinearOperator dense(Matrix a)
    {
        LinearOperator op;
        op.rows_ = a.rows();
        op.cols_ = a.cols();
        op.data_ = std::make_shared<const Matrix>(std::move(a));
        return op;
    }

    static LinearOperator sparse(SparseMatrix a)
    {
        a.makeCompressed();
        LinearOperator op;
        op.rows_ = a.rows();
        op.cols_ = a.cols();
        op.data_ = std::make_shared<const SparseMatrix>(std::move(a));
        return op;
    }

    /// forward: x (n) -> A x (m); adjoint: y (m) -> A^T y (n).
    static LinearOperator black_box(Index rows, Index cols, Apply forward, Apply adjoint)
    {
        if (!forward || !adjoint) throw std::invalid_argument("black_box: both directions required");
        LinearOperator op;
        op.rows_ = rows;
        op.cols_ = cols;
        op.data_ = std::make_shared<const BlackBox>(BlackBox{std::move(forward), std::move(adjoint)});
        return op;
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }

    Backend backend() const
    {
        if (std::holds_alternative<DensePtr>(data_)) return Backend::dense;
        if (std::holds_alternative<SparsePtr>(data_)) return Backend::sparse;
        return Backend::black_box;
    }

    bool supports_submatrix() const { return backend() != Backend::black_box; }

    const Matrix* dense_matrix() const
    {
        auto p = std::get_if<DensePtr>(&data_);
        return p ? p->get() : nullptr;
    }

    const SparseMatrix* sparse_matrix() const
    {
        auto p = std::get_if<SparsePtr>(&data_);
        return p ? p->get() : nullptr;
    }

    /// Number of stored entries; m*n for dense, an estimate of one product's flops.
    double work_units() const
    {
        if (auto d = dense_matrix()) return static_cast<double>(d->size());
        if (auto s = sparse_matrix()) return static_cast<double>(s->nonZeros());
        return static_cast<double>(rows_) * static_cast<double>(cols_);
    }

    void apply(const Vector& x, Vector& out) const
    {
        check_size(x.size(), cols_, "apply");
        if (auto d = dense_matrix()) {
            out.noalias() = (*d) * x;
        } else if (auto s = sparse_matrix()) {
            out.noalias() = (*s) * x;
        } else {
            out.resize(rows_);
            std::get<BlackBoxPtr>(data_)->forward(x, out);
            check_size(out.size(), rows_, "apply (black-box result)");
        }
    }

    Vector apply(const Vector& x) const
    {
        Vector out(rows_);
        apply(x, out);
        return out;
    }

    void apply_adjoint(const Vector& y, Vector& out) const
    {
        check_size(y.size(), rows_, "apply_adjoint");
        if (auto d = dense_matrix()) {
            out.noalias() = d->transpose() * y;
        } else if (auto s = sparse_matrix()) {
            out.noalias() = s->transpose() * y;
        } else {
            out.resize(cols_);
            std::get<BlackBoxPtr>(data_)->adjoint(y, out);
            check_size(out.size(), cols_, "apply_adjoint (black-box result)");
        }
    }

    Vector apply_adjoint(const Vector& y) const
    {
        Vector out(cols_);
        apply_adjoint(y, out);
        return out;
    }

    /// A_J: the m x |J| operator made of the columns listed in J, same backend.
    LinearOperator column_submatrix(const IndexSet& j) const
    {
        require_submatrix("column_submatrix");
        if (j.universe() != cols_) {
            throw dimension_error("column_submatrix: index set universe " + std::to_string(j.universe())
                                  + " != cols " + std::to_string(cols_));
        }
        const Index r = j.size();
        if (auto d = dense_matrix()) {
            Matrix sub(rows_, r);
            for (Index k = 0; k < r; ++k) sub.col(k) = d->col(j[k]);
            return dense(std::move(sub));
        }
        const SparseMatrix& s = *sparse_matrix();
        // CSC: each selected column is a contiguous slice of the value/index arrays.
        const auto* outer = s.outerIndexPtr();
        SparseMatrix::StorageIndex nnz = 0;
        for (Index k = 0; k < r; ++k) nnz += outer[j[k] + 1] - outer[j[k]];
        SparseMatrix sub(rows_, r);
        sub.resizeNonZeros(nnz);
        auto* sub_outer = sub.outerIndexPtr();
        auto* sub_inner = sub.innerIndexPtr();
        auto* sub_values = sub.valuePtr();
        SparseMatrix::StorageIndex pos = 0;
        for (Index k = 0; k < r; ++k) {
            sub_outer[k] = pos;
            const auto begin = outer[j[k]];
            const auto end = outer[j[k] + 1];
            std::copy(s.innerIndexPtr() + begin, s.innerIndexPtr() + end, sub_inner + pos);
            std::copy(s.valuePtr() + begin, s.valuePtr() + end, sub_values + pos);
            pos += end - begin;
        }
        sub_outer[r] = pos;
        return sparse(std::move(sub));
    }

    /// A^T A (cols x cols).
    Matrix gram() const
    {
        require_submatrix("gram");
        if (auto d = dense_matrix()) {
            Matrix g = Matrix::Zero(cols_, cols_);
            g.selfadjointView<Eigen::Lower>().rankUpdate(d->transpose());
            return Matrix(g.selfadjointView<Eigen::Lower>());
        }
        const SparseMatrix& s = *sparse_matrix();
        Matrix g = Matrix(SparseMatrix(s.transpose() * s));
        return g;
    }

    /// A A^T (rows x rows).
    Matrix outer_gram() const
    {
        require_submatrix("outer_gram");
        if (auto d = dense_matrix()) {
            Matrix g = Matrix::Zero(rows_, rows_);
            g.selfadjointView<Eigen::Lower>().rankUpdate(*d);
            return Matrix(g.selfadjointView<Eigen::Lower>());
        }
        const SparseMatrix& s = *sparse_matrix();
        return Matrix(SparseMatrix(s * s.transpose()));
    }

    /// A_J^T A_J for a nonempty J.
    Matrix gram_submatrix(const IndexSet& j) const
    {
        require_submatrix("gram_submatrix");
        if (j.empty()) throw std::invalid_argument("gram_submatrix: empty index set");
        return column_submatrix(j).gram();
    }

    double frobenius_norm_sq() const
    {
        if (auto d = dense_matrix()) return d->squaredNorm();
        if (auto s = sparse_matrix()) return s->squaredNorm();
        double total = 0.0;
        Vector e = Vector::Zero(cols_);
        Vector col(rows_);
        for (Index i = 0; i < cols_; ++i) {
            e[i] = 1.0;
            apply(e, col);
            total += col.squaredNorm();
            e[i] = 0.0;
        }
        return total;
    }

private:
    struct BlackBox {
        Apply forward;
        Apply adjoint;
    };
    using DensePtr = std::shared_ptr<const Matrix>;
    using SparsePtr = std::shared_ptr<const SparseMatrix>;
    using BlackBoxPtr = std::shared_ptr<const BlackBox>;

    LinearOperator() = default;

    static void check_size(Index got, Index want, const char* what)
    {
        if (got != want) {
            throw dimension_error(std::string(what) + ": expected length " + std::to_string(want)
                                  + ", got " + std::to_string(got));
        }
    }

    void require_submatrix(const char* what) const
    {
        if (!supports_submatrix()) {
            throw capability_error(std::string(what) + ": not available for black-box operators");
        }
    }

    Index rows_ = 0;
    Index cols_ = 0;
    std::variant<DensePtr, SparsePtr, BlackBoxPtr> data_;
};

} // namespace ssnal
