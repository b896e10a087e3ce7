#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <vector>

#include "ssnal/errors.hpp"
#include "ssnal/operators.hpp"

namespace ssnal {

/// Weighted l1 norm sum_i w_i |x_i| with strictly positive weights.
class WeightedL1 {
public:
    WeightedL1(double lambda, Index n) : weights_(Vector::Constant(n, lambda)), uniform_(true)
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw validation_error("WeightedL1: lambda must be positive");
    }

    explicit WeightedL1(Vector weights) : weights_(std::move(weights))
    {
        for (Index i = 0; i < weights_.size(); ++i) {
            if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
                throw validation_error("WeightedL1: weight " + std::to_string(i) + " must be positive");
            }
        }
        uniform_ = weights_.size() == 0 || (weights_.array() == weights_[0]).all();
    }

    const Vector& weights() const { return weights_; }
    Index size() const { return weights_.size(); }
    bool uniform() const { return uniform_; }
    double max_weight() const { return weights_.size() ? weights_.maxCoeff() : 0.0; }

    double value(const Vector& x) const { return (weights_.array() * x.array().abs()).sum(); }

private:
    Vector weights_;
    bool uniform_ = true;
};

/// h(w) = 1/2 ||w - b||^2 and its conjugate h*(y) = 1/2 ||y||^2 + <b, y>.
class SquaredLoss {
public:
    explicit SquaredLoss(Vector b) : b_(std::move(b))
    {
        if (!b_.allFinite()) throw validation_error("SquaredLoss: target has non-finite entries");
    }

    const Vector& target() const { return b_; }

    /// Strong convexity modulus of h*; the gradient of h is 1/alpha-Lipschitz.
    static constexpr double alpha() { return 1.0; }

    double value(const Vector& w) const { return 0.5 * (w - b_).squaredNorm(); }
    double conjugate(const Vector& y) const { return 0.5 * y.squaredNorm() + b_.dot(y); }

private:
    Vector b_;
};

namespace detail {

inline void require_positive(const Vector& t, const char* what)
{
    if (!(t.array() > 0.0).all()) throw std::invalid_argument(std::string(what) + ": threshold must be positive");
}

inline void require_same_size(Index a, Index b, const char* what)
{
    if (a != b) {
        throw dimension_error(std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

} // namespace detail

/// sign(x) * max(|x| - t, 0), coordinatewise.
inline Vector soft_threshold(const Vector& x, const Vector& t)
{
    detail::require_same_size(x.size(), t.size(), "soft_threshold");
    detail::require_positive(t, "soft_threshold");
    return x.array().sign() * (x.array().abs() - t.array()).max(0.0);
}

inline Vector soft_threshold(const Vector& x, double t)
{
    if (!(t > 0.0)) throw std::invalid_argument("soft_threshold: threshold must be positive");
    return x.array().sign() * (x.array().abs() - t).max(0.0);
}

/// Clamp each z_i into [-lambda_i, lambda_i].
inline Vector project_linf_ball(const Vector& z, const Vector& lambda)
{
    detail::require_same_size(z.size(), lambda.size(), "project_linf_ball");
    detail::require_positive(lambda, "project_linf_ball");
    return z.array().min(lambda.array()).max(-lambda.array());
}

inline Vector project_linf_ball(const Vector& z, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("project_linf_ball: radius must be positive");
    return z.array().min(lambda).max(-lambda);
}

/// Gradient of h*(y) = 1/2||y||^2 + <b,y>. The Hessian is the identity.
inline Vector grad_hstar(const SquaredLoss& loss, const Vector& y)
{
    detail::require_same_size(y.size(), loss.target().size(), "grad_hstar");
    return y + loss.target();
}

/**
 * min_x 1/2 ||A x - b||^2 - <c, x> + sum_i lambda_i |x_i|.
 *
 * The linear term c is zero for plain Lasso. Construction rejects empty
 * dimensions and mismatched lengths.
 */
class LassoProblem {
public:
    LassoProblem(LinearOperator a, Vector b, WeightedL1 reg)
        : LassoProblem(std::move(a), std::move(b), std::move(reg), Vector())
    {}

    LassoProblem(LinearOperator a, Vector b, WeightedL1 reg, Vector c)
        : a_(std::move(a)), loss_(std::move(b)), reg_(std::move(reg)), c_(std::move(c))
    {
        if (a_.rows() == 0 || a_.cols() == 0) throw validation_error("LassoProblem: m and n must be positive");
        if (loss_.target().size() != a_.rows()) {
            throw dimension_error("LassoProblem: b has length " + std::to_string(loss_.target().size())
                                  + " but A has " + std::to_string(a_.rows()) + " rows");
        }
        if (reg_.size() != a_.cols()) {
            throw dimension_error("LassoProblem: weight vector length " + std::to_string(reg_.size())
                                  + " != n = " + std::to_string(a_.cols()));
        }
        if (c_.size() == 0) c_ = Vector::Zero(a_.cols());
        if (c_.size() != a_.cols()) throw dimension_error("LassoProblem: c must have length n");
        if (!c_.allFinite()) throw validation_error("LassoProblem: c has non-finite entries");
    }

    LassoProblem(LinearOperator a, Vector b, double lambda)
        : LassoProblem(a, std::move(b), WeightedL1(lambda, a.cols()))
    {}

    const LinearOperator& op() const { return a_; }
    const SquaredLoss& loss() const { return loss_; }
    const Vector& b() const { return loss_.target(); }
    const WeightedL1& regularizer() const { return reg_; }
    const Vector& lambda() const { return reg_.weights(); }
    const Vector& c() const { return c_; }
    Index rows() const { return a_.rows(); }
    Index cols() const { return a_.cols(); }

    double objective(const Vector& x) const
    {
        detail::require_same_size(x.size(), cols(), "objective");
        return loss_.value(a_.apply(x)) - c_.dot(x) + reg_.value(x);
    }

private:
    LinearOperator a_;
    SquaredLoss loss_;
    WeightedL1 reg_;
    Vector c_;
};

/// Relative KKT residual from a precomputed residual Ax - b and gradient A^T(Ax - b) - c.
inline double kkt_residual(const LassoProblem& prob, const Vector& x, const Vector& residual, const Vector& grad)
{
    const Vector step = x - grad;
    const Vector fixed_point = step.array().sign() * (step.array().abs() - prob.lambda().array()).max(0.0);
    return (x - fixed_point).norm() / (1.0 + x.norm() + residual.norm());
}

/**
 * eta = ||x - prox_{lambda||.||_1}(x - (A^T(Ax - b) - c))|| / (1 + ||x|| + ||Ax - b||).
 *
 * Zero exactly at a minimizer; the scale-free measure every solver stops on.
 */
inline double kkt_residual(const LassoProblem& prob, const Vector& x)
{
    detail::require_same_size(x.size(), prob.cols(), "kkt_residual");
    const Vector residual = prob.op().apply(x) - prob.b();
    const Vector grad = prob.op().apply_adjoint(residual) - prob.c();
    return kkt_residual(prob, x, residual, grad);
}

/// lambda = ratio * ||A^T b||_inf. A ratio outside (0,1) is allowed but logged.
inline double lambda_from_ratio(const LinearOperator& op, const Vector& b, double ratio)
{
    const double scale = op.apply_adjoint(b).lpNorm<Eigen::Infinity>();
    if (!(scale > 0.0)) throw validation_error("lambda_from_ratio: A^T b is zero, lambda is undefined");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        std::clog << "warning: lambda ratio " << ratio << " is outside (0, 1)\n";
    }
    return ratio * scale;
}

/**
 * Smallest k such that the k largest |x_i| carry 99.9% of ||x||_1.
 * Ties in |x_i| are ordered by index; returns 0 for the zero vector.
 */
inline Index estimate_nnz(const Vector& x)
{
    std::vector<Index> order(static_cast<std::size_t>(x.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(x[a]) > std::abs(x[b]); });
    double total = 0.0;
    for (Index i : order) total += std::abs(x[i]);
    if (total == 0.0) return 0;
    const double target = 0.999 * total;
    double partial = 0.0;
    Index k = 0;
    for (Index i : order) {
        partial += std::abs(x[i]);
        ++k;
        if (partial >= target) return k;
    }
    return k;
}

} // namespace ssnal
