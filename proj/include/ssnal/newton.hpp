#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssnal/errors.hpp"
#include "ssnal/operators.hpp"
#include "ssnal/prox.hpp"

namespace ssnal {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Parameters of the semismooth Newton inner solver.
struct InnerConfig {
    double mu = 1e-4;          // Armijo sufficient-decrease constant, (0, 1/2)
    double backtrack = 0.5;    // step shrink factor, (0, 1)
    double tau = 0.5;          // forcing exponent of the linear-solve tolerance, (0, 1]
    double eta_bar = 1e-2;     // cap of the linear-solve tolerance, (0, 1)
    int max_newton_steps = 50;
    int max_backtracks = 60;
    int cg_max_iterations = 300;
    Index smw_max_rank = 1500;       // use Sherman-Morrison-Woodbury when r <= this and r < m
    Index cholesky_max_rows = 3000;  // otherwise factor the m x m system when m <= this
    int gradient_check_every = 0;    // > 0: finite-difference check of grad psi every k-th step

    void validate() const
    {
        auto bad = [](const char* what) { throw std::invalid_argument(std::string("InnerConfig: ") + what); };
        if (!(mu > 0.0 && mu < 0.5)) bad("mu must lie in (0, 1/2)");
        if (!(backtrack > 0.0 && backtrack < 1.0)) bad("backtrack must lie in (0, 1)");
        if (!(tau > 0.0 && tau <= 1.0)) bad("tau must lie in (0, 1]");
        if (!(eta_bar > 0.0 && eta_bar < 1.0)) bad("eta_bar must lie in (0, 1)");
        if (max_newton_steps < 0 || max_backtracks < 1 || cg_max_iterations < 1) bad("iteration limits must be positive");
        if (smw_max_rank < 0 || cholesky_max_rows < 0) bad("strategy thresholds must be nonnegative");
    }
};

enum class Strategy { direct_cholesky, smw, cg };

inline const char* to_string(Strategy s)
{
    switch (s) {
        case Strategy::direct_cholesky: return "cholesky";
        case Strategy::smw: return "smw";
        case Strategy::cg: return "cg";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// The subproblem function psi and its gradient
// ---------------------------------------------------------------------------

/// J = { j : |x_j| > threshold_j }; points on the boundary are inactive.
inline IndexSet assemble_active_set(const Vector& x, const Vector& threshold)
{
    detail::require_same_size(x.size(), threshold.size(), "assemble_active_set");
    detail::require_positive(threshold, "assemble_active_set");
    std::vector<Index> idx;
    for (Index i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) > threshold[i]) idx.push_back(i);
    }
    return IndexSet(std::move(idx), x.size());
}

namespace detail {

/// Everything psi needs at one y, computed from a cached A^T y.
struct PsiPoint {
    Vector v;  // xt - sigma (A^T y - c)
    Vector u;  // Prox_{sigma p}(v)
    double value = 0.0;
};

inline PsiPoint eval_psi_point(const LassoProblem& prob, const Vector& xt, double sigma, const Vector& y,
                               const Vector& aty, const Vector& sigma_lambda)
{
    PsiPoint p;
    p.v = xt - sigma * (aty - prob.c());
    p.u = p.v.array().sign() * (p.v.array().abs() - sigma_lambda.array()).max(0.0);
    p.value = prob.loss().conjugate(y) + (p.u.squaredNorm() - xt.squaredNorm()) / (2.0 * sigma);
    return p;
}

inline void check_psi_args(const LassoProblem& prob, const Vector& xt, double sigma, const Vector& y)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("psi: sigma must be positive");
    require_same_size(xt.size(), prob.cols(), "psi (x)");
    require_same_size(y.size(), prob.rows(), "psi (y)");
}

} // namespace detail

/**
 * psi(y) = h*(y) + (1/2 sigma) ||Prox_{sigma p}(xt - sigma (A^T y - c))||^2 - (1/2 sigma) ||xt||^2.
 *
 * The p* term of the general formula vanishes for the l1 norm because the
 * projection lands inside the weighted infinity ball.
 */
inline double psi_value(const LassoProblem& prob, const Vector& xt, double sigma, const Vector& y)
{
    detail::check_psi_args(prob, xt, sigma, y);
    const Vector sl = sigma * prob.lambda();
    return detail::eval_psi_point(prob, xt, sigma, y, prob.op().apply_adjoint(y), sl).value;
}

struct PsiGradient {
    Vector grad;
    Vector u; // Prox_{sigma p}(xt - sigma (A^T y - c)), the primal candidate
};

/// grad psi(y) = y + b - A u with u the prox point above.
inline PsiGradient psi_grad(const LassoProblem& prob, const Vector& xt, double sigma, const Vector& y)
{
    detail::check_psi_args(prob, xt, sigma, y);
    const Vector sl = sigma * prob.lambda();
    auto p = detail::eval_psi_point(prob, xt, sigma, y, prob.op().apply_adjoint(y), sl);
    PsiGradient g;
    g.grad = grad_hstar(prob.loss(), y) - prob.op().apply(p.u);
    g.u = std::move(p.u);
    return g;
}

// ---------------------------------------------------------------------------
// Newton system (I + sigma A_J A_J^T) d = rhs
// ---------------------------------------------------------------------------

struct NewtonSystem {
    IndexSet active;
    double sigma = 1.0;
    Strategy strategy = Strategy::cg;

    Index rank() const { return active.size(); }
};

/**
 * Picks the linear-algebra route for the active set J:
 * SMW when r <= smw_max_rank and r < m, dense Cholesky of the m x m
 * matrix when m <= cholesky_max_rows, CG otherwise. Black-box
 * operators always use CG.
 */
inline NewtonSystem make_newton_system(const LinearOperator& op, IndexSet active, double sigma,
                                       const InnerConfig& cfg, std::optional<Strategy> force = std::nullopt)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("make_newton_system: sigma must be positive");
    NewtonSystem sys;
    sys.sigma = sigma;
    const Index r = active.size();
    const Index m = op.rows();
    sys.active = std::move(active);
    if (!op.supports_submatrix()) {
        if (force && *force != Strategy::cg) throw capability_error("make_newton_system: black-box operators support CG only");
        sys.strategy = Strategy::cg;
    } else if (force) {
        sys.strategy = *force;
    } else if (r <= cfg.smw_max_rank && r < m) {
        sys.strategy = Strategy::smw;
    } else if (m <= cfg.cholesky_max_rows) {
        sys.strategy = Strategy::direct_cholesky;
    } else {
        sys.strategy = Strategy::cg;
    }
    return sys;
}

struct NewtonDirection {
    Vector d;
    double residual = 0.0;  // ||V d - rhs||
    int cg_iterations = 0;
    bool converged = true;  // false only when CG hit its iteration cap
    double flops = 0.0;     // rough cost, used for work accounting
    std::uint64_t matvecs = 0; // full-operator products (black-box CG)
};

namespace detail {

/// Plain CG from zero; returns the iterate with the smallest residual seen.
template <class MatVec>
NewtonDirection conjugate_gradient(MatVec&& matvec, const Vector& rhs, double tol, int max_iter)
{
    NewtonDirection out;
    Vector x = Vector::Zero(rhs.size());
    Vector r = rhs;
    Vector p = r;
    Vector ap(rhs.size());
    double rr = r.squaredNorm();
    Vector best = x;
    double best_res = std::sqrt(rr);
    int it = 0;
    while (std::sqrt(rr) > tol && it < max_iter) {
        matvec(p, ap);
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) break;
        const double alpha = rr / pap;
        x.noalias() += alpha * p;
        r.noalias() -= alpha * ap;
        const double rr_new = r.squaredNorm();
        ++it;
        if (std::sqrt(rr_new) < best_res) {
            best_res = std::sqrt(rr_new);
            best = x;
        }
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    out.d = std::move(best);
    out.residual = best_res;
    out.cg_iterations = it;
    out.converged = best_res <= tol;
    return out;
}

} // namespace detail

/**
 * Solves (I + sigma A_J A_J^T) d = rhs to ||V d - rhs|| <= tol.
 *
 * Direct routes (SMW, Cholesky) solve to working precision and apply one
 * step of iterative refinement if the residual misses tol. CG stops at tol
 * or after cg_max_iterations and then reports converged = false together with
 * the best iterate it found. A Cholesky breakdown throws numerical_error.
 */
inline NewtonDirection solve_newton_system(const NewtonSystem& sys, const LinearOperator& op, const Vector& rhs,
                                           double tol, int cg_max_iterations = 300)
{
    detail::require_same_size(rhs.size(), op.rows(), "solve_newton_system");
    const Index m = op.rows();
    const Index r = sys.rank();
    const double sigma = sys.sigma;

    if (r == 0) {
        NewtonDirection out;
        out.d = rhs;
        return out;
    }

    if (!op.supports_submatrix()) {
        Vector mask = Vector::Zero(op.cols());
        for (Index j : sys.active) mask[j] = 1.0;
        Vector t(op.cols());
        Vector w(m);
        std::uint64_t products = 0;
        auto matvec = [&](const Vector& p, Vector& out) {
            op.apply_adjoint(p, t);
            t.array() *= mask.array();
            op.apply(t, w);
            products += 2;
            out = p + sigma * w;
        };
        auto out = detail::conjugate_gradient(matvec, rhs, tol, cg_max_iterations);
        out.matvecs = products;
        out.flops = static_cast<double>(products) * op.work_units();
        return out;
    }

    const LinearOperator aj = op.column_submatrix(sys.active);
    const double nnz_j = aj.work_units();
    Vector tr(r);
    Vector tm(m);
    auto apply_v = [&](const Vector& p, Vector& out) {
        aj.apply_adjoint(p, tr);
        aj.apply(tr, tm);
        out = p + sigma * tm;
    };

    if (sys.strategy == Strategy::cg) {
        auto out = detail::conjugate_gradient(apply_v, rhs, tol, cg_max_iterations);
        out.flops = nnz_j + 2.0 * nnz_j * out.cg_iterations;
        return out;
    }

    NewtonDirection out;
    std::function<Vector(const Vector&)> solve;
    if (sys.strategy == Strategy::smw) {
        // (I + sigma A_J A_J^T)^{-1} = I - A_J (sigma^{-1} I + A_J^T A_J)^{-1} A_J^T
        Matrix small = aj.gram();
        small.diagonal().array() += 1.0 / sigma;
        auto llt = std::make_shared<Eigen::LLT<Matrix>>(small);
        if (llt->info() != Eigen::Success) throw numerical_error("solve_newton_system: SMW Cholesky failed");
        solve = [&, llt](const Vector& q) {
            aj.apply_adjoint(q, tr);
            Vector w = llt->solve(tr);
            aj.apply(w, tm);
            return Vector(q - tm);
        };
        const double rd = static_cast<double>(r);
        out.flops = nnz_j + nnz_j * rd + rd * rd * rd / 3.0 + 4.0 * nnz_j;
    } else {
        Matrix big = aj.outer_gram();
        big *= sigma;
        big.diagonal().array() += 1.0;
        auto llt = std::make_shared<Eigen::LLT<Matrix>>(big);
        if (llt->info() != Eigen::Success) throw numerical_error("solve_newton_system: Cholesky failed");
        solve = [llt](const Vector& q) { return Vector(llt->solve(q)); };
        const double md = static_cast<double>(m);
        out.flops = nnz_j + nnz_j * md + md * md * md / 3.0 + 2.0 * md * md + 2.0 * nnz_j;
    }

    out.d = solve(rhs);
    Vector vd(m);
    apply_v(out.d, vd);
    Vector res = rhs - vd;
    out.residual = res.norm();
    if (out.residual > tol) {
        out.d += solve(res);
        apply_v(out.d, vd);
        out.residual = (rhs - vd).norm();
    }
    if (!out.d.allFinite()) throw numerical_error("solve_newton_system: non-finite direction");
    return out;
}

// ---------------------------------------------------------------------------
// Semismooth Newton driver
// ---------------------------------------------------------------------------

/// Inner stopping thresholds supplied by the outer loop at iteration k.
struct InnerStop {
    double eps_k = 1.0;        // ||grad|| <= sqrt(alpha/sigma) eps_k
    double delta_k = 1.0;      // ||grad|| <= sqrt(alpha sigma) delta_k ||A^T y + z - c||
    double delta_prime_k = 1.0; // ||grad|| <= delta'_k ||A^T y + z - c||
    double alpha_h = 1.0;

    /// Tightest of the three bounds for the given penalty and feasibility residual.
    double threshold(double sigma, double feasibility) const
    {
        const double a = std::sqrt(alpha_h / sigma) * eps_k;
        const double b1 = std::sqrt(alpha_h * sigma) * delta_k * feasibility;
        const double b2 = delta_prime_k * feasibility;
        return std::min({a, b1, b2});
    }

    /// Stop on an explicit gradient-norm target instead (used by tests).
    static InnerStop gradient_below(double target)
    {
        InnerStop s;
        s.eps_k = target;
        s.delta_k = std::numeric_limits<double>::infinity();
        s.delta_prime_k = std::numeric_limits<double>::infinity();
        s.alpha_h = 1.0;
        s.absolute_ = true;
        return s;
    }

    bool absolute() const { return absolute_; }

private:
    bool absolute_ = false;
};

struct InnerTraceRecord {
    int step = 0;
    double grad_norm = 0.0;
    Index rank = 0;
    Strategy strategy = Strategy::smw;
    int cg_iterations = 0;
    double step_size = 0.0;
    double psi = 0.0;
};

using InnerTrace = std::function<void(const InnerTraceRecord&)>;

struct InnerResult {
    Vector y;
    Vector z;    // projection of (xt - sigma (A^T y - c)) / sigma onto the weighted infinity ball
    Vector u;    // Prox_{sigma p}(xt - sigma (A^T y - c)); the next primal iterate
    Vector aty;  // A^T y
    Vector au;   // A u
    double psi = 0.0;
    double grad_norm = 0.0;
    int steps = 0;
    int cg_iterations = 0;
    std::uint64_t matvecs = 0;
    double newton_flops = 0.0;
    std::vector<Strategy> strategies;
    std::vector<double> grad_norms; // ||grad psi(y^j)|| for j = 0..steps
    bool max_steps_reached = false;
    bool tolerance_floored = false;  // min(eta_bar, ||g||^{1+tau}) fell below roundoff and was raised
    bool stagnated = false;          // stopped at roundoff level without meeting the threshold
    bool cg_capped = false;
};

namespace detail {

inline std::string state_dump(const char* what, int step, double sigma, const Vector& y, double gnorm)
{
    std::ostringstream os;
    os << what << " (newton step " << step << ", sigma=" << sigma << ", ||y||=" << y.norm()
       << ", ||grad||=" << gnorm << ")";
    return os.str();
}

} // namespace detail

/**
 * Minimizes psi(y) for fixed (xt, sigma) with the semismooth Newton method.
 *
 * Each step solves V d = -grad psi with V = I + sigma A_J A_J^T to
 * ||V d + grad|| <= min(eta_bar, ||grad||^{1+tau}) and backtracks
 * alpha = backtrack^m until the Armijo condition
 * psi(y + alpha d) <= psi(y) + mu alpha <grad, d> holds. The decrease
 * psi(y + alpha d) - psi(y) is assembled from differences so that it stays
 * accurate when both values are large and the step is tiny.
 *
 * Stops when ||grad|| meets the outer loop's thresholds (or an absolute
 * floor at roundoff level), or after max_newton_steps.
 */
inline InnerResult ssn_solve(const LassoProblem& prob, const Vector& xt, double sigma, const Vector& y0,
                             const InnerStop& stop, const InnerConfig& cfg, const InnerTrace& trace = {})
{
    cfg.validate();
    detail::check_psi_args(prob, xt, sigma, y0);
    const LinearOperator& op = prob.op();
    const Vector& b = prob.b();
    const Vector sigma_lambda = sigma * prob.lambda();
    const double b_norm = b.norm();
    const double xt_sq = xt.squaredNorm();

    InnerResult res;
    res.y = y0;
    res.aty = op.apply_adjoint(res.y);
    auto point = detail::eval_psi_point(prob, xt, sigma, res.y, res.aty, sigma_lambda);
    res.au = op.apply(point.u);
    res.matvecs += 2;
    Vector grad = res.y + b - res.au;

    Vector atd(op.cols());
    for (int step = 0;; ++step) {
        const double gnorm = grad.norm();
        res.grad_norms.push_back(gnorm);
        if (!std::isfinite(gnorm) || !std::isfinite(point.value)) {
            throw numerical_error(detail::state_dump("ssn_solve: non-finite iterate", step, sigma, res.y, gnorm));
        }

        const double floor = 1e-14 * (1.0 + b_norm + res.y.norm() + res.au.norm());
        const double feasibility = (xt - point.u).norm() / sigma;
        const double target = stop.absolute() ? stop.eps_k : stop.threshold(sigma, feasibility);
        if (gnorm <= std::max(target, floor)) break;
        if (step >= cfg.max_newton_steps) {
            res.max_steps_reached = true;
            break;
        }

        if (cfg.gradient_check_every > 0 && step % cfg.gradient_check_every == 0) {
            const Vector dir = grad / gnorm;
            const double h = 1e-5;
            const double fd = (psi_value(prob, xt, sigma, res.y + h * dir) - psi_value(prob, xt, sigma, res.y - h * dir))
                              / (2.0 * h);
            if (std::abs(fd - gnorm) > 1e-4 * (1.0 + gnorm) + 1e-6 * (1.0 + std::abs(point.value))) {
                throw numerical_error(detail::state_dump("ssn_solve: gradient check failed", step, sigma, res.y, gnorm));
            }
        }

        IndexSet active = assemble_active_set(point.v, sigma_lambda);
        NewtonSystem sys = make_newton_system(op, std::move(active), sigma, cfg);
        double lin_tol = std::min(cfg.eta_bar, std::pow(gnorm, 1.0 + cfg.tau));
        const double lin_floor = 1e-14 * (1.0 + gnorm);
        if (lin_tol < lin_floor) {
            lin_tol = lin_floor;
            res.tolerance_floored = true;
        }
        const Vector rhs = -grad;
        NewtonDirection dir = solve_newton_system(sys, op, rhs, lin_tol, cfg.cg_max_iterations);
        res.cg_iterations += dir.cg_iterations;
        res.newton_flops += dir.flops;
        res.matvecs += dir.matvecs;
        res.cg_capped = res.cg_capped || !dir.converged;
        res.strategies.push_back(sys.strategy);
        const Vector& d = dir.d;

        op.apply_adjoint(d, atd);
        res.matvecs += 1;
        const double slope = grad.dot(d);

        double alpha = 1.0;
        bool accepted = false;
        detail::PsiPoint trial;
        double decrease = 0.0;
        const double yd = res.y.dot(d);
        const double bd = b.dot(d);
        const double dd = d.squaredNorm();
        if (slope < 0.0) {
            for (int m = 0; m < cfg.max_backtracks; ++m) {
                trial.v = point.v - (sigma * alpha) * atd;
                trial.u = trial.v.array().sign() * (trial.v.array().abs() - sigma_lambda.array()).max(0.0);
                // psi(y + alpha d) - psi(y), cancellation-free
                decrease = alpha * (yd + bd) + 0.5 * alpha * alpha * dd
                           + ((trial.u - point.u).array() * (trial.u + point.u).array()).sum() / (2.0 * sigma);
                if (decrease <= cfg.mu * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha *= cfg.backtrack;
            }
        }
        if (!accepted) {
            if (gnorm <= 1e3 * floor) {
                res.stagnated = true;
                break;
            }
            throw numerical_error(detail::state_dump(slope < 0.0 ? "ssn_solve: line search failed"
                                                                  : "ssn_solve: Newton direction is not a descent direction",
                                                     step, sigma, res.y, gnorm));
        }

        res.y.noalias() += alpha * d;
        res.aty.noalias() += alpha * atd;
        point.v = std::move(trial.v);
        point.u = std::move(trial.u);
        point.value = prob.loss().conjugate(res.y) + (point.u.squaredNorm() - xt_sq) / (2.0 * sigma);
        op.apply(point.u, res.au);
        res.matvecs += 1;
        grad = res.y + b - res.au;
        ++res.steps;

        if (trace) {
            InnerTraceRecord rec;
            rec.step = res.steps;
            rec.grad_norm = grad.norm();
            rec.rank = sys.rank();
            rec.strategy = sys.strategy;
            rec.cg_iterations = dir.cg_iterations;
            rec.step_size = alpha;
            rec.psi = point.value;
            trace(rec);
        }
    }

    res.grad_norm = res.grad_norms.back();
    res.psi = point.value;
    res.z = project_linf_ball(point.v / sigma, prob.lambda());
    res.u = std::move(point.u);
    return res;
}

} // namespace ssnal
