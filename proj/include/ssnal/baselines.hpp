#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <string>

#include "ssnal/alm.hpp"
#include "ssnal/prox.hpp"
#include "ssnal/report.hpp"
#include "ssnal/spectrum.hpp"

namespace ssnal {

enum class BaselineKind { apg, admm, ladmm };

inline const char* to_string(BaselineKind k)
{
    switch (k) {
        case BaselineKind::apg: return "apg";
        case BaselineKind::admm: return "admm";
        case BaselineKind::ladmm: return "ladmm";
    }
    return "?";
}

struct BaselineConfig {
    BaselineKind kind = BaselineKind::apg;
    double step_length = 1.618; // multiplier step of ADMM and LADMM
    double rho = 1.0;           // ADMM-type penalty
    int max_iterations = 20000;
    double tol = 1e-6;
    double time_limit_seconds = std::numeric_limits<double>::infinity();
    double power_tol = 1e-6;
    int power_max_iterations = 1000;
    OuterTrace trace;
    int trace_every = 1;

    void validate() const
    {
        const double golden = 0.5 * (1.0 + std::sqrt(5.0));
        if (!(step_length > 0.0 && step_length < golden)) {
            throw std::invalid_argument("BaselineConfig: step length must lie in (0, (1+sqrt 5)/2)");
        }
        if (!(rho > 0.0)) throw std::invalid_argument("BaselineConfig: rho must be positive");
        if (max_iterations < 1) throw std::invalid_argument("BaselineConfig: max_iterations must be positive");
        if (!(tol > 0.0)) throw std::invalid_argument("BaselineConfig: tol must be positive");
    }
};

namespace detail {

/// Upper estimate of lambda_max(A^T A); falls back to ||A||_F^2 if power iteration stalls.
inline double lipschitz_constant(const LinearOperator& op, const BaselineConfig& cfg, SolveReport& rep)
{
    SpectrumEstimate est = estimate_lambda_max(op, cfg.power_tol, cfg.power_max_iterations);
    rep.matvecs += est.matvecs;
    if (est.converged && est.lambda_max > 0.0) return est.lambda_max;
    rep.message = "power iteration did not converge (achieved " + std::to_string(est.achieved_tol)
                  + "); using the Frobenius bound";
    return op.frobenius_norm_sq();
}

struct BaselineLoop {
    const LassoProblem& prob;
    const BaselineConfig& cfg;
    SolveReport& rep;
    Stopwatch clock;

    /// Records eta and decides whether to stop after iteration `it`.
    bool finished(int it, const Vector& x, const Vector& residual, const Vector& grad, double feasibility)
    {
        rep.eta = kkt_residual(prob, x, residual, grad);
        rep.eta_history.push_back(rep.eta);
        rep.outer_iterations = it;
        rep.feasibility = feasibility;
        if (cfg.trace && (it % std::max(1, cfg.trace_every) == 0)) {
            OuterTraceRecord rec;
            rec.iteration = it;
            rec.eta = rep.eta;
            rec.feasibility = feasibility;
            rec.sigma = cfg.rho;
            cfg.trace(rec);
        }
        if (!std::isfinite(rep.eta)) {
            rep.termination = Termination::failure;
            rep.message = "non-finite iterate";
            return true;
        }
        if (rep.eta < cfg.tol) {
            rep.termination = Termination::converged;
            return true;
        }
        if (clock.elapsed_seconds() > cfg.time_limit_seconds) {
            rep.termination = Termination::time_limit;
            return true;
        }
        return false;
    }

    void finish(const Vector& x)
    {
        rep.x = x;
        rep.nnz = estimate_nnz(x);
        rep.objective = prob.objective(x);
        rep.matvec_equivalents = static_cast<double>(rep.matvecs);
        rep.wall_time_ns = clock.elapsed_ns();
    }
};

} // namespace detail

/**
 * Accelerated proximal gradient (FISTA):
 * x+ = soft_threshold(w - grad(w)/L, lambda/L), w+ = x+ + ((t-1)/t+)(x+ - x).
 *
 * The gradient at the extrapolated point is a combination of the two
 * gradients already computed for eta, so each iteration costs one product
 * with A and one with A^T.
 */
inline SolveReport apg_solve(const LassoProblem& prob, const BaselineConfig& cfg)
{
    cfg.validate();
    SolveReport rep;
    rep.solver = "apg";
    detail::BaselineLoop loop{prob, cfg, rep, {}};
    const LinearOperator& op = prob.op();
    const double lip = detail::lipschitz_constant(op, cfg, rep);
    const Vector thresh = prob.lambda() / lip;

    Vector x = Vector::Zero(prob.cols());
    Vector grad_x = op.apply_adjoint(-prob.b()) - prob.c();
    rep.matvecs += 1;
    Vector w = x;
    Vector grad_w = grad_x;
    Vector residual(prob.rows());
    Vector grad(prob.cols());
    double t = 1.0;
    int it = 0;
    while (it < cfg.max_iterations) {
        ++it;
        const Vector step = w - grad_w / lip;
        Vector x_next = step.array().sign() * (step.array().abs() - thresh.array()).max(0.0);
        op.apply(x_next, residual);
        residual -= prob.b();
        op.apply_adjoint(residual, grad);
        grad -= prob.c();
        rep.matvecs += 2;
        if (loop.finished(it, x_next, residual, grad, (x_next - x).norm())) {
            x = std::move(x_next);
            loop.finish(x);
            return rep;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        w = x_next + beta * (x_next - x);
        grad_w = grad + beta * (grad - grad_x);
        x = std::move(x_next);
        grad_x = grad;
        t = t_next;
    }
    rep.termination = Termination::max_iterations;
    loop.finish(x);
    return rep;
}

/**
 * ADMM on min 1/2||A w - b||^2 - <c, w> + sum lambda_i |x_i| s.t. w = x.
 *
 * The w-block needs (A^T A + rho I)^{-1}; it is factored once as an n x n
 * Cholesky when n <= m, otherwise through the m x m matrix rho I + A A^T.
 * The scaled multiplier moves by step_length * (w - x).
 */
inline SolveReport admm_solve(const LassoProblem& prob, const BaselineConfig& cfg)
{
    cfg.validate();
    const LinearOperator& op = prob.op();
    if (!op.supports_submatrix()) {
        throw capability_error("admm_solve: needs a factorization of the operator; black-box operators are not supported");
    }
    SolveReport rep;
    rep.solver = "admm";
    detail::BaselineLoop loop{prob, cfg, rep, {}};
    const double rho = cfg.rho;
    const Index m = prob.rows();
    const Index n = prob.cols();

    const bool small_n = n <= m;
    Matrix k = small_n ? op.gram() : op.outer_gram();
    k.diagonal().array() += rho;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) throw numerical_error("admm_solve: factorization failed");

    const Vector atb = op.apply_adjoint(prob.b()) + prob.c();
    rep.matvecs += 1;
    const Vector thresh = prob.lambda() / rho;
    Vector x = Vector::Zero(n);
    Vector u = Vector::Zero(n);
    Vector w(n);
    Vector tm(m);
    Vector tn(n);
    Vector residual(m);
    Vector grad(n);
    int it = 0;
    while (it < cfg.max_iterations) {
        ++it;
        const Vector q = atb + rho * (x - u);
        if (small_n) {
            w = llt.solve(q);
        } else {
            op.apply(q, tm);
            op.apply_adjoint(llt.solve(tm), tn);
            rep.matvecs += 2;
            w = (q - tn) / rho;
        }
        const Vector v = w + u;
        Vector x_next = v.array().sign() * (v.array().abs() - thresh.array()).max(0.0);
        u += cfg.step_length * (w - x_next);
        x = std::move(x_next);

        op.apply(x, residual);
        residual -= prob.b();
        op.apply_adjoint(residual, grad);
        grad -= prob.c();
        rep.matvecs += 2;
        if (loop.finished(it, x, residual, grad, (w - x).norm())) {
            loop.finish(x);
            return rep;
        }
    }
    rep.termination = Termination::max_iterations;
    loop.finish(x);
    return rep;
}

/**
 * Linearized ADMM on min 1/2||w - b||^2 - <c, x> + sum lambda_i |x_i| s.t. A x = w.
 *
 * The x-block is majorized with L = 1.01 lambda_max(A^T A) so it reduces to
 * one soft threshold; no factorization is needed and black-box operators work.
 */
inline SolveReport ladmm_solve(const LassoProblem& prob, const BaselineConfig& cfg)
{
    cfg.validate();
    SolveReport rep;
    rep.solver = "ladmm";
    detail::BaselineLoop loop{prob, cfg, rep, {}};
    const LinearOperator& op = prob.op();
    const double rho = cfg.rho;
    const double lip = 1.01 * detail::lipschitz_constant(op, cfg, rep);
    const Vector thresh = prob.lambda() / (rho * lip);
    const Vector c_step = prob.c() / (rho * lip);

    Vector x = Vector::Zero(prob.cols());
    Vector ax = Vector::Zero(prob.rows());
    Vector w = Vector::Zero(prob.rows());
    Vector u = Vector::Zero(prob.rows());
    Vector tn(prob.cols());
    Vector residual(prob.rows());
    Vector grad(prob.cols());
    int it = 0;
    while (it < cfg.max_iterations) {
        ++it;
        op.apply_adjoint(ax - w + u, tn);
        const Vector step = x - tn / lip + c_step;
        x = step.array().sign() * (step.array().abs() - thresh.array()).max(0.0);
        op.apply(x, ax);
        w = (prob.b() + rho * (ax + u)) / (1.0 + rho);
        u += cfg.step_length * (ax - w);

        residual = ax - prob.b();
        op.apply_adjoint(residual, grad);
        grad -= prob.c();
        rep.matvecs += 3;
        if (loop.finished(it, x, residual, grad, (ax - w).norm())) {
            loop.finish(x);
            return rep;
        }
    }
    rep.termination = Termination::max_iterations;
    loop.finish(x);
    return rep;
}

inline SolveReport baseline_solve(const LassoProblem& prob, const BaselineConfig& cfg)
{
    switch (cfg.kind) {
        case BaselineKind::apg: return apg_solve(prob, cfg);
        case BaselineKind::admm: return admm_solve(prob, cfg);
        case BaselineKind::ladmm: return ladmm_solve(prob, cfg);
    }
    throw std::invalid_argument("baseline_solve: unknown kind");
}

} // namespace ssnal
