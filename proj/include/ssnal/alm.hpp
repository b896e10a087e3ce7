#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ssnal/newton.hpp"
#include "ssnal/prox.hpp"
#include "ssnal/report.hpp"

namespace ssnal {

/**
 * Outer-loop parameters.
 *
 * Tolerance sequences are geometric: eps_k = eps0 * eps_rate^k,
 * delta_k = delta0 * delta_rate^k and delta'_k = delta_prime_rate^k, so the
 * first two are summable and the third tends to zero.
 */
struct OuterConfig {
    std::optional<double> sigma0;  // default: 1 / max(1, max_i lambda_i)
    double sigma_growth = 3.0;
    double sigma_max = 1e8;
    double eps0 = 1.0;
    double eps_rate = 0.5;
    double delta0 = 1.0;
    double delta_rate = 0.5;
    double delta_prime_rate = 0.5;
    double tol = 1e-6;
    int max_iterations = 1000;
    double time_limit_seconds = std::numeric_limits<double>::infinity();
    InnerConfig inner;

    void validate() const
    {
        auto bad = [](const char* what) { throw std::invalid_argument(std::string("OuterConfig: ") + what); };
        if (sigma0 && !(*sigma0 > 0.0)) bad("sigma0 must be positive");
        if (!(sigma_growth >= 1.0)) bad("sigma_growth must be >= 1");
        if (!(sigma_max > 0.0)) bad("sigma_max must be positive");
        if (!(eps0 > 0.0) || !(eps_rate > 0.0 && eps_rate < 1.0)) bad("eps sequence must be positive and summable");
        if (!(delta0 > 0.0) || !(delta_rate > 0.0 && delta_rate < 1.0)) bad("delta sequence must be positive and summable");
        if (!(delta_prime_rate > 0.0 && delta_prime_rate < 1.0)) bad("delta' sequence must tend to zero");
        if (!(tol > 0.0)) bad("tol must be positive");
        if (max_iterations < 1) bad("max_iterations must be positive");
        inner.validate();
    }

    InnerStop inner_stop(int k) const
    {
        InnerStop s;
        s.eps_k = eps0 * std::pow(eps_rate, k);
        s.delta_k = delta0 * std::pow(delta_rate, k);
        s.delta_prime_k = std::pow(delta_prime_rate, k);
        s.alpha_h = SquaredLoss::alpha();
        return s;
    }
};

struct OuterTraceRecord {
    int iteration = 0;
    double eta = 0.0;
    double feasibility = 0.0;
    double sigma = 0.0;
    int inner_steps = 0;
};

using OuterTrace = std::function<void(const OuterTraceRecord&)>;

/// Iterates (x, y, z), penalty sigma and per-run counters.
struct SolverState {
    Vector x;
    Vector y;
    Vector z;
    double sigma = 1.0;
    int k = 0;

    double eta = std::numeric_limits<double>::infinity();
    double feasibility = 0.0;        // ||A^T y + z - c|| after the last step
    double multiplier_gap = 0.0;     // max |x_{k+1} - u| between the update formula and the prox point
    std::vector<double> eta_history;
    std::vector<Vector> x_history;   // filled only when keep_history is set
    bool keep_history = false;

    int inner_steps = 0;
    int cg_iterations = 0;
    std::uint64_t matvecs = 0;
    double newton_work = 0.0;        // in units of one full product with A
    std::map<std::string, int> strategy_usage;
    InnerResult last_inner;

    /// x0 = 0, y0 = 0, z0 = 0: a sparse feasible start.
    static SolverState initial(const LassoProblem& prob, const OuterConfig& cfg)
    {
        SolverState s;
        s.x = Vector::Zero(prob.cols());
        s.y = Vector::Zero(prob.rows());
        s.z = Vector::Zero(prob.cols());
        s.sigma = cfg.sigma0 ? *cfg.sigma0 : 1.0 / std::max(1.0, prob.regularizer().max_weight());
        return s;
    }
};

/**
 * One inexact augmented Lagrangian step on the dual:
 * (y, z) from the semismooth Newton solve of the subproblem at (x, sigma),
 * then x <- x - sigma (A^T y + z - c) and sigma <- min(sigma_max, growth * sigma).
 */
inline SolverState outer_step(SolverState state, const LassoProblem& prob, const OuterConfig& cfg,
                              const InnerTrace& inner_trace = {})
{
    const double sigma = state.sigma;
    InnerResult inner = ssn_solve(prob, state.x, sigma, state.y, cfg.inner_stop(state.k), cfg.inner, inner_trace);

    Vector x_next = state.x - sigma * (inner.aty + inner.z - prob.c());
    state.multiplier_gap = (x_next - inner.u).lpNorm<Eigen::Infinity>();
    state.feasibility = (inner.aty + inner.z - prob.c()).norm();

    // A x_next = A u is already known from the last gradient evaluation.
    const Vector residual = inner.au - prob.b();
    const Vector grad = prob.op().apply_adjoint(residual) - prob.c();
    state.matvecs += inner.matvecs + 1;
    state.eta = kkt_residual(prob, inner.u, residual, grad);
    state.eta_history.push_back(state.eta);

    state.x = inner.u;
    state.y = inner.y;
    state.z = inner.z;
    if (state.keep_history) state.x_history.push_back(state.x);
    state.inner_steps += inner.steps;
    state.cg_iterations += inner.cg_iterations;
    state.newton_work += inner.newton_flops / prob.op().work_units();
    for (Strategy s : inner.strategies) state.strategy_usage[to_string(s)] += 1;
    state.last_inner = std::move(inner);
    state.sigma = std::min(cfg.sigma_max, cfg.sigma_growth * sigma);
    ++state.k;
    return state;
}

struct SsnalCallbacks {
    OuterTrace outer;
    InnerTrace inner;
    bool keep_history = false;
};

/**
 * Semismooth Newton augmented Lagrangian solve of a Lasso problem.
 *
 * Runs outer steps until eta < tol, the iteration cap, or the time limit.
 * Solver failures are caught and reported with termination = failure.
 */
inline SolveReport ssnal_solve(const LassoProblem& prob, const OuterConfig& cfg, const SsnalCallbacks& cb = {},
                               SolverState* final_state = nullptr)
{
    cfg.validate();
    Stopwatch clock;
    SolveReport rep;
    rep.solver = "ssnal";
    SolverState state = SolverState::initial(prob, cfg);
    state.keep_history = cb.keep_history;

    rep.termination = Termination::max_iterations;
    try {
        while (state.k < cfg.max_iterations) {
            state = outer_step(std::move(state), prob, cfg, cb.inner);
            if (cb.outer) {
                OuterTraceRecord rec;
                rec.iteration = state.k;
                rec.eta = state.eta;
                rec.feasibility = state.feasibility;
                rec.sigma = state.sigma;
                rec.inner_steps = state.last_inner.steps;
                cb.outer(rec);
            }
            if (state.eta < cfg.tol) {
                rep.termination = Termination::converged;
                break;
            }
            if (clock.elapsed_seconds() > cfg.time_limit_seconds) {
                rep.termination = Termination::time_limit;
                break;
            }
        }
    } catch (const std::exception& e) {
        rep.termination = Termination::failure;
        rep.message = e.what();
    }

    rep.x = state.x;
    rep.y = state.y;
    rep.z = state.z;
    rep.eta = state.eta;
    rep.objective = std::numeric_limits<double>::quiet_NaN();
    try {
        if (state.eta_history.empty()) rep.eta = kkt_residual(prob, state.x);
        rep.objective = prob.objective(state.x);
    } catch (const std::exception&) {
        if (state.eta_history.empty()) rep.eta = std::numeric_limits<double>::quiet_NaN();
    }
    rep.nnz = estimate_nnz(state.x);
    rep.feasibility = state.feasibility;
    rep.outer_iterations = state.k;
    rep.inner_iterations = state.inner_steps;
    rep.cg_iterations = state.cg_iterations;
    rep.matvecs = state.matvecs;
    rep.matvec_equivalents = static_cast<double>(state.matvecs) + state.newton_work;
    rep.strategy_usage = state.strategy_usage;
    rep.eta_history = state.eta_history;
    rep.wall_time_ns = clock.elapsed_ns();
    if (final_state) *final_state = std::move(state);
    return rep;
}

} // namespace ssnal
