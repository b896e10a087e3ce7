#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ssnal/operators.hpp"

namespace ssnal {

struct SpectrumEstimate {
    double lambda_max = 0.0;   // largest eigenvalue of A A^T
    int iterations = 0;
    double achieved_tol = 0.0; // last relative change of the estimate
    bool converged = false;
    std::uint64_t matvecs = 0;
};

/// Power iteration on A^T A. Stops when the relative change of the estimate drops below rel_tol.
inline SpectrumEstimate estimate_lambda_max(const LinearOperator& op, double rel_tol = 1e-6, int max_iter = 1000,
                                            std::uint64_t seed = 20170613)
{
    SpectrumEstimate est;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(op.cols());
    for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v.normalize();
    Vector av(op.rows());
    Vector w(op.cols());
    double prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        op.apply(v, av);
        op.apply_adjoint(av, w);
        est.matvecs += 2;
        est.iterations = it;
        const double norm = w.norm();
        // Rayleigh quotient <v, A^T A v> = ||A v||^2 for unit v
        const double value = av.squaredNorm();
        if (norm == 0.0) {
            est.lambda_max = 0.0;
            est.converged = true;
            est.achieved_tol = 0.0;
            return est;
        }
        est.lambda_max = value;
        est.achieved_tol = std::abs(value - prev) / value;
        if (it > 1 && est.achieved_tol < rel_tol) {
            est.converged = true;
            return est;
        }
        prev = value;
        v = w / norm;
    }
    return est;
}

} // namespace ssnal
