#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssnal/operators.hpp"

namespace ssnal {

enum class Termination { converged, max_iterations, time_limit, failure };

inline const char* to_string(Termination t)
{
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::max_iterations: return "max_iterations";
        case Termination::time_limit: return "time_limit";
        case Termination::failure: return "failure";
    }
    return "?";
}

/// Outcome of one solver run; shared by SSNAL and the first-order baselines.
struct SolveReport {
    std::string solver;
    Vector x;
    Vector y; // dual iterate (SSNAL only)
    Vector z;
    double eta = 0.0;
    Index nnz = 0;
    double objective = 0.0;
    double feasibility = 0.0; // ||A^T y + z - c|| for SSNAL, primal residual for ADMM-type methods
    int outer_iterations = 0;
    int inner_iterations = 0; // semismooth Newton steps
    int cg_iterations = 0;
    std::uint64_t matvecs = 0; // full applications of A or A^T
    double matvec_equivalents = 0.0; // matvecs plus Newton-system work in units of one full product
    std::map<std::string, int> strategy_usage;
    std::int64_t wall_time_ns = 0;
    Termination termination = Termination::max_iterations;
    std::string message;
    std::vector<double> eta_history;

    bool converged() const { return termination == Termination::converged; }
    double seconds() const { return static_cast<double>(wall_time_ns) * 1e-9; }
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t elapsed_ns() const
    {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_)
            .count();
    }
    double elapsed_seconds() const { return static_cast<double>(elapsed_ns()) * 1e-9; }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace ssnal
