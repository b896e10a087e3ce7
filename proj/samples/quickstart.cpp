// Solve a small synthetic Lasso problem with SSNAL and APG and print both reports.

#include <iostream>

#include "ssnal/ssnal.hpp"

int main()
{
    using namespace ssnal;

    SynthSpec spec;
    spec.m = 200;
    spec.n = 2000;
    spec.k = 20;
    spec.seed = 7;
    const SyntheticInstance inst = synth_instance(spec);

    const LinearOperator A = make_operator(inst.data);
    const double lambda = lambda_from_ratio(A, inst.data.targets, 1e-3);
    const LassoProblem prob(A, inst.data.targets, lambda);

    OuterConfig cfg;
    cfg.tol = 1e-6;
    const SolveReport ssn = ssnal_solve(prob, cfg);

    BaselineConfig apg;
    apg.kind = BaselineKind::apg;
    const SolveReport fista = baseline_solve(prob, apg);

    for (const SolveReport* r : {&ssn, &fista}) {
        std::cout << r->solver << ": eta=" << r->eta << " nnz=" << r->nnz << " objective=" << r->objective
                  << " iterations=" << r->outer_iterations << " matvecs=" << r->matvecs
                  << " time=" << r->seconds() << "s (" << to_string(r->termination) << ")\n";
    }
    std::cout << "max |x_ssnal - x_apg| = " << (ssn.x - fista.x).lpNorm<Eigen::Infinity>() << '\n';
    return ssn.converged() ? 0 : 1;
}
