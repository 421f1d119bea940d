#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "manifold/energy.hpp"

namespace manifold {

struct SolverSingularError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    int max_iters = 100;
    double tol_grad = 1e-9;   // infinity norm of the gradient
    double tol_step = 1e-12;  // euclidean norm of the accepted step
    double alpha_max = 1.0;
};

struct SolveReport {
    Eigen::VectorXd final_actions;
    double final_energy = 0.0;
    int iterations = 0;
    long gn_calls = 0;  // second-order update evaluations, for budget audits
    bool converged = false;
    double position_error = 0.0;
};

// Plain gradient step a - alpha * grad E.
Eigen::VectorXd step_first_order(const EnergyModel& energy, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                                 double alpha);

// Largest alpha in {alpha_max, alpha_max/2, ...} (at most 24 halvings) giving
// a strict energy decrease along direction; 0 when none does.
double line_search(const EnergyModel& energy, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                   const Eigen::VectorXd& direction, double alpha_max);

// One damped Gauss-Newton step with line search. The damping floor is
// 1e-8 * (1 + trace(H)/dim), escalated x10 on solve failure up to
// 1e-2 * trace; past that a SolverSingularError is thrown.
Eigen::VectorXd step_gauss_newton(const EnergyModel& energy, const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                                  double alpha_max, double* alpha_used = nullptr);

// Iterated Gauss-Newton to convergence. Stops when the gradient infinity norm
// drops below tol_grad (converged) or the step norm below tol_step.
SolveReport solve(const EnergyModel& energy, const Eigen::VectorXd& init,
                  const Eigen::VectorXd& p, const SolveOptions& opts = {});

}  // namespace manifold
