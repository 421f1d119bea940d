#include "manifold/solver.hpp"

#include <cmath>

namespace manifold {

Eigen::VectorXd step_first_order(const EnergyModel& energy, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                                 double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("step_first_order: alpha must be >= 0");
    const Eigen::VectorXd g = energy.gradient(a, p, a_prev);
    if (!g.allFinite()) throw std::invalid_argument("step_first_order: non-finite gradient");
    return a - alpha * g;
}

double line_search(const EnergyModel& energy, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                   const Eigen::VectorXd& direction, double alpha_max) {
    if (!direction.allFinite())
        throw std::invalid_argument("line_search: non-finite direction");
    const double e0 = energy.value(a, p, a_prev);
    double alpha = alpha_max;
    for (int i = 0; i <= 24; ++i) {
        const double e = energy.value(a + alpha * direction, p, a_prev);
        if (e < e0) return alpha;
        alpha *= 0.5;
    }
    return 0.0;
}

Eigen::VectorXd step_gauss_newton(const EnergyModel& energy, const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& p, const Eigen::VectorXd* a_prev,
                                  double alpha_max, double* alpha_used) {
    const Eigen::VectorXd g = energy.gradient(a, p, a_prev);
    if (alpha_used) *alpha_used = 0.0;
    if (g.lpNorm<Eigen::Infinity>() == 0.0) return a;

    const Eigen::MatrixXd h = energy.gn_hessian(a, p, a_prev);
    const int dim = static_cast<int>(a.size());
    const double tr = std::max(h.trace(), 0.0);
    double lambda = 1e-8 * (1.0 + tr / dim);
    const double lambda_cap = 1e-2 * std::max(tr, 1.0);
    while (true) {
        Eigen::MatrixXd damped = h;
        damped.diagonal().array() += lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
        if (ldlt.info() == Eigen::Success) {
            const Eigen::VectorXd d = -ldlt.solve(g);
            if (d.allFinite() && g.dot(d) < 0.0) {
                const double alpha = line_search(energy, a, p, a_prev, d, alpha_max);
                if (alpha_used) *alpha_used = alpha;
                return a + alpha * d;
            }
        }
        lambda *= 10.0;
        if (lambda > lambda_cap)
            throw SolverSingularError(
                "step_gauss_newton: linear solve failed after damping escalation");
    }
}

SolveReport solve(const EnergyModel& energy, const Eigen::VectorXd& init,
                  const Eigen::VectorXd& p, const SolveOptions& opts) {
    if (opts.max_iters < 1) throw std::invalid_argument("solve: max_iters must be >= 1");
    SolveReport report;
    Eigen::VectorXd a = init;
    bool grad_small = false;
    for (int it = 0; it < opts.max_iters; ++it) {
        if (energy.gradient(a, p, nullptr).lpNorm<Eigen::Infinity>() < opts.tol_grad) {
            grad_small = true;
            break;
        }
        const Eigen::VectorXd a_next =
            step_gauss_newton(energy, a, p, nullptr, opts.alpha_max, nullptr);
        ++report.iterations;
        ++report.gn_calls;
        const double step_norm = (a_next - a).norm();
        a = a_next;
        if (step_norm < opts.tol_step) break;
    }
    if (!grad_small)
        grad_small = energy.gradient(a, p, nullptr).lpNorm<Eigen::Infinity>() < opts.tol_grad;
    report.converged = grad_small;
    report.final_actions = a;
    report.final_energy = energy.value(a, p, nullptr);
    report.position_error = energy.position_error(a, p);
    return report;
}

}  // namespace manifold
