#pragma once

#include <Eigen/Dense>
#include <optional>

#include "manifold/kinematics.hpp"

namespace manifold {

// Differentiable objective over a flat action vector a given per-instance
// inputs p. Implementations must keep value/gradient/gn_hessian consistent:
// the gradient matches central finite differences of value, and the
// Gauss-Newton Hessian is symmetric positive semidefinite.
//
// a_prev, when present, enables the temporal coupling term between
// consecutive policy outputs; pass nullptr to drop it.
class EnergyModel {
public:
    virtual ~EnergyModel() = default;

    virtual int action_dim() const = 0;
    virtual int input_dim() const = 0;

    virtual double value(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                         const Eigen::VectorXd* a_prev = nullptr) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd* a_prev = nullptr) const = 0;
    virtual Eigen::MatrixXd gn_hessian(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                                       const Eigen::VectorXd* a_prev = nullptr) const = 0;

    // Task-level position error in meters, used for reporting and for the
    // conflict-rejection metric.
    virtual double position_error(const Eigen::VectorXd& a, const Eigen::VectorXd& p) const = 0;

    // Solver/labeling starting point for instance p.
    virtual Eigen::VectorXd default_init(const Eigen::VectorXd& p) const = 0;
};

struct IkEnergyParams {
    Eigen::VectorXd a_ref;   // regularizer configuration, size n_links
    double w_target = 1.0;
    double w_ref = 1e-3;
    double w_temp = 1e-3;
};

// Planar IK objective. p is the 2D end-effector target.
//   E = w_target |FK(q) - p|^2 + w_ref |q - a_ref|^2 + w_temp |q - q_prev|^2
class IkEnergy : public EnergyModel {
public:
    IkEnergy(ChainSpec chain, IkEnergyParams params);

    int action_dim() const override { return chain_.n_links(); }
    int input_dim() const override { return 2; }

    double value(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                 const Eigen::VectorXd* q_prev = nullptr) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                             const Eigen::VectorXd* q_prev = nullptr) const override;
    Eigen::MatrixXd gn_hessian(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                               const Eigen::VectorXd* q_prev = nullptr) const override;

    double position_error(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const override;
    Eigen::VectorXd default_init(const Eigen::VectorXd& p) const override;

    const ChainSpec& chain() const { return chain_; }
    const IkEnergyParams& params() const { return params_; }

private:
    void check_dims(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                    const Eigen::VectorXd* q_prev) const;

    ChainSpec chain_;
    IkEnergyParams params_;
};

struct BarrierEval {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// Soft two-sided limit penalty. Zero with zero derivatives on
// [lower+margin, upper-margin]; outside that interval a quadratic penalty of
// the excess, blended through a cubic segment across the margin band so the
// junction is C2. Finite on all of R. With margin = 0 the outside branch is
// exactly stiffness * excess^2.
BarrierEval bilateral_barrier(double x, double lower, double upper, double margin,
                              double stiffness);

struct KtoEnergyParams {
    int horizon = 30;          // t, number of configurations in the trajectory
    double dt = 0.1;           // seconds, converts difference stencils to rates
    double w_target = 10.0;
    double w_reg = 1e-4;
    double w_temp = 1e-3;
    double w_vel = 1e-2;
    double w_acc = 1e-2;
    double w_jerk = 1e-2;
    double w_barrier = 1.0;
    Eigen::VectorXd vel_limit;   // per joint, rad/s
    Eigen::VectorXd acc_limit;   // per joint, rad/s^2
    Eigen::VectorXd jerk_limit;  // per joint, rad/s^3
    double limit_margin = 0.05;  // shared barrier margin (native units of each limit)
    double barrier_stiffness = 1.0;
};

// Backward-difference stencil for a trajectory of t frames of n channels.
// Returns (S, c) such that the per-frame rate sequence is S*a + c; the first
// two frames借 history from a_ref (velocity) or from zero (higher orders).
void backward_difference_stencil(int t, int n, const Eigen::VectorXd* a_ref,
                                 Eigen::MatrixXd& S, Eigen::VectorXd& c);

// Kinematic trajectory objective over a flat vector of t*n joint angles.
// p = [a_ref (n); target (2)]: the start/regularizer configuration and the
// Cartesian goal for the final frame.
class KtoEnergy : public EnergyModel {
public:
    KtoEnergy(ChainSpec chain, KtoEnergyParams params);

    int action_dim() const override { return params_.horizon * chain_.n_links(); }
    int input_dim() const override { return chain_.n_links() + 2; }

    double value(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                 const Eigen::VectorXd* a_prev = nullptr) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                             const Eigen::VectorXd* a_prev = nullptr) const override;
    Eigen::MatrixXd gn_hessian(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                               const Eigen::VectorXd* a_prev = nullptr) const override;

    double position_error(const Eigen::VectorXd& a, const Eigen::VectorXd& p) const override;
    Eigen::VectorXd default_init(const Eigen::VectorXd& p) const override;

    const ChainSpec& chain() const { return chain_; }
    const KtoEnergyParams& params() const { return params_; }

private:
    struct Terms;  // single-pass accumulator shared by value/gradient/hessian
    void accumulate(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                    const Eigen::VectorXd* a_prev, Terms& out, bool want_grad,
                    bool want_hess) const;
    void check_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                    const Eigen::VectorXd* a_prev) const;

    ChainSpec chain_;
    KtoEnergyParams params_;
    // Cached stencil linear parts (constant offsets depend on a_ref = p.head(n),
    // so they are rebuilt per call).
    Eigen::MatrixXd svel_, sacc_, sjerk_;
};

}  // namespace manifold
