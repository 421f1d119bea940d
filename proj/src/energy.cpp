#include "manifold/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace manifold {

// ---------------------------------------------------------------------------
// Planar IK energy

IkEnergy::IkEnergy(ChainSpec chain, IkEnergyParams params)
    : chain_(std::move(chain)), params_(std::move(params)) {
    if (params_.a_ref.size() == 0)
        params_.a_ref = Eigen::VectorXd::Zero(chain_.n_links());
    if (params_.a_ref.size() != chain_.n_links())
        throw std::invalid_argument("IkEnergy: a_ref size != n_links");
    if (!(params_.w_target > 0.0))
        throw std::invalid_argument("IkEnergy: w_target must be positive");
    if (params_.w_ref < 0.0 || params_.w_temp < 0.0)
        throw std::invalid_argument("IkEnergy: weights must be non-negative");
}

void IkEnergy::check_dims(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                          const Eigen::VectorXd* q_prev) const {
    if (q.size() != chain_.n_links())
        throw std::invalid_argument("IkEnergy: action size != n_links");
    if (p.size() != 2)
        throw std::invalid_argument("IkEnergy: input must be a 2D target");
    if (q_prev && q_prev->size() != q.size())
        throw std::invalid_argument("IkEnergy: previous action size mismatch");
}

double IkEnergy::value(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                       const Eigen::VectorXd* q_prev) const {
    check_dims(q, p, q_prev);
    const Eigen::Vector2d r = forward_kinematics(chain_, q) - Eigen::Vector2d(p);
    double e = params_.w_target * r.squaredNorm() +
               params_.w_ref * (q - params_.a_ref).squaredNorm();
    if (q_prev) e += params_.w_temp * (q - *q_prev).squaredNorm();
    return e;
}

Eigen::VectorXd IkEnergy::gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd* q_prev) const {
    check_dims(q, p, q_prev);
    const Eigen::Vector2d r = forward_kinematics(chain_, q) - Eigen::Vector2d(p);
    const Eigen::Matrix2Xd jac = fk_jacobian(chain_, q);
    Eigen::VectorXd g = 2.0 * params_.w_target * (jac.transpose() * r) +
                        2.0 * params_.w_ref * (q - params_.a_ref);
    if (q_prev) g += 2.0 * params_.w_temp * (q - *q_prev);
    return g;
}

Eigen::MatrixXd IkEnergy::gn_hessian(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd* q_prev) const {
    check_dims(q, p, q_prev);
    const Eigen::Matrix2Xd jac = fk_jacobian(chain_, q);
    Eigen::MatrixXd h = 2.0 * params_.w_target * (jac.transpose() * jac);
    double diag = 2.0 * params_.w_ref;
    if (q_prev) diag += 2.0 * params_.w_temp;
    h.diagonal().array() += diag;
    return h;
}

double IkEnergy::position_error(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    return (forward_kinematics(chain_, q) - Eigen::Vector2d(p)).norm();
}

Eigen::VectorXd IkEnergy::default_init(const Eigen::VectorXd&) const {
    return params_.a_ref;
}

// ---------------------------------------------------------------------------
// Bilateral barrier

namespace {

// One-sided penalty of the excess e >= 0 past a junction, with a cubic
// segment of width m before switching to the quadratic branch. Matched value,
// slope and curvature at e = m; identically k*e^2 when m = 0.
BarrierEval one_sided(double e, double m, double k) {
    BarrierEval out;
    if (e <= 0.0) return out;
    if (m <= 0.0) {
        out.value = k * e * e;
        out.d1 = 2.0 * k * e;
        out.d2 = 2.0 * k;
    } else if (e <= m) {
        out.value = k * e * e * e / (3.0 * m);
        out.d1 = k * e * e / m;
        out.d2 = 2.0 * k * e / m;
    } else {
        const double s = e - 0.5 * m;
        out.value = k * s * s + k * m * m / 12.0;
        out.d1 = 2.0 * k * s;
        out.d2 = 2.0 * k;
    }
    return out;
}

}  // namespace

BarrierEval bilateral_barrier(double x, double lower, double upper, double margin,
                              double stiffness) {
    if (!(lower + margin < upper - margin))
        throw std::invalid_argument("bilateral_barrier: degenerate interval");
    BarrierEval up = one_sided(x - (upper - margin), margin, stiffness);
    if (up.value > 0.0 || up.d2 > 0.0) return up;
    BarrierEval lo = one_sided((lower + margin) - x, margin, stiffness);
    lo.d1 = -lo.d1;  // d/dx of the mirrored excess
    return lo;
}

// ---------------------------------------------------------------------------
// Backward-difference stencil

void backward_difference_stencil(int t, int n, const Eigen::VectorXd* a_ref,
                                 Eigen::MatrixXd& S, Eigen::VectorXd& c) {
    if (t < 1 || n < 1)
        throw std::invalid_argument("backward_difference_stencil: t, n must be >= 1");
    if (a_ref && a_ref->size() != n)
        throw std::invalid_argument("backward_difference_stencil: a_ref size != n");
    const int dim = t * n;
    S = Eigen::MatrixXd::Zero(dim, dim);
    c = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < t; ++j) {
        for (int i = 0; i < n; ++i) {
            const int row = j * n + i;
            S(row, row) = 1.5;
            if (j >= 1) S(row, (j - 1) * n + i) = -2.0;
            if (j >= 2) S(row, (j - 2) * n + i) = 0.5;
        }
    }
    if (a_ref) {
        // Frames -1 and -2 pinned to a_ref.
        c.head(n) = -1.5 * (*a_ref);
        if (t >= 2) c.segment(n, n) = 0.5 * (*a_ref);
    }
}

// ---------------------------------------------------------------------------
// Kinematic trajectory energy

struct KtoEnergy::Terms {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

KtoEnergy::KtoEnergy(ChainSpec chain, KtoEnergyParams params)
    : chain_(std::move(chain)), params_(std::move(params)) {
    const int n = chain_.n_links();
    if (params_.horizon < 3)
        throw std::invalid_argument("KtoEnergy: horizon must be >= 3");
    if (!(params_.dt > 0.0)) throw std::invalid_argument("KtoEnergy: dt must be positive");
    for (double w : {params_.w_target, params_.w_reg, params_.w_temp, params_.w_vel,
                     params_.w_acc, params_.w_jerk, params_.w_barrier})
        if (w < 0.0) throw std::invalid_argument("KtoEnergy: weights must be non-negative");
    auto fix_limit = [n](Eigen::VectorXd& v, double dflt) {
        if (v.size() == 0) v = Eigen::VectorXd::Constant(n, dflt);
        if (v.size() == 1) v = Eigen::VectorXd::Constant(n, v[0]);
        if (v.size() != n)
            throw std::invalid_argument("KtoEnergy: limit vector size != n_links");
        if ((v.array() <= 0.0).any())
            throw std::invalid_argument("KtoEnergy: limits must be positive");
    };
    fix_limit(params_.vel_limit, 2.5);
    fix_limit(params_.acc_limit, 10.0);
    fix_limit(params_.jerk_limit, 50.0);

    Eigen::VectorXd unused;
    backward_difference_stencil(params_.horizon, n, nullptr, svel_, unused);
    sacc_ = svel_ * svel_;
    sjerk_ = sacc_ * svel_;
}

void KtoEnergy::check_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                           const Eigen::VectorXd* a_prev) const {
    if (a.size() != action_dim())
        throw std::invalid_argument("KtoEnergy: action size != horizon * n_links");
    if (p.size() != input_dim())
        throw std::invalid_argument("KtoEnergy: input must be [a_ref; target]");
    if (a_prev && a_prev->size() != a.size())
        throw std::invalid_argument("KtoEnergy: previous action size mismatch");
}

void KtoEnergy::accumulate(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                           const Eigen::VectorXd* a_prev, Terms& out, bool want_grad,
                           bool want_hess) const {
    check_dims(a, p, a_prev);
    const int n = chain_.n_links();
    const int t = params_.horizon;
    const int dim = t * n;
    const Eigen::VectorXd a_ref = p.head(n);
    const Eigen::Vector2d target = p.tail<2>();

    out.value = 0.0;
    if (want_grad) out.grad = Eigen::VectorXd::Zero(dim);
    if (want_hess) out.hess = Eigen::MatrixXd::Zero(dim, dim);

    // Final-frame target term.
    {
        const Eigen::VectorXd q_last = a.tail(n);
        const Eigen::Vector2d r = forward_kinematics(chain_, q_last) - target;
        out.value += params_.w_target * r.squaredNorm();
        if (want_grad || want_hess) {
            const Eigen::Matrix2Xd jac = fk_jacobian(chain_, q_last);
            if (want_grad)
                out.grad.tail(n) += 2.0 * params_.w_target * (jac.transpose() * r);
            if (want_hess)
                out.hess.bottomRightCorner(n, n) +=
                    2.0 * params_.w_target * (jac.transpose() * jac);
        }
    }

    // Smoothness: squared rate stencils (velocity history pinned to a_ref,
    // higher orders to zero).
    Eigen::VectorXd c_vel = Eigen::VectorXd::Zero(dim);
    c_vel.head(n) = -1.5 * a_ref;
    c_vel.segment(n, n) = 0.5 * a_ref;
    const Eigen::VectorXd vel = svel_ * a + c_vel;
    const Eigen::VectorXd c_acc = svel_ * c_vel;
    const Eigen::VectorXd acc = sacc_ * a + c_acc;
    const Eigen::VectorXd c_jerk = svel_ * c_acc;
    const Eigen::VectorXd jerk = sjerk_ * a + c_jerk;

    out.value += params_.w_vel * vel.squaredNorm() + params_.w_acc * acc.squaredNorm() +
                 params_.w_jerk * jerk.squaredNorm();
    if (want_grad) {
        out.grad += 2.0 * params_.w_vel * (svel_.transpose() * vel);
        out.grad += 2.0 * params_.w_acc * (sacc_.transpose() * acc);
        out.grad += 2.0 * params_.w_jerk * (sjerk_.transpose() * jerk);
    }
    if (want_hess) {
        out.hess += 2.0 * params_.w_vel * (svel_.transpose() * svel_);
        out.hess += 2.0 * params_.w_acc * (sacc_.transpose() * sacc_);
        out.hess += 2.0 * params_.w_jerk * (sjerk_.transpose() * sjerk_);
    }

    // Limit barriers: positions directly, rates through the stencils in
    // physical units (stencil / dt^order).
    if (params_.w_barrier > 0.0) {
        const double k = params_.barrier_stiffness;
        const double m = params_.limit_margin;
        // Position limits: diagonal contribution.
        for (int j = 0; j < t; ++j) {
            for (int i = 0; i < n; ++i) {
                const auto& [lo, hi] = chain_.joint_limits[i];
                const BarrierEval b = bilateral_barrier(a[j * n + i], lo, hi, m, k);
                out.value += params_.w_barrier * b.value;
                if (want_grad) out.grad[j * n + i] += params_.w_barrier * b.d1;
                if (want_hess) out.hess(j * n + i, j * n + i) += params_.w_barrier * b.d2;
            }
        }
        auto rate_barrier = [&](const Eigen::MatrixXd& s, const Eigen::VectorXd& rate,
                                double inv_dt_pow, const Eigen::VectorXd& limit) {
            Eigen::VectorXd d1 = Eigen::VectorXd::Zero(dim);
            Eigen::VectorXd d2 = Eigen::VectorXd::Zero(dim);
            bool any = false;
            for (int j = 0; j < t; ++j) {
                for (int i = 0; i < n; ++i) {
                    const int row = j * n + i;
                    const double y = rate[row] * inv_dt_pow;
                    const BarrierEval b = bilateral_barrier(y, -limit[i], limit[i], m, k);
                    if (b.value == 0.0 && b.d2 == 0.0) continue;
                    any = true;
                    out.value += params_.w_barrier * b.value;
                    d1[row] = b.d1;
                    d2[row] = b.d2;
                }
            }
            if (!any) return;
            if (want_grad)
                out.grad += params_.w_barrier * inv_dt_pow * (s.transpose() * d1);
            if (want_hess)
                out.hess += params_.w_barrier * inv_dt_pow * inv_dt_pow *
                            (s.transpose() * d2.asDiagonal() * s);
        };
        const double idt = 1.0 / params_.dt;
        rate_barrier(svel_, vel, idt, params_.vel_limit);
        rate_barrier(sacc_, acc, idt * idt, params_.acc_limit);
        rate_barrier(sjerk_, jerk, idt * idt * idt, params_.jerk_limit);
    }

    // Per-frame regularizer toward a_ref.
    if (params_.w_reg > 0.0) {
        Eigen::VectorXd tiled(dim);
        for (int j = 0; j < t; ++j) tiled.segment(j * n, n) = a_ref;
        const Eigen::VectorXd d = a - tiled;
        out.value += params_.w_reg * d.squaredNorm();
        if (want_grad) out.grad += 2.0 * params_.w_reg * d;
        if (want_hess) out.hess.diagonal().array() += 2.0 * params_.w_reg;
    }

    // Temporal coupling with the previous policy output.
    if (a_prev) {
        const Eigen::VectorXd d = a - *a_prev;
        out.value += params_.w_temp * d.squaredNorm();
        if (want_grad) out.grad += 2.0 * params_.w_temp * d;
        if (want_hess) out.hess.diagonal().array() += 2.0 * params_.w_temp;
    }
}

double KtoEnergy::value(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                        const Eigen::VectorXd* a_prev) const {
    Terms t;
    accumulate(a, p, a_prev, t, false, false);
    return t.value;
}

Eigen::VectorXd KtoEnergy::gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                                    const Eigen::VectorXd* a_prev) const {
    Terms t;
    accumulate(a, p, a_prev, t, true, false);
    return t.grad;
}

Eigen::MatrixXd KtoEnergy::gn_hessian(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                                      const Eigen::VectorXd* a_prev) const {
    Terms t;
    accumulate(a, p, a_prev, t, false, true);
    return t.hess;
}

double KtoEnergy::position_error(const Eigen::VectorXd& a, const Eigen::VectorXd& p) const {
    check_dims(a, p, nullptr);
    const int n = chain_.n_links();
    return (forward_kinematics(chain_, a.tail(n)) - Eigen::Vector2d(p.tail<2>())).norm();
}

Eigen::VectorXd KtoEnergy::default_init(const Eigen::VectorXd& p) const {
    if (p.size() != input_dim())
        throw std::invalid_argument("KtoEnergy: input must be [a_ref; target]");
    const int n = chain_.n_links();
    Eigen::VectorXd a(action_dim());
    for (int j = 0; j < params_.horizon; ++j) a.segment(j * n, n) = p.head(n);
    return a;
}

}  // namespace manifold
