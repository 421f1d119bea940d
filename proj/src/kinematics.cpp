#include "manifold/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace manifold {

ChainSpec::ChainSpec(std::vector<double> lengths,
                     std::vector<std::pair<double, double>> limits)
    : link_lengths(std::move(lengths)), joint_limits(std::move(limits)) {
    if (link_lengths.empty())
        throw std::invalid_argument("ChainSpec: at least one link required");
    for (double l : link_lengths)
        if (!(l > 0.0)) throw std::invalid_argument("ChainSpec: link lengths must be positive");
    if (joint_limits.empty())
        joint_limits.assign(link_lengths.size(), {-std::numbers::pi, std::numbers::pi});
    if (joint_limits.size() != link_lengths.size())
        throw std::invalid_argument("ChainSpec: one joint limit pair per link required");
    for (const auto& [lo, hi] : joint_limits)
        if (!(lo < hi)) throw std::invalid_argument("ChainSpec: joint limit lower must be < upper");
}

double ChainSpec::reach() const {
    return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0);
}

Eigen::Vector2d forward_kinematics(const ChainSpec& chain, const Eigen::VectorXd& q) {
    if (q.size() != chain.n_links())
        throw std::invalid_argument("forward_kinematics: joint vector size != n_links");
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    double phi = 0.0;
    for (int i = 0; i < chain.n_links(); ++i) {
        phi += q[i];
        p.x() += chain.link_lengths[i] * std::cos(phi);
        p.y() += chain.link_lengths[i] * std::sin(phi);
    }
    return p;
}

Eigen::Matrix2Xd fk_jacobian(const ChainSpec& chain, const Eigen::VectorXd& q) {
    const int n = chain.n_links();
    if (q.size() != n)
        throw std::invalid_argument("fk_jacobian: joint vector size != n_links");
    Eigen::Matrix2Xd jac(2, n);
    // Cumulative sums from the tip backwards: column j collects links j..n-1.
    double sx = 0.0, sy = 0.0;
    std::vector<double> phi(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += q[i];
        phi[i] = acc;
    }
    for (int j = n - 1; j >= 0; --j) {
        sx += chain.link_lengths[j] * std::sin(phi[j]);
        sy += chain.link_lengths[j] * std::cos(phi[j]);
        jac(0, j) = -sx;
        jac(1, j) = sy;
    }
    return jac;
}

double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return theta - two_pi * std::ceil((theta - std::numbers::pi) / two_pi);
}

}  // namespace manifold
