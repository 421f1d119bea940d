#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace manifold {

// Planar serial chain. Angles use the relative convention: joint i is
// measured from link i-1, link 1 from the +x axis. Base fixed at the origin.
struct ChainSpec {
    std::vector<double> link_lengths;
    std::vector<std::pair<double, double>> joint_limits;  // (lower, upper) per joint, radians

    ChainSpec() = default;
    // Limits default to (-pi, pi) per joint when omitted.
    explicit ChainSpec(std::vector<double> lengths,
                       std::vector<std::pair<double, double>> limits = {});

    int n_links() const { return static_cast<int>(link_lengths.size()); }
    double reach() const;
};

// End-effector position for joint vector q (size n_links).
Eigen::Vector2d forward_kinematics(const ChainSpec& chain, const Eigen::VectorXd& q);

// 2 x n Jacobian of forward_kinematics at q.
// Column j: (-sum_{i>=j} L_i sin phi_i, sum_{i>=j} L_i cos phi_i), phi_i = q_0+...+q_i.
Eigen::Matrix2Xd fk_jacobian(const ChainSpec& chain, const Eigen::VectorXd& q);

// Wraps to (-pi, pi]; wrap_angle(-pi) == pi.
double wrap_angle(double theta);

}  // namespace manifold
