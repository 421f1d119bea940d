#include <doctest.h>

#include <numbers>
#include <random>

#include "manifold/energy.hpp"
#include "test_util.hpp"

using namespace manifold;
constexpr double kPi = std::numbers::pi;

namespace {

IkEnergy make_ik(double w_target = 1.0, double w_ref = 1e-3, double w_temp = 1e-3) {
    IkEnergyParams params;
    params.a_ref = Eigen::Vector2d::Zero();
    params.w_target = w_target;
    params.w_ref = w_ref;
    params.w_temp = w_temp;
    return IkEnergy(ChainSpec({0.15, 0.15}), params);
}

KtoEnergy make_kto(int n_links, int horizon) {
    std::vector<double> lengths(n_links, 0.3 / n_links);
    KtoEnergyParams params;
    params.horizon = horizon;
    return KtoEnergy(ChainSpec(lengths), params);
}

}  // namespace

TEST_CASE("ik energy vanishes at the exact minimum") {
    const IkEnergy energy = make_ik();
    const Eigen::Vector2d q(0.0, 0.0);
    const Eigen::Vector2d target(0.3, 0.0);
    CHECK(energy.value(q, target) == doctest::Approx(0.0));
    CHECK(energy.gradient(q, target).norm() == doctest::Approx(0.0));
}

TEST_CASE("ik energy is zero when FK hits the target and regularizers are off") {
    IkEnergyParams params;
    params.a_ref = Eigen::Vector2d(kPi / 2, -kPi / 2);
    params.w_target = 1.0;
    params.w_ref = 0.0;
    params.w_temp = 0.0;
    const IkEnergy energy(ChainSpec({0.15, 0.15}), params);
    const Eigen::Vector2d q(kPi / 2, -kPi / 2);
    CHECK(energy.value(q, Eigen::Vector2d(0.15, 0.15)) == doctest::Approx(0.0));
}

TEST_CASE("ik gradient matches the finite-difference oracle") {
    const IkEnergy energy = make_ik(1.0, 1e-3, 0.0);
    const Eigen::Vector2d q(0.1, 0.2);
    const Eigen::Vector2d target(0.2, 0.1);
    const Eigen::VectorXd fd = testutil::fd_gradient(energy, q, target, nullptr);
    CHECK(testutil::rel_error(energy.gradient(q, target), fd) < 1e-5);

    // Random sweep, with and without the temporal term.
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Eigen::VectorXd qq = testutil::random_vector(rng, 2, -kPi, kPi);
        const Eigen::VectorXd pp = testutil::random_vector(rng, 2, -0.25, 0.25);
        const Eigen::VectorXd prev = testutil::random_vector(rng, 2, -kPi, kPi);
        const IkEnergy with_temp = make_ik(1.0, 1e-3, 1e-3);
        CHECK(testutil::rel_error(with_temp.gradient(qq, pp, &prev),
                                  testutil::fd_gradient(with_temp, qq, pp, &prev)) < 1e-5);
    }
}

TEST_CASE("ik gn hessian is symmetric PSD and has the stated closed form") {
    const IkEnergy energy = make_ik(1.0, 1e-3, 1e-3);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const Eigen::VectorXd q = testutil::random_vector(rng, 2, -kPi, kPi);
        const Eigen::VectorXd p = testutil::random_vector(rng, 2, -0.25, 0.25);
        const Eigen::VectorXd prev = testutil::random_vector(rng, 2, -kPi, kPi);
        const Eigen::MatrixXd h = energy.gn_hessian(q, p, &prev);
        CHECK((h - h.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10);

        const Eigen::Matrix2Xd jac = fk_jacobian(energy.chain(), q);
        Eigen::MatrixXd want = 2.0 * (jac.transpose() * jac);
        want.diagonal().array() += 2.0 * (1e-3 + 1e-3);
        CHECK((h - want).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("bilateral barrier branches") {
    // Interior and junction.
    CHECK(bilateral_barrier(0.0, -1.0, 1.0, 0.1, 1.0).value == doctest::Approx(0.0));
    const BarrierEval at_junction = bilateral_barrier(0.9, -1.0, 1.0, 0.1, 1.0);
    CHECK(at_junction.value == doctest::Approx(0.0));
    CHECK(at_junction.d1 == doctest::Approx(0.0));
    CHECK(at_junction.d2 == doctest::Approx(0.0));

    // Pure quadratic branch with zero margin.
    const BarrierEval quad = bilateral_barrier(2.0, -1.0, 1.0, 0.0, 1.0);
    CHECK(quad.value == doctest::Approx(1.0));
    CHECK(quad.d1 == doctest::Approx(2.0));
    CHECK(quad.d2 == doctest::Approx(2.0));

    // Lower side mirrors with a negated slope.
    const BarrierEval low = bilateral_barrier(-2.0, -1.0, 1.0, 0.0, 3.0);
    CHECK(low.value == doctest::Approx(3.0));
    CHECK(low.d1 == doctest::Approx(-6.0));
    CHECK(low.d2 == doctest::Approx(6.0));

    CHECK_THROWS_AS(bilateral_barrier(0.0, -0.1, 0.1, 0.2, 1.0), std::invalid_argument);
}

TEST_CASE("bilateral barrier is C2 across the junction and the cubic-quadratic seam") {
    const double lower = -1.0, upper = 1.0, margin = 0.2, k = 2.5;
    auto probe = [&](double x) { return bilateral_barrier(x, lower, upper, margin, k); };
    const double h = 1e-6;
    for (double x : {upper - margin, upper - margin + margin /* seam */, upper + 0.37}) {
        const BarrierEval mid = probe(x);
        const BarrierEval up = probe(x + h);
        const BarrierEval down = probe(x - h);
        CHECK(std::abs((up.value - down.value) / (2.0 * h) - mid.d1) < 1e-5);
        CHECK(std::abs((up.d1 - down.d1) / (2.0 * h) - mid.d2) < 1e-5);
        // d2 itself continuous.
        CHECK(std::abs(up.d2 - down.d2) < 1e-4);
    }
    // Derivatives are finite everywhere, including far outside.
    const BarrierEval far = probe(42.0);
    CHECK(std::isfinite(far.value));
    CHECK(far.value > 0.0);
}

TEST_CASE("kto energy is zero for a stationary feasible trajectory") {
    const int n = 2, t = 8;
    KtoEnergyParams params;
    params.horizon = t;
    params.w_reg = 0.0;
    params.w_temp = 0.0;
    const KtoEnergy energy(ChainSpec({0.15, 0.15}), params);

    const Eigen::Vector2d a_ref(0.3, -0.2);
    Eigen::VectorXd p(n + 2);
    p.head(n) = a_ref;
    p.tail<2>() = forward_kinematics(energy.chain(), a_ref);
    Eigen::VectorXd traj(n * t);
    for (int j = 0; j < t; ++j) traj.segment(j * n, n) = a_ref;
    CHECK(energy.value(traj, p) == doctest::Approx(0.0));
    CHECK(energy.gradient(traj, p).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}

TEST_CASE("kto smoothness terms vanish only for the constant trajectory") {
    const int n = 2, t = 6;
    Eigen::MatrixXd s;
    Eigen::VectorXd c;
    const Eigen::Vector2d a_ref(0.1, -0.4);
    const Eigen::VectorXd ref = a_ref;
    backward_difference_stencil(t, n, &ref, s, c);

    Eigen::VectorXd constant(n * t);
    for (int j = 0; j < t; ++j) constant.segment(j * n, n) = a_ref;
    CHECK((s * constant + c).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));

    std::mt19937_64 rng(19);
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd other = constant;
        other[i % other.size()] += 0.01;
        CHECK((s * other + c).lpNorm<Eigen::Infinity>() > 0.0);
    }
}

TEST_CASE("single-frame velocity stencil matches the closed form") {
    // One frame perturbed from rest along the first channel: |1.5 d|^2.
    const int n = 2, t = 1;
    Eigen::MatrixXd s;
    Eigen::VectorXd c;
    const Eigen::Vector2d a_ref(0.2, 0.3);
    const Eigen::VectorXd ref = a_ref;
    backward_difference_stencil(t, n, &ref, s, c);
    const double delta = 0.137;
    Eigen::VectorXd q = a_ref;
    q[0] += delta;
    const double e_vel = (s * q + c).squaredNorm();
    CHECK(e_vel == doctest::Approx(2.25 * delta * delta));
}

TEST_CASE("kto rejects horizons below the stencil history") {
    KtoEnergyParams params;
    params.horizon = 2;
    CHECK_THROWS_AS(KtoEnergy(ChainSpec({0.15, 0.15}), params), std::invalid_argument);
}

TEST_CASE("kto gradient matches the finite-difference oracle on a random 3-link t=10") {
    const KtoEnergy energy = make_kto(3, 10);
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::VectorXd a = testutil::random_vector(rng, 30, -2.0, 2.0);
        Eigen::VectorXd p(5);
        p.head(3) = testutil::random_vector(rng, 3, -1.0, 1.0);
        p.tail<2>() = testutil::random_vector(rng, 2, -0.25, 0.25);
        const Eigen::VectorXd prev = testutil::random_vector(rng, 30, -2.0, 2.0);
        CHECK(testutil::rel_error(energy.gradient(a, p, &prev),
                                  testutil::fd_gradient(energy, a, p, &prev)) < 1e-5);
    }
}

TEST_CASE("kto gn hessian is symmetric and PSD, including active barriers") {
    const KtoEnergy energy = make_kto(2, 6);
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        // Wide range so velocity/acceleration barriers engage.
        const Eigen::VectorXd a = testutil::random_vector(rng, 12, -4.0, 4.0);
        Eigen::VectorXd p(4);
        p.head(2) = testutil::random_vector(rng, 2, -1.0, 1.0);
        p.tail<2>() = testutil::random_vector(rng, 2, -0.25, 0.25);
        const Eigen::MatrixXd h = energy.gn_hessian(a, p);
        CHECK((h - h.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
        CHECK(energy.value(a, p) >= 0.0);
    }
}

TEST_CASE("kto dimension errors") {
    const KtoEnergy energy = make_kto(2, 5);
    CHECK_THROWS_AS(energy.value(Eigen::VectorXd::Zero(9), Eigen::VectorXd::Zero(4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(energy.value(Eigen::VectorXd::Zero(10), Eigen::VectorXd::Zero(3)),
                    std::invalid_argument);
}
