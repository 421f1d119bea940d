#include <doctest.h>

#include <atomic>
#include <chrono>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "manifold/solver.hpp"
#include "manifold/training.hpp"
#include "test_util.hpp"

using namespace manifold;
constexpr double kPi = std::numbers::pi;

namespace {

IkEnergy pure_ik(double w_ref = 0.0) {
    IkEnergyParams params;
    params.a_ref = Eigen::Vector2d::Zero();
    params.w_target = 1.0;
    params.w_ref = w_ref;
    params.w_temp = 0.0;
    return IkEnergy(ChainSpec({0.15, 0.15}), params);
}

}  // namespace

TEST_CASE("first-order step follows the negated gradient") {
    const IkEnergy energy = pure_ik(1e-3);
    const Eigen::Vector2d target(0.3, 0.0);

    // At the exact minimum the step is a no-op.
    const Eigen::Vector2d at_min(0.0, 0.0);
    CHECK((step_first_order(energy, at_min, target, nullptr, 0.5) - at_min).norm() <
          1e-15);

    // Zero step size degenerates to the identity.
    const Eigen::Vector2d q(0.3, -0.8);
    CHECK((step_first_order(energy, q, target, nullptr, 0.0) - q).norm() == 0.0);

    // A line-searched step decreases the energy.
    const Eigen::Vector2d start(0.1, 0.1);
    const Eigen::VectorXd g = energy.gradient(start, target);
    const double alpha = line_search(energy, start, target, nullptr, -g, 1.0);
    const Eigen::VectorXd stepped = step_first_order(energy, start, target, nullptr, alpha);
    CHECK(energy.value(stepped, target) < energy.value(start, target));
}

TEST_CASE("line search picks the largest decreasing halving") {
    // Convex quadratic: the full step already decreases.
    const testutil::QuadraticEnergy quad(Eigen::Vector2d(1.0, -2.0));
    const Eigen::Vector2d a(4.0, 4.0);
    const Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd descent = -quad.gradient(a, p, nullptr);
    CHECK(line_search(quad, a, p, nullptr, descent, 1.0) == doctest::Approx(1.0));

    // Ascent direction never decreases: zero signals failure.
    CHECK(line_search(quad, a, p, nullptr, -descent, 1.0) == 0.0);
}

TEST_CASE("gauss-newton step is exact on a quadratic and idle at a minimum") {
    const testutil::QuadraticEnergy quad(Eigen::Vector3d(0.3, -0.4, 2.0));
    const Eigen::VectorXd p = Eigen::VectorXd::Zero(1);

    double alpha = 0.0;
    const Eigen::VectorXd from_far = step_gauss_newton(
        quad, Eigen::Vector3d(5.0, 5.0, 5.0), p, nullptr, 1.0, &alpha);
    CHECK(alpha == doctest::Approx(1.0));
    CHECK((from_far - Eigen::Vector3d(0.3, -0.4, 2.0)).norm() < 1e-6);

    const Eigen::VectorXd at_min = step_gauss_newton(
        quad, Eigen::Vector3d(0.3, -0.4, 2.0), p, nullptr, 1.0, &alpha);
    CHECK((at_min - Eigen::Vector3d(0.3, -0.4, 2.0)).norm() == 0.0);
}

TEST_CASE("damped direction is a descent direction on random states") {
    const IkEnergy energy = pure_ik(1e-3);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 500; ++i) {
        const Eigen::VectorXd q = testutil::random_vector(rng, 2, -kPi, kPi);
        const Eigen::VectorXd target = testutil::random_vector(rng, 2, -0.25, 0.25);
        const Eigen::VectorXd g = energy.gradient(q, target);
        if (g.lpNorm<Eigen::Infinity>() == 0.0) continue;
        const Eigen::MatrixXd h = energy.gn_hessian(q, target);
        Eigen::MatrixXd damped = h;
        damped.diagonal().array() += 1e-8 * (1.0 + h.trace() / 2.0);
        const Eigen::VectorXd d = -damped.ldlt().solve(g);
        CHECK(g.dot(d) < 0.0);
    }
}

TEST_CASE("solver converges against the dense grid-search oracle") {
    const IkEnergy energy = pure_ik(0.0);
    const Eigen::Vector2d target(0.15, 0.15);

    // Independent oracle: brute-force the energy over angle space.
    double grid_min = std::numeric_limits<double>::infinity();
    const int res = 600;
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            const Eigen::Vector2d q(-kPi + 2.0 * kPi * i / res, -kPi + 2.0 * kPi * j / res);
            grid_min = std::min(grid_min, energy.value(q, target));
        }
    }
    CHECK(grid_min < 1e-4);  // target is reachable: the true optimum is ~0

    SolveOptions opts;
    opts.max_iters = 50;
    const SolveReport report = solve(energy, Eigen::Vector2d(0.1, 0.1), target, opts);
    CHECK(report.converged);
    CHECK(report.position_error < 1e-6);
    CHECK(report.final_energy <= grid_min + 1e-9);
    CHECK(report.gn_calls >= report.iterations);
}

TEST_CASE("solve returns immediately at an exact minimum") {
    const testutil::QuadraticEnergy quad(Eigen::Vector2d(1.0, 1.0));
    const SolveReport report =
        solve(quad, Eigen::Vector2d(1.0, 1.0), Eigen::VectorXd::Zero(1));
    CHECK(report.converged);
    CHECK(report.iterations == 0);
    CHECK(report.gn_calls == 0);
}

TEST_CASE("energy is monotone along solve iterates") {
    const IkEnergy energy = pure_ik(1e-3);
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd a = testutil::random_vector(rng, 2, -kPi, kPi);
        const Eigen::VectorXd target = testutil::random_vector(rng, 2, -0.25, 0.25);
        double prev = energy.value(a, target);
        for (int it = 0; it < 20; ++it) {
            a = step_gauss_newton(energy, a, target, nullptr, 1.0);
            const double cur = energy.value(a, target);
            REQUIRE(cur <= prev + 1e-15);
            prev = cur;
        }
    }
}

TEST_CASE("batch of uniform targets in the training disk converges") {
    const IkEnergy energy = pure_ik(0.0);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int converged = 0;
    const int n = 200;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d target;
        do {
            target = Eigen::Vector2d(0.25 * unit(rng), 0.25 * unit(rng));
        } while (target.norm() > 0.25);
        const Eigen::Vector2d init(0.1, 0.1);  // perturbed off the straight-arm saddle
        const SolveReport report = solve(energy, init, target, {});
        if (report.position_error < 1e-6) ++converged;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(converged >= static_cast<int>(0.99 * n));
    CHECK(secs < 5.0);
}

TEST_CASE("unreachable target solves to the boundary-closest point") {
    const IkEnergy energy = pure_ik(0.0);
    const Eigen::Vector2d target(0.4, 0.0);
    SolveOptions opts;
    opts.max_iters = 400;  // the stretch direction has singular curvature
    const SolveReport report = solve(energy, Eigen::Vector2d(0.1, 0.1), target, opts);
    const Eigen::Vector2d fk = forward_kinematics(energy.chain(), report.final_actions);
    CHECK(fk.norm() == doctest::Approx(0.3).epsilon(0.01));
    CHECK(report.position_error == doctest::Approx(0.1).epsilon(0.03));
}

TEST_CASE("indefinite curvature escalates damping and reports singularity") {
    const testutil::IndefiniteEnergy bad;
    CHECK_THROWS_AS(
        step_gauss_newton(bad, Eigen::Vector2d(1.0, 1.0), Eigen::VectorXd::Zero(1), nullptr,
                          1.0),
        SolverSingularError);
}

TEST_CASE("budget tracker counts exactly, including under contention") {
    BudgetTracker tracker(1000);
    CHECK(tracker.used() == 0);
    CHECK(tracker.claim(300) == 300);
    CHECK(tracker.claim(800) == 700);
    CHECK(tracker.claim(5) == 0);
    CHECK(tracker.exhausted());

    BudgetTracker shared(100000);
    std::vector<std::thread> workers;
    std::atomic<long> granted{0};
    for (int w = 0; w < 8; ++w)
        workers.emplace_back([&] {
            for (int i = 0; i < 20000; ++i)
                if (shared.try_consume()) granted.fetch_add(1);
        });
    for (auto& th : workers) th.join();
    CHECK(granted.load() == 100000);
    CHECK(shared.used() == 100000);
}
