#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "manifold/energy.hpp"
#include "manifold/policy.hpp"
#include "manifold/sampling.hpp"
#include "manifold/solver.hpp"

namespace manifold {

struct TestSetReport {
    double mean = 0.0;
    double std_dev = 0.0;  // population estimator
    std::vector<double> errors;
};

// Position error of the decoded policy output on every test input.
TestSetReport eval_test_set(const PolicyNet& policy, const SampleSet& test,
                            const EnergyModel& energy, int threads = 1);

struct LandscapeGrid {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
    int nx = 0, ny = 0;
    std::vector<double> energy;     // row-major, y outer
    std::vector<double> pos_error;  // meters
    std::vector<char> in_disk;

    int cells() const { return nx * ny; }
    double cell_x(int i) const { return x0 + (x1 - x0) * (i % nx + 0.5) / nx; }
    double cell_y(int i) const { return y0 + (y1 - y0) * (i / nx + 0.5) / ny; }

    // Share of in-disk cells whose position error exceeds the threshold.
    double high_error_fraction(double threshold_m) const;
};

// Evaluates the policy at every cell center of an nx x ny grid over
// [x0,x1] x [y0,y1]; cells inside the training disk are marked. The grid maps
// cell centers to problem inputs via make_input (identity target for plain
// IK problems).
LandscapeGrid landscape_grid(
    const PolicyNet& policy, const EnergyModel& energy, double x0, double x1, double y0,
    double y1, int nx, int ny, const SampleDomain& training_disk, int threads = 1,
    const std::function<Eigen::VectorXd(const Eigen::Vector2d&)>& make_input = {});

void write_landscape_csv(const std::string& path, const LandscapeGrid& grid);
LandscapeGrid read_landscape_csv(const std::string& path);

struct WarmStartPair {
    long warm_iters = 0, cold_iters = 0;
    double warm_ms = 0.0, cold_ms = 0.0;
    double warm_error = 0.0, cold_error = 0.0;
    bool warm_failed = false, cold_failed = false;
};

struct WarmStartReport {
    std::vector<WarmStartPair> pairs;
    double mean_warm_iters = 0.0, mean_cold_iters = 0.0;
    double mean_warm_ms = 0.0, mean_cold_ms = 0.0;
    double mean_warm_error = 0.0, mean_cold_error = 0.0;
    double iter_ratio = 0.0;  // warm / cold
    int failures = 0;         // solver-singular solves, excluded from means
};

using InitProvider = std::function<Eigen::VectorXd(const Eigen::VectorXd& p)>;

// Paired solves per test input: warm-started from init_fn(p) vs the energy's
// default init. The PolicyNet overload warm-starts from the decoded policy
// output.
WarmStartReport warm_start_benchmark(const InitProvider& init_fn, const SampleSet& test,
                                     const EnergyModel& energy, const SolveOptions& opts);
WarmStartReport warm_start_benchmark(const PolicyNet& policy, const SampleSet& test,
                                     const EnergyModel& energy, const SolveOptions& opts);

void write_warm_start_csv(const std::string& path, const WarmStartReport& report);

}  // namespace manifold
