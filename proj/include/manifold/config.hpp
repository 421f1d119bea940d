#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "manifold/energy.hpp"
#include "manifold/eval.hpp"
#include "manifold/sampling.hpp"
#include "manifold/training.hpp"

namespace manifold {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LandscapeSettings {
    double x0 = -0.3, x1 = 0.3, y0 = -0.3, y1 = 0.3;
    int nx = 100, ny = 100;
};

// One experiment, fully described by a JSON file with a versioned schema.
// Parsing is strict: unknown keys are rejected so configs stay auditable.
struct ExperimentConfig {
    int schema = 1;
    std::uint64_t seed = 1;
    std::string output_dir = ".";
    int threads = 1;

    std::string problem_type = "ik";  // "ik" | "kto"
    ChainSpec chain;
    IkEnergyParams ik;
    KtoEnergyParams kto;

    bool domain_is_disk = true;
    Eigen::Vector2d disk_center = Eigen::Vector2d::Zero();
    double disk_radius = 0.25;
    Eigen::VectorXd box_lower, box_upper;

    TrainConfig train;
    SolveOptions solver;
    LandscapeSettings landscape;

    int test_size = 500;
    std::string test_sampling = "uniform";  // "uniform" | "pds"

    std::unique_ptr<EnergyModel> make_energy() const;
    SampleDomain make_domain() const;
    SampleSet make_test_set() const;
    // Maps a 2D landscape cell to a full problem input (identity for IK,
    // [a_ref; xy] for the trajectory problem).
    Eigen::VectorXd landscape_input(const Eigen::Vector2d& xy) const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace manifold
