#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "manifold/energy.hpp"
#include "manifold/policy.hpp"

namespace manifold {

// Region of problem inputs to integrate over: a disk (2D) or an axis-aligned
// box in any dimension.
class SampleDomain {
public:
    static SampleDomain disk(const Eigen::Vector2d& center, double radius);
    static SampleDomain box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

    int dimension() const { return dim_; }
    bool is_disk() const { return is_disk_; }
    bool contains(const Eigen::VectorXd& point) const;
    const Eigen::Vector2d& disk_center() const { return center_; }
    double disk_radius() const { return radius_; }
    const Eigen::VectorXd& box_lower() const { return lower_; }
    const Eigen::VectorXd& box_upper() const { return upper_; }

    Eigen::VectorXd sample(std::mt19937_64& rng) const;

private:
    SampleDomain() = default;
    bool is_disk_ = false;
    int dim_ = 0;
    Eigen::Vector2d center_ = Eigen::Vector2d::Zero();
    double radius_ = 0.0;
    Eigen::VectorXd lower_, upper_;
};

struct SampleSet {
    std::vector<Eigen::VectorXd> points;
    // Half the distance between the closest pair when produced by
    // Poisson-disk sampling; absent otherwise.
    std::optional<double> pds_radius;
};

SampleSet sample_uniform(const SampleDomain& domain, int n, std::mt19937_64& rng);

// Bridson dart throwing over a background grid. Every pair of returned
// points is at least `spacing` apart; pds_radius records spacing / 2.
SampleSet poisson_disk_sample(const SampleDomain& domain, double spacing,
                              std::mt19937_64& rng, int k_attempts = 30);

// Maximal Poisson-disk extension of an existing point set: returns only the
// new points, each at least `spacing` from every existing and new point.
// Growth starts from the frontier of the existing set.
SampleSet poisson_disk_fill(const SampleDomain& domain, double spacing,
                            const std::vector<Eigen::VectorXd>& existing,
                            std::mt19937_64& rng, int k_attempts = 30);

// Maximal set thinned (or retried at tighter spacing) to exactly n points.
SampleSet poisson_disk_fixed_count(const SampleDomain& domain, int n,
                                   std::mt19937_64& rng, double spacing_hint = 0.0);

// Fresh set per training iteration; uniform or Poisson-disk per flag.
SampleSet resample_dynamic(const SampleDomain& domain, int m, std::mt19937_64& rng,
                           bool use_pds = true, double spacing_hint = 0.0);

// Candidate whose decoded output from the freshly initialized policy already
// has the lowest energy; ties break toward the lowest index.
Eigen::VectorXd select_seed(const SampleSet& candidates, const PolicyNet& policy,
                            const EnergyModel& energy);

// Appends the k pool points nearest to the current set (distance to the
// nearest current member; to seed_point while the set is empty), stopping at
// m_max total points.
SampleSet incremental_expand(const SampleSet& current, const SampleSet& pool, int k,
                             const Eigen::VectorXd& seed_point, int m_max);

struct ConflictReport {
    std::vector<double> metric;          // D^m per sample
    double metric_avg = 0.0;             // D^avg
    std::vector<int> rejected;           // sorted, unique
    std::vector<char> rejected_mask;     // per-sample flag
};

using ConflictMetric =
    std::function<double(const Eigen::VectorXd& p_avg, const Eigen::VectorXd& t_avg)>;

// Neighborhood-interpolation screen: every sample is averaged with its
// fixed-radius neighbours (inputs arithmetically, target angles by circular
// mean), the metric is evaluated on the blend, and samples above
// D_avg + epsilon are rejected together with their neighbours.
ConflictReport detect_conflicts(const std::vector<Eigen::VectorXd>& inputs,
                                const std::vector<Eigen::VectorXd>& target_angles,
                                double search_radius, const ConflictMetric& metric,
                                double epsilon);

// |FK(angles) - target(p)| through the energy's task mapping.
ConflictMetric position_error_metric(const EnergyModel& energy);

// Fixed-radius neighbour lookup; background grid above the brute-force
// cutoff, exhaustive scan below it.
std::vector<std::vector<int>> fixed_radius_neighbors(
    const std::vector<Eigen::VectorXd>& points, double radius,
    int brute_force_cutoff = 2000);

void write_sample_set_csv(const std::string& path, const SampleSet& set);
void write_conflict_csv(const std::string& path,
                        const std::vector<Eigen::VectorXd>& inputs,
                        const std::vector<Eigen::VectorXd>& target_angles,
                        const ConflictReport& report);

}  // namespace manifold
