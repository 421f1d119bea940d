#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "manifold/energy.hpp"
#include "manifold/policy.hpp"
#include "manifold/sampling.hpp"
#include "manifold/solver.hpp"

namespace manifold {

// Audited counter of second-order target/label evaluations. One instance per
// training run; all methods under comparison share the same cap so compute
// budgets stay matched. Thread-safe: target computation may fan out.
class BudgetTracker {
public:
    explicit BudgetTracker(long cap) : cap_(cap) {}

    long used() const { return used_.load(std::memory_order_relaxed); }
    long cap() const { return cap_; }
    bool exhausted() const { return used() >= cap_; }

    // Claims up to `want` calls; returns how many were granted. Claims are
    // made in bulk before fanning work out, keeping results independent of
    // thread scheduling.
    long claim(long want) {
        if (want <= 0) return 0;
        long cur = used_.load(std::memory_order_relaxed);
        while (true) {
            const long granted = std::min(want, cap_ - cur);
            if (granted <= 0) return 0;
            if (used_.compare_exchange_weak(cur, cur + granted, std::memory_order_relaxed))
                return granted;
        }
    }

    bool try_consume() { return claim(1) == 1; }

private:
    std::atomic<long> used_{0};
    long cap_;
};

enum class Strategy {
    Bc,
    Dagger,
    EmStatic,
    EmDynamic,
    EmIncremental,
    EmIncrementalReject,
};

struct TrainConfig {
    Strategy strategy = Strategy::EmIncrementalReject;
    int samples = 500;       // M
    int label_steps = 100;   // K: GN steps per label (BC/Dagger), outer budget unit (EM)
    int inner_steps = 8;     // N supervised steps per iteration
    long budget_cap = 0;     // 0 -> samples * label_steps
    long theta_steps = 0;    // BC fit length; 0 -> label_steps * inner_steps
    double alpha_a = 1.0;    // line-search start for targets
    double alpha_l = 1e-3;
    // When set, the supervised rate glides geometrically from alpha_l to
    // alpha_l_final across the run's theta-step horizon.
    double alpha_l_final = 0.0;
    bool adaptive_optimizer = false;  // PlainGd unless set
    bool first_order_targets = false;
    bool target_line_search = true;
    double epsilon = 5e-3;      // conflict rejection threshold (meters)
    double search_radius = 0.0; // 0 -> derived from the sample spacing
    int m_max = 500;
    int grow_k = 8;
    int seed_batch = 500;
    double pds_spacing_hint = 0.0;
    int eval_cadence = 50;      // theta steps between test evaluations
    std::uint64_t seed = 1;
    int threads = 1;
    std::vector<int> hidden = {512, 512};
    Encoding encoding = Encoding::SinCos;
};

struct TrainLogRow {
    long theta_steps = 0;
    double mean_error = 0.0;
    double std_error = 0.0;
    long gn_calls = 0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    std::vector<std::string> warnings;
    bool budget_exhausted_early = false;

    // Deterministic columns only; wall time goes to the timing sidecar so a
    // rerun with the same config and seed is byte-identical.
    void write_csv(const std::string& path) const;
    void write_timing_csv(const std::string& path) const;
};

struct TrainResult {
    PolicyNet policy;
    TrainLog log;
    long gn_calls = 0;
    double final_mean_error = 0.0;
};

// Per-iteration view of the energy-minimization loop, for tests and
// conflict-map exports.
struct EmIterationInfo {
    int iteration = 0;
    const std::vector<Eigen::VectorXd>* inputs = nullptr;
    const std::vector<Eigen::VectorXd>* target_angles = nullptr;
    std::vector<int> rejected;
    std::vector<int> trained;
};
using EmObserver = std::function<void(const EmIterationInfo&)>;

// First-order converging target a - alpha * grad E. With line search on, the
// step is shrunk until the energy strictly decreases; if no step does, the
// target falls back to a itself (failed set when given).
Eigen::VectorXd compute_target_first_order(const EnergyModel& energy,
                                           const Eigen::VectorXd& a,
                                           const Eigen::VectorXd& p,
                                           const Eigen::VectorXd* a_prev, double alpha_a,
                                           bool use_line_search, bool* failed = nullptr);

// Second-order converging target: one damped Gauss-Newton step with line
// search. Callers account for the budget; this helper just steps.
Eigen::VectorXd compute_target_second_order(const EnergyModel& energy,
                                            const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& p,
                                            const Eigen::VectorXd* a_prev,
                                            double alpha_max);

TrainResult train_bc(const EnergyModel& energy, const SampleDomain& domain,
                     const SampleSet& test_set, const TrainConfig& config);
TrainResult train_dagger(const EnergyModel& energy, const SampleDomain& domain,
                         const SampleSet& test_set, const TrainConfig& config);
TrainResult train_energy_min(const EnergyModel& energy, const SampleDomain& domain,
                             const SampleSet& test_set, const TrainConfig& config,
                             const EmObserver& observer = {});

// Dispatch on config.strategy.
TrainResult train(const EnergyModel& energy, const SampleDomain& domain,
                  const SampleSet& test_set, const TrainConfig& config);

}  // namespace manifold
