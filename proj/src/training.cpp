#include "manifold/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

#include "manifold/csv.hpp"
#include "manifold/parallel.hpp"
#include "manifold/rng.hpp"

namespace manifold {

void TrainLog::write_csv(const std::string& path) const {
    CsvTable table;
    table.header = {"theta_steps", "mean_pos_error_m", "std_pos_error_m", "gn_calls"};
    for (const auto& row : rows)
        table.rows.push_back({static_cast<double>(row.theta_steps), row.mean_error,
                              row.std_error, static_cast<double>(row.gn_calls)});
    manifold::write_csv(path, table);
}

void TrainLog::write_timing_csv(const std::string& path) const {
    CsvTable table;
    table.header = {"theta_steps", "wall_ms"};
    for (const auto& row : rows)
        table.rows.push_back({static_cast<double>(row.theta_steps), row.wall_ms});
    manifold::write_csv(path, table);
}

Eigen::VectorXd compute_target_first_order(const EnergyModel& energy,
                                           const Eigen::VectorXd& a,
                                           const Eigen::VectorXd& p,
                                           const Eigen::VectorXd* a_prev, double alpha_a,
                                           bool use_line_search, bool* failed) {
    if (failed) *failed = false;
    const Eigen::VectorXd g = energy.gradient(a, p, a_prev);
    if (!g.allFinite())
        throw std::invalid_argument("compute_target_first_order: non-finite gradient");
    if (!use_line_search || alpha_a == 0.0) return a - alpha_a * g;
    if (g.lpNorm<Eigen::Infinity>() == 0.0) return a;
    const double alpha = line_search(energy, a, p, a_prev, -g, alpha_a);
    if (alpha == 0.0) {
        if (failed) *failed = true;
        return a;
    }
    return a - alpha * g;
}

Eigen::VectorXd compute_target_second_order(const EnergyModel& energy,
                                            const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& p,
                                            const Eigen::VectorXd* a_prev,
                                            double alpha_max) {
    return step_gauss_newton(energy, a, p, a_prev, alpha_max);
}

namespace {

long resolved_cap(const TrainConfig& cfg) {
    const long cap = cfg.budget_cap > 0
                         ? cfg.budget_cap
                         : static_cast<long>(cfg.samples) * cfg.label_steps;
    if (cap <= 0) throw std::invalid_argument("train: budget cap must be positive");
    return cap;
}

// Test-set evaluation shared by every trainer.
class EvalContext {
public:
    EvalContext(const EnergyModel& energy, const SampleSet& test, int threads)
        : energy_(energy), test_(test), threads_(threads) {
        if (test.points.empty())
            throw std::invalid_argument("train: test set must not be empty");
        inputs_.resize(energy.input_dim(), static_cast<Eigen::Index>(test.points.size()));
        for (std::size_t i = 0; i < test.points.size(); ++i)
            inputs_.col(static_cast<Eigen::Index>(i)) = test.points[i];
    }

    std::pair<double, double> evaluate(const PolicyNet& net) const {
        const Eigen::MatrixXd out = policy_forward_batch(net, inputs_);
        const int n = static_cast<int>(out.cols());
        std::vector<double> err(n);
        parallel_for(n, threads_, [&](int i) {
            const Eigen::VectorXd a = decode_angles(net.encoding, out.col(i)).angles;
            err[i] = energy_.position_error(a, test_.points[i]);
        });
        const double mean = std::accumulate(err.begin(), err.end(), 0.0) / n;
        double sq = 0.0;
        for (double e : err) sq += (e - mean) * (e - mean);
        return {mean, std::sqrt(sq / n)};
    }

private:
    const EnergyModel& energy_;
    const SampleSet& test_;
    int threads_;
    Eigen::MatrixXd inputs_;
};

class RunLogger {
public:
    RunLogger(const EvalContext& eval, const BudgetTracker& tracker, int cadence)
        : eval_(eval), tracker_(tracker), cadence_(cadence),
          start_(std::chrono::steady_clock::now()) {}

    void log_if_due(const PolicyNet& net, long theta_steps, bool force = false) {
        if (!force && (cadence_ <= 0 || theta_steps % cadence_ != 0)) return;
        if (!log_.rows.empty() && log_.rows.back().theta_steps == theta_steps) return;
        const auto [mean, sd] = eval_.evaluate(net);
        TrainLogRow row;
        row.theta_steps = theta_steps;
        row.mean_error = mean;
        row.std_error = sd;
        row.gn_calls = tracker_.used();
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start_)
                          .count();
        log_.rows.push_back(row);
    }

    TrainLog take() { return std::move(log_); }
    TrainLog& log() { return log_; }

private:
    const EvalContext& eval_;
    const BudgetTracker& tracker_;
    int cadence_;
    std::chrono::steady_clock::time_point start_;
    TrainLog log_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
    if (cfg.adaptive_optimizer) return std::make_unique<AdamOptimizer>();
    return std::make_unique<PlainGd>();
}

// Supervised rate at step t of an expected horizon; constant unless a final
// rate is configured.
class RateSchedule {
public:
    RateSchedule(const TrainConfig& cfg, long horizon)
        : base_(cfg.alpha_l), horizon_(std::max<long>(horizon, 1)) {
        ratio_ = cfg.alpha_l_final > 0.0 ? cfg.alpha_l_final / cfg.alpha_l : 1.0;
    }

    double at(long step) const {
        if (ratio_ == 1.0) return base_;
        const double frac = std::min(1.0, static_cast<double>(step) / horizon_);
        return base_ * std::pow(ratio_, frac);
    }

private:
    double base_;
    long horizon_;
    double ratio_ = 1.0;
};

// Theta steps the energy-minimization loop will take under its budget,
// accounting for the incremental growth phase.
long em_theta_horizon(const TrainConfig& cfg, long cap) {
    const bool incremental = cfg.strategy == Strategy::EmIncremental ||
                             cfg.strategy == Strategy::EmIncrementalReject;
    long consumed = 0;
    long iters = 0;
    long size = incremental ? 1 : cfg.samples;
    while (consumed + size <= cap) {
        consumed += size;
        ++iters;
        if (incremental && size < cfg.m_max)
            size = std::min<long>(size + cfg.grow_k, cfg.m_max);
    }
    return iters * cfg.inner_steps;
}

PolicyNet init_policy(const EnergyModel& energy, const TrainConfig& cfg) {
    return make_policy(energy.input_dim(), energy.action_dim(), cfg.encoding, cfg.hidden,
                       seed_for(cfg.seed, "policy.init"));
}

Eigen::MatrixXd stack_columns(const std::vector<Eigen::VectorXd>& cols,
                              const std::vector<int>& which) {
    Eigen::MatrixXd out(cols[which[0]].size(), static_cast<Eigen::Index>(which.size()));
    for (std::size_t i = 0; i < which.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = cols[which[i]];
    return out;
}

// Run `granted` Gauss-Newton label steps from init; stops refining early once
// the gradient vanishes (the budget for all granted steps is already spent).
Eigen::VectorXd run_label_steps(const EnergyModel& energy, Eigen::VectorXd a,
                                const Eigen::VectorXd& p, long granted, double alpha_max) {
    for (long k = 0; k < granted; ++k) {
        if (energy.gradient(a, p, nullptr).lpNorm<Eigen::Infinity>() < 1e-12) break;
        a = step_gauss_newton(energy, a, p, nullptr, alpha_max);
    }
    return a;
}

double pds_spacing_for(const SampleDomain& domain, int n, double hint) {
    if (hint > 0.0) return hint;
    double volume;
    if (domain.is_disk())
        volume = std::numbers::pi * domain.disk_radius() * domain.disk_radius();
    else
        volume = (domain.box_upper() - domain.box_lower()).prod();
    const double fill = domain.dimension() == 2 ? 0.72 : 0.5;
    return std::pow(fill * volume / n, 1.0 / domain.dimension());
}

// One fresh sample at least `spacing` away from every existing point; falls
// back to the most isolated of the attempts when the domain is crowded.
Eigen::VectorXd pds_new_point(const SampleDomain& domain,
                              const std::vector<Eigen::VectorXd>& existing, double spacing,
                              std::mt19937_64& rng) {
    Eigen::VectorXd best;
    double best_dist = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        const Eigen::VectorXd cand = domain.sample(rng);
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& q : existing) dist = std::min(dist, (cand - q).norm());
        if (dist >= spacing) return cand;
        if (dist > best_dist) {
            best_dist = dist;
            best = cand;
        }
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Behavioral cloning

TrainResult train_bc(const EnergyModel& energy, const SampleDomain& domain,
                     const SampleSet& test_set, const TrainConfig& cfg) {
    BudgetTracker tracker(resolved_cap(cfg));
    auto rng = make_rng(cfg.seed, "train.sampling");
    PolicyNet net = init_policy(energy, cfg);
    EvalContext eval(energy, test_set, cfg.threads);
    RunLogger logger(eval, tracker, cfg.eval_cadence);

    const SampleSet train_set =
        poisson_disk_fixed_count(domain, cfg.samples, rng, cfg.pds_spacing_hint);

    // Full labels: K Gauss-Newton steps per sample from the default init.
    std::vector<Eigen::VectorXd> labels;
    std::vector<int> labeled;
    for (int i = 0; i < cfg.samples; ++i) {
        const long granted = tracker.claim(cfg.label_steps);
        if (granted == 0) break;
        const Eigen::VectorXd& p = train_set.points[i];
        labels.push_back(encode_angles(
            cfg.encoding,
            run_label_steps(energy, energy.default_init(p), p, granted, cfg.alpha_a)));
        labeled.push_back(i);
        if (granted < cfg.label_steps) {
            logger.log().budget_exhausted_early = true;
            logger.log().warnings.push_back("budget exhausted during labeling");
            break;
        }
    }

    logger.log_if_due(net, 0, true);
    if (!labels.empty()) {
        std::vector<int> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        Eigen::MatrixXd targets = stack_columns(labels, all);
        Eigen::MatrixXd inputs(energy.input_dim(), static_cast<Eigen::Index>(labeled.size()));
        for (std::size_t i = 0; i < labeled.size(); ++i)
            inputs.col(static_cast<Eigen::Index>(i)) = train_set.points[labeled[i]];

        auto optimizer = make_optimizer(cfg);
        // 0 derives the fit length from K*N; negative skips the fit.
        const long total = cfg.theta_steps != 0
                               ? std::max<long>(cfg.theta_steps, 0)
                               : static_cast<long>(cfg.label_steps) * cfg.inner_steps;
        const RateSchedule rate(cfg, total);
        for (long step = 1; step <= total; ++step) {
            const ParamGradient grad = supervised_grad(net, inputs, targets);
            optimizer->apply_update(net, grad, rate.at(step));
            logger.log_if_due(net, step, step == total);
        }
    }

    TrainResult result;
    result.log = logger.take();
    result.gn_calls = tracker.used();
    result.final_mean_error = result.log.rows.back().mean_error;
    result.policy = std::move(net);
    return result;
}

// ---------------------------------------------------------------------------
// Dagger (trajectory-policy variant)

TrainResult train_dagger(const EnergyModel& energy, const SampleDomain& domain,
                         const SampleSet& test_set, const TrainConfig& cfg) {
    BudgetTracker tracker(resolved_cap(cfg));
    auto rng = make_rng(cfg.seed, "train.sampling");
    PolicyNet net = init_policy(energy, cfg);
    EvalContext eval(energy, test_set, cfg.threads);
    RunLogger logger(eval, tracker, cfg.eval_cadence);
    auto optimizer = make_optimizer(cfg);

    const double spacing = pds_spacing_for(domain, cfg.samples, cfg.pds_spacing_hint);
    std::vector<Eigen::VectorXd> agg_inputs;
    std::vector<Eigen::VectorXd> agg_targets;

    const long iters = (tracker.cap() + cfg.label_steps - 1) / cfg.label_steps;
    const RateSchedule rate(cfg, iters * cfg.inner_steps);
    logger.log_if_due(net, 0, true);
    long theta = 0;
    while (true) {
        const long granted = tracker.claim(cfg.label_steps);
        if (granted == 0) break;
        const Eigen::VectorXd p = pds_new_point(domain, agg_inputs, spacing, rng);
        // Relabel the policy's own output with K update steps.
        const Eigen::VectorXd a0 =
            decode_angles(net.encoding, policy_forward(net, p)).angles;
        agg_inputs.push_back(p);
        agg_targets.push_back(
            encode_angles(cfg.encoding, run_label_steps(energy, a0, p, granted, cfg.alpha_a)));
        if (granted < cfg.label_steps) {
            logger.log().budget_exhausted_early = true;
            logger.log().warnings.push_back("budget exhausted during relabeling");
        }

        std::vector<int> all(agg_targets.size());
        std::iota(all.begin(), all.end(), 0);
        const Eigen::MatrixXd inputs = stack_columns(agg_inputs, all);
        const Eigen::MatrixXd targets = stack_columns(agg_targets, all);
        for (int n = 0; n < cfg.inner_steps; ++n) {
            const ParamGradient grad = supervised_grad(net, inputs, targets);
            optimizer->apply_update(net, grad, rate.at(theta + 1));
            logger.log_if_due(net, ++theta);
        }
    }
    logger.log_if_due(net, theta, true);

    TrainResult result;
    result.log = logger.take();
    result.gn_calls = tracker.used();
    result.final_mean_error = result.log.rows.back().mean_error;
    result.policy = std::move(net);
    return result;
}

// ---------------------------------------------------------------------------
// Energy minimization (converging targets, pluggable sampling, rejection)

TrainResult train_energy_min(const EnergyModel& energy, const SampleDomain& domain,
                             const SampleSet& test_set, const TrainConfig& cfg,
                             const EmObserver& observer) {
    const bool dynamic = cfg.strategy == Strategy::EmDynamic;
    const bool incremental = cfg.strategy == Strategy::EmIncremental ||
                             cfg.strategy == Strategy::EmIncrementalReject;
    const bool reject = cfg.strategy == Strategy::EmIncrementalReject;

    BudgetTracker tracker(resolved_cap(cfg));
    auto rng = make_rng(cfg.seed, "train.sampling");
    PolicyNet net = init_policy(energy, cfg);
    EvalContext eval(energy, test_set, cfg.threads);
    RunLogger logger(eval, tracker, cfg.eval_cadence);
    auto optimizer = make_optimizer(cfg);
    const ConflictMetric metric = position_error_metric(energy);

    std::vector<Eigen::VectorXd> samples;
    std::vector<Eigen::VectorXd> prev_outputs;  // empty vector = no history yet
    std::vector<char> rejected_last;            // refreshed from the conflict report
    Eigen::VectorXd seed_point;
    double spacing = cfg.pds_spacing_hint;

    if (incremental) {
        const SampleSet candidates =
            poisson_disk_fixed_count(domain, cfg.seed_batch, rng, cfg.pds_spacing_hint);
        spacing = 2.0 * candidates.pds_radius.value();
        seed_point = select_seed(candidates, net, energy);
        samples.push_back(seed_point);
        prev_outputs.emplace_back();
        rejected_last.assign(1, 0);
    } else if (!dynamic) {
        const SampleSet fixed =
            poisson_disk_fixed_count(domain, cfg.samples, rng, cfg.pds_spacing_hint);
        spacing = 2.0 * fixed.pds_radius.value();
        samples = fixed.points;
        prev_outputs.assign(samples.size(), Eigen::VectorXd());
        rejected_last.assign(samples.size(), 0);
    }
    const double search_radius =
        cfg.search_radius > 0.0 ? cfg.search_radius : 2.0 * spacing;
    const RateSchedule rate(cfg, em_theta_horizon(cfg, tracker.cap()));

    logger.log_if_due(net, 0, true);
    long theta = 0;
    int outer = 0;
    while (!tracker.exhausted()) {
        ++outer;
        if (dynamic) {
            const SampleSet fresh =
                poisson_disk_fixed_count(domain, cfg.samples, rng, cfg.pds_spacing_hint);
            samples = fresh.points;
            prev_outputs.assign(samples.size(), Eigen::VectorXd());
            rejected_last.assign(samples.size(), 0);
        } else if (incremental && static_cast<int>(samples.size()) < cfg.m_max) {
            // Fresh frontier candidates: Poisson-disk extension of the
            // current set, so growth spreads outward at the working spacing.
            const SampleSet pool = poisson_disk_fill(domain, spacing, samples, rng);
            if (!pool.points.empty()) {
                SampleSet current;
                current.points = samples;
                const SampleSet grown =
                    incremental_expand(current, pool, cfg.grow_k, seed_point, cfg.m_max);
                samples = grown.points;
                prev_outputs.resize(samples.size());
                rejected_last.resize(samples.size(), 0);
            }
        }

        // Claim the iteration's budget up front so the set of refreshed
        // targets is independent of thread scheduling. A remainder smaller
        // than the working set would train on a spatially biased prefix, so
        // the loop stops there and leaves the tail unconsumed.
        if (tracker.cap() - tracker.used() < static_cast<long>(samples.size())) break;
        const int n_fresh = static_cast<int>(tracker.claim(static_cast<long>(samples.size())));
        if (n_fresh == 0) break;

        std::vector<Eigen::VectorXd> outputs(n_fresh);
        std::vector<Eigen::VectorXd> targets(n_fresh);
        std::vector<char> singular(n_fresh, 0);
        Eigen::MatrixXd batch_in(energy.input_dim(), n_fresh);
        for (int i = 0; i < n_fresh; ++i) batch_in.col(i) = samples[i];
        const Eigen::MatrixXd batch_out = policy_forward_batch(net, batch_in);

        parallel_for(n_fresh, cfg.threads, [&](int i) {
            outputs[i] = decode_angles(net.encoding, batch_out.col(i)).angles;
            const Eigen::VectorXd* a_prev =
                prev_outputs[i].size() > 0 ? &prev_outputs[i] : nullptr;
            try {
                targets[i] = cfg.first_order_targets
                                 ? compute_target_first_order(energy, outputs[i], samples[i],
                                                              a_prev, cfg.alpha_a,
                                                              cfg.target_line_search)
                                 : compute_target_second_order(energy, outputs[i],
                                                               samples[i], a_prev,
                                                               cfg.alpha_a);
            } catch (const SolverSingularError&) {
                singular[i] = 1;
            }
        });
        // Poor network outputs can strand the step; relabel those from the
        // default init, still on the budget.
        for (int i = 0; i < n_fresh; ++i) {
            if (!singular[i]) continue;
            logger.log().warnings.push_back("singular target step; default-init fallback");
            if (tracker.try_consume()) {
                targets[i] = compute_target_second_order(
                    energy, energy.default_init(samples[i]), samples[i], nullptr, cfg.alpha_a);
            } else {
                targets[i] = outputs[i];
            }
        }
        for (int i = 0; i < n_fresh; ++i) prev_outputs[i] = outputs[i];

        std::vector<int> trained(n_fresh);
        std::iota(trained.begin(), trained.end(), 0);
        EmIterationInfo info;
        info.iteration = outer;
        info.inputs = &samples;
        info.target_angles = &targets;
        if (reject) {
            std::vector<Eigen::VectorXd> fresh_inputs(samples.begin(),
                                                      samples.begin() + n_fresh);
            const ConflictReport report =
                detect_conflicts(fresh_inputs, targets, search_radius, metric, cfg.epsilon);
            trained.clear();
            for (int i = 0; i < n_fresh; ++i) {
                rejected_last[i] = report.rejected_mask[i];
                if (!report.rejected_mask[i]) trained.push_back(i);
            }
            info.rejected = report.rejected;
        }
        info.trained = trained;
        if (observer) observer(info);

        if (trained.empty()) {
            logger.log().warnings.push_back("iteration " + std::to_string(outer) +
                                            ": every sample rejected; skipping update");
            continue;
        }

        Eigen::MatrixXd inputs(energy.input_dim(), static_cast<Eigen::Index>(trained.size()));
        Eigen::MatrixXd enc_targets(net.output_dim(),
                                    static_cast<Eigen::Index>(trained.size()));
        for (std::size_t i = 0; i < trained.size(); ++i) {
            inputs.col(static_cast<Eigen::Index>(i)) = samples[trained[i]];
            enc_targets.col(static_cast<Eigen::Index>(i)) =
                encode_angles(cfg.encoding, targets[trained[i]]);
        }
        for (int n = 0; n < cfg.inner_steps; ++n) {
            const ParamGradient grad = supervised_grad(net, inputs, enc_targets);
            optimizer->apply_update(net, grad, rate.at(theta + 1));
            logger.log_if_due(net, ++theta);
        }
    }
    logger.log_if_due(net, theta, true);

    TrainResult result;
    result.log = logger.take();
    result.gn_calls = tracker.used();
    result.final_mean_error = result.log.rows.back().mean_error;
    result.policy = std::move(net);
    return result;
}

TrainResult train(const EnergyModel& energy, const SampleDomain& domain,
                  const SampleSet& test_set, const TrainConfig& cfg) {
    switch (cfg.strategy) {
        case Strategy::Bc:
            return train_bc(energy, domain, test_set, cfg);
        case Strategy::Dagger:
            return train_dagger(energy, domain, test_set, cfg);
        default:
            return train_energy_min(energy, domain, test_set, cfg);
    }
}

}  // namespace manifold
