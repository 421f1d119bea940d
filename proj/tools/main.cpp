#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "manifold/config.hpp"
#include "manifold/csv.hpp"
#include "manifold/eval.hpp"
#include "manifold/policy.hpp"
#include "manifold/rng.hpp"
#include "manifold/sampling.hpp"
#include "manifold/solver.hpp"
#include "manifold/training.hpp"

namespace fs = std::filesystem;
using namespace manifold;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    std::string checkpoint;
};

ExperimentConfig load_with_overrides(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.train.seed = *args.seed;
    }
    if (args.out_dir) cfg.output_dir = *args.out_dir;
    if (args.threads) {
        cfg.threads = *args.threads;
        cfg.train.threads = *args.threads;
    }
    return cfg;
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    if (!dir.empty()) fs::create_directories(dir);
    return dir;
}

PolicyNet load_checkpoint_for(const ExperimentConfig& cfg, const EnergyModel& energy,
                              const std::string& path) {
    const PolicyNet net = load_policy(path);
    if (net.input_dim() != energy.input_dim() || net.action_dim != energy.action_dim())
        throw CheckpointError("checkpoint dimensions do not match the configured problem");
    return net;
}

// 2D marker region for landscape cells: the training disk, or the target
// coordinates of a box domain.
SampleDomain marker_region(const ExperimentConfig& cfg) {
    if (cfg.domain_is_disk) return SampleDomain::disk(cfg.disk_center, cfg.disk_radius);
    return SampleDomain::box(cfg.box_lower.tail<2>(), cfg.box_upper.tail<2>());
}

int cmd_train(const CommonArgs& args) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    const SampleDomain domain = cfg.make_domain();
    const SampleSet test = cfg.make_test_set();
    const fs::path out = ensure_out_dir(cfg);

    const TrainResult result = train(*energy, domain, test, cfg.train);
    result.log.write_csv((out / "train_log.csv").string());
    result.log.write_timing_csv((out / "train_timing.csv").string());
    save_policy(result.policy, (out / "policy.ckpt").string());
    for (const auto& w : result.log.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("gn_calls %ld\n", result.gn_calls);
    std::printf("final mean test position error %.6g m\n", result.final_mean_error);
    return kExitOk;
}

int cmd_solve(const CommonArgs& args, double x, double y) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    Eigen::VectorXd p;
    if (cfg.problem_type == "ik") {
        p = Eigen::Vector2d(x, y);
    } else {
        p.resize(energy->input_dim());
        p.head(cfg.chain.n_links()) = cfg.ik.a_ref;
        p.tail<2>() = Eigen::Vector2d(x, y);
    }
    const SolveReport report = solve(*energy, energy->default_init(p), p, cfg.solver);
    std::printf("converged %s\n", report.converged ? "true" : "false");
    std::printf("iterations %d\n", report.iterations);
    std::printf("gn_calls %ld\n", report.gn_calls);
    std::printf("final_energy %s\n", format_double(report.final_energy).c_str());
    std::printf("position_error_m %s\n", format_double(report.position_error).c_str());
    return kExitOk;
}

int cmd_eval(const CommonArgs& args) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    const PolicyNet net = load_checkpoint_for(cfg, *energy, args.checkpoint);
    const SampleSet test = cfg.make_test_set();
    const TestSetReport report = eval_test_set(net, test, *energy, cfg.threads);

    const fs::path out = ensure_out_dir(cfg);
    CsvTable table;
    table.header = {"index", "pos_error_m"};
    for (std::size_t i = 0; i < report.errors.size(); ++i)
        table.rows.push_back({static_cast<double>(i), report.errors[i]});
    write_csv((out / "test_metrics.csv").string(), table);
    std::printf("mean %.6g m, std %.6g m over %zu samples\n", report.mean, report.std_dev,
                report.errors.size());
    return kExitOk;
}

int cmd_landscape(const CommonArgs& args) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    const PolicyNet net = load_checkpoint_for(cfg, *energy, args.checkpoint);
    const LandscapeGrid grid = landscape_grid(
        net, *energy, cfg.landscape.x0, cfg.landscape.x1, cfg.landscape.y0, cfg.landscape.y1,
        cfg.landscape.nx, cfg.landscape.ny, marker_region(cfg), cfg.threads,
        [&cfg](const Eigen::Vector2d& xy) { return cfg.landscape_input(xy); });
    const fs::path out = ensure_out_dir(cfg);
    write_landscape_csv((out / "landscape.csv").string(), grid);
    std::printf("landscape %dx%d written; in-disk cells >10mm: %.4f\n", grid.nx, grid.ny,
                grid.high_error_fraction(0.010));
    return kExitOk;
}

int cmd_conflicts(const CommonArgs& args, const std::string& dataset_path) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    const fs::path out = ensure_out_dir(cfg);

    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    double search_radius = cfg.train.search_radius;

    if (!dataset_path.empty()) {
        const CsvTable table = read_csv(dataset_path);
        const int pdim = energy->input_dim();
        const int tdim = energy->action_dim();
        for (const auto& row : table.rows) {
            if (static_cast<int>(row.size()) < 1 + pdim + tdim)
                throw ConfigError("dataset row too short in " + dataset_path);
            Eigen::VectorXd p(pdim), t(tdim);
            for (int i = 0; i < pdim; ++i) p[i] = row[1 + i];
            for (int i = 0; i < tdim; ++i) t[i] = row[1 + pdim + i];
            inputs.push_back(std::move(p));
            targets.push_back(std::move(t));
        }
    } else {
        const PolicyNet net = load_checkpoint_for(cfg, *energy, args.checkpoint);
        auto rng = make_rng(cfg.seed, "conflicts.testset");
        const SampleSet set =
            poisson_disk_fixed_count(cfg.make_domain(), cfg.test_size, rng);
        if (search_radius <= 0.0) search_radius = 4.0 * set.pds_radius.value();
        for (const auto& p : set.points) {
            const Eigen::VectorXd a = decode_angles(net.encoding, policy_forward(net, p)).angles;
            inputs.push_back(p);
            targets.push_back(compute_target_second_order(*energy, a, p, nullptr,
                                                          cfg.train.alpha_a));
        }
    }
    if (search_radius <= 0.0) search_radius = 0.02;

    ConflictReport report;
    if (!inputs.empty())
        report = detect_conflicts(inputs, targets, search_radius,
                                  position_error_metric(*energy), cfg.train.epsilon);
    report.metric.resize(inputs.size(), 0.0);
    report.rejected_mask.resize(inputs.size(), 0);
    write_conflict_csv((out / "conflicts.csv").string(), inputs, targets, report);
    std::printf("%zu of %zu samples rejected (D_avg %.6g)\n", report.rejected.size(),
                inputs.size(), report.metric_avg);
    return kExitOk;
}

int cmd_warmstart(const CommonArgs& args) {
    const ExperimentConfig cfg = load_with_overrides(args);
    const auto energy = cfg.make_energy();
    const PolicyNet net = load_checkpoint_for(cfg, *energy, args.checkpoint);
    const SampleSet test = cfg.make_test_set();
    const WarmStartReport report = warm_start_benchmark(net, test, *energy, cfg.solver);
    const fs::path out = ensure_out_dir(cfg);
    write_warm_start_csv((out / "warmstart.csv").string(), report);
    std::printf("warm %.3f iters / %.3f ms, cold %.3f iters / %.3f ms, ratio %.4f\n",
                report.mean_warm_iters, report.mean_warm_ms, report.mean_cold_iters,
                report.mean_cold_ms, report.iter_ratio);
    std::printf("warm error %.6g m, cold error %.6g m, failures %d\n",
                report.mean_warm_error, report.mean_cold_error, report.failures);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-integral policy distillation toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    double target_x = 0.0, target_y = 0.0;
    std::string dataset_path;

    auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
        sub->add_option("--config", args.config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", [&args](const std::vector<std::string>& v) {
            args.seed = std::stoull(v[0]);
            return true;
        }, "root seed override");
        sub->add_option("--out", [&args](const std::vector<std::string>& v) {
            args.out_dir = v[0];
            return true;
        }, "output directory override");
        sub->add_option("--threads", [&args](const std::vector<std::string>& v) {
            args.threads = std::stoi(v[0]);
            return true;
        }, "worker thread count");
        if (needs_checkpoint)
            sub->add_option("--checkpoint", args.checkpoint, "policy checkpoint")->required();
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train a policy to the budget");
    add_common(train_cmd, false);

    CLI::App* solve_cmd = app.add_subcommand("solve", "solve one instance");
    add_common(solve_cmd, false);
    solve_cmd->add_option("--target", [&](const std::vector<std::string>& v) {
        target_x = std::stod(v[0]);
        target_y = std::stod(v[1]);
        return true;
    }, "target x y")->expected(2)->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "test-set metrics for a checkpoint");
    add_common(eval_cmd, true);

    CLI::App* land_cmd = app.add_subcommand("landscape", "position-error landscape grid");
    add_common(land_cmd, true);

    CLI::App* conf_cmd = app.add_subcommand("conflicts", "conflict detection report");
    add_common(conf_cmd, false);
    conf_cmd->add_option("--checkpoint", args.checkpoint, "policy checkpoint");
    conf_cmd->add_option("--dataset", dataset_path, "labeled dataset CSV (index,p...,t...)");

    CLI::App* warm_cmd = app.add_subcommand("warmstart", "paired warm/cold solve benchmark");
    add_common(warm_cmd, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(args);
        if (solve_cmd->parsed()) return cmd_solve(args, target_x, target_y);
        if (eval_cmd->parsed()) return cmd_eval(args);
        if (land_cmd->parsed()) return cmd_landscape(args);
        if (conf_cmd->parsed()) {
            if (dataset_path.empty() && args.checkpoint.empty()) {
                std::fprintf(stderr, "error: conflicts needs --checkpoint or --dataset\n");
                return kExitConfig;
            }
            return cmd_conflicts(args, dataset_path);
        }
        if (warm_cmd->parsed()) return cmd_warmstart(args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return kExitCheckpoint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
