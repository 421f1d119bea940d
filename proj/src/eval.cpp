#include "manifold/eval.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "manifold/csv.hpp"
#include "manifold/parallel.hpp"

namespace manifold {

TestSetReport eval_test_set(const PolicyNet& policy, const SampleSet& test,
                            const EnergyModel& energy, int threads) {
    if (test.points.empty()) throw std::invalid_argument("eval_test_set: empty test set");
    Eigen::MatrixXd inputs(energy.input_dim(), static_cast<Eigen::Index>(test.points.size()));
    for (std::size_t i = 0; i < test.points.size(); ++i)
        inputs.col(static_cast<Eigen::Index>(i)) = test.points[i];
    const Eigen::MatrixXd out = policy_forward_batch(policy, inputs);

    TestSetReport report;
    const int n = static_cast<int>(out.cols());
    report.errors.resize(n);
    parallel_for(n, threads, [&](int i) {
        const Eigen::VectorXd a = decode_angles(policy.encoding, out.col(i)).angles;
        report.errors[i] = energy.position_error(a, test.points[i]);
    });
    report.mean = std::accumulate(report.errors.begin(), report.errors.end(), 0.0) / n;
    double sq = 0.0;
    for (double e : report.errors) sq += (e - report.mean) * (e - report.mean);
    report.std_dev = std::sqrt(sq / n);
    return report;
}

double LandscapeGrid::high_error_fraction(double threshold_m) const {
    long inside = 0, high = 0;
    for (int i = 0; i < cells(); ++i) {
        if (!in_disk[i]) continue;
        ++inside;
        if (pos_error[i] > threshold_m) ++high;
    }
    return inside == 0 ? 0.0 : static_cast<double>(high) / static_cast<double>(inside);
}

LandscapeGrid landscape_grid(
    const PolicyNet& policy, const EnergyModel& energy, double x0, double x1, double y0,
    double y1, int nx, int ny, const SampleDomain& training_disk, int threads,
    const std::function<Eigen::VectorXd(const Eigen::Vector2d&)>& make_input) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("landscape_grid: nx, ny must be >= 2");
    LandscapeGrid grid;
    grid.x0 = x0;
    grid.x1 = x1;
    grid.y0 = y0;
    grid.y1 = y1;
    grid.nx = nx;
    grid.ny = ny;
    const int n = nx * ny;
    grid.energy.resize(n);
    grid.pos_error.resize(n);
    grid.in_disk.resize(n);

    auto to_input = [&](const Eigen::Vector2d& xy) -> Eigen::VectorXd {
        if (make_input) return make_input(xy);
        return xy;
    };

    Eigen::MatrixXd inputs(energy.input_dim(), n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d xy(grid.cell_x(i), grid.cell_y(i));
        inputs.col(i) = to_input(xy);
        grid.in_disk[i] = training_disk.contains(xy) ? 1 : 0;
    }
    const Eigen::MatrixXd out = policy_forward_batch(policy, inputs);
    parallel_for(n, threads, [&](int i) {
        const Eigen::VectorXd a = decode_angles(policy.encoding, out.col(i)).angles;
        const Eigen::VectorXd p = inputs.col(i);
        grid.energy[i] = energy.value(a, p);
        grid.pos_error[i] = energy.position_error(a, p);
    });
    return grid;
}

void write_landscape_csv(const std::string& path, const LandscapeGrid& grid) {
    CsvTable table;
    table.header = {"x", "y", "energy", "pos_error_m", "in_disk"};
    for (int i = 0; i < grid.cells(); ++i)
        table.rows.push_back({grid.cell_x(i), grid.cell_y(i), grid.energy[i],
                              grid.pos_error[i], grid.in_disk[i] ? 1.0 : 0.0});
    write_csv(path, table);
}

LandscapeGrid read_landscape_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"x", "y", "energy", "pos_error_m", "in_disk"})
        throw std::runtime_error("read_landscape_csv: unexpected header in " + path);
    LandscapeGrid grid;
    const int n = static_cast<int>(table.rows.size());
    if (n == 0) throw std::runtime_error("read_landscape_csv: empty grid in " + path);
    // Recover the grid shape from the row layout (x fastest).
    int nx = 1;
    while (nx < n && table.rows[nx][1] == table.rows[0][1]) ++nx;
    grid.nx = nx;
    grid.ny = n / nx;
    if (grid.nx * grid.ny != n)
        throw std::runtime_error("read_landscape_csv: ragged grid in " + path);
    const double dx = grid.nx > 1 ? table.rows[1][0] - table.rows[0][0] : 0.0;
    const double dy = grid.ny > 1 ? table.rows[nx][1] - table.rows[0][1] : 0.0;
    grid.x0 = table.rows[0][0] - 0.5 * dx;
    grid.y0 = table.rows[0][1] - 0.5 * dy;
    grid.x1 = grid.x0 + dx * grid.nx;
    grid.y1 = grid.y0 + dy * grid.ny;
    for (const auto& row : table.rows) {
        grid.energy.push_back(row[2]);
        grid.pos_error.push_back(row[3]);
        grid.in_disk.push_back(row[4] != 0.0 ? 1 : 0);
    }
    return grid;
}

WarmStartReport warm_start_benchmark(const InitProvider& init_fn, const SampleSet& test,
                                     const EnergyModel& energy, const SolveOptions& opts) {
    if (test.points.empty())
        throw std::invalid_argument("warm_start_benchmark: empty test set");
    WarmStartReport report;
    report.pairs.resize(test.points.size());
    using clock = std::chrono::steady_clock;

    for (std::size_t i = 0; i < test.points.size(); ++i) {
        const Eigen::VectorXd& p = test.points[i];
        WarmStartPair& pair = report.pairs[i];
        try {
            const auto t0 = clock::now();
            const SolveReport warm = solve(energy, init_fn(p), p, opts);
            pair.warm_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            pair.warm_iters = warm.iterations;
            pair.warm_error = warm.position_error;
        } catch (const SolverSingularError&) {
            pair.warm_failed = true;
        }
        try {
            const auto t0 = clock::now();
            const SolveReport cold = solve(energy, energy.default_init(p), p, opts);
            pair.cold_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            pair.cold_iters = cold.iterations;
            pair.cold_error = cold.position_error;
        } catch (const SolverSingularError&) {
            pair.cold_failed = true;
        }
    }

    long n_ok = 0;
    for (const auto& pair : report.pairs) {
        if (pair.warm_failed || pair.cold_failed) {
            ++report.failures;
            continue;
        }
        ++n_ok;
        report.mean_warm_iters += pair.warm_iters;
        report.mean_cold_iters += pair.cold_iters;
        report.mean_warm_ms += pair.warm_ms;
        report.mean_cold_ms += pair.cold_ms;
        report.mean_warm_error += pair.warm_error;
        report.mean_cold_error += pair.cold_error;
    }
    if (n_ok > 0) {
        report.mean_warm_iters /= n_ok;
        report.mean_cold_iters /= n_ok;
        report.mean_warm_ms /= n_ok;
        report.mean_cold_ms /= n_ok;
        report.mean_warm_error /= n_ok;
        report.mean_cold_error /= n_ok;
    }
    report.iter_ratio = report.mean_cold_iters > 0.0
                            ? report.mean_warm_iters / report.mean_cold_iters
                            : 0.0;
    return report;
}

WarmStartReport warm_start_benchmark(const PolicyNet& policy, const SampleSet& test,
                                     const EnergyModel& energy, const SolveOptions& opts) {
    return warm_start_benchmark(
        [&policy](const Eigen::VectorXd& p) {
            return decode_angles(policy.encoding, policy_forward(policy, p)).angles;
        },
        test, energy, opts);
}

void write_warm_start_csv(const std::string& path, const WarmStartReport& report) {
    CsvTable table;
    table.header = {"index",   "warm_iters", "cold_iters", "warm_ms", "cold_ms",
                    "warm_err", "cold_err",  "warm_failed", "cold_failed"};
    for (std::size_t i = 0; i < report.pairs.size(); ++i) {
        const auto& pair = report.pairs[i];
        table.rows.push_back({static_cast<double>(i), static_cast<double>(pair.warm_iters),
                              static_cast<double>(pair.cold_iters), pair.warm_ms,
                              pair.cold_ms, pair.warm_error, pair.cold_error,
                              pair.warm_failed ? 1.0 : 0.0, pair.cold_failed ? 1.0 : 0.0});
    }
    write_csv(path, table);
}

}  // namespace manifold
