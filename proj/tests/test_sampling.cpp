#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "manifold/csv.hpp"
#include "manifold/rng.hpp"
#include "manifold/sampling.hpp"
#include "test_util.hpp"

using namespace manifold;
constexpr double kPi = std::numbers::pi;

namespace {

IkEnergy pure_ik() {
    IkEnergyParams params;
    params.a_ref = Eigen::Vector2d::Zero();
    params.w_ref = 0.0;
    params.w_temp = 0.0;
    return IkEnergy(ChainSpec({0.15, 0.15}), params);
}

}  // namespace

TEST_CASE("uniform sampling stays in the domain and is seed-deterministic") {
    const SampleDomain disk = SampleDomain::disk(Eigen::Vector2d::Zero(), 0.25);
    std::mt19937_64 rng_a(7), rng_b(7);

    CHECK(sample_uniform(disk, 0, rng_a).points.empty());

    const SampleSet a = sample_uniform(disk, 500, rng_a);
    const SampleSet b = sample_uniform(disk, 500, rng_b);
    REQUIRE(a.points.size() == 500);
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(a.points[i].norm() <= 0.25);
        CHECK((a.points[i] - b.points[i]).norm() == 0.0);
    }

    const SampleDomain box =
        SampleDomain::box(Eigen::Vector3d(-1.0, 0.0, 2.0), Eigen::Vector3d(1.0, 2.0, 3.0));
    std::mt19937_64 rng_c(9);
    for (const auto& p : sample_uniform(box, 200, rng_c).points) CHECK(box.contains(p));
}

TEST_CASE("poisson-disk spacing holds exhaustively and the count lands in the pinned band") {
    const SampleDomain disk = SampleDomain::disk(Eigen::Vector2d::Zero(), 0.25);

    // Spacing exceeding the diameter leaves exactly one point.
    std::mt19937_64 rng_wide(3);
    CHECK(poisson_disk_sample(disk, 0.6, rng_wide).points.size() == 1);

    std::mt19937_64 rng(7);
    const SampleSet set = poisson_disk_sample(disk, 0.02, rng);
    REQUIRE(set.pds_radius.has_value());
    CHECK(*set.pds_radius == doctest::Approx(0.01));
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        CHECK(set.points[i].norm() <= 0.25);
        for (std::size_t j = i + 1; j < set.points.size(); ++j)
            REQUIRE((set.points[i] - set.points[j]).norm() >= 0.02 - 1e-12);
    }

    // Density band pinned against the non-overlapping-disc packing bound.
    const double area = kPi * 0.25 * 0.25;
    const double bound = area / (kPi * 0.01 * 0.01);
    const double ratio = static_cast<double>(set.points.size()) / bound;
    CHECK(ratio > 0.5);
    CHECK(ratio < 0.9);
}

TEST_CASE("fixed-count poisson sampling returns exactly n points with spacing intact") {
    const SampleDomain disk = SampleDomain::disk(Eigen::Vector2d::Zero(), 0.25);
    std::mt19937_64 rng(13);
    const SampleSet set = poisson_disk_fixed_count(disk, 500, rng);
    REQUIRE(set.points.size() == 500);
    const double spacing = 2.0 * set.pds_radius.value();
    for (std::size_t i = 0; i < set.points.size(); ++i)
        for (std::size_t j = i + 1; j < set.points.size(); ++j)
            REQUIRE((set.points[i] - set.points[j]).norm() >= spacing - 1e-12);
}

TEST_CASE("dynamic resampling advances with the rng but replays under the same seed") {
    const SampleDomain disk = SampleDomain::disk(Eigen::Vector2d::Zero(), 0.25);
    std::mt19937_64 rng(21);
    const SampleSet first = resample_dynamic(disk, 100, rng);
    const SampleSet second = resample_dynamic(disk, 100, rng);
    bool all_equal = true;
    for (std::size_t i = 0; i < first.points.size(); ++i)
        if ((first.points[i] - second.points[i]).norm() > 0.0) all_equal = false;
    CHECK_FALSE(all_equal);

    std::mt19937_64 replay(21);
    const SampleSet again = resample_dynamic(disk, 100, replay);
    for (std::size_t i = 0; i < first.points.size(); ++i)
        CHECK((first.points[i] - again.points[i]).norm() == 0.0);
    for (const auto& p : second.points) CHECK(disk.contains(p));
}

TEST_CASE("seed selection takes the lowest-energy candidate") {
    const IkEnergy energy = pure_ik();
    const PolicyNet net = make_policy(2, 2, Encoding::SinCos, {16, 16}, 77);

    SampleSet single;
    single.points.push_back(Eigen::Vector2d(0.1, 0.05));
    CHECK((select_seed(single, net, energy) - single.points[0]).norm() == 0.0);

    // Plant one candidate exactly at the FK image of the decoded default
    // output: its energy is zero, so it must win.
    const Eigen::Vector2d probe(0.05, 0.02);
    SampleSet pair;
    pair.points.push_back(Eigen::Vector2d(-0.2, 0.1));
    const Eigen::VectorXd decoded =
        decode_angles(net.encoding, policy_forward(net, probe)).angles;
    const Eigen::Vector2d winner = forward_kinematics(energy.chain(), decoded);
    pair.points.push_back(winner);
    CHECK((select_seed(pair, net, energy) - winner).norm() < 1e-12);

    SampleSet empty;
    CHECK_THROWS_AS(select_seed(empty, net, energy), std::invalid_argument);
}

TEST_CASE("incremental expansion appends nearest-first, verified by a sort oracle") {
    SampleSet current;
    current.points.push_back(Eigen::VectorXd::Constant(1, 0.0));

    SampleSet pool;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    for (int i = 0; i < 40; ++i)
        pool.points.push_back(Eigen::VectorXd::Constant(1, dist(rng)));

    const int k = 7;
    const SampleSet grown =
        incremental_expand(current, pool, k, current.points[0], 1000);
    REQUIRE(grown.points.size() == 1 + k);

    // Brute-force oracle: sort pool by distance to the original point.
    std::vector<double> dists;
    for (const auto& p : pool.points) dists.push_back(std::abs(p[0]));
    std::sort(dists.begin(), dists.end());
    for (int i = 0; i < k; ++i)
        CHECK(std::abs(grown.points[1 + i][0]) <= dists[k - 1] + 1e-12);

    // Cap respected; whole pool appended when k exceeds it.
    const SampleSet capped = incremental_expand(current, pool, 1000, current.points[0], 5);
    CHECK(capped.points.size() == 5);
    const SampleSet all = incremental_expand(current, pool, 1000, current.points[0], 10000);
    CHECK(all.points.size() == 1 + pool.points.size());

    SampleSet empty_pool;
    CHECK_THROWS_AS(incremental_expand(current, empty_pool, 1, current.points[0], 10),
                    std::invalid_argument);
}

TEST_CASE("conflict detection on an empty dataset is empty") {
    const IkEnergy energy = pure_ik();
    const ConflictReport report =
        detect_conflicts({}, {}, 0.05, position_error_metric(energy), 5e-3);
    CHECK(report.metric.empty());
    CHECK(report.rejected.empty());
}

TEST_CASE("adjacent elbow-up and elbow-down labels are both rejected") {
    const IkEnergy energy = pure_ik();
    const double l = 0.15;

    // Two close targets labeled on opposite branches; the circular-mean blend
    // misses the averaged target by far more than epsilon.
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    const Eigen::Vector2d pa(0.2, 0.1), pb(0.205, 0.095);
    inputs.push_back(pa);
    inputs.push_back(pb);
    targets.push_back(testutil::two_link_ik(l, l, pa, true));
    targets.push_back(testutil::two_link_ik(l, l, pb, false));

    // Fill the neighbourhood-free far field with consistent labels so the
    // average metric stays low.
    std::mt19937_64 rng(41);
    for (int i = 0; i < 60; ++i) {
        const Eigen::Vector2d p =
            Eigen::Vector2d(0.12, -0.12) +
            0.05 * Eigen::Vector2d(testutil::random_vector(rng, 2, -1.0, 1.0));
        inputs.push_back(p);
        targets.push_back(testutil::two_link_ik(l, l, p, true));
    }

    const ConflictReport report =
        detect_conflicts(inputs, targets, 0.02, position_error_metric(energy), 5e-3);
    CHECK(report.rejected_mask[0]);
    CHECK(report.rejected_mask[1]);

    // The planted pair is a real conflict: interpolating the two branches
    // misses the averaged target.
    const Eigen::VectorXd t_up = targets[0], t_dn = targets[1];
    Eigen::VectorXd blend(2);
    for (int i = 0; i < 2; ++i)
        blend[i] = std::atan2(0.5 * (std::sin(t_up[i]) + std::sin(t_dn[i])),
                              0.5 * (std::cos(t_up[i]) + std::cos(t_dn[i])));
    const double miss =
        (forward_kinematics(energy.chain(), blend) - 0.5 * (pa + pb)).norm();
    CHECK(miss > 0.05);
}

TEST_CASE("consistent same-branch labels are kept") {
    const IkEnergy energy = pure_ik();
    const double l = 0.15;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    // Five nearby samples, all elbow-up.
    for (int i = 0; i < 5; ++i) {
        const Eigen::Vector2d p(0.18 + 0.004 * i, 0.09 - 0.003 * i);
        inputs.push_back(p);
        targets.push_back(testutil::two_link_ik(l, l, p, true));
    }
    const ConflictReport report =
        detect_conflicts(inputs, targets, 0.02, position_error_metric(energy), 5e-3);
    CHECK(report.rejected.empty());
    for (double d : report.metric) CHECK(d < 5e-3);
}

TEST_CASE("conflict flags are permutation-equivariant") {
    const IkEnergy energy = pure_ik();
    const double l = 0.15;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    std::mt19937_64 rng(47);
    for (int i = 0; i < 40; ++i) {
        Eigen::Vector2d p;
        do {
            p = Eigen::Vector2d(testutil::random_vector(rng, 2, -0.25, 0.25));
        } while (p.norm() > 0.25 || p.norm() < 0.02);
        inputs.push_back(p);
        targets.push_back(testutil::two_link_ik(l, l, p, p.y() > 0.0));
    }
    const ConflictReport base =
        detect_conflicts(inputs, targets, 0.06, position_error_metric(energy), 5e-3);

    std::vector<int> perm(inputs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Eigen::VectorXd> pin(inputs.size()), ptar(inputs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        pin[i] = inputs[perm[i]];
        ptar[i] = targets[perm[i]];
    }
    const ConflictReport shuffled =
        detect_conflicts(pin, ptar, 0.06, position_error_metric(energy), 5e-3);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(static_cast<bool>(shuffled.rejected_mask[i]) ==
              static_cast<bool>(base.rejected_mask[perm[i]]));
}

TEST_CASE("rejection lowers the surviving average on the planted elbow fixture") {
    const IkEnergy energy = pure_ik();
    const double l = 0.15;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    std::mt19937_64 rng(53);
    SampleSet set = poisson_disk_fixed_count(
        SampleDomain::disk(Eigen::Vector2d::Zero(), 0.25), 256, rng);
    for (const auto& p : set.points) {
        inputs.push_back(p);
        targets.push_back(testutil::two_link_ik(l, l, p, p.y() > 0.0));
    }
    const double radius = 4.0 * set.pds_radius.value();
    const auto metric = position_error_metric(energy);
    const ConflictReport report = detect_conflicts(inputs, targets, radius, metric, 5e-3);
    REQUIRE(!report.rejected.empty());

    std::vector<Eigen::VectorXd> surv_in, surv_t;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!report.rejected_mask[i]) {
            surv_in.push_back(inputs[i]);
            surv_t.push_back(targets[i]);
        }
    }
    REQUIRE(!surv_in.empty());
    const ConflictReport after = detect_conflicts(surv_in, surv_t, radius, metric, 5e-3);
    CHECK(after.metric_avg <= report.metric_avg + 1e-12);
}

TEST_CASE("position error metric is zero exactly on solutions") {
    const IkEnergy energy = pure_ik();
    const auto metric = position_error_metric(energy);
    const Eigen::Vector2d p(0.2, 0.05);
    const Eigen::VectorXd q = testutil::two_link_ik(0.15, 0.15, p, true);
    CHECK(metric(p, q) < 1e-9);

    // Elbow-flip midpoint misses by a large margin relative to epsilon.
    const Eigen::VectorXd q_up = testutil::two_link_ik(0.15, 0.15, p, true);
    const Eigen::VectorXd q_dn = testutil::two_link_ik(0.15, 0.15, p, false);
    Eigen::VectorXd mid(2);
    for (int i = 0; i < 2; ++i)
        mid[i] = std::atan2(0.5 * (std::sin(q_up[i]) + std::sin(q_dn[i])),
                            0.5 * (std::cos(q_up[i]) + std::cos(q_dn[i])));
    CHECK(metric(p, mid) > 10.0 * 5e-3);
}

TEST_CASE("sample sets and conflict reports export to CSV") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "manifold_sampling_csv";
    fs::create_directories(dir);

    SampleSet set;
    set.points.push_back(Eigen::Vector2d(0.1, 0.2));
    set.points.push_back(Eigen::Vector2d(-0.05, 0.0));
    const std::string sp = (dir / "samples.csv").string();
    write_sample_set_csv(sp, set);
    const CsvTable table = read_csv(sp);
    CHECK(table.header == std::vector<std::string>{"index", "p0", "p1"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1][1] == doctest::Approx(-0.05));

    const IkEnergy energy = pure_ik();
    std::vector<Eigen::VectorXd> inputs{Eigen::Vector2d(0.1, 0.1)};
    std::vector<Eigen::VectorXd> targets{testutil::two_link_ik(0.15, 0.15, inputs[0], true)};
    const ConflictReport report =
        detect_conflicts(inputs, targets, 0.02, position_error_metric(energy), 5e-3);
    const std::string cp = (dir / "conflicts.csv").string();
    write_conflict_csv(cp, inputs, targets, report);
    const CsvTable ct = read_csv(cp);
    CHECK(ct.header ==
          std::vector<std::string>{"index", "p0", "p1", "t0", "t1", "D", "rejected"});
    REQUIRE(ct.rows.size() == 1);
    fs::remove_all(dir);
}
