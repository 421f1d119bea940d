#include "manifold/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "manifold/csv.hpp"

namespace manifold {

// ---------------------------------------------------------------------------
// Domain

SampleDomain SampleDomain::disk(const Eigen::Vector2d& center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("SampleDomain: radius must be positive");
    SampleDomain d;
    d.is_disk_ = true;
    d.dim_ = 2;
    d.center_ = center;
    d.radius_ = radius;
    d.lower_ = center.array() - radius;
    d.upper_ = center.array() + radius;
    return d;
}

SampleDomain SampleDomain::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw std::invalid_argument("SampleDomain: bound size mismatch");
    if (((upper - lower).array() <= 0.0).any())
        throw std::invalid_argument("SampleDomain: lower must be < upper componentwise");
    SampleDomain d;
    d.is_disk_ = false;
    d.dim_ = static_cast<int>(lower.size());
    d.lower_ = lower;
    d.upper_ = upper;
    return d;
}

bool SampleDomain::contains(const Eigen::VectorXd& point) const {
    if (point.size() != dim_) return false;
    if (is_disk_) return (Eigen::Vector2d(point) - center_).norm() <= radius_;
    return (point.array() >= lower_.array()).all() && (point.array() <= upper_.array()).all();
}

Eigen::VectorXd SampleDomain::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (is_disk_) {
        // Rejection from the bounding square.
        while (true) {
            Eigen::Vector2d p(center_.x() + radius_ * (2.0 * unit(rng) - 1.0),
                              center_.y() + radius_ * (2.0 * unit(rng) - 1.0));
            if ((p - center_).norm() <= radius_) return p;
        }
    }
    Eigen::VectorXd p(dim_);
    for (int i = 0; i < dim_; ++i)
        p[i] = lower_[i] + (upper_[i] - lower_[i]) * unit(rng);
    return p;
}

SampleSet sample_uniform(const SampleDomain& domain, int n, std::mt19937_64& rng) {
    if (n < 0) throw std::invalid_argument("sample_uniform: n must be >= 0");
    SampleSet set;
    set.points.reserve(n);
    for (int i = 0; i < n; ++i) set.points.push_back(domain.sample(rng));
    return set;
}

// ---------------------------------------------------------------------------
// Poisson-disk sampling (Bridson dart throwing on a background grid)

namespace {

struct CellKey {
    std::vector<int> coords;
    bool operator==(const CellKey& other) const { return coords == other.coords; }
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const {
        std::size_t h = 1469598103934665603ULL;
        for (int c : k.coords) {
            h ^= static_cast<std::size_t>(static_cast<unsigned>(c));
            h *= 1099511628211ULL;
        }
        return h;
    }
};

class BackgroundGrid {
public:
    BackgroundGrid(const Eigen::VectorXd& origin, double cell) : origin_(origin), cell_(cell) {}

    CellKey key_for(const Eigen::VectorXd& p) const {
        CellKey k;
        k.coords.resize(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i)
            k.coords[i] = static_cast<int>(std::floor((p[i] - origin_[i]) / cell_));
        return k;
    }

    void insert(const Eigen::VectorXd& p, int index) { cells_[key_for(p)].push_back(index); }

    // Visits point indices in cells within `reach` cells of p along each axis.
    template <typename Fn>
    void visit_near(const Eigen::VectorXd& p, int reach, Fn&& fn) const {
        const CellKey base = key_for(p);
        const int dim = static_cast<int>(base.coords.size());
        CellKey probe = base;
        std::vector<int> offset(dim, -reach);
        while (true) {
            for (int i = 0; i < dim; ++i) probe.coords[i] = base.coords[i] + offset[i];
            auto it = cells_.find(probe);
            if (it != cells_.end())
                for (int idx : it->second) fn(idx);
            int axis = 0;
            while (axis < dim && ++offset[axis] > reach) offset[axis++] = -reach;
            if (axis == dim) break;
        }
    }

private:
    Eigen::VectorXd origin_;
    double cell_;
    std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
};

Eigen::VectorXd random_annulus_point(const Eigen::VectorXd& around, double spacing,
                                     std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd dir(around.size());
    do {
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = gauss(rng);
    } while (dir.norm() < 1e-12);
    dir.normalize();
    const double r = spacing * (1.0 + unit(rng));
    return around + r * dir;
}

}  // namespace

namespace {

// Bridson core shared by the from-scratch and fill variants. `anchors` seeds
// the exclusion structure and the active list; only newly placed points are
// returned.
SampleSet bridson(const SampleDomain& domain, double spacing,
                  const std::vector<Eigen::VectorXd>& anchors, std::mt19937_64& rng,
                  int k_attempts) {
    if (!(spacing > 0.0))
        throw std::invalid_argument("poisson_disk_sample: spacing must be positive");
    const int dim = domain.dimension();
    const double cell = spacing / std::sqrt(static_cast<double>(dim));
    const int reach = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim))));
    BackgroundGrid grid(domain.box_lower(), cell);

    std::vector<Eigen::VectorXd> all;
    std::vector<int> active;
    for (const auto& p : anchors) {
        const int idx = static_cast<int>(all.size());
        all.push_back(p);
        grid.insert(p, idx);
        active.push_back(idx);
    }

    SampleSet set;
    set.pds_radius = 0.5 * spacing;
    if (anchors.empty()) {
        const Eigen::VectorXd first = domain.sample(rng);
        all.push_back(first);
        grid.insert(first, 0);
        active.push_back(0);
        set.points.push_back(first);
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (!active.empty()) {
        const std::size_t pick =
            std::min<std::size_t>(active.size() - 1,
                                  static_cast<std::size_t>(unit(rng) * active.size()));
        const int around = active[pick];
        bool placed = false;
        for (int attempt = 0; attempt < k_attempts; ++attempt) {
            const Eigen::VectorXd candidate =
                random_annulus_point(all[around], spacing, rng);
            if (!domain.contains(candidate)) continue;
            bool clear = true;
            grid.visit_near(candidate, reach, [&](int idx) {
                if (clear && (all[idx] - candidate).norm() < spacing) clear = false;
            });
            if (!clear) continue;
            const int new_index = static_cast<int>(all.size());
            all.push_back(candidate);
            grid.insert(candidate, new_index);
            active.push_back(new_index);
            set.points.push_back(candidate);
            placed = true;
            break;
        }
        if (!placed) {
            active[pick] = active.back();
            active.pop_back();
        }
    }
    return set;
}

}  // namespace

SampleSet poisson_disk_sample(const SampleDomain& domain, double spacing,
                              std::mt19937_64& rng, int k_attempts) {
    return bridson(domain, spacing, {}, rng, k_attempts);
}

SampleSet poisson_disk_fill(const SampleDomain& domain, double spacing,
                            const std::vector<Eigen::VectorXd>& existing,
                            std::mt19937_64& rng, int k_attempts) {
    if (existing.empty())
        throw std::invalid_argument("poisson_disk_fill: existing set must not be empty");
    return bridson(domain, spacing, existing, rng, k_attempts);
}

SampleSet poisson_disk_fixed_count(const SampleDomain& domain, int n,
                                   std::mt19937_64& rng, double spacing_hint) {
    if (n < 1) throw std::invalid_argument("poisson_disk_fixed_count: n must be >= 1");
    const int dim = domain.dimension();
    double volume;
    if (domain.is_disk()) {
        volume = std::numbers::pi * domain.disk_radius() * domain.disk_radius();
    } else {
        volume = (domain.box_upper() - domain.box_lower()).prod();
    }
    // Empirical Bridson fill factor; the retry loop below absorbs the error.
    const double fill = dim == 2 ? 0.72 : 0.5;
    double spacing = spacing_hint > 0.0
                         ? spacing_hint
                         : std::pow(fill * volume / n, 1.0 / dim);
    for (int tries = 0; tries < 64; ++tries) {
        SampleSet set = poisson_disk_sample(domain, spacing, rng);
        if (static_cast<int>(set.points.size()) >= n) {
            set.points.resize(n);
            set.pds_radius = 0.5 * spacing;
            return set;
        }
        spacing *= 0.93;
    }
    throw std::runtime_error("poisson_disk_fixed_count: could not reach requested count");
}

SampleSet resample_dynamic(const SampleDomain& domain, int m, std::mt19937_64& rng,
                           bool use_pds, double spacing_hint) {
    if (use_pds) return poisson_disk_fixed_count(domain, m, rng, spacing_hint);
    return sample_uniform(domain, m, rng);
}

// ---------------------------------------------------------------------------
// Seed selection and incremental growth

Eigen::VectorXd select_seed(const SampleSet& candidates, const PolicyNet& policy,
                            const EnergyModel& energy) {
    if (candidates.points.empty())
        throw std::invalid_argument("select_seed: empty candidate set");
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < candidates.points.size(); ++i) {
        const Eigen::VectorXd& p = candidates.points[i];
        const Eigen::VectorXd a =
            decode_angles(policy.encoding, policy_forward(policy, p)).angles;
        const double e = energy.value(a, p);
        if (e < best) {
            best = e;
            best_idx = i;
        }
    }
    return candidates.points[best_idx];
}

SampleSet incremental_expand(const SampleSet& current, const SampleSet& pool, int k,
                             const Eigen::VectorXd& seed_point, int m_max) {
    if (k < 1) throw std::invalid_argument("incremental_expand: k must be >= 1");
    if (pool.points.empty()) throw std::invalid_argument("incremental_expand: empty pool");
    SampleSet out = current;
    if (static_cast<int>(out.points.size()) >= m_max) return out;

    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(pool.points.size());
    for (std::size_t i = 0; i < pool.points.size(); ++i) {
        double d;
        if (out.points.empty()) {
            d = (pool.points[i] - seed_point).norm();
        } else {
            d = std::numeric_limits<double>::infinity();
            for (const auto& q : out.points)
                d = std::min(d, (pool.points[i] - q).norm());
        }
        ranked.emplace_back(d, static_cast<int>(i));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const int room = m_max - static_cast<int>(out.points.size());
    const int take = std::min({k, room, static_cast<int>(ranked.size())});
    for (int i = 0; i < take; ++i) out.points.push_back(pool.points[ranked[i].second]);
    return out;
}

// ---------------------------------------------------------------------------
// Conflict detection

std::vector<std::vector<int>> fixed_radius_neighbors(
    const std::vector<Eigen::VectorXd>& points, double radius, int brute_force_cutoff) {
    const int n = static_cast<int>(points.size());
    std::vector<std::vector<int>> neighbors(n);
    if (n == 0) return neighbors;
    if (!(radius > 0.0))
        throw std::invalid_argument("fixed_radius_neighbors: radius must be positive");

    if (n <= brute_force_cutoff) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if ((points[i] - points[j]).norm() <= radius) neighbors[i].push_back(j);
        return neighbors;
    }

    const int dim = static_cast<int>(points[0].size());
    Eigen::VectorXd origin = points[0];
    for (const auto& p : points) origin = origin.cwiseMin(p);
    const double cell = radius / std::sqrt(static_cast<double>(dim));
    const int reach = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim))));
    BackgroundGrid grid(origin, cell);
    for (int i = 0; i < n; ++i) grid.insert(points[i], i);
    for (int i = 0; i < n; ++i) {
        grid.visit_near(points[i], reach, [&](int j) {
            if ((points[i] - points[j]).norm() <= radius) neighbors[i].push_back(j);
        });
        std::sort(neighbors[i].begin(), neighbors[i].end());
    }
    return neighbors;
}

ConflictReport detect_conflicts(const std::vector<Eigen::VectorXd>& inputs,
                                const std::vector<Eigen::VectorXd>& target_angles,
                                double search_radius, const ConflictMetric& metric,
                                double epsilon) {
    if (inputs.size() != target_angles.size())
        throw std::invalid_argument("detect_conflicts: inputs/targets size mismatch");
    ConflictReport report;
    const int n = static_cast<int>(inputs.size());
    if (n == 0) return report;

    const auto neighbors = fixed_radius_neighbors(inputs, search_radius);
    report.metric.resize(n);
    for (int m = 0; m < n; ++m) {
        const auto& nbrs = neighbors[m];
        Eigen::VectorXd p_avg = Eigen::VectorXd::Zero(inputs[m].size());
        for (int j : nbrs) p_avg += inputs[j];
        p_avg /= static_cast<double>(nbrs.size());

        // Circular mean per angle channel; a vanishing resultant decodes to 0.
        const Eigen::Index adim = target_angles[m].size();
        Eigen::VectorXd t_avg(adim);
        for (Eigen::Index i = 0; i < adim; ++i) {
            double s = 0.0, c = 0.0;
            for (int j : nbrs) {
                s += std::sin(target_angles[j][i]);
                c += std::cos(target_angles[j][i]);
            }
            t_avg[i] = (std::hypot(s, c) < 1e-9) ? 0.0 : std::atan2(s, c);
        }
        report.metric[m] = metric(p_avg, t_avg);
    }
    report.metric_avg =
        std::accumulate(report.metric.begin(), report.metric.end(), 0.0) / n;

    report.rejected_mask.assign(n, 0);
    for (int m = 0; m < n; ++m) {
        if (report.metric[m] > report.metric_avg + epsilon) {
            report.rejected_mask[m] = 1;
            for (int j : neighbors[m]) report.rejected_mask[j] = 1;
        }
    }
    for (int m = 0; m < n; ++m)
        if (report.rejected_mask[m]) report.rejected.push_back(m);
    return report;
}

ConflictMetric position_error_metric(const EnergyModel& energy) {
    return [&energy](const Eigen::VectorXd& p_avg, const Eigen::VectorXd& t_avg) {
        return energy.position_error(t_avg, p_avg);
    };
}

// ---------------------------------------------------------------------------
// CSV export

void write_sample_set_csv(const std::string& path, const SampleSet& set) {
    CsvTable table;
    const int dim = set.points.empty() ? 0 : static_cast<int>(set.points[0].size());
    table.header.push_back("index");
    for (int i = 0; i < dim; ++i) table.header.push_back("p" + std::to_string(i));
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        std::vector<double> row;
        row.push_back(static_cast<double>(i));
        for (int j = 0; j < dim; ++j) row.push_back(set.points[i][j]);
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

void write_conflict_csv(const std::string& path,
                        const std::vector<Eigen::VectorXd>& inputs,
                        const std::vector<Eigen::VectorXd>& target_angles,
                        const ConflictReport& report) {
    CsvTable table;
    const int pdim = inputs.empty() ? 0 : static_cast<int>(inputs[0].size());
    const int tdim = target_angles.empty() ? 0 : static_cast<int>(target_angles[0].size());
    table.header.push_back("index");
    for (int i = 0; i < pdim; ++i) table.header.push_back("p" + std::to_string(i));
    for (int i = 0; i < tdim; ++i) table.header.push_back("t" + std::to_string(i));
    table.header.push_back("D");
    table.header.push_back("rejected");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::vector<double> row;
        row.push_back(static_cast<double>(i));
        for (int j = 0; j < pdim; ++j) row.push_back(inputs[i][j]);
        for (int j = 0; j < tdim; ++j) row.push_back(target_angles[i][j]);
        row.push_back(report.metric[i]);
        row.push_back(report.rejected_mask[i] ? 1.0 : 0.0);
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

}  // namespace manifold
