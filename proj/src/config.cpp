#include "manifold/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "manifold/rng.hpp"

namespace manifold {

namespace {

using nlohmann::json;

// Tracks which keys were consumed so leftovers can be reported with their
// JSON path.
class Section {
public:
    Section(json obj, std::string path) : obj_(std::move(obj)), path_(std::move(path)) {
        if (!obj_.is_object())
            throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!obj_.contains(key)) return fallback;
        try {
            return obj_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    json child(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key) ? obj_.at(key) : json::object();
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(path_ + ": unknown key \"" + it.key() + "\"");
    }

    const std::string& path() const { return path_; }

private:
    json obj_;
    std::string path_;
    std::set<std::string> seen_;
};

Eigen::VectorXd to_vector(const json& arr, const std::string& path) {
    if (!arr.is_array()) throw ConfigError(path + ": expected an array of numbers");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    return v;
}

Eigen::VectorXd limit_vector(Section& sec, const std::string& key, double fallback) {
    if (!sec.has(key)) return Eigen::VectorXd::Constant(1, fallback);
    const json val = sec.child(key);
    if (val.is_number()) return Eigen::VectorXd::Constant(1, val.get<double>());
    return to_vector(val, sec.path() + "." + key);
}

Strategy parse_strategy(const std::string& name, const std::string& path) {
    if (name == "bc") return Strategy::Bc;
    if (name == "dagger") return Strategy::Dagger;
    if (name == "em-static") return Strategy::EmStatic;
    if (name == "em-dynamic") return Strategy::EmDynamic;
    if (name == "em-incremental") return Strategy::EmIncremental;
    if (name == "em-incremental-reject") return Strategy::EmIncrementalReject;
    throw ConfigError(path + ": unknown strategy \"" + name + "\"");
}

int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ":" + std::to_string(line_of_offset(text, e.byte)) +
                          ": " + e.what());
    }

    ExperimentConfig cfg;
    Section top(root, origin);
    cfg.schema = top.get<int>("schema", 1);
    if (cfg.schema != 1)
        throw ConfigError(origin + ".schema: unsupported schema version " +
                          std::to_string(cfg.schema));
    cfg.seed = top.get<std::uint64_t>("seed", 1);
    cfg.output_dir = top.get<std::string>("output", ".");
    cfg.threads = top.get<int>("threads", 1);

    {
        Section problem(top.child("problem"), origin + ".problem");
        cfg.problem_type = problem.get<std::string>("type", "ik");
        if (cfg.problem_type != "ik" && cfg.problem_type != "kto")
            throw ConfigError(origin + ".problem.type: must be \"ik\" or \"kto\"");
        std::vector<double> lengths =
            problem.get<std::vector<double>>("link_lengths", {0.15, 0.15});
        std::vector<std::pair<double, double>> limits;
        if (problem.has("joint_limits")) {
            const json jl = problem.child("joint_limits");
            for (std::size_t i = 0; i < jl.size(); ++i) {
                if (!jl[i].is_array() || jl[i].size() != 2)
                    throw ConfigError(origin + ".problem.joint_limits: expected [lo, hi] pairs");
                limits.emplace_back(jl[i][0].get<double>(), jl[i][1].get<double>());
            }
        }
        try {
            cfg.chain = ChainSpec(lengths, limits);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(origin + ".problem: " + e.what());
        }
        if (problem.has("a_ref"))
            cfg.ik.a_ref = to_vector(problem.child("a_ref"), origin + ".problem.a_ref");
        else
            cfg.ik.a_ref = Eigen::VectorXd::Zero(cfg.chain.n_links());
        cfg.kto.horizon = problem.get<int>("horizon", 30);
        cfg.kto.dt = problem.get<double>("dt", 0.1);
        cfg.kto.vel_limit = limit_vector(problem, "vel_limit", 2.5);
        cfg.kto.acc_limit = limit_vector(problem, "acc_limit", 10.0);
        cfg.kto.jerk_limit = limit_vector(problem, "jerk_limit", 50.0);
        cfg.kto.limit_margin = problem.get<double>("limit_margin", 0.05);
        cfg.kto.barrier_stiffness = problem.get<double>("barrier_stiffness", 1.0);
        problem.finish();
    }

    {
        Section energy(top.child("energy"), origin + ".energy");
        if (cfg.problem_type == "ik") {
            cfg.ik.w_target = energy.get<double>("w_target", 1.0);
            cfg.ik.w_ref = energy.get<double>("w_ref", 1e-3);
            cfg.ik.w_temp = energy.get<double>("w_temp", 1e-3);
        } else {
            cfg.kto.w_target = energy.get<double>("w_target", 10.0);
            cfg.kto.w_reg = energy.get<double>("w_reg", 1e-4);
            cfg.kto.w_temp = energy.get<double>("w_temp", 1e-3);
            cfg.kto.w_vel = energy.get<double>("w_vel", 1e-2);
            cfg.kto.w_acc = energy.get<double>("w_acc", 1e-2);
            cfg.kto.w_jerk = energy.get<double>("w_jerk", 1e-2);
            cfg.kto.w_barrier = energy.get<double>("w_barrier", 1.0);
        }
        energy.finish();
    }

    {
        Section domain(top.child("domain"), origin + ".domain");
        const std::string kind = domain.get<std::string>("kind", "disk");
        if (kind == "disk") {
            cfg.domain_is_disk = true;
            const auto center = domain.get<std::vector<double>>("center", {0.0, 0.0});
            if (center.size() != 2)
                throw ConfigError(origin + ".domain.center: expected 2 entries");
            cfg.disk_center = Eigen::Vector2d(center[0], center[1]);
            cfg.disk_radius = domain.get<double>("radius", 0.25);
        } else if (kind == "box") {
            cfg.domain_is_disk = false;
            cfg.box_lower = to_vector(domain.child("lower"), origin + ".domain.lower");
            cfg.box_upper = to_vector(domain.child("upper"), origin + ".domain.upper");
        } else {
            throw ConfigError(origin + ".domain.kind: must be \"disk\" or \"box\"");
        }
        domain.finish();
    }

    {
        Section network(top.child("network"), origin + ".network");
        const std::string enc = network.get<std::string>("encoding", "sincos");
        if (enc == "sincos")
            cfg.train.encoding = Encoding::SinCos;
        else if (enc == "direct")
            cfg.train.encoding = Encoding::Direct;
        else
            throw ConfigError(origin + ".network.encoding: must be \"sincos\" or \"direct\"");
        cfg.train.hidden = network.get<std::vector<int>>("hidden", {512, 512});
        const std::string opt = network.get<std::string>("optimizer", "plain");
        if (opt == "plain")
            cfg.train.adaptive_optimizer = false;
        else if (opt == "adaptive")
            cfg.train.adaptive_optimizer = true;
        else
            throw ConfigError(origin + ".network.optimizer: must be \"plain\" or \"adaptive\"");
        cfg.train.alpha_l = network.get<double>("alpha_l", 1e-3);
        cfg.train.alpha_l_final = network.get<double>("alpha_l_final", 0.0);
        network.finish();
    }

    {
        Section strategy(top.child("strategy"), origin + ".strategy");
        cfg.train.strategy = parse_strategy(
            strategy.get<std::string>("name", "em-incremental-reject"),
            origin + ".strategy.name");
        cfg.train.samples = strategy.get<int>("samples", 500);
        cfg.train.label_steps = strategy.get<int>("label_steps", 100);
        cfg.train.inner_steps = strategy.get<int>("inner_steps", 8);
        cfg.train.budget_cap = strategy.get<long>("budget_cap", 0);
        cfg.train.theta_steps = strategy.get<long>("theta_steps", 0);
        cfg.train.alpha_a = strategy.get<double>("alpha_a", 1.0);
        cfg.train.epsilon = strategy.get<double>("epsilon", 5e-3);
        cfg.train.search_radius = strategy.get<double>("search_radius", 0.0);
        cfg.train.m_max = strategy.get<int>("m_max", 500);
        cfg.train.grow_k = strategy.get<int>("grow_k", 8);
        cfg.train.seed_batch = strategy.get<int>("seed_batch", 500);
        cfg.train.pds_spacing_hint = strategy.get<double>("pds_spacing", 0.0);
        cfg.train.first_order_targets = strategy.get<bool>("first_order_targets", false);
        cfg.train.target_line_search = strategy.get<bool>("target_line_search", true);
        strategy.finish();
    }

    {
        Section solver(top.child("solver"), origin + ".solver");
        cfg.solver.max_iters = solver.get<int>("max_iters", 100);
        cfg.solver.tol_grad = solver.get<double>("tol_grad", 1e-9);
        cfg.solver.tol_step = solver.get<double>("tol_step", 1e-12);
        cfg.solver.alpha_max = solver.get<double>("alpha_max", 1.0);
        solver.finish();
    }

    {
        Section eval(top.child("eval"), origin + ".eval");
        cfg.train.eval_cadence = eval.get<int>("cadence", 50);
        cfg.test_size = eval.get<int>("test_size", 500);
        cfg.test_sampling = eval.get<std::string>("test_sampling", "uniform");
        if (cfg.test_sampling != "uniform" && cfg.test_sampling != "pds")
            throw ConfigError(origin + ".eval.test_sampling: must be \"uniform\" or \"pds\"");
        eval.finish();
    }

    {
        Section land(top.child("landscape"), origin + ".landscape");
        cfg.landscape.x0 = land.get<double>("x0", -0.3);
        cfg.landscape.x1 = land.get<double>("x1", 0.3);
        cfg.landscape.y0 = land.get<double>("y0", -0.3);
        cfg.landscape.y1 = land.get<double>("y1", 0.3);
        cfg.landscape.nx = land.get<int>("nx", 100);
        cfg.landscape.ny = land.get<int>("ny", 100);
        land.finish();
    }

    top.finish();
    cfg.train.seed = cfg.seed;
    cfg.train.threads = cfg.threads;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::unique_ptr<EnergyModel> ExperimentConfig::make_energy() const {
    if (problem_type == "ik") return std::make_unique<IkEnergy>(chain, ik);
    KtoEnergyParams params = kto;
    return std::make_unique<KtoEnergy>(chain, params);
}

SampleDomain ExperimentConfig::make_domain() const {
    if (domain_is_disk) {
        if (problem_type != "ik")
            throw ConfigError("domain: disk domains apply to the ik problem only");
        return SampleDomain::disk(disk_center, disk_radius);
    }
    const SampleDomain d = SampleDomain::box(box_lower, box_upper);
    const int want = problem_type == "ik" ? 2 : chain.n_links() + 2;
    if (d.dimension() != want)
        throw ConfigError("domain: dimension " + std::to_string(d.dimension()) +
                          " does not match the problem input dimension " +
                          std::to_string(want));
    return d;
}

SampleSet ExperimentConfig::make_test_set() const {
    auto rng = make_rng(seed, "eval.testset");
    const SampleDomain domain = make_domain();
    if (test_sampling == "pds")
        return poisson_disk_fixed_count(domain, test_size, rng);
    return sample_uniform(domain, test_size, rng);
}

Eigen::VectorXd ExperimentConfig::landscape_input(const Eigen::Vector2d& xy) const {
    if (problem_type == "ik") return xy;
    Eigen::VectorXd p(chain.n_links() + 2);
    p.head(chain.n_links()) = ik.a_ref;
    p.tail<2>() = xy;
    return p;
}

}  // namespace manifold
