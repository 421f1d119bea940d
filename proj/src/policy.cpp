#include "manifold/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace manifold {

namespace {
constexpr char kMagic[8] = {'M', 'F', 'P', 'O', 'L', 'Y', '0', '1'};
}

std::vector<int> PolicyNet::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim());
    for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
    return sizes;
}

PolicyNet make_policy(int input_dim, int action_dim, Encoding encoding,
                      const std::vector<int>& hidden, std::uint64_t seed) {
    if (input_dim < 1 || action_dim < 1)
        throw std::invalid_argument("make_policy: dims must be positive");
    PolicyNet net;
    net.encoding = encoding;
    net.action_dim = action_dim;
    const int out_dim = encoding == Encoding::SinCos ? 2 * action_dim : action_dim;
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("make_policy: hidden sizes must be positive");
        sizes.push_back(h);
    }
    sizes.push_back(out_dim);

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
    return net;
}

namespace {

struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
    std::vector<Eigen::MatrixXd> act;   // act[0] = input, act[l+1] = layer l output
};

ForwardCache forward_cached(const PolicyNet& net, const Eigen::MatrixXd& P) {
    if (P.rows() != net.input_dim())
        throw std::invalid_argument("policy_forward: input dim mismatch");
    ForwardCache cache;
    cache.act.push_back(P);
    const std::size_t n_layers = net.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = (net.weights[l] * cache.act.back()).colwise() + net.biases[l];
        Eigen::MatrixXd a;
        if (l + 1 == n_layers)
            a = z.array().tanh();
        else
            a = z.array().max(0.0);
        cache.pre.push_back(std::move(z));
        cache.act.push_back(std::move(a));
    }
    return cache;
}

ParamGradient backprop(const PolicyNet& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& G) {
    const std::size_t n_layers = net.weights.size();
    ParamGradient grad;
    grad.dw.resize(n_layers);
    grad.db.resize(n_layers);
    // Output layer: tanh.
    Eigen::MatrixXd delta =
        (G.array() * (1.0 - cache.act.back().array().square())).matrix();
    for (std::size_t l = n_layers; l-- > 0;) {
        grad.dw[l].noalias() = delta * cache.act[l].transpose();
        grad.db[l] = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd up = net.weights[l].transpose() * delta;
        delta = (up.array() * (cache.pre[l - 1].array() > 0.0).cast<double>()).matrix();
    }
    return grad;
}

}  // namespace

Eigen::MatrixXd policy_forward_batch(const PolicyNet& net, const Eigen::MatrixXd& P) {
    if (P.rows() != net.input_dim())
        throw std::invalid_argument("policy_forward: input dim mismatch");
    Eigen::MatrixXd a = P;
    const std::size_t n_layers = net.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = (net.weights[l] * a).colwise() + net.biases[l];
        if (l + 1 == n_layers)
            a = z.array().tanh();
        else
            a = z.array().max(0.0);
    }
    return a;
}

Eigen::VectorXd policy_forward(const PolicyNet& net, const Eigen::VectorXd& p) {
    return policy_forward_batch(net, p);
}

DecodeResult decode_angles(Encoding encoding, const Eigen::VectorXd& out) {
    DecodeResult res;
    if (encoding == Encoding::Direct) {
        res.angles = out;
        return res;
    }
    if (out.size() % 2 != 0)
        throw std::invalid_argument("decode_angles: SinCos output must pair up");
    const Eigen::Index n = out.size() / 2;
    res.angles.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = out[2 * i], c = out[2 * i + 1];
        if (std::hypot(s, c) < 1e-6) {
            res.angles[i] = 0.0;
            res.degenerate = true;
        } else {
            res.angles[i] = std::atan2(s, c);
        }
    }
    return res;
}

Eigen::VectorXd encode_angles(Encoding encoding, const Eigen::VectorXd& angles) {
    if (encoding == Encoding::Direct) return angles;
    Eigen::VectorXd out(2 * angles.size());
    for (Eigen::Index i = 0; i < angles.size(); ++i) {
        out[2 * i] = std::sin(angles[i]);
        out[2 * i + 1] = std::cos(angles[i]);
    }
    return out;
}

ParamGradient supervised_grad(const PolicyNet& net, const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& T,
                              const std::vector<Eigen::MatrixXd>* weight_mats) {
    if (P.cols() != T.cols())
        throw std::invalid_argument("supervised_grad: batch size mismatch");
    if (T.rows() != net.output_dim())
        throw std::invalid_argument("supervised_grad: target dim mismatch");
    if (weight_mats) {
        if (net.encoding != Encoding::Direct)
            throw std::invalid_argument(
                "supervised_grad: weighted loss is only supported with Direct encoding");
        if (static_cast<Eigen::Index>(weight_mats->size()) != P.cols())
            throw std::invalid_argument("supervised_grad: one weight matrix per sample");
    }
    const Eigen::Index m = P.cols();
    ForwardCache cache = forward_cached(net, P);
    const Eigen::MatrixXd r = cache.act.back() - T;
    Eigen::MatrixXd g(net.output_dim(), m);
    double loss = 0.0;
    const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
        if (weight_mats) {
            const Eigen::MatrixXd& w = (*weight_mats)[c];
            if (w.rows() != r.rows() || w.cols() != r.rows())
                throw std::invalid_argument("supervised_grad: weight matrix dim mismatch");
            if (!w.isApprox(w.transpose(), 1e-9))
                throw std::invalid_argument("supervised_grad: weight matrix must be symmetric");
            const Eigen::VectorXd wr = w * r.col(c);
            loss += 0.5 * inv_m * r.col(c).dot(wr);
            g.col(c) = inv_m * wr;
        } else {
            loss += 0.5 * inv_m * r.col(c).squaredNorm();
            g.col(c) = inv_m * r.col(c);
        }
    }
    ParamGradient grad = backprop(net, cache, g);
    grad.loss = loss;
    return grad;
}

ParamGradient backprop_output_gradient(const PolicyNet& net, const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXd& G) {
    if (G.rows() != net.output_dim() || G.cols() != P.cols())
        throw std::invalid_argument("backprop_output_gradient: gradient dim mismatch");
    ForwardCache cache = forward_cached(net, P);
    return backprop(net, cache, G);
}

void PlainGd::apply_update(PolicyNet& net, const ParamGradient& grad, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("apply_update: alpha must be positive");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (!grad.dw[l].allFinite() || !grad.db[l].allFinite())
            throw std::invalid_argument("apply_update: non-finite gradient");
        net.weights[l] -= alpha * grad.dw[l];
        net.biases[l] -= alpha * grad.db[l];
    }
}

void AdamOptimizer::apply_update(PolicyNet& net, const ParamGradient& grad, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("apply_update: alpha must be positive");
    if (mw_.empty()) {
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            mw_.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            vw_.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            mb_.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
            vb_.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (!grad.dw[l].allFinite() || !grad.db[l].allFinite())
            throw std::invalid_argument("apply_update: non-finite gradient");
        mw_[l] = beta1_ * mw_[l] + (1.0 - beta1_) * grad.dw[l];
        vw_[l] = beta2_ * vw_[l] + (1.0 - beta2_) * grad.dw[l].array().square().matrix();
        mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * grad.db[l];
        vb_[l] = beta2_ * vb_[l] + (1.0 - beta2_) * grad.db[l].array().square().matrix();
        net.weights[l].array() -=
            alpha * (mw_[l].array() / bc1) / ((vw_[l].array() / bc2).sqrt() + eps_);
        net.biases[l].array() -=
            alpha * (mb_[l].array() / bc1) / ((vb_[l].array() / bc2).sqrt() + eps_);
    }
}

long param_count(const PolicyNet& net) {
    long n = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l)
        n += net.weights[l].size() + net.biases[l].size();
    return n;
}

namespace {
// Parameters are ordered layer by layer, weights (row-major) then bias.
std::pair<std::size_t, long> locate(const PolicyNet& net, long index) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const long block = net.weights[l].size() + net.biases[l].size();
        if (index < block) return {l, index};
        index -= block;
    }
    throw std::out_of_range("policy parameter index out of range");
}
}  // namespace

double get_param(const PolicyNet& net, long index) {
    auto [l, off] = locate(net, index);
    const long wsize = net.weights[l].size();
    if (off < wsize) {
        const long r = off / net.weights[l].cols(), c = off % net.weights[l].cols();
        return net.weights[l](r, c);
    }
    return net.biases[l](off - wsize);
}

void set_param(PolicyNet& net, long index, double value) {
    auto [l, off] = locate(net, index);
    const long wsize = net.weights[l].size();
    if (off < wsize) {
        const long r = off / net.weights[l].cols(), c = off % net.weights[l].cols();
        net.weights[l](r, c) = value;
    } else {
        net.biases[l](off - wsize) = value;
    }
}

double get_grad(const ParamGradient& grad, long index) {
    for (std::size_t l = 0; l < grad.dw.size(); ++l) {
        const long wsize = grad.dw[l].size();
        const long block = wsize + grad.db[l].size();
        if (index < block) {
            if (index < wsize) {
                const long r = index / grad.dw[l].cols(), c = index % grad.dw[l].cols();
                return grad.dw[l](r, c);
            }
            return grad.db[l](index - wsize);
        }
        index -= block;
    }
    throw std::out_of_range("gradient parameter index out of range");
}

namespace {
template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError("checkpoint truncated");
    return v;
}
}  // namespace

void save_policy(const PolicyNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, net.encoding == Encoding::SinCos ? 1u : 0u);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.action_dim));
    const auto sizes = net.layer_sizes();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Eigen::MatrixXd& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) write_pod<double>(out, w(r, c));
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            write_pod<double>(out, net.biases[l](i));
    }
    if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

PolicyNet load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("bad checkpoint magic: " + path);
    PolicyNet net;
    net.encoding = read_pod<std::uint32_t>(in) == 1u ? Encoding::SinCos : Encoding::Direct;
    net.action_dim = static_cast<int>(read_pod<std::uint32_t>(in));
    const auto n_sizes = read_pod<std::uint32_t>(in);
    if (n_sizes < 2 || n_sizes > 64) throw CheckpointError("implausible layer count");
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) s = static_cast<int>(read_pod<std::uint32_t>(in));
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_pod<double>(in);
        Eigen::VectorXd b(sizes[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = read_pod<double>(in);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

}  // namespace manifold
