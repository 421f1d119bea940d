#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace manifold {

enum class Encoding { Direct, SinCos };

// Fully connected net: rectifier hidden layers, tanh output. In SinCos mode
// the output carries an (s, c) channel pair per angle; Direct emits the
// angle channels themselves.
struct PolicyNet {
    Encoding encoding = Encoding::SinCos;
    int action_dim = 0;  // angles after decoding
    std::vector<Eigen::MatrixXd> weights;  // layer l: (size[l+1] x size[l])
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
    std::vector<int> layer_sizes() const;
};

// Fan-in-scaled uniform init, biases zero; deterministic in the seed.
PolicyNet make_policy(int input_dim, int action_dim, Encoding encoding,
                      const std::vector<int>& hidden, std::uint64_t seed);

Eigen::VectorXd policy_forward(const PolicyNet& net, const Eigen::VectorXd& p);
// Columns are instances: P is (input_dim x M), result (output_dim x M).
Eigen::MatrixXd policy_forward_batch(const PolicyNet& net, const Eigen::MatrixXd& P);

struct DecodeResult {
    Eigen::VectorXd angles;
    bool degenerate = false;  // some (s, c) pair was too short to orient
};

// SinCos: angle_i = atan2(s_i, c_i); pairs with norm < 1e-6 decode to 0 and
// set the degenerate flag. Direct: identity.
DecodeResult decode_angles(Encoding encoding, const Eigen::VectorXd& out);
Eigen::VectorXd encode_angles(Encoding encoding, const Eigen::VectorXd& angles);

struct ParamGradient {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
    double loss = 0.0;
};

// Mean weighted half-squared-error loss over the batch,
//   L = (1/M) sum_m 0.5 (y_m - t_m)^T W_m (y_m - t_m),
// with exact backprop. weight_mats, when given, must be symmetric and is
// only supported for Direct encoding; absent means identity (plain loss).
ParamGradient supervised_grad(const PolicyNet& net, const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& T,
                              const std::vector<Eigen::MatrixXd>* weight_mats = nullptr);

// Backprop of an arbitrary loss gradient G = dL/dY (output_dim x M) through
// the net; used for the direct parameter-space update route.
ParamGradient backprop_output_gradient(const PolicyNet& net, const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXd& G);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void apply_update(PolicyNet& net, const ParamGradient& grad, double alpha) = 0;
};

// theta' = theta - alpha * g
class PlainGd : public Optimizer {
public:
    void apply_update(PolicyNet& net, const ParamGradient& grad, double alpha) override;
};

// First/second-moment adaptive scheme (0.9 / 0.999 / 1e-8).
class AdamOptimizer : public Optimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void apply_update(PolicyNet& net, const ParamGradient& grad, double alpha) override;

private:
    double beta1_, beta2_, eps_;
    long step_ = 0;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

// Flat parameter access, mainly for finite-difference checks.
long param_count(const PolicyNet& net);
double get_param(const PolicyNet& net, long index);
void set_param(PolicyNet& net, long index, double value);
double get_grad(const ParamGradient& grad, long index);

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary checkpoint: magic, encoding, action_dim, layer-size header, then
// row-major weight matrices and biases per layer (see README for the layout).
void save_policy(const PolicyNet& net, const std::string& path);
PolicyNet load_policy(const std::string& path);

}  // namespace manifold
