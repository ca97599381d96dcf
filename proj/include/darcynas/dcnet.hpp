#pragma once

// Dense feed-forward network h(x) with exact input jets (h, dh/dx_j,
// d^2h/dx_j^2) and a reverse pass through the jet recurrences, so a loss
// assembled from jets can be differentiated with respect to every weight.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "darcynas/common.hpp"
#include "darcynas/randfield.hpp"

namespace darcynas {

/// Tanh is the default; Identity makes the whole network affine, which is
/// handy for exactly representable targets.
enum class Activation : std::uint32_t { Tanh = 0, Identity = 1 };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct NetworkConfig {
    int input_dim = 1;
    int layers = 1;
    int neurons = 10;
    Activation activation = Activation::Tanh;
    /// Inputs are mapped affinely from [input_lower, input_upper] to [-1, 1].
    /// The default bounds make the map the identity.
    std::array<double, 3> input_lower{-1.0, -1.0, -1.0};
    std::array<double, 3> input_upper{1.0, 1.0, 1.0};

    void validate() const;
    void set_input_bounds(const std::array<double, 3>& lower, const std::array<double, 3>& upper);
};

bool operator==(const NetworkConfig& a, const NetworkConfig& b);

/// Offsets of one affine layer inside the flat parameter vector. W is stored
/// column-major (fan_out x fan_in), followed by the bias.
struct LayerShape {
    int fan_in = 0;
    int fan_out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

/// Per-layer shapes of the hidden layers plus the linear output layer.
struct ParamLayout {
    std::vector<LayerShape> layers;
    std::size_t size = 0;

    static ParamLayout of(const NetworkConfig& config);
};

/// Jets for a batch of n points; d1 and d2 are n x dim (physical coordinates).
struct JetBatch {
    Eigen::VectorXd value;
    Eigen::MatrixXd d1;
    Eigen::MatrixXd d2;

    Eigen::Index size() const { return value.size(); }
};

/// Adjoint seeds dL/d(value), dL/d(d1), dL/d(d2), same shapes as JetBatch.
using JetAdjoint = JetBatch;

/// Scalar loss from jets; must fill `adjoint` (pre-zeroed, correct shape).
using LossAssembler = std::function<double(const JetBatch& jets, JetAdjoint& adjoint)>;

/// Scratch buffers reused across evaluations. Every matrix stores column
/// blocks [value | d1_0 .. d1_{d-1} | d2_0 .. d2_{d-1}], n columns each.
/// One workspace must not be shared by concurrent calls.
struct NetworkWorkspace {
    Eigen::Index n = 0;
    int channels = 1;
    std::vector<Eigen::MatrixXd> pre;   // U_l of the hidden layers
    std::vector<Eigen::MatrixXd> post;  // A_0 (inputs), A_1 .. A_L
    std::vector<Eigen::ArrayXXd> t1;    // activation derivatives at the value block
    std::vector<Eigen::ArrayXXd> t2;
    Eigen::MatrixXd out;
    Eigen::MatrixXd seed, abar, ubar;
    Eigen::ArrayXXd t3, uv;
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

class Network {
public:
    /// All-zero parameters.
    explicit Network(NetworkConfig config);
    Network(NetworkConfig config, std::vector<double> params);

    /// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
    static Network init_params(const NetworkConfig& config, Rng& rng);

    const NetworkConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    const std::vector<double>& params() const noexcept { return params_; }
    void set_params(std::span<const double> params);
    std::size_t num_params() const noexcept { return params_.size(); }

    /// Weight matrix / bias of layer `l` (0-based, the last is the output layer).
    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const;
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;

    double forward(const Point& x) const;
    Eigen::VectorXd forward(std::span<const Point> xs) const;

    struct Jet {
        double value = 0.0;
        Point d1{0.0, 0.0, 0.0};
        Point d2{0.0, 0.0, 0.0};
    };
    Jet input_jet(const Point& x) const;
    JetBatch input_jets(std::span<const Point> xs) const;
    JetBatch input_jets(std::span<const Point> xs, NetworkWorkspace& ws) const;

    /// Loss value and its exact gradient with respect to the parameters.
    LossGradient loss_gradient(std::span<const Point> xs, const LossAssembler& assemble) const;
    LossGradient loss_gradient(std::span<const Point> xs, const LossAssembler& assemble, NetworkWorkspace& ws) const;

private:
    void run(std::span<const Point> xs, bool with_derivs, NetworkWorkspace& ws) const;
    JetBatch collect_jets(const NetworkWorkspace& ws) const;
    void check_params() const;

    NetworkConfig config_;
    ParamLayout layout_;
    std::vector<double> params_;
};

/// Checkpoint: magic "DCNETCKP", u32 version, u32 input_dim, u32 layers,
/// u32 neurons, u32 activation id, 2*input_dim f64 input bounds, u64 count,
/// then the parameters; all little-endian.
void save_checkpoint(std::ostream& out, const Network& net);
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(std::istream& in);
Network load_checkpoint(const std::string& path);

}  // namespace darcynas
