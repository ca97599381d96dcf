#include "darcynas/dcnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace darcynas {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

using Eigen::ArrayXXd;
using Eigen::MatrixXd;

/// U = W A, accumulating over the inner index in a fixed order so that a
/// column's result does not depend on how many columns are in the batch.
void affine_product(const Eigen::Map<const MatrixXd>& w, const MatrixXd& a, MatrixXd& u) {
    u.setZero(w.rows(), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index k = 0; k < w.cols(); ++k) u.col(c) += a(k, c) * w.col(k);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in, int bytes) {
    unsigned char b[8] = {};
    if (!in.read(reinterpret_cast<char*>(b), bytes)) throw DomainError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in, 8)); }

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity" || name == "linear") return Activation::Identity;
    throw DomainError("unknown activation '" + name + "'");
}

void NetworkConfig::validate() const {
    if (input_dim < 1 || input_dim > 3) throw DomainError("input_dim must be 1, 2 or 3");
    if (layers < 1) throw DomainError("network needs at least one hidden layer");
    if (neurons < 1) throw DomainError("network needs at least one neuron per layer");
    if (activation != Activation::Tanh && activation != Activation::Identity)
        throw DomainError("unknown activation id");
    for (int j = 0; j < input_dim; ++j)
        if (!(input_lower[j] < input_upper[j]) || !std::isfinite(input_lower[j]) || !std::isfinite(input_upper[j]))
            throw DomainError("input bounds must be finite with lower < upper");
}

void NetworkConfig::set_input_bounds(const std::array<double, 3>& lower, const std::array<double, 3>& upper) {
    input_lower = {-1.0, -1.0, -1.0};
    input_upper = {1.0, 1.0, 1.0};
    for (int j = 0; j < input_dim; ++j) {
        input_lower[j] = lower[j];
        input_upper[j] = upper[j];
    }
}

bool operator==(const NetworkConfig& a, const NetworkConfig& b) {
    if (a.input_dim != b.input_dim || a.layers != b.layers || a.neurons != b.neurons ||
        a.activation != b.activation)
        return false;
    for (int j = 0; j < a.input_dim; ++j)
        if (a.input_lower[j] != b.input_lower[j] || a.input_upper[j] != b.input_upper[j]) return false;
    return true;
}

ParamLayout ParamLayout::of(const NetworkConfig& config) {
    config.validate();
    ParamLayout layout;
    int fan_in = config.input_dim;
    std::size_t offset = 0;
    for (int l = 0; l <= config.layers; ++l) {
        const int fan_out = l == config.layers ? 1 : config.neurons;
        LayerShape s{fan_in, fan_out, offset, offset + static_cast<std::size_t>(fan_in) * fan_out};
        offset = s.bias_offset + fan_out;
        layout.layers.push_back(s);
        fan_in = fan_out;
    }
    layout.size = offset;
    return layout;
}

Network::Network(NetworkConfig config)
    : config_(config), layout_(ParamLayout::of(config_)), params_(layout_.size, 0.0) {}

Network::Network(NetworkConfig config, std::vector<double> params)
    : config_(config), layout_(ParamLayout::of(config_)), params_(std::move(params)) {
    if (params_.size() != layout_.size)
        throw DomainError("parameter vector has " + std::to_string(params_.size()) + " entries, layout needs " +
                          std::to_string(layout_.size));
}

Network Network::init_params(const NetworkConfig& config, Rng& rng) {
    Network net(config);
    for (const auto& s : net.layout_.layers) {
        const double bound = std::sqrt(6.0 / (s.fan_in + s.fan_out));
        const std::size_t n = static_cast<std::size_t>(s.fan_in) * s.fan_out;
        for (std::size_t i = 0; i < n; ++i) net.params_[s.weight_offset + i] = rng.uniform(-bound, bound);
    }
    return net;
}

void Network::set_params(std::span<const double> params) {
    if (params.size() != layout_.size) throw DomainError("parameter vector does not match the layout");
    params_.assign(params.begin(), params.end());
}

Eigen::Map<const Eigen::MatrixXd> Network::weight(std::size_t l) const {
    const auto& s = layout_.layers.at(l);
    return {params_.data() + s.weight_offset, s.fan_out, s.fan_in};
}

Eigen::Map<const Eigen::VectorXd> Network::bias(std::size_t l) const {
    const auto& s = layout_.layers.at(l);
    return {params_.data() + s.bias_offset, s.fan_out};
}

void Network::check_params() const {
    for (double p : params_)
        if (!std::isfinite(p)) throw NumericError("network parameters contain a non-finite value");
}

void Network::run(std::span<const Point> xs, bool with_derivs, NetworkWorkspace& ws) const {
    check_params();
    const int d = config_.input_dim;
    const auto n = static_cast<Eigen::Index>(xs.size());
    const int channels = with_derivs ? 1 + 2 * d : 1;
    const std::size_t hidden = layout_.layers.size() - 1;
    ws.n = n;
    ws.channels = channels;
    ws.pre.resize(hidden);
    ws.post.resize(hidden + 1);
    ws.t1.resize(hidden);
    ws.t2.resize(hidden);

    MatrixXd& a0 = ws.post[0];
    a0.setZero(d, n * channels);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            const double x = xs[i][j];
            if (!std::isfinite(x)) throw NumericError("network input contains a non-finite value");
            const double scale = 2.0 / (config_.input_upper[j] - config_.input_lower[j]);
            a0(j, i) = scale * (x - config_.input_lower[j]) - 1.0;
            if (with_derivs) a0(j, (1 + j) * n + i) = scale;
        }
    }

    for (std::size_t l = 0; l < hidden; ++l) {
        MatrixXd& u = ws.pre[l];
        affine_product(weight(l), ws.post[l], u);
        u.leftCols(n).colwise() += bias(l);
        MatrixXd& a = ws.post[l + 1];
        a.resize(u.rows(), u.cols());
        ArrayXXd& t1 = ws.t1[l];
        ArrayXXd& t2 = ws.t2[l];
        if (config_.activation == Activation::Tanh) {
            a.leftCols(n) = u.leftCols(n).unaryExpr([](double v) { return std::tanh(v); });
            t1 = 1.0 - a.leftCols(n).array().square();
            t2 = -2.0 * a.leftCols(n).array() * t1;
        } else {
            a.leftCols(n) = u.leftCols(n);
            t1.setOnes(u.rows(), n);
            t2.setZero(u.rows(), n);
        }
        if (with_derivs) {
            for (int j = 0; j < d; ++j) {
                const auto u1 = u.middleCols((1 + j) * n, n).array();
                const auto u2 = u.middleCols((1 + d + j) * n, n).array();
                a.middleCols((1 + j) * n, n) = (t1 * u1).matrix();
                a.middleCols((1 + d + j) * n, n) = (t2 * u1.square() + t1 * u2).matrix();
            }
        }
    }
    affine_product(weight(hidden), ws.post.back(), ws.out);
    ws.out.leftCols(n).array() += bias(hidden)(0);
    if (!ws.out.allFinite()) throw NumericError("network output is not finite");
}

double Network::forward(const Point& x) const { return forward(std::span(&x, 1))(0); }

Eigen::VectorXd Network::forward(std::span<const Point> xs) const {
    NetworkWorkspace ws;
    run(xs, false, ws);
    return ws.out.leftCols(ws.n).transpose();
}

JetBatch Network::collect_jets(const NetworkWorkspace& ws) const {
    const int d = config_.input_dim;
    const auto n = ws.n;
    JetBatch jets;
    jets.value = ws.out.leftCols(n).transpose();
    jets.d1.resize(n, d);
    jets.d2.resize(n, d);
    for (int j = 0; j < d; ++j) {
        jets.d1.col(j) = ws.out.middleCols((1 + j) * n, n).transpose();
        jets.d2.col(j) = ws.out.middleCols((1 + d + j) * n, n).transpose();
    }
    return jets;
}

JetBatch Network::input_jets(std::span<const Point> xs) const {
    NetworkWorkspace ws;
    return input_jets(xs, ws);
}

JetBatch Network::input_jets(std::span<const Point> xs, NetworkWorkspace& ws) const {
    run(xs, true, ws);
    return collect_jets(ws);
}

Network::Jet Network::input_jet(const Point& x) const {
    const JetBatch b = input_jets(std::span(&x, 1));
    Jet jet;
    jet.value = b.value(0);
    for (int j = 0; j < config_.input_dim; ++j) {
        jet.d1[j] = b.d1(0, j);
        jet.d2[j] = b.d2(0, j);
    }
    return jet;
}

LossGradient Network::loss_gradient(std::span<const Point> xs, const LossAssembler& assemble) const {
    NetworkWorkspace ws;
    return loss_gradient(xs, assemble, ws);
}

LossGradient Network::loss_gradient(std::span<const Point> xs, const LossAssembler& assemble,
                                    NetworkWorkspace& ws) const {
    run(xs, true, ws);
    const int d = config_.input_dim;
    const auto n = ws.n;
    const JetBatch jets = collect_jets(ws);

    JetAdjoint adj;
    adj.value = Eigen::VectorXd::Zero(n);
    adj.d1 = MatrixXd::Zero(n, d);
    adj.d2 = MatrixXd::Zero(n, d);

    LossGradient result;
    result.loss = assemble(jets, adj);
    if (!std::isfinite(result.loss)) throw NumericError("assembled loss is not finite");
    if (adj.value.size() != n || adj.d1.rows() != n || adj.d1.cols() != d || adj.d2.rows() != n ||
        adj.d2.cols() != d)
        throw DomainError("loss assembler changed the adjoint shape");

    MatrixXd& g = ws.seed;
    g.resize(1, n * ws.channels);
    g.leftCols(n) = adj.value.transpose();
    for (int j = 0; j < d; ++j) {
        g.middleCols((1 + j) * n, n) = adj.d1.col(j).transpose();
        g.middleCols((1 + d + j) * n, n) = adj.d2.col(j).transpose();
    }

    result.gradient.assign(layout_.size, 0.0);
    const std::size_t hidden = layout_.layers.size() - 1;
    auto accumulate = [&](std::size_t l, const MatrixXd& ubar) {
        const auto& s = layout_.layers[l];
        Eigen::Map<MatrixXd> dw(result.gradient.data() + s.weight_offset, s.fan_out, s.fan_in);
        Eigen::Map<Eigen::VectorXd> db(result.gradient.data() + s.bias_offset, s.fan_out);
        dw.noalias() += ubar * ws.post[l].transpose();
        db += ubar.leftCols(n).rowwise().sum();
    };

    accumulate(hidden, g);
    ws.abar.resize(layout_.layers[hidden].fan_in, g.cols());
    ws.abar.noalias() = weight(hidden).transpose() * g;
    for (std::size_t l = hidden; l-- > 0;) {
        const MatrixXd& u = ws.pre[l];
        const ArrayXXd& t1 = ws.t1[l];
        const ArrayXXd& t2 = ws.t2[l];
        if (config_.activation == Activation::Tanh) {
            const auto t = ws.post[l + 1].leftCols(n).array();
            ws.t3 = t1 * (6.0 * t.square() - 2.0);
        } else {
            ws.t3.setZero(u.rows(), n);
        }
        MatrixXd& ubar = ws.ubar;
        ubar.resize(u.rows(), u.cols());
        ws.uv = t1 * ws.abar.leftCols(n).array();
        for (int j = 0; j < d; ++j) {
            const auto u1 = u.middleCols((1 + j) * n, n).array();
            const auto u2 = u.middleCols((1 + d + j) * n, n).array();
            const auto a1 = ws.abar.middleCols((1 + j) * n, n).array();
            const auto a2 = ws.abar.middleCols((1 + d + j) * n, n).array();
            ws.uv += t2 * u1 * a1 + (ws.t3 * u1.square() + t2 * u2) * a2;
            ubar.middleCols((1 + j) * n, n) = (t1 * a1 + 2.0 * t2 * u1 * a2).matrix();
            ubar.middleCols((1 + d + j) * n, n) = (t1 * a2).matrix();
        }
        ubar.leftCols(n) = ws.uv.matrix();
        accumulate(l, ubar);
        if (l > 0) {
            ws.abar.resize(layout_.layers[l].fan_in, ubar.cols());
            ws.abar.noalias() = weight(l).transpose() * ubar;
        }
    }
    for (double v : result.gradient)
        if (!std::isfinite(v)) throw NumericError("loss gradient is not finite");
    return result;
}

void save_checkpoint(std::ostream& out, const Network& net) {
    const auto& c = net.config();
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(c.input_dim));
    put_u32(out, static_cast<std::uint32_t>(c.layers));
    put_u32(out, static_cast<std::uint32_t>(c.neurons));
    put_u32(out, static_cast<std::uint32_t>(c.activation));
    for (int j = 0; j < c.input_dim; ++j) {
        put_f64(out, c.input_lower[j]);
        put_f64(out, c.input_upper[j]);
    }
    put_u64(out, net.num_params());
    for (double p : net.params()) put_f64(out, p);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_checkpoint(out, net);
}

Network load_checkpoint(std::istream& in) {
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw DomainError("checkpoint: bad magic");
    const auto version = get_u64(in, 4);
    if (version != kVersion) throw DomainError("checkpoint: unsupported version " + std::to_string(version));
    NetworkConfig c;
    c.input_dim = static_cast<int>(get_u64(in, 4));
    c.layers = static_cast<int>(get_u64(in, 4));
    c.neurons = static_cast<int>(get_u64(in, 4));
    c.activation = static_cast<Activation>(get_u64(in, 4));
    if (c.input_dim < 1 || c.input_dim > 3) throw DomainError("checkpoint: bad input dimension");
    for (int j = 0; j < c.input_dim; ++j) {
        c.input_lower[j] = get_f64(in);
        c.input_upper[j] = get_f64(in);
    }
    c.validate();
    const auto count = get_u64(in, 8);
    if (count != ParamLayout::of(c).size) throw DomainError("checkpoint: parameter count does not match header");
    std::vector<double> params(count);
    for (auto& p : params) p = get_f64(in);
    return Network(c, std::move(params));
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace darcynas
