#include "darcynas/pinn.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace darcynas {

namespace {

std::string describe(const Point& x, int dim) {
    std::ostringstream s;
    s << std::setprecision(17) << '(';
    for (int j = 0; j < dim; ++j) s << (j ? ", " : "") << x[j];
    s << ')';
    return s.str();
}

void require_finite_residual(double r, const Point& x, int dim, const char* what) {
    if (!std::isfinite(r)) throw NumericError(std::string("non-finite ") + what + " residual at " + describe(x, dim));
}

}  // namespace

std::size_t CollocationSet::count(BoundaryKind kind) const {
    std::size_t n = 0;
    for (const auto& b : boundary) n += b.face.kind == kind;
    return n;
}

CollocationSet sample_collocation(const Domain& domain, int n_interior, int n_boundary_per_face, Rng& rng) {
    domain.validate();
    if (n_interior < 1 || n_boundary_per_face < 1) throw DomainError("collocation counts must be >= 1");
    CollocationSet set;
    set.dim = domain.dim;
    set.interior.reserve(n_interior);
    for (int i = 0; i < n_interior; ++i) {
        Point x{0.0, 0.0, 0.0};
        for (int j = 0; j < domain.dim; ++j) {
            do {
                x[j] = domain.lower[j] + domain.extent(j) * rng.uniform_open();
            } while (!(x[j] > domain.lower[j] && x[j] < domain.upper[j]));
        }
        set.interior.push_back(x);
    }
    for (const Face& face : boundary_faces(domain)) {
        const int per_face = domain.dim == 1 ? 1 : n_boundary_per_face;
        for (int i = 0; i < per_face; ++i) {
            Point x{0.0, 0.0, 0.0};
            for (int j = 0; j < domain.dim; ++j) x[j] = domain.lower[j] + domain.extent(j) * rng.uniform();
            x[face.axis] = face.upper ? domain.upper[face.axis] : domain.lower[face.axis];
            set.boundary.push_back({x, face});
        }
    }
    return set;
}

void TrainConfig::validate() const {
    if (adam_iters < 0 || lbfgs_max_iters < 0) throw DomainError("iteration counts must be >= 0");
    if (maxls < 1 || lbfgs_memory < 1) throw DomainError("maxls and L-BFGS memory must be >= 1");
    if (!(adam_lr > 0.0)) throw DomainError("learning rate must be positive");
    if (!(tolerance > 0.0)) throw DomainError("tolerance must be positive");
    if (n_interior < 1 || n_boundary < 1) throw DomainError("collocation counts must be >= 1");
}

TrainConfig fine_tune_config(TrainConfig base) {
    base.adam_lr = 2e-4;
    base.adam_iters = std::max(1, base.adam_iters / 10);
    base.tolerance = std::min(base.tolerance, 1e-12);
    return base;
}

PinnProblem::PinnProblem(const CollocationSet& colloc, const FieldRealization& real, const ManufacturedCase& c)
    : dim_(colloc.dim) {
    c.validate();
    if (c.dim != colloc.dim || real.dim() != colloc.dim)
        throw DomainError("collocation set, field and case dimensions differ");
    n_interior_ = colloc.interior.size();
    for (const Point& x : colloc.interior) {
        const auto s = real.conductivity_with_gradient(x);
        points_.push_back(x);
        k_.push_back(s.k);
        grad_k_.push_back(s.grad);
        f_.push_back(source_f(c, s, x));
    }
    for (const auto& b : colloc.boundary) {
        if (b.face.kind != BoundaryKind::Dirichlet) continue;
        points_.push_back(b.x);
        dirichlet_target_.push_back(h_exact(c, b.x));
    }
    n_dirichlet_ = dirichlet_target_.size();
    for (const auto& b : colloc.boundary) {
        if (b.face.kind != BoundaryKind::Neumann) continue;
        points_.push_back(b.x);
        const double sign = b.face.normal_sign();
        neumann_.push_back({real.conductivity(b.x), b.face.axis, sign, sign * grad_h_exact(c, b.x)[b.face.axis]});
    }
    n_neumann_ = neumann_.size();
}

double PinnProblem::assemble(const JetBatch& jets, JetAdjoint* adj, LossParts& parts) const {
    parts = LossParts{};
    if (n_interior_ > 0) {
        const double w = 1.0 / static_cast<double>(n_interior_);
        for (std::size_t i = 0; i < n_interior_; ++i) {
            const auto r_i = static_cast<Eigen::Index>(i);
            double r = -f_[i];
            for (int j = 0; j < dim_; ++j) r += k_[i] * jets.d2(r_i, j) + grad_k_[i][j] * jets.d1(r_i, j);
            require_finite_residual(r, points_[i], dim_, "PDE");
            parts.pde += w * r * r;
            if (adj) {
                for (int j = 0; j < dim_; ++j) {
                    adj->d2(r_i, j) = 2.0 * w * r * k_[i];
                    adj->d1(r_i, j) = 2.0 * w * r * grad_k_[i][j];
                }
            }
        }
    }
    if (n_dirichlet_ > 0) {
        const double w = 1.0 / static_cast<double>(n_dirichlet_);
        for (std::size_t i = 0; i < n_dirichlet_; ++i) {
            const auto row = static_cast<Eigen::Index>(n_interior_ + i);
            const double r = jets.value(row) - dirichlet_target_[i];
            require_finite_residual(r, points_[row], dim_, "Dirichlet");
            parts.dirichlet += w * r * r;
            if (adj) adj->value(row) = 2.0 * w * r;
        }
    }
    if (n_neumann_ > 0) {
        const double w = 1.0 / static_cast<double>(n_neumann_);
        for (std::size_t i = 0; i < n_neumann_; ++i) {
            const auto row = static_cast<Eigen::Index>(n_interior_ + n_dirichlet_ + i);
            const auto& nb = neumann_[i];
            const double r = nb.k * (nb.sign * jets.d1(row, nb.axis) - nb.target);
            require_finite_residual(r, points_[row], dim_, "Neumann");
            parts.neumann += w * r * r;
            if (adj) adj->d1(row, nb.axis) = 2.0 * w * r * nb.k * nb.sign;
        }
    }
    parts.total = parts.pde + parts.dirichlet + parts.neumann;
    return parts.total;
}

LossParts PinnProblem::loss(const Network& net) const {
    if (net.config().input_dim != dim_) throw DomainError("network input dimension does not match the problem");
    LossParts parts;
    assemble(net.input_jets(points_, workspace_), nullptr, parts);
    return parts;
}

LossParts PinnProblem::loss_gradient(const Network& net, std::vector<double>& grad) const {
    if (net.config().input_dim != dim_) throw DomainError("network input dimension does not match the problem");
    LossParts parts;
    auto lg = net.loss_gradient(points_, [&](const JetBatch& jets, JetAdjoint& adj) {
        return assemble(jets, &adj, parts);
    }, workspace_);
    grad = std::move(lg.gradient);
    return parts;
}

LossParts assemble_loss(const Network& net, const CollocationSet& colloc, const FieldRealization& real,
                        const ManufacturedCase& c) {
    return PinnProblem(colloc, real, c).loss(net);
}

std::string to_string(Phase p) { return p == Phase::Adam ? "adam" : "lbfgs"; }

TrainReport train(const Network& init, const PinnProblem& problem, const TrainConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.net = init;
    std::vector<double> theta = init.params();
    std::vector<double> grad;
    Network work = init;

    Adam adam(theta.size(), AdamOptions{cfg.adam_lr, cfg.beta1, cfg.beta2, cfg.eps});
    for (int it = 0; it < cfg.adam_iters; ++it) {
        work.set_params(theta);
        const LossParts parts = problem.loss_gradient(work, grad);
        ++report.evaluations;
        if (it == 0) report.initial_loss = parts;
        report.trace.push_back({it + 1, Phase::Adam, parts});
        adam.step(theta, grad);
    }
    report.adam_iters = cfg.adam_iters;

    work.set_params(theta);
    LossParts current = problem.loss(work);
    ++report.evaluations;
    if (cfg.adam_iters == 0) report.initial_loss = current;

    if (cfg.lbfgs_max_iters > 0) {
        LbfgsOptions lo;
        lo.max_iters = cfg.lbfgs_max_iters;
        lo.memory = cfg.lbfgs_memory;
        lo.max_line_search = cfg.maxls;
        lo.tolerance = cfg.tolerance;
        Network probe = init;
        LossParts last_parts = current;
        std::vector<double> last_x;
        auto fn = [&](const std::vector<double>& x, std::vector<double>& g) {
            probe.set_params(x);
            last_parts = problem.loss_gradient(probe, g);
            last_x = x;
            return last_parts.total;
        };
        auto on_iter = [&](int it, double f, const std::vector<double>& x) {
            LossParts parts = last_parts;
            if (x != last_x || parts.total != f) {
                probe.set_params(x);
                parts = problem.loss(probe);
            }
            report.trace.push_back({cfg.adam_iters + it, Phase::Lbfgs, parts});
            current = parts;
        };
        const LbfgsResult res = lbfgs(fn, theta, lo, on_iter);
        report.evaluations += res.evaluations;
        report.lbfgs_iters = res.iterations;
        report.lbfgs_status = res.status;
        theta = res.x;
    }

    report.net.set_params(theta);
    report.final_loss = current;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

TrainReport train(const Network& init, const CollocationSet& colloc, const FieldRealization& real,
                  const ManufacturedCase& c, const TrainConfig& cfg) {
    return train(init, PinnProblem(colloc, real, c), cfg);
}

TrainReport warm_start(const Network& pretrained, const NetworkConfig& expected, const PinnProblem& problem,
                       const TrainConfig& cfg_ft) {
    if (!(pretrained.config() == expected) || pretrained.num_params() != ParamLayout::of(expected).size)
        throw DomainError("pretrained network layout does not match the configuration");
    TrainReport report = train(pretrained, problem, cfg_ft);
    report.transfer = true;
    return report;
}

int iterations_to_reach(const TrainReport& report, double target) {
    for (std::size_t i = 0; i < report.trace.size(); ++i)
        if (report.trace[i].loss.total <= target) return static_cast<int>(i) + 1;
    if (report.final_loss.total <= target) return report.iterations();
    return -1;
}

void write_trace_csv(std::ostream& out, const TrainReport& report) {
    out << "# schema=trace/1 transfer=" << (report.transfer ? 1 : 0)
        << " lbfgs_status=" << to_string(report.lbfgs_status) << '\n';
    out << "iter,phase,loss,mse_pde,mse_dirichlet,mse_neumann\n";
    out << std::setprecision(17);
    for (const auto& row : report.trace)
        out << row.iter << ',' << to_string(row.phase) << ',' << row.loss.total << ',' << row.loss.pde << ','
            << row.loss.dirichlet << ',' << row.loss.neumann << '\n';
}

void write_trace_csv(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_trace_csv(out, report);
}

double predict_head(const Network& net, const Point& x) { return net.forward(x); }

Point predict_velocity(const Network& net, const FieldRealization& real, const Point& x) {
    const auto jet = net.input_jet(x);
    const double k = real.conductivity(x);
    Point q{0.0, 0.0, 0.0};
    for (int j = 0; j < net.config().input_dim; ++j) q[j] = -k * jet.d1[j];
    return q;
}

GridHeader default_eval_grid(const Domain& domain) {
    domain.validate();
    GridHeader g;
    g.dim = domain.dim;
    switch (domain.dim) {
        case 1: g.counts = {1000, 1, 1}; break;
        case 2: g.counts = {100, 100, 1}; break;
        default: g.counts = {50, 20, 10}; break;
    }
    g.lower = domain.lower;
    g.upper = domain.upper;
    return g;
}

std::vector<Point> grid_points(const GridHeader& grid) {
    std::vector<Point> pts(grid.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = grid.node(i);
    return pts;
}

double relative_error(const Network& net, const ManufacturedCase& c, const std::vector<Point>& points) {
    if (points.empty()) throw DomainError("evaluation grid is empty");
    const Eigen::VectorXd pred = net.forward(points);
    std::vector<double> exact(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) exact[i] = h_exact(c, points[i]);
    return relative_l2_error(std::span<const double>(pred.data(), points.size()), exact);
}

double velocity_relative_error(const Network& net, const FieldRealization& real, const ManufacturedCase& c,
                               const std::vector<Point>& points) {
    if (points.empty()) throw DomainError("evaluation grid is empty");
    const JetBatch jets = net.input_jets(points);
    const int d = c.dim;
    std::vector<double> pred, exact;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double k = real.conductivity(points[i]);
        const Point g = grad_h_exact(c, points[i]);
        for (int j = 0; j < d; ++j) {
            pred.push_back(-k * jets.d1(static_cast<Eigen::Index>(i), j));
            exact.push_back(-k * g[j]);
        }
    }
    return relative_l2_error(pred, exact);
}

NetworkConfig network_for(const Domain& domain, int layers, int neurons, Activation act) {
    NetworkConfig c;
    c.input_dim = domain.dim;
    c.layers = layers;
    c.neurons = neurons;
    c.activation = act;
    c.set_input_bounds(domain.lower, domain.upper);
    c.validate();
    return c;
}

}  // namespace darcynas
