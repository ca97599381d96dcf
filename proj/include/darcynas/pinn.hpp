#pragma once

// Deep collocation solver: physics-informed loss at fixed collocation points,
// Adam then L-BFGS training, warm starts and evaluation against the
// manufactured solution.

#include <iosfwd>
#include <string>
#include <vector>

#include "darcynas/dcnet.hpp"
#include "darcynas/mms.hpp"
#include "darcynas/optim.hpp"
#include "darcynas/randfield.hpp"

namespace darcynas {

struct BoundaryPoint {
    Point x{0.0, 0.0, 0.0};
    Face face;
};

struct CollocationSet {
    int dim = 1;
    std::vector<Point> interior;
    std::vector<BoundaryPoint> boundary;

    std::size_t count(BoundaryKind kind) const;
};

/// Interior points uniform in the open box; `n_boundary_per_face` uniform
/// points on every face (a 1D face is a single point, so it gets exactly one).
CollocationSet sample_collocation(const Domain& domain, int n_interior, int n_boundary_per_face, Rng& rng);

struct TrainConfig {
    int adam_iters = 2000;
    double adam_lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int lbfgs_max_iters = 5000;
    int maxls = 50;
    int lbfgs_memory = 10;
    double tolerance = 1e-9;
    int n_interior = 1000;
    int n_boundary = 100;

    void validate() const;
};

/// Fine-tuning defaults: learning rate 2e-4, a tenth of the Adam steps and
/// an L-BFGS tolerance of at most 1e-12.
TrainConfig fine_tune_config(TrainConfig base);

struct LossParts {
    double total = 0.0;
    double pde = 0.0;
    double dirichlet = 0.0;
    double neumann = 0.0;
};

/// Collocation problem with K, grad K, f and boundary targets precomputed.
class PinnProblem {
public:
    PinnProblem(const CollocationSet& colloc, const FieldRealization& real, const ManufacturedCase& c);

    int dim() const noexcept { return dim_; }
    const std::vector<Point>& points() const noexcept { return points_; }

    LossParts loss(const Network& net) const;
    LossParts loss_gradient(const Network& net, std::vector<double>& grad) const;

private:
    double assemble(const JetBatch& jets, JetAdjoint* adj, LossParts& parts) const;

    struct Neumann {
        double k = 0.0;
        int axis = 0;
        double sign = 1.0;
        double target = 0.0;  // dh_MMS/dn
    };

    int dim_ = 1;
    std::vector<Point> points_;  // interior, then Dirichlet, then Neumann
    std::size_t n_interior_ = 0, n_dirichlet_ = 0, n_neumann_ = 0;
    std::vector<double> k_, f_;
    std::vector<Point> grad_k_;
    std::vector<double> dirichlet_target_;
    std::vector<Neumann> neumann_;
    mutable NetworkWorkspace workspace_;  // not shared across threads
};

LossParts assemble_loss(const Network& net, const CollocationSet& colloc, const FieldRealization& real,
                        const ManufacturedCase& c);

enum class Phase { Adam, Lbfgs };
std::string to_string(Phase p);

struct TraceRow {
    int iter = 0;
    Phase phase = Phase::Adam;
    LossParts loss;
};

struct TrainReport {
    std::vector<TraceRow> trace;
    int adam_iters = 0;   // Adam rows are trace[0, adam_iters)
    int lbfgs_iters = 0;
    int evaluations = 0;  // loss/gradient evaluations, all phases
    LbfgsStatus lbfgs_status = LbfgsStatus::MaxIterations;
    LossParts initial_loss;
    LossParts final_loss;
    double seconds = 0.0;
    bool transfer = false;
    Network net{NetworkConfig{}};

    int iterations() const noexcept { return adam_iters + lbfgs_iters; }
};

/// Full-batch Adam for adam_iters, then L-BFGS. Adam rows record the loss at
/// the parameters the step was computed from; L-BFGS rows record the loss
/// after each accepted iteration.
TrainReport train(const Network& init, const PinnProblem& problem, const TrainConfig& cfg);

TrainReport train(const Network& init, const CollocationSet& colloc, const FieldRealization& real,
                  const ManufacturedCase& c, const TrainConfig& cfg);

/// Fine-tunes `pretrained` on a new problem; the network must have the
/// expected configuration.
TrainReport warm_start(const Network& pretrained, const NetworkConfig& expected, const PinnProblem& problem,
                       const TrainConfig& cfg_ft);

/// First iteration (1-based, over the whole trace) whose loss is <= target, or -1.
int iterations_to_reach(const TrainReport& report, double target);

void write_trace_csv(std::ostream& out, const TrainReport& report);
void write_trace_csv(const std::string& path, const TrainReport& report);

double predict_head(const Network& net, const Point& x);
/// q = -K grad h.
Point predict_velocity(const Network& net, const FieldRealization& real, const Point& x);

/// Uniform tensor grid: 1000 nodes (1D), 100x100 (2D), 50x20x10 (3D).
GridHeader default_eval_grid(const Domain& domain);
std::vector<Point> grid_points(const GridHeader& grid);

/// ||h_pred - h_MMS|| / ||h_MMS|| over the points.
double relative_error(const Network& net, const ManufacturedCase& c, const std::vector<Point>& points);
/// Relative l2 error of the velocity against -K grad h_MMS.
double velocity_relative_error(const Network& net, const FieldRealization& real, const ManufacturedCase& c,
                               const std::vector<Point>& points);

/// Network configuration with input bounds taken from the domain.
NetworkConfig network_for(const Domain& domain, int layers, int neurons, Activation act = Activation::Tanh);

}  // namespace darcynas
