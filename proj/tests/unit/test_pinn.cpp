#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>

#include "darcynas/pinn.hpp"

using namespace darcynas;
using doctest::Approx;

namespace {

FieldRealization field(int dim, double sigma2, std::uint64_t seed = 4) {
    FieldSpec s;
    s.dim = dim;
    s.sigma2 = sigma2;
    s.lambdas.assign(dim, 1.0);
    s.n_modes = 200;
    s.seed = seed;
    return realize(s);
}

/// Affine network reproducing the Linear family exactly: identity hidden
/// layer, output weights undoing the input normalization.
Network exact_linear(const Domain& dom, const ManufacturedCase& c, double offset = 0.0) {
    const int d = dom.dim;
    const auto cfg = network_for(dom, 1, d, Activation::Identity);
    std::vector<double> p;
    for (int col = 0; col < d; ++col)
        for (int row = 0; row < d; ++row) p.push_back(row == col ? 1.0 : 0.0);
    p.insert(p.end(), d, 0.0);
    // z = (x - lo)/half - 1, so x = lo + half (z + 1).
    double bias = c.coeffs[0] + offset;
    for (int j = 0; j < d; ++j) {
        const double half = 0.5 * dom.extent(j);
        p.push_back(c.coeffs[j + 1] * half);
        bias += c.coeffs[j + 1] * (dom.lower[j] + half);
    }
    p.push_back(bias);
    return Network(cfg, p);
}

/// Loss rebuilt from network values alone: central differences of the flux
/// K h' for the PDE term, one-sided flux for the Neumann term.
LossParts fd_loss_1d(const Network& net, const CollocationSet& colloc, const FieldRealization& real,
                     const ManufacturedCase& c) {
    const double d = 1e-3;
    auto h = [&](double x) { return net.forward(Point{x, 0.0, 0.0}); };
    auto k = [&](double x) { return real.conductivity(Point{x, 0.0, 0.0}); };
    LossParts parts;
    for (const Point& p : colloc.interior) {
        const double x = p[0];
        const double flux_p = k(x + 0.5 * d) * (h(x + d) - h(x)) / d;
        const double flux_m = k(x - 0.5 * d) * (h(x) - h(x - d)) / d;
        const double r = (flux_p - flux_m) / d - source_f(c, real, p);
        parts.pde += r * r / static_cast<double>(colloc.interior.size());
    }
    for (const auto& b : colloc.boundary) {
        const double r = h(b.x[0]) - h_exact(c, b.x);
        parts.dirichlet += r * r / static_cast<double>(colloc.count(BoundaryKind::Dirichlet));
    }
    parts.total = parts.pde + parts.dirichlet;
    return parts;
}

}  // namespace

TEST_CASE("collocation sampling") {
    Rng rng(3);
    const auto one = sample_collocation(canonical_domain(1), 50, 10, rng);
    CHECK(one.interior.size() == 50);
    CHECK(one.boundary.size() == 2);
    CHECK(one.count(BoundaryKind::Dirichlet) == 2);
    CHECK(one.boundary[0].x[0] == 0.0);
    CHECK(one.boundary[1].x[0] == 25.0);

    const auto dom3 = canonical_domain(3);
    const auto three = sample_collocation(dom3, 200, 7, rng);
    CHECK(three.boundary.size() == 6 * 7);
    CHECK(three.count(BoundaryKind::Dirichlet) == 14);
    CHECK(three.count(BoundaryKind::Neumann) == 28);
    for (const Point& x : three.interior)
        for (int j = 0; j < 3; ++j) {
            CHECK(x[j] > dom3.lower[j]);
            CHECK(x[j] < dom3.upper[j]);
        }
    for (const auto& b : three.boundary) {
        const double want = b.face.upper ? dom3.upper[b.face.axis] : dom3.lower[b.face.axis];
        CHECK(b.x[b.face.axis] == want);
        CHECK((b.face.kind == BoundaryKind::Dirichlet) == (b.face.axis == 0));
    }
    CHECK_THROWS_AS(sample_collocation(dom3, 0, 5, rng), DomainError);
}

TEST_CASE("exactly representable solution has zero loss") {
    const Domain dom = canonical_domain(1);
    const auto real = field(1, 0.0);
    const ManufacturedCase lin{1, SolutionFamily::Linear, {2.0, 0.25}};
    Rng rng(1);
    const auto colloc = sample_collocation(dom, 100, 1, rng);
    const auto net = exact_linear(dom, lin);
    const auto parts = assemble_loss(net, colloc, real, lin);
    CHECK(parts.total < 1e-24);
    CHECK(relative_error(net, lin, grid_points(default_eval_grid(dom))) < 1e-14);
    const Point q = predict_velocity(net, real, {3.0, 0.0, 0.0});
    CHECK(q[0] == Approx(-15.0 * 0.25));
}

TEST_CASE("constant head offset gives a quadratic Dirichlet loss") {
    const Domain dom = canonical_domain(2);
    const auto real = field(2, 0.0);
    const ManufacturedCase lin{2, SolutionFamily::Linear, {1.0, 0.3, -0.1}};
    Rng rng(2);
    const auto colloc = sample_collocation(dom, 40, 5, rng);
    for (double delta : {0.5, 1.0, 3.0}) {
        // Shifting the output bias changes only the head values.
        const auto parts = assemble_loss(exact_linear(dom, lin, delta), colloc, real, lin);
        CHECK(parts.pde == 0.0);
        CHECK(parts.neumann < 1e-24);
        CHECK(parts.dirichlet == Approx(delta * delta).epsilon(1e-12));
    }
}

TEST_CASE("loss matches a finite-difference reconstruction") {
    const Domain dom = canonical_domain(1);
    const auto real = field(1, 0.1);
    const auto c = canonical_case(1, SolutionFamily::SineOfSum);
    Rng rng(5);
    const auto colloc = sample_collocation(dom, 60, 1, rng);
    const auto net = Network::init_params(network_for(dom, 2, 8), rng);
    const auto parts = assemble_loss(net, colloc, real, c);
    const auto ref = fd_loss_1d(net, colloc, real, c);
    CHECK(parts.pde == Approx(ref.pde).epsilon(1e-4));
    CHECK(parts.dirichlet == Approx(ref.dirichlet).epsilon(1e-12));
}

TEST_CASE("neumann term is flux weighted") {
    // Zero network on a constant-K field: the Neumann residual is K times the
    // outward derivative of the exact head on the y-faces.
    const Domain dom = canonical_domain(2);
    const auto real = field(2, 0.0);
    const ManufacturedCase lin{2, SolutionFamily::Linear, {0.0, 0.7, 0.5}};
    Rng rng(6);
    const auto colloc = sample_collocation(dom, 10, 4, rng);
    const auto parts = assemble_loss(Network(network_for(dom, 1, 3)), colloc, real, lin);
    CHECK(parts.neumann == Approx(15.0 * 15.0 * 0.25));
    CHECK(parts.pde == 0.0);
}

TEST_CASE("problem gradient matches finite differences") {
    const Domain dom = canonical_domain(2);
    const auto real = field(2, 0.1);
    const auto c = canonical_case(2, SolutionFamily::SineOfSum);
    Rng rng(8);
    const auto colloc = sample_collocation(dom, 30, 3, rng);
    const PinnProblem prob(colloc, real, c);
    auto net = Network::init_params(network_for(dom, 2, 5), rng);
    std::vector<double> grad;
    const auto parts = prob.loss_gradient(net, grad);
    CHECK(parts.total == prob.loss(net).total);
    auto theta = net.params();
    for (std::size_t i = 0; i < theta.size(); i += 3) {
        const double e = 1e-6 * std::max(1.0, std::abs(theta[i]));
        auto tp = theta, tm = theta;
        tp[i] += e;
        tm[i] -= e;
        const double fd = (prob.loss(Network(net.config(), tp)).total - prob.loss(Network(net.config(), tm)).total) / (2 * e);
        CHECK(grad[i] == Approx(fd).epsilon(1e-5).scale(1e-3 * parts.total));
    }
    CHECK_THROWS_AS(prob.loss(Network(network_for(canonical_domain(1), 1, 2))), DomainError);
}

TEST_CASE("training fits an affine target and logs a consistent trace") {
    const Domain dom = canonical_domain(1);
    const auto real = field(1, 0.0);
    const ManufacturedCase lin{1, SolutionFamily::Linear, {1.0, 0.2}};
    Rng rng(9);
    const auto colloc = sample_collocation(dom, 50, 1, rng);
    const auto init = Network::init_params(network_for(dom, 1, 2, Activation::Identity), rng);
    TrainConfig cfg;
    cfg.adam_iters = 20;
    cfg.lbfgs_max_iters = 300;
    cfg.tolerance = 1e-16;
    const auto rep = train(init, colloc, real, lin, cfg);
    CHECK(rep.final_loss.total < 1e-10);
    CHECK(rep.adam_iters == 20);
    CHECK(rep.trace.size() == static_cast<std::size_t>(rep.iterations()));
    CHECK(rep.initial_loss.total == rep.trace.front().loss.total);
    for (std::size_t i = 21; i < rep.trace.size(); ++i) CHECK(rep.trace[i].loss.total <= rep.trace[i - 1].loss.total);
    CHECK(rep.trace.back().loss.total == rep.final_loss.total);

    std::ostringstream csv;
    write_trace_csv(csv, rep);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# schema=trace/1 transfer=0 lbfgs_status=", 0) == 0);
    std::getline(in, line);
    CHECK(line == "iter,phase,loss,mse_pde,mse_dirichlet,mse_neumann");
    std::getline(in, line);
    CHECK(line.rfind("1,adam,", 0) == 0);
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == rep.iterations());

    CHECK(iterations_to_reach(rep, rep.initial_loss.total) == 1);
    CHECK(iterations_to_reach(rep, -1.0) == -1);
}

TEST_CASE("warm start on the same problem resumes from the pretrained loss") {
    const Domain dom = canonical_domain(1);
    const auto real = field(1, 0.1);
    const auto c = canonical_case(1, SolutionFamily::SineOfSum);
    Rng rng(10);
    const auto colloc = sample_collocation(dom, 80, 1, rng);
    const PinnProblem prob(colloc, real, c);
    TrainConfig cfg;
    cfg.adam_iters = 30;
    cfg.lbfgs_max_iters = 30;
    const auto pre = train(Network::init_params(network_for(dom, 2, 6), rng), prob, cfg);
    const auto ft = warm_start(pre.net, pre.net.config(), prob, fine_tune_config(cfg));
    CHECK(ft.transfer);
    CHECK(ft.initial_loss.total == pre.final_loss.total);
    CHECK(ft.adam_iters == 3);
    CHECK(ft.final_loss.total <= ft.initial_loss.total);
    CHECK_THROWS_AS(warm_start(pre.net, network_for(dom, 2, 7), prob, cfg), DomainError);
}

TEST_CASE("config and metric validation") {
    TrainConfig bad;
    bad.adam_lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK(fine_tune_config(TrainConfig{}).adam_lr == 2e-4);
    const auto g = default_eval_grid(canonical_domain(3));
    CHECK(g.size() == 50 * 20 * 10);
    const ManufacturedCase one{1, SolutionFamily::Linear, {1.0, 1.0}};
    // A zero network has relative error 1 against any nonzero head.
    CHECK(relative_error(Network(network_for(canonical_domain(1), 1, 2)), one, {{0.0, 0, 0}, {1.0, 0, 0}}) == 1.0);
    CHECK_THROWS_AS(relative_error(Network(network_for(canonical_domain(1), 1, 2)), one, {}), DomainError);
}
