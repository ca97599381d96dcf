#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "darcynas/common.hpp"
#include "darcynas/optim.hpp"

using namespace darcynas;
using doctest::Approx;

namespace {

double rosenbrock(const std::vector<double>& x, std::vector<double>& g) {
    double f = 0.0;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i + 1] - x[i] * x[i];
        const double b = 1.0 - x[i];
        f += 100.0 * a * a + b * b;
        g[i] += -400.0 * a * x[i] - 2.0 * b;
        g[i + 1] += 200.0 * a;
    }
    return f;
}

}  // namespace

TEST_CASE("adam first step moves by lr against the gradient sign") {
    Adam adam(2, AdamOptions{});
    std::vector<double> x{1.0, -2.0};
    adam.step(x, {3.0, -0.5});
    // With bias correction the first step is lr * g / (|g| + eps).
    CHECK(x[0] == Approx(1.0 - 1e-3).epsilon(1e-9));
    CHECK(x[1] == Approx(-2.0 + 1e-3).epsilon(1e-9));
    CHECK(adam.steps() == 1);
    CHECK_THROWS_AS(adam.step(x, {1.0}), DomainError);
}

TEST_CASE("adam reduces a quadratic") {
    Adam adam(1, AdamOptions{0.05});
    std::vector<double> x{3.0};
    for (int i = 0; i < 2000; ++i) adam.step(x, {2.0 * (x[0] - 1.0)});
    CHECK(x[0] == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("lbfgs minimizes rosenbrock with monotone accepted steps") {
    std::vector<double> prev;
    double last = INFINITY;
    bool monotone = true;
    LbfgsOptions opts;
    opts.max_iters = 500;
    opts.tolerance = 1e-20;
    const auto res = lbfgs(rosenbrock, {-1.2, 1.0, -0.5, 0.8}, opts, [&](int, double f, const std::vector<double>&) {
        monotone = monotone && f <= last;
        last = f;
    });
    CHECK(monotone);
    CHECK(res.f < 1e-12);
    for (double v : res.x) CHECK(v == Approx(1.0).epsilon(1e-5));
}

TEST_CASE("strong wolfe conditions hold at the accepted step") {
    LbfgsOptions opts;
    std::vector<double> x{-1.2, 1.0};
    std::vector<double> g(2);
    const double f0 = rosenbrock(x, g);
    const std::vector<double> d{-g[0], -g[1]};
    const auto ls = strong_wolfe(rosenbrock, x, 1.0, d, f0, g, opts);
    REQUIRE(ls.ok);
    const double gtd0 = g[0] * d[0] + g[1] * d[1];
    const double gtd = ls.g[0] * d[0] + ls.g[1] * d[1];
    CHECK(ls.f <= f0 + opts.c1 * ls.t * gtd0);
    CHECK(std::abs(gtd) <= -opts.c2 * gtd0);
}

TEST_CASE("quadratic converges in few iterations and stops on tolerance") {
    auto quad = [](const std::vector<double>& x, std::vector<double>& g) {
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double w = 1.0 + static_cast<double>(i);
            f += 0.5 * w * x[i] * x[i];
            g[i] = w * x[i];
        }
        return f;
    };
    LbfgsOptions opts;
    const auto res = lbfgs(quad, {1, 1, 1, 1, 1}, opts);
    CHECK(res.f < 1e-9);
    CHECK(res.iterations < 30);
    CHECK(res.status != LbfgsStatus::LineSearchFailed);
}

TEST_CASE("failed line search keeps the best point") {
    // Ascent-only objective along every direction the solver tries: f = -|x|
    // has no minimizer, so the line search runs out of evaluations quickly.
    int calls = 0;
    auto noisy = [&](const std::vector<double>& x, std::vector<double>& g) {
        ++calls;
        g[0] = 1.0;  // claims descent to the left, but f never decreases
        return calls == 1 ? 0.0 : 1.0 + x[0] * x[0];
    };
    LbfgsOptions opts;
    opts.max_line_search = 5;
    const auto res = lbfgs(noisy, {0.0}, opts);
    CHECK(res.status == LbfgsStatus::LineSearchFailed);
    CHECK(res.x[0] == 0.0);
    CHECK(res.f == 0.0);
}
