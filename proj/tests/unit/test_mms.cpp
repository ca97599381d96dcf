#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "darcynas/mms.hpp"
#include "oracles.hpp"

using namespace darcynas;
using doctest::Approx;

namespace {

FieldSpec field(int dim, CorrelationKind kind, double sigma2 = 0.1) {
    FieldSpec s;
    s.dim = dim;
    s.kind = kind;
    s.sigma2 = sigma2;
    s.lambdas = std::vector<double>{1.0, 0.5, 0.25};
    s.lambdas.resize(dim);
    s.n_modes = 300;
    s.seed = 100 + dim;
    return s;
}

}  // namespace

TEST_CASE("exact head values") {
    const auto c1 = canonical_case(1, SolutionFamily::SineOfSum);
    CHECK(h_exact(c1, {0, 0, 0}) == Approx(3.0));
    CHECK(h_exact(c1, {std::numbers::pi / 2, 0, 0}) == Approx(4.0));
    const auto c3 = canonical_case(3, SolutionFamily::SumOfSines);
    CHECK(h_exact(c3, {0, 0, 0}) == Approx(5.0));
    const auto s3 = canonical_case(3, SolutionFamily::SineOfSum);
    CHECK(h_exact(s3, {0.1, 0.2, 0.3}) == Approx(1.0 + std::sin(0.3 + 0.4 + 0.3)));
}

TEST_CASE("homogeneous source") {
    FieldSpec s = field(1, CorrelationKind::Gaussian, 0.0);
    const auto real = realize(s);
    const auto c = canonical_case(1, SolutionFamily::SineOfSum);
    CHECK(source_f(c, real, {std::numbers::pi / 2, 0, 0}) == Approx(-15.0));
    const auto c2 = canonical_case(2, SolutionFamily::SineOfSum);
    CHECK_THROWS_AS(source_f(c2, real, {0, 0, 0}), DomainError);
}

TEST_CASE("gradient matches finite differences of the head") {
    for (int dim = 1; dim <= 3; ++dim)
        for (auto fam : {SolutionFamily::SineOfSum, SolutionFamily::SumOfSines, SolutionFamily::Linear}) {
            const auto c = canonical_case(dim, fam);
            Rng rng(dim);
            for (int t = 0; t < 20; ++t) {
                Point x{rng.uniform(0, 5), rng.uniform(0, 2), rng.uniform(0, 1)};
                const Point g = grad_h_exact(c, x);
                const Point d = hessian_diagonal_exact(c, x);
                for (int j = 0; j < dim; ++j) {
                    const double h = 1e-6;
                    Point xp = x, xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    const double fd = (h_exact(c, xp) - h_exact(c, xm)) / (2 * h);
                    CHECK(std::abs(fd - g[j]) <= 1e-8 * std::max(1.0, std::abs(g[j])));
                    const double h2 = 1e-4;
                    xp = x;
                    xm = x;
                    xp[j] += h2;
                    xm[j] -= h2;
                    const double fd2 = (h_exact(c, xp) - 2 * h_exact(c, x) + h_exact(c, xm)) / (h2 * h2);
                    CHECK(std::abs(fd2 - d[j]) <= 1e-5 * std::max(1.0, std::abs(d[j])));
                }
            }
        }
}

TEST_CASE("source agrees with the divergence oracle") {
    for (int dim = 1; dim <= 3; ++dim)
        for (auto fam : {SolutionFamily::SineOfSum, SolutionFamily::SumOfSines})
            for (auto kind : {CorrelationKind::Gaussian, CorrelationKind::Exponential}) {
                const FieldSpec s = field(dim, kind);
                const auto c = canonical_case(dim, fam);
                const Domain dom = canonical_domain(dim);
                Rng rng(7 * dim);
                for (int t = 0; t < 50; ++t) {
                    const auto real = realize(s, t % 5);
                    Point x{0, 0, 0};
                    for (int j = 0; j < dim; ++j) x[j] = rng.uniform(dom.lower[j], dom.upper[j]);
                    const double f = source_f(c, real, x);
                    const double oracle = oracle::fd_divergence(c, real, x);
                    CHECK(std::abs(f - oracle) / std::max(1.0, std::abs(oracle)) < 1e-3);
                }
            }
}

TEST_CASE("boundary data") {
    const auto c1 = canonical_case(1, SolutionFamily::SineOfSum);
    BoundaryData b1(c1, canonical_domain(1));
    REQUIRE(b1.faces().size() == 2);
    CHECK(b1.dirichlet({0, 0, 0}) == Approx(3.0));
    CHECK(b1.dirichlet({25, 0, 0}) == Approx(3.0 + std::sin(25.0)));

    const auto c2 = canonical_case(2, SolutionFamily::SineOfSum);
    BoundaryData b2(c2, canonical_domain(2));
    REQUIRE(b2.faces().size() == 4);
    const Face south = b2.faces()[2];
    CHECK(south.axis == 1);
    CHECK(south.kind == BoundaryKind::Neumann);
    CHECK(b2.axis_derivative(south, {0.7, 0, 0}) == Approx(std::cos(1.4)));
    CHECK(b2.neumann(south, {0.7, 0, 0}) == Approx(-std::cos(1.4)));

    const auto c3 = canonical_case(3, SolutionFamily::SumOfSines);
    BoundaryData b3(c3, canonical_domain(3));
    CHECK(b3.axis_derivative(b3.faces()[2], {1.3, 0, 0.4}) == Approx(2.0));
    CHECK(b3.faces()[0].kind == BoundaryKind::Dirichlet);
    CHECK(b3.faces()[1].kind == BoundaryKind::Dirichlet);
}

TEST_CASE("case validation") {
    ManufacturedCase c{2, SolutionFamily::SineOfSum, {1.0, 0.0, 1.0}};
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.coeffs = {1.0, 1.0};
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK_THROWS_AS(parse_solution_family("cosine"), DomainError);
    CHECK_THROWS_AS(BoundaryData(canonical_case(1, SolutionFamily::SineOfSum), canonical_domain(2)), DomainError);
}
