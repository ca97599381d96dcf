#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "darcynas/sensitivity.hpp"

using namespace darcynas;
using doctest::Approx;

namespace {

SearchSpace unit_space(int k) {
    std::vector<Parameter> p;
    for (int i = 0; i < k; ++i) p.push_back({"x" + std::to_string(i + 1), 0, 100});
    return SearchSpace(p);
}

/// Closed-form Ishigami variances for inputs uniform on [-pi, pi]^3.
struct IshigamiIndices {
    double s1, s2, s3, st1, st2, st3;
};

IshigamiIndices ishigami_indices(double a, double b) {
    const double pi4 = std::pow(std::numbers::pi, 4);
    const double pi8 = pi4 * pi4;
    const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
    const double v2 = a * a / 8.0;
    const double v13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    const double v = v1 + v2 + v13;
    return {v1 / v, v2 / v, 0.0, (v1 + v13) / v, v2 / v, v13 / v};
}

double ishigami(const std::vector<double>& u) {
    auto x = [&](int i) { return std::numbers::pi * (2.0 * u[i] - 1.0); };
    return std::sin(x(0)) + 7.0 * std::pow(std::sin(x(1)), 2) + 0.1 * std::pow(x(2), 4) * std::sin(x(0));
}

}  // namespace

TEST_CASE("search space") {
    const auto s = SearchSpace::trainer_default();
    CHECK(s.size() == 5);
    CHECK(s.index_of("neurons") == 1);
    CHECK(s.to_integers({0.0, 1.0, 0.5, 0.0, 1.0}) == std::vector<int>{2, 50, 2250, 800, 300});
    CHECK(s.to_integers({-0.2, 1.3, 0.5, 0.0, 1.0})[0] == 2);
    CHECK(s.to_unit({30, 10, 1500, 2000, 165}) == std::vector<double>{1.0, 0.0, 0.0, 1.0, 0.5});
    CHECK(s.subset({"neurons", "layers"})[0].name == "neurons");
    CHECK_THROWS_AS(SearchSpace({{"a", 3, 3}}), DomainError);
    CHECK_THROWS_AS(SearchSpace({{"a", 0, 3}, {"a", 1, 4}}), DomainError);
    CHECK_THROWS_AS(s.index_of("depth"), DomainError);
}

TEST_CASE("morris trajectories are one-at-a-time on the level grid") {
    Rng rng(1);
    const MorrisOptions opts{20, 4};
    const auto trajs = morris_trajectories(5, opts, rng);
    REQUIRE(trajs.size() == 20);
    for (const auto& t : trajs) {
        REQUIRE(t.size() == 6);
        std::vector<int> moved(5, 0);
        for (std::size_t s = 1; s < t.size(); ++s) {
            int changes = 0;
            for (int i = 0; i < 5; ++i) {
                if (t[s][i] == t[s - 1][i]) continue;
                ++changes;
                ++moved[i];
                CHECK(std::abs(t[s][i] - t[s - 1][i]) == Approx(2.0 / 3.0));
            }
            CHECK(changes == 1);
        }
        for (int m : moved) CHECK(m == 1);
        for (const auto& x : t)
            for (double v : x) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                CHECK(std::abs(v * 3.0 - std::round(v * 3.0)) < 1e-12);
            }
    }
    CHECK_THROWS_AS(morris_trajectories(3, {1, 4}, rng), DomainError);
    CHECK_THROWS_AS(morris_trajectories(3, {5, 3}, rng), DomainError);
}

TEST_CASE("morris on an affine objective") {
    Rng rng(2);
    long calls = 0;
    const auto res = morris_screen(unit_space(3), [&](const std::vector<double>& u) {
        ++calls;
        return 10.0 * u[0] + 5.0 * u[1] + 0.1 * u[2];
    }, MorrisOptions{}, rng);
    const double slopes[] = {10.0, 5.0, 0.1};
    for (int i = 0; i < 3; ++i) {
        CHECK(res.mu_star[i] == Approx(slopes[i]).epsilon(1e-12));
        CHECK(res.sigma[i] <= 1e-12);
    }
    CHECK(res.ranking == std::vector<std::size_t>{0, 1, 2});
    CHECK(res.evaluations == 10 * 4);
    CHECK(calls == res.evaluations);
}

TEST_CASE("morris constant and interaction objectives") {
    Rng rng(3);
    const auto flat = morris_screen(unit_space(2), [](const std::vector<double>&) { return 4.0; }, {}, rng);
    for (int i = 0; i < 2; ++i) {
        CHECK(flat.mu_star[i] == 0.0);
        CHECK(flat.sigma[i] == 0.0);
    }
    // EE_1 of u1*u2 equals the current u2, which varies across trajectories.
    const auto inter = morris_screen(unit_space(2), [](const std::vector<double>& u) { return u[0] * u[1]; },
                                     MorrisOptions{40, 4}, rng);
    CHECK(inter.sigma[0] > 0.1);
    CHECK(inter.sigma[1] > 0.1);
}

TEST_CASE("morris propagates objective failures with context") {
    Rng rng(4);
    int n = 0;
    const auto bad = [&](const std::vector<double>&) -> double {
        if (++n == 7) throw std::runtime_error("trainer diverged");
        return 1.0;
    };
    try {
        morris_screen(unit_space(3), bad, {}, rng);
        FAIL("expected a failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("evaluation 6") != std::string::npos);
        CHECK(std::string(e.what()).find("trainer diverged") != std::string::npos);
    }
}

TEST_CASE("efast on a single-input function") {
    Rng rng(5);
    const auto res = efast(unit_space(3), [](const std::vector<double>& u) { return u[0]; }, {}, rng);
    CHECK(res.s1[0] >= 0.95);
    CHECK(res.s1[1] <= 0.05);
    CHECK(res.s1[2] <= 0.05);
    CHECK(res.evaluations == 3 * 65);
    CHECK(res.ranking[0] == 0);
}

TEST_CASE("efast on the Ishigami function") {
    const auto ref = ishigami_indices(7.0, 0.1);
    CHECK(ref.s1 == Approx(0.3139).epsilon(1e-3));
    CHECK(ref.s2 == Approx(0.4424).epsilon(1e-3));
    Rng rng(6);
    const auto res = efast(unit_space(3), ishigami, EfastOptions{1025, 4}, rng);
    CHECK(std::abs(res.s1[0] - ref.s1) <= 0.05);
    CHECK(std::abs(res.s1[1] - ref.s2) <= 0.05);
    CHECK(std::abs(res.s1[2] - ref.s3) <= 0.05);
    CHECK(std::abs(res.st[0] - ref.st1) <= 0.05);
    CHECK(std::abs(res.st[1] - ref.st2) <= 0.05);
    CHECK(std::abs(res.st[2] - ref.st3) <= 0.05);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        CHECK(res.s1[i] >= 0.0);
        CHECK(res.s1[i] <= res.st[i] + 0.05);
        CHECK(res.st[i] <= 1.05);
        sum += res.s1[i];
    }
    CHECK(sum <= 1.05);
}

TEST_CASE("efast additive model and errors") {
    Rng rng(7);
    const auto res = efast(unit_space(3), [](const std::vector<double>& u) { return 2.0 * u[0] + u[1] * u[1] + 0.5 * u[2]; },
                           EfastOptions{257, 4}, rng);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(res.s1[i] - res.st[i]) <= 0.05);
    CHECK_THROWS_AS(efast(unit_space(2), [](const std::vector<double>&) { return 1.0; }, {}, rng), DomainError);
    CHECK_THROWS_AS(efast(unit_space(2), [](const std::vector<double>& u) { return u[0]; }, {33, 4}, rng), DomainError);
    CHECK(efast_max_frequency({65, 4}) == 8);
}

TEST_CASE("screening pipeline keeps layers and neurons") {
    const auto space = SearchSpace::trainer_default();
    const SaObjective synthetic = [](const std::vector<double>& u) {
        return 10.0 * u[0] + 5.0 * u[1] + 0.1 * (u[2] + u[3] + u[4]);
    };
    Rng rng(8);
    long calls = 0;
    const auto out = screen_pipeline(space, [&](const std::vector<double>& u) {
        ++calls;
        return synthetic(u);
    }, PipelineOptions{}, rng);
    REQUIRE(out.reduced.size() == 2);
    CHECK(out.reduced[0].name == "layers");
    CHECK(out.reduced[1].name == "neurons");
    CHECK(out.efast.names.size() == 3);
    CHECK(out.evaluations == 10 * 6 + 3 * 65);
    CHECK(calls == out.evaluations);
    CHECK_THROWS_AS(screen_pipeline(unit_space(2), synthetic, {}, rng), DomainError);
}

TEST_CASE("csv export") {
    Rng rng(9);
    const auto m = morris_screen(unit_space(2), [](const std::vector<double>& u) { return 3.0 * u[0]; }, {}, rng);
    std::ostringstream a;
    write_sa_csv(a, m);
    CHECK(a.str().rfind("param,mu_star,sigma,criterion\nx1,3", 0) == 0);
    const auto e = efast(unit_space(2), [](const std::vector<double>& u) { return u[1]; }, {}, rng);
    std::ostringstream b;
    write_sa_csv(b, e);
    CHECK(b.str().rfind("param,S1,ST\nx1,", 0) == 0);
}
