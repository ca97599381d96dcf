#include "darcynas/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

namespace darcynas {

SearchSpace::SearchSpace(std::vector<Parameter> params) : params_(std::move(params)) {
    std::set<std::string> seen;
    for (const auto& p : params_) {
        if (p.name.empty()) throw DomainError("parameter names must be non-empty");
        if (!(p.lo < p.hi)) throw DomainError("parameter '" + p.name + "' needs lo < hi");
        if (!seen.insert(p.name).second) throw DomainError("duplicate parameter '" + p.name + "'");
    }
}

SearchSpace SearchSpace::trainer_default() {
    return SearchSpace({{"layers", 2, 30},
                        {"neurons", 10, 50},
                        {"iterations", 1500, 3000},
                        {"collocation", 800, 2000},
                        {"maxls", 30, 300}});
}

std::size_t SearchSpace::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw DomainError("unknown parameter '" + name + "'");
}

std::vector<int> SearchSpace::to_integers(const std::vector<double>& unit) const {
    if (unit.size() != params_.size()) throw DomainError("point dimension does not match the search space");
    std::vector<int> out(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        if (!std::isfinite(unit[i])) throw DomainError("non-finite unit coordinate");
        const double u = std::clamp(unit[i], 0.0, 1.0);
        const auto& p = params_[i];
        out[i] = std::clamp(static_cast<int>(std::lround(p.lo + u * (p.hi - p.lo))), p.lo, p.hi);
    }
    return out;
}

std::vector<double> SearchSpace::to_unit(const std::vector<int>& values) const {
    if (values.size() != params_.size()) throw DomainError("point dimension does not match the search space");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& p = params_[i];
        out[i] = static_cast<double>(values[i] - p.lo) / static_cast<double>(p.hi - p.lo);
    }
    return out;
}

SearchSpace SearchSpace::subset(const std::vector<std::string>& names) const {
    std::vector<Parameter> out;
    for (const auto& n : names) out.push_back(params_[index_of(n)]);
    return SearchSpace(std::move(out));
}

namespace {

double evaluate(const SaObjective& objective, const std::vector<double>& u, const char* method, std::size_t where) {
    double y;
    try {
        y = objective(u);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(method) + " evaluation " + std::to_string(where) + " failed: " + e.what());
    }
    if (!std::isfinite(y))
        throw NumericError(std::string(method) + " evaluation " + std::to_string(where) + " returned a non-finite value");
    return y;
}

std::vector<std::string> names_of(const SearchSpace& space) {
    std::vector<std::string> n;
    for (const auto& p : space.params()) n.push_back(p.name);
    return n;
}

std::vector<std::size_t> rank_descending(const std::vector<double>& score) {
    std::vector<std::size_t> idx(score.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    return idx;
}

}  // namespace

std::vector<std::vector<std::vector<double>>> morris_trajectories(std::size_t k, const MorrisOptions& opts, Rng& rng) {
    if (k < 1) throw DomainError("Morris needs at least one parameter");
    if (opts.trajectories < 2) throw DomainError("Morris needs at least 2 trajectories");
    if (opts.levels < 2 || opts.levels % 2 != 0) throw DomainError("Morris level count must be even and >= 2");
    const int p = opts.levels;
    const double step = 1.0 / (p - 1);
    const int jump_levels = p / 2;  // delta = p / (2 (p - 1)) = jump_levels * step
    const double delta = jump_levels * step;

    std::vector<std::vector<std::vector<double>>> out;
    for (int r = 0; r < opts.trajectories; ++r) {
        // Base levels leave room for a +delta jump; a coin then decides whether
        // the factor moves up from its base or down from base + delta.
        std::vector<double> x(k);
        std::vector<int> dir(k);
        for (std::size_t i = 0; i < k; ++i) {
            const int base = rng.uniform_int(0, p - 1 - jump_levels);
            dir[i] = rng.uniform() < 0.5 ? 1 : -1;
            x[i] = (dir[i] > 0 ? base : base + jump_levels) * step;
        }
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng.engine());
        std::vector<std::vector<double>> traj{x};
        for (std::size_t i : order) {
            x[i] += dir[i] * delta;
            x[i] = std::clamp(x[i], 0.0, 1.0);
            traj.push_back(x);
        }
        out.push_back(std::move(traj));
    }
    return out;
}

SaResult morris_screen(const SearchSpace& space, const SaObjective& objective, const MorrisOptions& opts, Rng& rng) {
    const std::size_t k = space.size();
    const auto trajs = morris_trajectories(k, opts, rng);
    SaResult res;
    res.method = "morris";
    res.names = names_of(space);
    std::vector<std::vector<double>> ee(k);
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        const auto& t = trajs[r];
        std::vector<double> y(t.size());
        for (std::size_t s = 0; s < t.size(); ++s) {
            y[s] = evaluate(objective, t[s], "morris", res.evaluations);
            ++res.evaluations;
        }
        for (std::size_t s = 1; s < t.size(); ++s) {
            std::size_t moved = k;
            for (std::size_t i = 0; i < k; ++i)
                if (t[s][i] != t[s - 1][i]) moved = i;
            const double dx = t[s][moved] - t[s - 1][moved];
            ee[moved].push_back((y[s] - y[s - 1]) / dx);
        }
    }
    const double n = static_cast<double>(opts.trajectories);
    for (std::size_t i = 0; i < k; ++i) {
        double abs_sum = 0.0, sum = 0.0;
        for (double e : ee[i]) {
            abs_sum += std::abs(e);
            sum += e;
        }
        const double mean = sum / n;
        double var = 0.0;
        for (double e : ee[i]) var += (e - mean) * (e - mean);
        var /= n - 1.0;
        res.mu_star.push_back(abs_sum / n);
        res.mu.push_back(mean);
        res.sigma.push_back(std::sqrt(var));
        res.criterion.push_back(std::sqrt(var + res.mu_star.back() * res.mu_star.back()));
    }
    res.ranking = rank_descending(res.criterion);
    return res;
}

int efast_max_frequency(const EfastOptions& opts) {
    if (opts.harmonics < 1) throw DomainError("eFAST needs at least one harmonic");
    return (opts.samples - 1) / (2 * opts.harmonics);
}

SaResult efast(const SearchSpace& space, const SaObjective& objective, const EfastOptions& opts, Rng& rng) {
    const std::size_t k = space.size();
    if (k < 1) throw DomainError("eFAST needs at least one parameter");
    const int n = opts.samples;
    const int m = opts.harmonics;
    const int w_max = efast_max_frequency(opts);
    // The complementary frequencies must stay below w_max / (2M) so that
    // their harmonics never alias onto the analysed band.
    const int w_comp = w_max / (2 * m);
    if (w_max < 1 || w_comp < 1 || n < 2 * m * w_max + 1)
        throw DomainError("eFAST needs samples >= 4 M^2 + 1 (got " + std::to_string(n) + ")");

    SaResult res;
    res.method = "efast";
    res.names = names_of(space);
    std::vector<double> y(n);
    // Complementary frequencies are spread over [1, w_comp] with a common
    // step, cycling when there are more parameters than frequencies.
    const int step = k > 1 ? std::max(1, w_comp / static_cast<int>(k - 1)) : 1;
    std::vector<int> omega(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0, c = 0; j < k; ++j)
            omega[j] = j == i ? w_max : static_cast<int>((c++ * step) % w_comp) + 1;
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        std::vector<double> u(k);
        for (int s = 0; s < n; ++s) {
            const double arc = 2.0 * std::numbers::pi * s / n;
            for (std::size_t j = 0; j < k; ++j)
                u[j] = 0.5 + std::asin(std::sin(omega[j] * arc + phase)) / std::numbers::pi;
            y[s] = evaluate(objective, u, "efast", res.evaluations);
            ++res.evaluations;
        }
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        if (*lo == *hi) throw DomainError("objective has zero variance along the eFAST curve");
        // Spectrum Lambda_j = A_j^2 + B_j^2 of the sampled curve.
        std::vector<double> lambda((n - 1) / 2 + 1, 0.0);
        for (std::size_t f = 1; f < lambda.size(); ++f) {
            double a = 0.0, b = 0.0;
            for (int s = 0; s < n; ++s) {
                const double arc = 2.0 * std::numbers::pi * static_cast<double>(f) * s / n;
                a += y[s] * std::cos(arc);
                b += y[s] * std::sin(arc);
            }
            a /= n;
            b /= n;
            lambda[f] = a * a + b * b;
        }
        double d_total = 0.0;
        for (std::size_t f = 1; f < lambda.size(); ++f) d_total += 2.0 * lambda[f];
        if (!(d_total > 0.0)) throw DomainError("objective has zero variance along the eFAST curve");
        double d_first = 0.0;
        for (int p = 1; p <= m; ++p) d_first += 2.0 * lambda[static_cast<std::size_t>(p * w_max)];
        double d_rest = 0.0;
        for (int f = 1; f <= w_max / 2; ++f) d_rest += 2.0 * lambda[f];
        res.s1.push_back(d_first / d_total);
        res.st.push_back(1.0 - d_rest / d_total);
    }
    res.ranking = rank_descending(res.st);
    return res;
}

PipelineResult screen_pipeline(const SearchSpace& space, const SaObjective& objective, const PipelineOptions& opts,
                               Rng& rng) {
    const std::size_t k = space.size();
    if (k < 3) throw DomainError("screening needs at least 3 parameters");
    if (opts.kept < 1 || opts.dropped < 0) throw DomainError("invalid screening sizes");
    PipelineResult out;
    out.morris = morris_screen(space, objective, opts.morris, rng);

    // Never screen below the requested reduced size.
    const std::size_t drop = std::min<std::size_t>(opts.dropped, k > static_cast<std::size_t>(opts.kept) ? k - opts.kept : 0);
    std::vector<std::size_t> keep(out.morris.ranking.begin(), out.morris.ranking.end() - static_cast<std::ptrdiff_t>(drop));
    std::sort(keep.begin(), keep.end());

    std::vector<std::string> names;
    for (std::size_t i : keep) names.push_back(space[i].name);
    const SearchSpace survivors = space.subset(names);
    const SaObjective restricted = [&](const std::vector<double>& u) {
        std::vector<double> full(k, 0.5);
        for (std::size_t j = 0; j < keep.size(); ++j) full[keep[j]] = u[j];
        return objective(full);
    };
    out.efast = efast(survivors, restricted, opts.efast, rng);

    std::vector<std::string> top;
    for (std::size_t j = 0; j < out.efast.ranking.size() && top.size() < static_cast<std::size_t>(opts.kept); ++j)
        top.push_back(survivors[out.efast.ranking[j]].name);
    // Report the reduced space in the original parameter order.
    std::stable_sort(top.begin(), top.end(),
                     [&](const std::string& a, const std::string& b) { return space.index_of(a) < space.index_of(b); });
    out.reduced = space.subset(top);
    out.evaluations = out.morris.evaluations + out.efast.evaluations;
    return out;
}

void write_sa_csv(std::ostream& out, const SaResult& r) {
    out << std::setprecision(17);
    if (r.method == "morris") {
        out << "param,mu_star,sigma,criterion\n";
        for (std::size_t i = 0; i < r.names.size(); ++i)
            out << r.names[i] << ',' << r.mu_star[i] << ',' << r.sigma[i] << ',' << r.criterion[i] << '\n';
    } else if (r.method == "efast") {
        out << "param,S1,ST\n";
        for (std::size_t i = 0; i < r.names.size(); ++i) out << r.names[i] << ',' << r.s1[i] << ',' << r.st[i] << '\n';
    } else {
        throw DomainError("unknown sensitivity method '" + r.method + "'");
    }
}

void write_sa_csv(const std::string& path, const SaResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_sa_csv(out, r);
}

}  // namespace darcynas
