#pragma once

// Global sensitivity analysis over integer hyperparameter intervals: Morris
// elementary effects and eFAST variance decomposition. Both methods work in
// the unit cube; objectives see unit coordinates and may round them with
// SearchSpace::to_integers.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "darcynas/common.hpp"

namespace darcynas {

struct Parameter {
    std::string name;
    int lo = 0;
    int hi = 1;
};

class SearchSpace {
public:
    SearchSpace() = default;
    explicit SearchSpace(std::vector<Parameter> params);

    /// layers [2,30], neurons [10,50], iterations [1500,3000],
    /// collocation points [800,2000], maxls [30,300].
    static SearchSpace trainer_default();

    std::size_t size() const noexcept { return params_.size(); }
    const std::vector<Parameter>& params() const noexcept { return params_; }
    const Parameter& operator[](std::size_t i) const { return params_.at(i); }
    std::size_t index_of(const std::string& name) const;

    /// Nearest in-range integer of each unit coordinate.
    std::vector<int> to_integers(const std::vector<double>& unit) const;
    std::vector<double> to_unit(const std::vector<int>& values) const;

    /// Parameters listed in `names`, in that order.
    SearchSpace subset(const std::vector<std::string>& names) const;

private:
    std::vector<Parameter> params_;
};

/// Objective over unit coordinates, one entry per space parameter.
using SaObjective = std::function<double(const std::vector<double>& unit)>;

struct SaResult {
    std::string method;  // "morris" or "efast"
    std::vector<std::string> names;
    std::vector<double> mu_star, mu, sigma, criterion;  // Morris
    std::vector<double> s1, st;                         // eFAST
    /// Parameter indices, most influential first: sqrt(sigma^2 + mu*^2) for
    /// Morris, S_T for eFAST.
    std::vector<std::size_t> ranking;
    long evaluations = 0;
};

struct MorrisOptions {
    int trajectories = 10;
    int levels = 4;
};

/// One-at-a-time trajectories on a `levels`-point grid with jump
/// levels / (2 (levels - 1)); each trajectory costs size() + 1 evaluations.
SaResult morris_screen(const SearchSpace& space, const SaObjective& objective, const MorrisOptions& opts, Rng& rng);

/// Morris design points, exposed for inspection: trajectories x (k+1) points.
std::vector<std::vector<std::vector<double>>> morris_trajectories(std::size_t k, const MorrisOptions& opts, Rng& rng);

struct EfastOptions {
    int samples = 65;  // per analysed parameter
    int harmonics = 4;
};

/// Highest frequency a sample count supports: (samples - 1) / (2 harmonics).
int efast_max_frequency(const EfastOptions& opts);

/// First-order and total indices from one search curve per parameter;
/// costs samples x size() evaluations. Throws DomainError for zero variance.
SaResult efast(const SearchSpace& space, const SaObjective& objective, const EfastOptions& opts, Rng& rng);

struct PipelineOptions {
    MorrisOptions morris;
    EfastOptions efast;
    int dropped = 2;  // least influential parameters removed after Morris
    int kept = 2;     // size of the reduced space
};

struct PipelineResult {
    SaResult morris;
    SaResult efast;
    SearchSpace reduced;
    long evaluations = 0;
};

/// Morris on the full space, eFAST on the survivors (the dropped parameters
/// held at the centre of their interval), top `kept` by S_T.
PipelineResult screen_pipeline(const SearchSpace& space, const SaObjective& objective, const PipelineOptions& opts,
                               Rng& rng);

/// param,mu_star,sigma,criterion or param,S1,ST.
void write_sa_csv(std::ostream& out, const SaResult& result);
void write_sa_csv(const std::string& path, const SaResult& result);

}  // namespace darcynas
