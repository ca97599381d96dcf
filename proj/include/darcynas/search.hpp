#pragma once

// Hyperparameter search over an integer SearchSpace: random search, GP
// Bayesian optimization with expected improvement, Hyperband and Jaya, plus
// the screening-then-search NAS loop that persists the winner.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "darcynas/dcnet.hpp"
#include "darcynas/pinn.hpp"
#include "darcynas/sensitivity.hpp"

namespace darcynas {

struct TrialOutcome {
    double value = 0.0;  // delta_h
    int iterations = 0;  // training iterations spent
};

/// Objective over integer configurations. `resource` is the Hyperband
/// budget in resource units; the other searchers pass 0 (full budget).
using TrialObjective = std::function<TrialOutcome(const std::vector<int>& config, double resource)>;

/// Adapts a plain value function that ignores the resource.
TrialObjective value_objective(std::function<double(const std::vector<int>&)> f);

struct TrialResult {
    int trial = 0;
    std::string method;
    std::vector<int> config;
    double resource = 0.0;
    double value = INFINITY;  // +inf when the objective failed
    int iterations = 0;
    double seconds = 0.0;
    bool cached = false;
    int bracket = -1;  // Hyperband only
    int rung = -1;
    std::string note;  // failure message or GP fallback
};

struct SearchResult {
    TrialResult best;
    std::vector<TrialResult> log;
    long objective_calls = 0;  // cache misses
};

/// Runs trials for one searcher: bounds checks, the (config, resource) cache
/// and the trial log. Objective exceptions become +inf trials.
class TrialRunner {
public:
    TrialRunner(std::string method, const SearchSpace& space, TrialObjective objective);

    const TrialResult& run(const std::vector<int>& config, double resource = 0.0, int bracket = -1, int rung = -1,
                           std::string note = {});
    SearchResult finish() &&;
    const std::vector<TrialResult>& log() const noexcept { return log_; }

private:
    std::string method_;
    const SearchSpace& space_;
    TrialObjective objective_;
    std::map<std::pair<std::vector<int>, double>, TrialOutcome> cache_;
    std::map<std::pair<std::vector<int>, double>, std::string> failures_;
    std::vector<TrialResult> log_;
    long calls_ = 0;
};

std::vector<int> random_config(const SearchSpace& space, Rng& rng);

SearchResult random_search(const SearchSpace& space, const TrialObjective& objective, int budget, Rng& rng);

/// Squared-exponential GP with per-axis length scales on unit coordinates;
/// targets are standardized internally.
class GpSurrogate {
public:
    struct Prediction {
        double mean = 0.0;
        double sd = 0.0;
    };

    static constexpr double nugget = 1e-8;

    /// Fits hyperparameters by maximizing the log marginal likelihood with a
    /// multi-start coordinate search. Returns false when the kernel matrix
    /// cannot be factorized.
    bool fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, Rng& rng);
    /// Uses the given log hyperparameters (length scales, signal var, noise var).
    bool set(const std::vector<std::vector<double>>& x, const std::vector<double>& y, const Eigen::VectorXd& log_theta);

    Prediction predict(const std::vector<double>& x) const;
    double log_marginal_likelihood() const noexcept { return lml_; }
    const Eigen::VectorXd& log_theta() const noexcept { return theta_; }

private:
    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    Eigen::MatrixXd x_;
    Eigen::VectorXd alpha_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd theta_;
    double y_mean_ = 0.0, y_scale_ = 1.0, lml_ = -INFINITY;
};

/// E[max(best - Y, 0)] for Y ~ N(mean, sd^2); minimization convention.
double expected_improvement(double mean, double sd, double best);

struct BayesOptions {
    int initial = 3;
    int candidates = 512;
};

SearchResult bayes_opt(const SearchSpace& space, const TrialObjective& objective, int budget, Rng& rng,
                       const BayesOptions& opts = {});

struct HyperbandRung {
    long n = 0;       // configurations evaluated
    double r = 0.0;   // resource per configuration
};

struct HyperbandBracket {
    int s = 0;
    long n = 0;
    double r = 0.0;
    std::vector<HyperbandRung> rungs;
    double resource() const;  // sum of n_i r_i
};

/// s_max = floor(log_eta R), B = (s_max+1) R, n = ceil(B/R eta^s/(s+1)), r = R eta^-s.
std::vector<HyperbandBracket> hyperband_schedule(double R, int eta);

SearchResult hyperband(const SearchSpace& space, const TrialObjective& objective, double R, int eta, Rng& rng);

struct JayaOptions {
    int population = 8;
    int generations = 20;
    /// Move relative to |A| as in the original update rule; false uses A.
    bool literal_abs = true;
};

/// A' = A + r1 (best - |A|) - r2 (worst - |A|) (|A| -> A when !literal_abs).
double jaya_update(double a, double best, double worst, double r1, double r2, bool literal_abs = true);

SearchResult jaya(const SearchSpace& space, const TrialObjective& objective, const JayaOptions& opts, Rng& rng);

/// trial,method,<param...>,delta_h,iters,seconds after a schema comment.
void write_trial_log(std::ostream& out, const SearchSpace& space, const std::vector<TrialResult>& log);
void write_trial_log(const std::string& path, const SearchSpace& space, const std::vector<TrialResult>& log);

using Assignment = std::map<std::string, int>;

/// What the NAS loop needs from a trainer. `screen` is the cheap
/// sensitivity objective over every parameter; `evaluate` trains one trial
/// (resource 0 = full budget); `train_final` trains the winner.
struct NasTrainer {
    std::function<double(const Assignment&)> screen;
    std::function<TrialOutcome(const Assignment&, double resource)> evaluate;
    std::function<std::pair<Network, double>(const Assignment&)> train_final;  // network and its delta_h
};

struct NasOptions {
    std::string method = "bayes";  // random, bayes, hyperband, jaya
    int budget = 30;               // random / bayes trials
    double hyperband_r = 81.0;
    int hyperband_eta = 3;
    JayaOptions jaya;
    BayesOptions bayes;
    PipelineOptions screening;
    std::string out_dir;  // empty: nothing persisted
    std::uint64_t seed = 0;
};

struct NasResult {
    PipelineResult screening;
    SearchResult search;
    Assignment winner;
    double winner_delta_h = INFINITY;
    std::optional<Network> network;
    std::string checkpoint_path;
};

/// Screening, search on the reduced space, final training of the winner.
/// With an output directory, artifacts of completed phases are written as
/// each phase finishes: sa_morris.csv, sa_efast.csv, trials.csv,
/// winner.ckpt and winner.txt.
NasResult nas_run(const SearchSpace& full, const NasTrainer& trainer, const NasOptions& opts, Rng& rng);

SearchResult run_search(const std::string& method, const SearchSpace& space, const TrialObjective& objective,
                        const NasOptions& opts, Rng& rng);

/// Key-value winner manifest ("key = value" lines, schema winner/1).
void write_winner_manifest(const std::string& path, const NasOptions& opts, const NasResult& result);
std::map<std::string, std::string> read_manifest(const std::string& path);

/// PINN trainer over the parameters layers, neurons, iterations (Adam steps),
/// collocation (interior points) and maxls; missing ones take `base` values.
struct PinnNasSetup {
    Domain domain = canonical_domain(1);
    FieldSpec field;
    ManufacturedCase mms = canonical_case(1, SolutionFamily::SineOfSum);
    TrainConfig base;
    int screen_adam_iters = 500;  // sensitivity objective: Adam only
    int resource_unit = 25;       // Adam steps per Hyperband resource unit
    std::uint64_t seed = 0;
};

NasTrainer make_pinn_trainer(const PinnNasSetup& setup);

}  // namespace darcynas
