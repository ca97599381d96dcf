#include "darcynas/search.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace darcynas {

TrialObjective value_objective(std::function<double(const std::vector<int>&)> f) {
    return [f = std::move(f)](const std::vector<int>& config, double) { return TrialOutcome{f(config), 0}; };
}

TrialRunner::TrialRunner(std::string method, const SearchSpace& space, TrialObjective objective)
    : method_(std::move(method)), space_(space), objective_(std::move(objective)) {
    if (space_.size() == 0) throw DomainError("search space is empty");
}

const TrialResult& TrialRunner::run(const std::vector<int>& config, double resource, int bracket, int rung,
                                    std::string note) {
    if (config.size() != space_.size()) throw DomainError("configuration does not match the search space");
    for (std::size_t i = 0; i < config.size(); ++i)
        if (config[i] < space_[i].lo || config[i] > space_[i].hi)
            throw DomainError("configuration value for '" + space_[i].name + "' is out of bounds");
    TrialResult t;
    t.trial = static_cast<int>(log_.size()) + 1;
    t.method = method_;
    t.config = config;
    t.resource = resource;
    t.bracket = bracket;
    t.rung = rung;
    t.note = std::move(note);
    const auto key = std::make_pair(config, resource);
    if (auto hit = cache_.find(key); hit != cache_.end()) {
        t.cached = true;
        t.value = hit->second.value;
        if (auto f = failures_.find(key); f != failures_.end()) t.note = f->second;
    } else {
        ++calls_;
        const auto start = std::chrono::steady_clock::now();
        TrialOutcome out{INFINITY, 0};
        try {
            out = objective_(config, resource);
            if (std::isnan(out.value) || out.value < 0.0) throw NumericError("objective returned an invalid value");
        } catch (const std::exception& e) {
            out = {INFINITY, 0};
            t.note = e.what();
            failures_[key] = t.note;
        }
        t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        t.value = out.value;
        t.iterations = out.iterations;
        cache_[key] = out;
    }
    log_.push_back(std::move(t));
    return log_.back();
}

SearchResult TrialRunner::finish() && {
    SearchResult res;
    res.objective_calls = calls_;
    if (log_.empty()) throw DomainError("no trials were run");
    res.best = *std::min_element(log_.begin(), log_.end(),
                                 [](const TrialResult& a, const TrialResult& b) { return a.value < b.value; });
    res.log = std::move(log_);
    return res;
}

std::vector<int> random_config(const SearchSpace& space, Rng& rng) {
    std::vector<int> c(space.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<int>(rng.uniform_int(space[i].lo, space[i].hi));
    return c;
}

SearchResult random_search(const SearchSpace& space, const TrialObjective& objective, int budget, Rng& rng) {
    if (budget < 1) throw DomainError("search budget must be >= 1");
    TrialRunner runner("random", space, objective);
    for (int i = 0; i < budget; ++i) runner.run(random_config(space, rng));
    return std::move(runner).finish();
}

// ---------------------------------------------------------------------------
// Gaussian process surrogate

double GpSurrogate::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const auto d = a.size();
    double r2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double z = (a(j) - b(j)) / std::exp(theta_(j));
        r2 += z * z;
    }
    return std::exp(theta_(d)) * std::exp(-0.5 * r2);
}

bool GpSurrogate::set(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                      const Eigen::VectorXd& log_theta) {
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n == 0 || y.size() != x.size()) throw DomainError("GP needs matching, non-empty data");
    const auto d = static_cast<Eigen::Index>(x[0].size());
    if (log_theta.size() != d + 2) throw DomainError("GP hyperparameter vector has the wrong size");
    x_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x_(i, j) = x[i][j];
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[i];
    y_mean_ = yv.mean();
    const double var = n > 1 ? (yv.array() - y_mean_).square().sum() / static_cast<double>(n - 1) : 0.0;
    y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
    const Eigen::VectorXd ys = (yv.array() - y_mean_) / y_scale_;

    theta_ = log_theta;
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(x_.row(i).transpose(), x_.row(j).transpose());
    k.diagonal().array() += std::exp(theta_(d + 1)) + nugget;
    llt_.compute(k);
    if (llt_.info() != Eigen::Success) {
        lml_ = -INFINITY;
        return false;
    }
    alpha_ = llt_.solve(ys);
    const Eigen::MatrixXd l = llt_.matrixL();
    lml_ = -0.5 * ys.dot(alpha_) - l.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    return std::isfinite(lml_);
}

bool GpSurrogate::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, Rng& rng) {
    if (x.empty()) throw DomainError("GP needs data");
    const auto d = static_cast<Eigen::Index>(x[0].size());
    Eigen::VectorXd lo(d + 2), hi(d + 2);
    lo.head(d).setConstant(std::log(1e-2));
    hi.head(d).setConstant(std::log(1e2));
    lo(d) = std::log(1e-3);
    hi(d) = std::log(1e2);
    lo(d + 1) = std::log(1e-8);
    hi(d + 1) = std::log(1.0);

    std::vector<Eigen::VectorXd> starts;
    Eigen::VectorXd s0(d + 2);
    s0.head(d).setConstant(std::log(0.3));
    s0(d) = 0.0;
    s0(d + 1) = std::log(1e-4);
    starts.push_back(s0);
    for (int r = 0; r < 2; ++r) {
        Eigen::VectorXd s(d + 2);
        for (Eigen::Index j = 0; j < d + 2; ++j) s(j) = rng.uniform(lo(j), hi(j));
        starts.push_back(s);
    }

    Eigen::VectorXd best_theta;
    double best = -INFINITY;
    for (const auto& start : starts) {
        Eigen::VectorXd theta = start;
        double value = set(x, y, theta) ? lml_ : -INFINITY;
        for (double step = 1.0; step >= 1e-3; step *= 0.5) {
            bool improved = true;
            for (int sweep = 0; improved && sweep < 50; ++sweep) {
                improved = false;
                for (Eigen::Index j = 0; j < d + 2; ++j) {
                    for (double dir : {1.0, -1.0}) {
                        Eigen::VectorXd trial = theta;
                        trial(j) = std::clamp(trial(j) + dir * step, lo(j), hi(j));
                        if (trial(j) == theta(j)) continue;
                        if (set(x, y, trial) && lml_ > value) {
                            value = lml_;
                            theta = trial;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if (value > best) {
            best = value;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best)) return false;
    return set(x, y, best_theta);
}

GpSurrogate::Prediction GpSurrogate::predict(const std::vector<double>& x) const {
    const auto d = x_.cols();
    if (static_cast<Eigen::Index>(x.size()) != d) throw DomainError("GP query has the wrong dimension");
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
    Eigen::VectorXd ks(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) ks(i) = kernel(x_.row(i).transpose(), q);
    const double mean = ks.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(ks);
    const double var = std::max(0.0, std::exp(theta_(d)) - v.squaredNorm());
    return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double expected_improvement(double mean, double sd, double best) {
    const double gain = best - mean;
    if (!(sd > 0.0)) return std::max(gain, 0.0);
    const double z = gain / sd;
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return std::max(0.0, gain * cdf + sd * pdf);
}

SearchResult bayes_opt(const SearchSpace& space, const TrialObjective& objective, int budget, Rng& rng,
                       const BayesOptions& opts) {
    if (opts.initial < 1 || opts.candidates < 1) throw DomainError("invalid Bayesian search options");
    if (budget < opts.initial) throw DomainError("Bayesian search budget must cover the initial design");
    TrialRunner runner("bayes", space, objective);
    for (int i = 0; i < opts.initial; ++i) runner.run(random_config(space, rng));

    for (int it = opts.initial; it < budget; ++it) {
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        std::map<std::vector<int>, bool> seen;
        double incumbent = INFINITY;
        for (const auto& t : runner.log()) {
            seen[t.config] = true;
            if (!std::isfinite(t.value) || t.cached) continue;
            xs.push_back(space.to_unit(t.config));
            ys.push_back(t.value);
            incumbent = std::min(incumbent, t.value);
        }
        GpSurrogate gp;
        const bool ok = xs.size() >= 2 && gp.fit(xs, ys, rng);

        std::vector<int> pick;
        double best_ei = -1.0;
        std::vector<std::vector<int>> cands;
        for (int c = 0; c < opts.candidates; ++c) cands.push_back(random_config(space, rng));
        if (ok) {
            for (const auto& c : cands) {
                const auto p = gp.predict(space.to_unit(c));
                double ei = expected_improvement(p.mean, p.sd, incumbent);
                if (seen.count(c)) ei = -0.5;  // prefer unseen configurations
                if (ei > best_ei) {
                    best_ei = ei;
                    pick = c;
                }
            }
        } else {
            pick = cands.front();
        }
        runner.run(pick, 0.0, -1, -1, ok ? "" : "gp fallback: random candidate");
    }
    return std::move(runner).finish();
}

// ---------------------------------------------------------------------------
// Hyperband

double HyperbandBracket::resource() const {
    double total = 0.0;
    for (const auto& r : rungs) total += static_cast<double>(r.n) * r.r;
    return total;
}

std::vector<HyperbandBracket> hyperband_schedule(double R, int eta) {
    if (eta < 2) throw DomainError("Hyperband needs eta >= 2");
    if (!(R >= eta)) throw DomainError("Hyperband needs R >= eta");
    // Integer floor(log_eta R), immune to rounding in log(R)/log(eta).
    int s_max = 0;
    for (double p = eta; p <= R * (1.0 + 1e-12); p *= eta) ++s_max;
    const double b = (s_max + 1) * R;
    std::vector<HyperbandBracket> out;
    for (int s = s_max; s >= 0; --s) {
        HyperbandBracket br;
        br.s = s;
        const double eta_s = std::pow(static_cast<double>(eta), s);
        br.n = static_cast<long>(std::ceil(b / R * eta_s / (s + 1) - 1e-9));
        br.r = R / eta_s;
        for (int i = 0; i <= s; ++i) {
            const double eta_i = std::pow(static_cast<double>(eta), i);
            br.rungs.push_back({static_cast<long>(std::floor(static_cast<double>(br.n) / eta_i + 1e-9)), br.r * eta_i});
        }
        out.push_back(std::move(br));
    }
    return out;
}

SearchResult hyperband(const SearchSpace& space, const TrialObjective& objective, double R, int eta, Rng& rng) {
    const auto schedule = hyperband_schedule(R, eta);
    TrialRunner runner("hyperband", space, objective);
    for (const auto& br : schedule) {
        std::vector<std::vector<int>> configs;
        for (long i = 0; i < br.n; ++i) configs.push_back(random_config(space, rng));
        for (int i = 0; i <= br.s && !configs.empty(); ++i) {
            const double r_i = br.rungs[i].r;
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t c = 0; c < configs.size(); ++c)
                scored.emplace_back(runner.run(configs[c], r_i, br.s, i).value, c);
            const auto keep = static_cast<std::size_t>(br.rungs[i].n / eta);
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<std::vector<int>> next;
            for (std::size_t k = 0; k < std::min(keep, scored.size()); ++k) next.push_back(configs[scored[k].second]);
            configs = std::move(next);
        }
    }
    return std::move(runner).finish();
}

// ---------------------------------------------------------------------------
// Jaya

double jaya_update(double a, double best, double worst, double r1, double r2, bool literal_abs) {
    const double base = literal_abs ? std::abs(a) : a;
    return a + r1 * (best - base) - r2 * (worst - base);
}

SearchResult jaya(const SearchSpace& space, const TrialObjective& objective, const JayaOptions& opts, Rng& rng) {
    if (opts.population < 2) throw DomainError("Jaya needs a population of at least 2");
    if (opts.generations < 0) throw DomainError("Jaya generation count must be >= 0");
    TrialRunner runner("jaya", space, objective);
    const std::size_t k = space.size();
    auto to_config = [&](const std::vector<double>& a) {
        std::vector<int> c(k);
        for (std::size_t j = 0; j < k; ++j)
            c[j] = std::clamp(static_cast<int>(std::lround(a[j])), space[j].lo, space[j].hi);
        return c;
    };

    std::vector<std::vector<double>> pop(opts.population, std::vector<double>(k));
    std::vector<double> score(opts.population);
    for (int p = 0; p < opts.population; ++p) {
        for (std::size_t j = 0; j < k; ++j) pop[p][j] = rng.uniform(space[j].lo, space[j].hi);
        score[p] = runner.run(to_config(pop[p])).value;
    }
    for (int g = 0; g < opts.generations; ++g) {
        const auto best = static_cast<std::size_t>(std::min_element(score.begin(), score.end()) - score.begin());
        const auto worst = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
        const auto best_a = pop[best], worst_a = pop[worst];
        for (int p = 0; p < opts.population; ++p) {
            std::vector<double> cand(k);
            for (std::size_t j = 0; j < k; ++j) {
                const double r1 = rng.uniform(), r2 = rng.uniform();
                cand[j] = std::clamp(jaya_update(pop[p][j], best_a[j], worst_a[j], r1, r2, opts.literal_abs),
                                     static_cast<double>(space[j].lo), static_cast<double>(space[j].hi));
            }
            const double v = runner.run(to_config(cand)).value;
            if (v < score[p]) {
                pop[p] = std::move(cand);
                score[p] = v;
            }
        }
    }
    return std::move(runner).finish();
}

// ---------------------------------------------------------------------------
// Persistence

void write_trial_log(std::ostream& out, const SearchSpace& space, const std::vector<TrialResult>& log) {
    out << "# schema=trials/1\n";
    out << "trial,method";
    for (const auto& p : space.params()) out << ',' << p.name;
    out << ",delta_h,iters,seconds\n";
    out << std::setprecision(17);
    for (const auto& t : log) {
        out << t.trial << ',' << t.method;
        for (int v : t.config) out << ',' << v;
        out << ',' << t.value << ',' << t.iterations << ',' << t.seconds << '\n';
    }
}

void write_trial_log(const std::string& path, const SearchSpace& space, const std::vector<TrialResult>& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_trial_log(out, space, log);
}

SearchResult run_search(const std::string& method, const SearchSpace& space, const TrialObjective& objective,
                        const NasOptions& opts, Rng& rng) {
    if (method == "random") return random_search(space, objective, opts.budget, rng);
    if (method == "bayes") return bayes_opt(space, objective, opts.budget, rng, opts.bayes);
    if (method == "hyperband") return hyperband(space, objective, opts.hyperband_r, opts.hyperband_eta, rng);
    if (method == "jaya") return jaya(space, objective, opts.jaya, rng);
    throw DomainError("unknown search method '" + method + "'");
}

void write_winner_manifest(const std::string& path, const NasOptions& opts, const NasResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    out << "schema = winner/1\n";
    out << "method = " << opts.method << '\n';
    out << "seed = " << opts.seed << '\n';
    for (const auto& [name, value] : result.winner) out << "param." << name << " = " << value << '\n';
    out << "delta_h = " << result.winner_delta_h << '\n';
    out << "checkpoint = " << std::filesystem::path(result.checkpoint_path).filename().string() << '\n';
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw DomainError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    if (kv["schema"] != "winner/1") throw DomainError(path + ": unsupported manifest schema '" + kv["schema"] + "'");
    return kv;
}

NasResult nas_run(const SearchSpace& full, const NasTrainer& trainer, const NasOptions& opts, Rng& rng) {
    if (!trainer.screen || !trainer.evaluate || !trainer.train_final) throw DomainError("NAS trainer is incomplete");
    if ((opts.method == "random" || opts.method == "bayes") && opts.budget < 1)
        throw DomainError("search budget must be >= 1");
    const std::filesystem::path dir(opts.out_dir);
    if (!opts.out_dir.empty()) std::filesystem::create_directories(dir);
    NasResult res;

    auto assignment = [](const SearchSpace& space, const std::vector<int>& config) {
        Assignment a;
        for (std::size_t i = 0; i < config.size(); ++i) a[space[i].name] = config[i];
        return a;
    };

    res.screening = screen_pipeline(
        full, [&](const std::vector<double>& u) { return trainer.screen(assignment(full, full.to_integers(u))); },
        opts.screening, rng);
    if (!opts.out_dir.empty()) {
        write_sa_csv((dir / "sa_morris.csv").string(), res.screening.morris);
        write_sa_csv((dir / "sa_efast.csv").string(), res.screening.efast);
    }

    const SearchSpace& reduced = res.screening.reduced;
    res.search = run_search(opts.method, reduced, [&](const std::vector<int>& c, double resource) {
        return trainer.evaluate(assignment(reduced, c), resource);
    }, opts, rng);
    if (!opts.out_dir.empty()) write_trial_log((dir / "trials.csv").string(), reduced, res.search.log);
    if (!std::isfinite(res.search.best.value)) throw std::runtime_error("every search trial failed");

    res.winner = assignment(reduced, res.search.best.config);
    auto [net, dh] = trainer.train_final(res.winner);
    res.network = std::move(net);
    res.winner_delta_h = dh;
    if (!opts.out_dir.empty()) {
        res.checkpoint_path = (dir / "winner.ckpt").string();
        save_checkpoint(res.checkpoint_path, *res.network);
        write_winner_manifest((dir / "winner.txt").string(), opts, res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// PINN trainer

namespace {

int pick(const Assignment& a, const char* key, int fallback) {
    const auto it = a.find(key);
    return it == a.end() ? fallback : it->second;
}

struct PinnRun {
    Network net;
    double delta_h;
    int iterations;
};

PinnRun train_assignment(const PinnNasSetup& s, const FieldRealization& real, const std::vector<Point>& eval,
                         const Assignment& a, int adam_iters, bool with_lbfgs) {
    for (const auto& [key, value] : a)
        if (key != "layers" && key != "neurons" && key != "iterations" && key != "collocation" && key != "maxls")
            throw DomainError("PINN trainer does not know parameter '" + key + "'");
    TrainConfig cfg = s.base;
    cfg.adam_iters = adam_iters;
    cfg.n_interior = pick(a, "collocation", s.base.n_interior);
    cfg.maxls = pick(a, "maxls", s.base.maxls);
    if (!with_lbfgs) cfg.lbfgs_max_iters = 0;
    const int layers = pick(a, "layers", 2);
    const int neurons = pick(a, "neurons", 37);
    Rng colloc_rng(s.seed + 1000);
    const auto colloc = sample_collocation(s.domain, cfg.n_interior, cfg.n_boundary, colloc_rng);
    Rng init_rng(s.seed + 7);
    const auto init = Network::init_params(network_for(s.domain, layers, neurons), init_rng);
    auto rep = train(init, colloc, real, s.mms, cfg);
    return {rep.net, relative_error(rep.net, s.mms, eval), rep.iterations()};
}

}  // namespace

NasTrainer make_pinn_trainer(const PinnNasSetup& setup) {
    setup.domain.validate();
    setup.mms.validate();
    FieldSpec spec = setup.field;
    spec.dim = setup.domain.dim;
    spec.seed = setup.seed;
    const auto real = std::make_shared<FieldRealization>(realize(spec));
    const auto eval = std::make_shared<std::vector<Point>>(grid_points(default_eval_grid(setup.domain)));
    NasTrainer t;
    t.screen = [=](const Assignment& a) {
        return train_assignment(setup, *real, *eval, a, setup.screen_adam_iters, false).delta_h;
    };
    t.evaluate = [=](const Assignment& a, double resource) {
        const bool partial = resource > 0.0;
        const int adam = partial ? static_cast<int>(std::lround(resource * setup.resource_unit))
                                 : pick(a, "iterations", setup.base.adam_iters);
        const auto run = train_assignment(setup, *real, *eval, a, adam, !partial);
        return TrialOutcome{run.delta_h, run.iterations};
    };
    t.train_final = [=](const Assignment& a) {
        auto run = train_assignment(setup, *real, *eval, a, pick(a, "iterations", setup.base.adam_iters), true);
        return std::make_pair(std::move(run.net), run.delta_h);
    };
    return t;
}

}  // namespace darcynas
