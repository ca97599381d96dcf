#include "darcynas/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace darcynas {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config grammar

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

}  // namespace

ConfigDocument parse_config_document(std::istream& in) {
    ConfigDocument doc;
    std::string raw;
    std::string block;
    int block_line = 0;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line == "}") {
            if (block.empty()) throw ConfigError("'}' without an open block", lineno);
            block.clear();
            continue;
        }
        if (line.back() == '{') {
            const std::string name = trim(line.substr(0, line.size() - 1));
            if (!block.empty()) throw ConfigError("blocks cannot be nested", lineno);
            if (!is_identifier(name)) throw ConfigError("invalid block name '" + name + "'", lineno);
            if (doc.count(name)) throw ConfigError("duplicate block '" + name + "'", lineno);
            doc[name];
            block = name;
            block_line = lineno;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', '<block> {' or '}'", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (block.empty()) throw ConfigError("key '" + key + "' outside of a block", lineno);
        if (!is_identifier(key)) throw ConfigError("invalid key '" + key + "'", lineno);
        if (value.empty()) throw ConfigError("key '" + key + "' has no value", lineno);
        if (doc[block].count(key)) throw ConfigError("duplicate key '" + key + "' in block '" + block + "'", lineno);
        doc[block][key] = {value, lineno};
    }
    if (!block.empty()) throw ConfigError("block '" + block + "' is not closed", block_line);
    return doc;
}

SeedPlan SeedPlan::from_master(std::uint64_t master) {
    return {master, master, master + 1000, master + 7, master + 31};
}

std::string to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::Pinn: return "pinn";
        case SolverMethod::Fdm: return "fdm";
        case SolverMethod::Both: return "both";
    }
    return "?";
}

namespace {

/// Typed access to one block; every key read is marked, leftovers are errors.
class BlockReader {
public:
    BlockReader(const ConfigDocument& doc, const std::string& name) : name_(name) {
        if (auto it = doc.find(name); it != doc.end()) {
            block_ = &it->second;
        }
    }

    bool present() const { return block_ != nullptr; }
    bool has(const std::string& key) const { return block_ && block_->count(key); }

    const ConfigEntry* entry(const std::string& key) {
        if (!block_) return nullptr;
        auto it = block_->find(key);
        if (it == block_->end()) return nullptr;
        used_.insert(key);
        return &it->second;
    }

    template <class T, class F>
    void read(const std::string& key, T& target, F convert) {
        if (const auto* e = entry(key)) {
            try {
                target = convert(e->value);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& ex) {
                throw ConfigError(name_ + "." + key + ": " + ex.what(), e->line);
            }
        }
    }

    int line_of(const std::string& key) const {
        if (!block_) return 0;
        auto it = block_->find(key);
        return it == block_->end() ? 0 : it->second.line;
    }

    void finish() const {
        if (!block_) return;
        for (const auto& [key, e] : *block_)
            if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in block '" + name_ + "'", e.line);
    }

private:
    std::string name_;
    const ConfigBlock* block_ = nullptr;
    std::set<std::string> used_;
};

long long to_integer(const std::string& s) {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw DomainError("'" + s + "' is not an integer");
    return v;
}

int to_int(const std::string& s) {
    const long long v = to_integer(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw DomainError("'" + s + "' is out of range");
    return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& s) {
    if (s.empty() || s[0] == '-') throw DomainError("'" + s + "' is not an unsigned integer");
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw DomainError("'" + s + "' is not an unsigned integer");
    return v;
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw DomainError("'" + s + "' is not a finite number");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "yes" || s == "true" || s == "1") return true;
    if (s == "no" || s == "false" || s == "0") return false;
    throw DomainError("'" + s + "' is not yes/no");
}

template <class F>
auto list_of(F convert) {
    return [convert](const std::string& s) {
        std::vector<decltype(convert(s))> out;
        for (const auto& item : split_list(s)) out.push_back(convert(item));
        if (out.empty()) throw DomainError("empty list");
        return out;
    };
}

SolverMethod to_method(const std::string& s) {
    if (s == "pinn") return SolverMethod::Pinn;
    if (s == "fdm") return SolverMethod::Fdm;
    if (s == "both") return SolverMethod::Both;
    throw DomainError("unknown solver method '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    domain.validate();
    mms.validate();
    field.validate();
    train.validate();
    if (mms.dim != domain.dim || field.dim != domain.dim) throw ConfigError("problem, case and field dimensions differ", 0);
    if (layers < 1 || neurons < 1) throw ConfigError("layers and neurons must be >= 1", 0);
    if (fdm_spacing && !(*fdm_spacing > 0.0)) throw ConfigError("fdm_spacing must be positive", 0);
    if (fdm_spacing && fdm_counts) throw ConfigError("set fdm_spacing or fdm_counts, not both", 0);
    for (double s2 : variances)
        if (!(s2 >= 0.0)) throw ConfigError("matrix variances must be >= 0", 0);
    for (int n : modes)
        if (n < 1) throw ConfigError("matrix modes must be >= 1", 0);
    const bool any_tl = std::find(transfer.begin(), transfer.end(), true) != transfer.end();
    const bool any_plain = std::find(transfer.begin(), transfer.end(), false) != transfer.end();
    if (transfer.empty()) throw ConfigError("matrix.transfer must list at least one value", 0);
    if (any_tl && !any_plain && pretrained.empty())
        throw ConfigError("transfer rows need solver.pretrained or a non-transfer reference row", 0);
    if (any_tl && method == SolverMethod::Fdm) throw ConfigError("transfer learning applies to the PINN solver only", 0);
    if (out_dir.empty()) throw ConfigError("output.dir must not be empty", 0);
}

ExperimentConfig parse_experiment_config(std::istream& in) {
    const ConfigDocument doc = parse_config_document(in);
    static const std::set<std::string> blocks{"problem", "field", "solver", "matrix", "nas", "sa", "seeds", "output"};
    for (const auto& [name, block] : doc)
        if (!blocks.count(name))
            throw ConfigError("unknown block '" + name + "'", block.empty() ? 0 : block.begin()->second.line);

    ExperimentConfig cfg;

    BlockReader problem(doc, "problem");
    if (!problem.present() || !problem.has("dim")) throw ConfigError("problem.dim is required", 0);
    int dim = 1;
    problem.read("dim", dim, to_int);
    if (dim < 1 || dim > 3) throw ConfigError("problem.dim must be 1, 2 or 3", problem.line_of("dim"));
    SolutionFamily family = SolutionFamily::SineOfSum;
    problem.read("family", family, parse_solution_family);
    cfg.domain = canonical_domain(dim);
    cfg.mms = canonical_case(dim, family);
    problem.read("coeffs", cfg.mms.coeffs, list_of(to_double));
    auto read_bounds = [&](const char* key, std::array<double, 3>& target) {
        std::vector<double> v;
        problem.read(key, v, list_of(to_double));
        if (v.empty()) return;
        if (static_cast<int>(v.size()) != dim)
            throw ConfigError(std::string("problem.") + key + " needs " + std::to_string(dim) + " values",
                              problem.line_of(key));
        for (int j = 0; j < dim; ++j) target[j] = v[j];
    };
    read_bounds("lower", cfg.domain.lower);
    read_bounds("upper", cfg.domain.upper);
    problem.finish();
    if (static_cast<int>(cfg.mms.coeffs.size()) != dim + 1)
        throw ConfigError("problem.coeffs needs dim + 1 values", problem.line_of("coeffs"));

    BlockReader field(doc, "field");
    cfg.field.dim = dim;
    cfg.field.lambdas.assign(dim, 1.0);
    field.read("kind", cfg.field.kind, parse_correlation_kind);
    field.read("sigma2", cfg.field.sigma2, to_double);
    field.read("modes", cfg.field.n_modes, to_int);
    field.read("mean_k", cfg.field.mean_k, to_double);
    std::vector<double> lambdas;
    field.read("lambda", lambdas, list_of(to_double));
    if (lambdas.size() == 1) lambdas.assign(dim, lambdas[0]);
    if (!lambdas.empty()) {
        if (static_cast<int>(lambdas.size()) != dim)
            throw ConfigError("field.lambda needs 1 or dim values", field.line_of("lambda"));
        cfg.field.lambdas = lambdas;
    }
    field.finish();

    BlockReader solver(doc, "solver");
    solver.read("method", cfg.method, to_method);
    solver.read("layers", cfg.layers, to_int);
    solver.read("neurons", cfg.neurons, to_int);
    solver.read("activation", cfg.activation, parse_activation);
    solver.read("adam_iters", cfg.train.adam_iters, to_int);
    solver.read("adam_lr", cfg.train.adam_lr, to_double);
    solver.read("lbfgs_iters", cfg.train.lbfgs_max_iters, to_int);
    solver.read("maxls", cfg.train.maxls, to_int);
    solver.read("memory", cfg.train.lbfgs_memory, to_int);
    solver.read("tolerance", cfg.train.tolerance, to_double);
    solver.read("interior", cfg.train.n_interior, to_int);
    solver.read("boundary", cfg.train.n_boundary, to_int);
    solver.read("pretrained", cfg.pretrained, [](const std::string& s) { return s; });
    if (solver.has("fdm_spacing")) {
        double h = 0.0;
        solver.read("fdm_spacing", h, to_double);
        cfg.fdm_spacing = h;
    }
    if (solver.has("fdm_counts")) {
        std::vector<int> c;
        solver.read("fdm_counts", c, list_of(to_int));
        if (static_cast<int>(c.size()) != dim)
            throw ConfigError("solver.fdm_counts needs dim values", solver.line_of("fdm_counts"));
        std::array<int, 3> counts{1, 1, 1};
        for (int j = 0; j < dim; ++j) counts[j] = c[j];
        cfg.fdm_counts = counts;
    }
    solver.finish();

    BlockReader matrix(doc, "matrix");
    matrix.read("kind", cfg.kinds, list_of(parse_correlation_kind));
    matrix.read("sigma2", cfg.variances, list_of(to_double));
    matrix.read("modes", cfg.modes, list_of(to_int));
    matrix.read("transfer", cfg.transfer, list_of(to_bool));
    matrix.finish();

    BlockReader nas(doc, "nas");
    if (nas.present()) {
        NasOptions o;
        nas.read("method", o.method, [](const std::string& s) {
            if (s != "random" && s != "bayes" && s != "hyperband" && s != "jaya")
                throw DomainError("unknown search method '" + s + "'");
            return s;
        });
        nas.read("budget", o.budget, to_int);
        nas.read("hyperband_r", o.hyperband_r, to_double);
        nas.read("hyperband_eta", o.hyperband_eta, to_int);
        nas.read("population", o.jaya.population, to_int);
        nas.read("generations", o.jaya.generations, to_int);
        nas.read("jaya_literal_abs", o.jaya.literal_abs, to_bool);
        nas.read("candidates", o.bayes.candidates, to_int);
        nas.finish();
        cfg.nas = o;
    }

    BlockReader sa(doc, "sa");
    if (sa.present()) {
        PipelineOptions o;
        sa.read("trajectories", o.morris.trajectories, to_int);
        sa.read("levels", o.morris.levels, to_int);
        sa.read("samples", o.efast.samples, to_int);
        sa.read("harmonics", o.efast.harmonics, to_int);
        sa.read("screen_adam_iters", cfg.screen_adam_iters, to_int);
        sa.finish();
        cfg.sa = o;
    }

    BlockReader seeds(doc, "seeds");
    seeds.read("master", cfg.seeds.master, to_u64);
    cfg.seeds = SeedPlan::from_master(cfg.seeds.master);
    seeds.read("field", cfg.seeds.field, to_u64);
    seeds.read("collocation", cfg.seeds.collocation, to_u64);
    seeds.read("init", cfg.seeds.init, to_u64);
    seeds.read("search", cfg.seeds.search, to_u64);
    seeds.finish();

    BlockReader output(doc, "output");
    output.read("dir", cfg.out_dir, [](const std::string& s) { return s; });
    output.finish();

    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    try {
        return parse_experiment_config(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what(), e.line());
    }
}

FieldSpec primary_field(const ExperimentConfig& config) {
    FieldSpec f = config.field;
    if (!config.kinds.empty()) f.kind = config.kinds.front();
    if (!config.variances.empty()) f.sigma2 = config.variances.front();
    if (!config.modes.empty()) f.n_modes = config.modes.front();
    f.seed = config.seeds.field;
    return f;
}

PinnNasSetup search_setup(const ExperimentConfig& config) {
    PinnNasSetup setup;
    setup.domain = config.domain;
    setup.field = primary_field(config);
    setup.mms = config.mms;
    setup.base = config.train;
    setup.screen_adam_iters = config.screen_adam_iters;
    setup.seed = config.seeds.field;
    return setup;
}

SaObjective screening_objective(const SearchSpace& space, const NasTrainer& trainer) {
    return [space, screen = trainer.screen](const std::vector<double>& u) {
        Assignment a;
        const auto v = space.to_integers(u);
        for (std::size_t i = 0; i < v.size(); ++i) a[space[i].name] = v[i];
        return screen(a);
    };
}

// ---------------------------------------------------------------------------
// Result rows

std::string ResultRow::cell() const {
    std::ostringstream s;
    s << to_string(kind) << "_s" << sigma2 << "_n" << modes << (transfer ? "_tl" : "");
    return s.str();
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "# schema=results/1\n";
    out << "dim,kind,sigma2,modes,transfer,method,resolution,delta_h,velocity_error,iterations\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.dim << ',' << to_string(r.kind) << ',' << r.sigma2 << ',' << r.modes << ',' << (r.transfer ? 1 : 0)
            << ',' << r.method << ',' << r.resolution << ',' << r.delta_h << ',' << r.velocity_error << ','
            << r.iterations << '\n';
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_results_csv(out, rows);
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "# schema=results/1")
        throw DomainError("unsupported results schema '" + line + "'");
    if (!std::getline(in, line) || line != "dim,kind,sigma2,modes,transfer,method,resolution,delta_h,velocity_error,iterations")
        throw DomainError("unexpected results header");
    std::vector<ResultRow> rows;
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_list(line);
        if (f.size() != 10) throw DomainError("results line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
        ResultRow r;
        try {
            r.dim = to_int(f[0]);
            r.kind = parse_correlation_kind(f[1]);
            r.sigma2 = to_double(f[2]);
            r.modes = to_int(f[3]);
            r.transfer = to_bool(f[4]);
            r.method = f[5];
            r.resolution = to_double(f[6]);
            r.delta_h = to_double(f[7]);
            r.velocity_error = to_double(f[8]);
            r.iterations = to_int(f[9]);
        } catch (const std::exception& e) {
            throw DomainError("results line " + std::to_string(lineno) + ": " + e.what());
        }
        if (r.method != "pinn" && r.method != "fdm") throw DomainError("results line " + std::to_string(lineno) + ": unknown method");
        rows.push_back(r);
    }
    return rows;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_results_csv(in);
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

struct Cell {
    CorrelationKind kind;
    double sigma2;
    int modes;
    bool transfer;
};

FieldSpec cell_field(const ExperimentConfig& cfg, const Cell& c) {
    FieldSpec f = cfg.field;
    f.kind = c.kind;
    f.sigma2 = c.sigma2;
    f.n_modes = c.modes;
    f.seed = cfg.seeds.field;
    return f;
}

/// Serializes file writes of one run; each path may be written once.
class OutputManager {
public:
    explicit OutputManager(fs::path dir) : dir_(std::move(dir)) {}

    template <class F>
    void write(const std::string& name, F fill) {
        std::ostringstream buf;
        fill(buf);
        std::lock_guard lock(mu_);
        if (!written_.insert(name).second) throw std::logic_error("output '" + name + "' written twice");
        std::ofstream out(dir_ / name, std::ios::binary);
        out << buf.str();
        if (!out) throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
    }

private:
    fs::path dir_;
    std::mutex mu_;
    std::set<std::string> written_;
};

void write_plot_data(std::ostream& out, const std::vector<Point>& pts, int dim, const std::vector<double>& pred,
                     const ManufacturedCase& mms, const FieldRealization& real) {
    static const char* axes[] = {"x", "y", "z"};
    out << "# schema=plot/1\n";
    for (int j = 0; j < dim; ++j) out << axes[j] << ',';
    out << "h_pred,h_exact,k\n" << std::setprecision(17);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int j = 0; j < dim; ++j) out << pts[i][j] << ',';
        out << pred[i] << ',' << h_exact(mms, pts[i]) << ',' << real.conductivity(pts[i]) << '\n';
    }
}

class CellRunner {
public:
    CellRunner(const ExperimentConfig& cfg, OutputManager& out) : cfg_(cfg), out_(out) {
        eval_grid_ = default_eval_grid(cfg.domain);
        eval_ = grid_points(eval_grid_);
    }

    std::vector<ResultRow> run(const Cell& c, const Network* pretrained, std::optional<Network>* trained) const {
        std::vector<ResultRow> rows;
        const FieldSpec spec = cell_field(cfg_, c);
        const FieldRealization real = realize(spec);
        ResultRow base;
        base.dim = cfg_.domain.dim;
        base.kind = c.kind;
        base.sigma2 = c.sigma2;
        base.modes = c.modes;
        base.transfer = c.transfer;
        const std::string tag = base.cell();

        if (!c.transfer) {
            std::vector<double> k(eval_.size());
            for (std::size_t i = 0; i < eval_.size(); ++i) k[i] = real.conductivity(eval_[i]);
            out_.write("field_" + tag + ".grid", [&](std::ostream& o) { write_grid_file(o, eval_grid_, k); });
        }

        if (cfg_.method != SolverMethod::Fdm) {
            Rng colloc_rng(cfg_.seeds.collocation);
            const auto colloc = sample_collocation(cfg_.domain, cfg_.train.n_interior, cfg_.train.n_boundary, colloc_rng);
            const PinnProblem problem(colloc, real, cfg_.mms);
            const NetworkConfig net_cfg = network_for(cfg_.domain, cfg_.layers, cfg_.neurons, cfg_.activation);
            TrainReport rep;
            if (c.transfer) {
                if (!pretrained) throw DomainError("no pretrained network for transfer cell " + tag);
                rep = warm_start(*pretrained, net_cfg, problem, fine_tune_config(cfg_.train));
            } else {
                Rng init_rng(cfg_.seeds.init);
                rep = train(Network::init_params(net_cfg, init_rng), problem, cfg_.train);
            }
            out_.write("trace_" + tag + ".csv", [&](std::ostream& o) { write_trace_csv(o, rep); });
            const Eigen::VectorXd h = rep.net.forward(eval_);
            const std::vector<double> pred(h.data(), h.data() + h.size());
            out_.write("plot_" + tag + "_pinn.csv",
                       [&](std::ostream& o) { write_plot_data(o, eval_, cfg_.domain.dim, pred, cfg_.mms, real); });
            ResultRow r = base;
            r.method = "pinn";
            r.delta_h = relative_error(rep.net, cfg_.mms, eval_);
            r.velocity_error = velocity_relative_error(rep.net, real, cfg_.mms, eval_);
            r.iterations = rep.iterations();
            r.seconds = rep.seconds;
            rows.push_back(r);
            if (trained) *trained = rep.net;
        }

        if (cfg_.method != SolverMethod::Pinn && !c.transfer) {
            const auto start = std::chrono::steady_clock::now();
            const FdmGrid grid = cfg_.fdm_counts    ? FdmGrid::uniform(cfg_.domain, *cfg_.fdm_counts)
                                 : cfg_.fdm_spacing ? FdmGrid::with_spacing(cfg_.domain, *cfg_.fdm_spacing)
                                                    : FdmGrid::resolved(cfg_.domain, spec);
            const auto sol = solve(assemble(real, cfg_.mms, grid));
            ResultRow r = base;
            r.method = "fdm";
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            for (int a = 0; a < grid.dim; ++a) r.resolution = std::max(r.resolution, grid.spacing(a));
            r.delta_h = fdm_relative_error_at(sol, grid, cfg_.mms, eval_);
            out_.write("fdm_" + tag + ".grid", [&](std::ostream& o) { write_grid_file(o, grid.header(), sol); });
            std::vector<double> pred(eval_.size());
            for (std::size_t i = 0; i < eval_.size(); ++i) pred[i] = interpolate(grid, sol, eval_[i]);
            out_.write("plot_" + tag + "_fdm.csv",
                       [&](std::ostream& o) { write_plot_data(o, eval_, cfg_.domain.dim, pred, cfg_.mms, real); });
            rows.push_back(r);
        }
        return rows;
    }

private:
    const ExperimentConfig& cfg_;
    OutputManager& out_;
    GridHeader eval_grid_;
    std::vector<Point> eval_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, int jobs, F fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    ExperimentConfig cfg = config;
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    ExperimentSummary summary;

    const std::vector<CorrelationKind> kinds = cfg.kinds.empty() ? std::vector{cfg.field.kind} : cfg.kinds;
    const std::vector<double> variances = cfg.variances.empty() ? std::vector{cfg.field.sigma2} : cfg.variances;
    const std::vector<int> modes = cfg.modes.empty() ? std::vector{cfg.field.n_modes} : cfg.modes;

    if (cfg.sa || cfg.nas) {
        const NasTrainer trainer = make_pinn_trainer(search_setup(cfg));
        const SearchSpace space = SearchSpace::trainer_default();
        Rng rng(cfg.seeds.search);
        if (cfg.nas) {
            NasOptions o = *cfg.nas;
            if (cfg.sa) o.screening = *cfg.sa;
            o.out_dir = (dir / "nas").string();
            o.seed = cfg.seeds.search;
            summary.nas = nas_run(space, trainer, o, rng);
            const auto& w = summary.nas->winner;
            if (w.count("layers")) cfg.layers = w.at("layers");
            if (w.count("neurons")) cfg.neurons = w.at("neurons");
        } else {
            const auto res = screen_pipeline(space, screening_objective(space, trainer), *cfg.sa, rng);
            write_sa_csv((dir / "sa_morris.csv").string(), res.morris);
            write_sa_csv((dir / "sa_efast.csv").string(), res.efast);
        }
    }

    std::vector<Cell> plain, tl;
    for (auto k : kinds)
        for (double s2 : variances)
            for (int n : modes)
                for (bool t : cfg.transfer) (t ? tl : plain).push_back({k, s2, n, t});

    std::optional<Network> from_file;
    if (!cfg.pretrained.empty()) from_file = load_checkpoint(cfg.pretrained);

    OutputManager out(dir);
    const CellRunner runner(cfg, out);
    std::vector<std::vector<ResultRow>> plain_rows(plain.size()), tl_rows(tl.size());
    std::vector<std::string> plain_err(plain.size()), tl_err(tl.size());
    std::vector<std::optional<Network>> trained(plain.size());
    const bool want_reference = !tl.empty() && !from_file;

    parallel_for(plain.size(), jobs, [&](std::size_t i) {
        try {
            plain_rows[i] = runner.run(plain[i], nullptr, want_reference ? &trained[i] : nullptr);
        } catch (const std::exception& e) {
            plain_err[i] = e.what();
        }
    });
    // The reference network of a kind is the one trained on its first cell.
    auto reference = [&](CorrelationKind k) -> const Network* {
        if (from_file) return &*from_file;
        for (std::size_t i = 0; i < plain.size(); ++i)
            if (plain[i].kind == k) return trained[i] ? &*trained[i] : nullptr;
        return nullptr;
    };
    parallel_for(tl.size(), jobs, [&](std::size_t i) {
        try {
            tl_rows[i] = runner.run(tl[i], reference(tl[i].kind), nullptr);
        } catch (const std::exception& e) {
            tl_err[i] = e.what();
        }
    });

    auto collect = [&](const std::vector<Cell>& cells, const std::vector<std::vector<ResultRow>>& rows,
                       const std::vector<std::string>& errs) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            for (const auto& r : rows[i]) summary.rows.push_back(r);
            if (!errs[i].empty()) {
                ResultRow tag;
                tag.kind = cells[i].kind;
                tag.sigma2 = cells[i].sigma2;
                tag.modes = cells[i].modes;
                tag.transfer = cells[i].transfer;
                summary.failures.push_back(tag.cell() + ": " + errs[i]);
            }
        }
    };
    collect(plain, plain_rows, plain_err);
    collect(tl, tl_rows, tl_err);

    out.write("results.csv", [&](std::ostream& o) { write_results_csv(o, summary.rows); });
    out.write("timings.csv", [&](std::ostream& o) {
        o << "# schema=timings/1\ncell,method,seconds\n" << std::setprecision(6);
        for (const auto& r : summary.rows) o << r.cell() << ',' << r.method << ',' << r.seconds << '\n';
    });
    if (!summary.failures.empty()) {
        out.write("failures.txt", [&](std::ostream& o) {
            for (const auto& m : summary.failures) o << m << '\n';
        });
    } else {
        fs::remove(dir / "failures.txt");
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Comparison

std::vector<ComparisonRow> compare_report(const std::vector<ResultRow>& pinn_rows,
                                          const std::vector<ResultRow>& fdm_rows) {
    if (pinn_rows.empty() || fdm_rows.empty()) throw DomainError("comparison needs PINN and FDM rows");
    using Key = std::tuple<int, CorrelationKind, double, int>;
    auto key = [](const ResultRow& r) { return Key{r.dim, r.kind, r.sigma2, r.modes}; };
    std::map<Key, std::vector<const ResultRow*>> fdm;
    for (const auto& r : fdm_rows) fdm[key(r)].push_back(&r);
    std::set<Key> pinn_keys;
    for (const auto& r : pinn_rows) pinn_keys.insert(key(r));
    for (const auto& [k, rows] : fdm)
        if (!pinn_keys.count(k)) throw DomainError("FDM row " + rows.front()->cell() + " has no PINN counterpart");

    std::vector<ComparisonRow> out;
    for (const auto& p : pinn_rows) {
        const auto it = fdm.find(key(p));
        if (it == fdm.end()) throw DomainError("PINN row " + p.cell() + " has no FDM counterpart");
        std::optional<double> order;
        std::vector<double> hs, errs;
        for (const auto* f : it->second) {
            hs.push_back(f->resolution);
            errs.push_back(f->delta_h);
        }
        if (std::set<double>(hs.begin(), hs.end()).size() >= 2) order = observed_order(hs, errs);
        for (const auto* f : it->second) {
            ComparisonRow c;
            c.dim = p.dim;
            c.kind = p.kind;
            c.sigma2 = p.sigma2;
            c.modes = p.modes;
            c.transfer = p.transfer;
            c.pinn_delta_h = p.delta_h;
            c.fdm_delta_h = f->delta_h;
            c.fdm_resolution = f->resolution;
            c.ratio = p.delta_h > 0.0 ? f->delta_h / p.delta_h : (f->delta_h == 0.0 ? 1.0 : INFINITY);
            c.pinn_seconds = p.seconds;
            c.fdm_seconds = f->seconds;
            c.fdm_order = order;
            out.push_back(c);
        }
    }
    return out;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
    out << "# schema=compare/1\n";
    out << "dim,kind,sigma2,modes,transfer,pinn_delta_h,fdm_delta_h,fdm_resolution,ratio,pinn_seconds,fdm_seconds,"
           "fdm_order\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.dim << ',' << to_string(r.kind) << ',' << r.sigma2 << ',' << r.modes << ',' << (r.transfer ? 1 : 0)
            << ',' << r.pinn_delta_h << ',' << r.fdm_delta_h << ',' << r.fdm_resolution << ',' << r.ratio << ','
            << r.pinn_seconds << ',' << r.fdm_seconds << ',';
        if (r.fdm_order) out << *r.fdm_order;
        out << '\n';
    }
}

}  // namespace darcynas
