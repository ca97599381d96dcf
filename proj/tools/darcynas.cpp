// darcynas command-line driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "darcynas/harness.hpp"

using namespace darcynas;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config file");
    cmd->add_option("--seed", c.seed, "master seed (overrides the seeds block)");
    cmd->add_option("--out", c.out, "output directory (overrides output.dir)");
    cmd->add_option("--jobs", c.jobs, "concurrent matrix cells")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) cfg = load_experiment_config(c.config);
    if (c.seed) cfg.seeds = SeedPlan::from_master(*c.seed);
    if (!c.out.empty()) cfg.out_dir = c.out;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) { return fs::path(cfg.out_dir) / name; }

int field_gen(const Common& c) {
    const auto cfg = resolve(c);
    const auto real = realize(primary_field(cfg));
    const auto grid = default_eval_grid(cfg.domain);
    const auto k = sample_conductivity(real, grid);
    write_grid_file(out_path(cfg, "field.grid").string(), grid, k);
    const auto [lo, hi] = std::minmax_element(k.begin(), k.end());
    std::cout << "field: " << k.size() << " nodes, K in [" << *lo << ", " << *hi << "] -> "
              << out_path(cfg, "field.grid").string() << '\n';
    return 0;
}

/// Analytic source against a central difference of the flux K dh/dx_j.
int mms_check(const Common& c, int points, double tolerance) {
    const auto cfg = resolve(c);
    const auto real = realize(primary_field(cfg));
    Rng rng(cfg.seeds.master);
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        Point x{0, 0, 0};
        for (int j = 0; j < cfg.domain.dim; ++j) x[j] = rng.uniform(cfg.domain.lower[j], cfg.domain.upper[j]);
        double div = 0.0;
        for (int j = 0; j < cfg.domain.dim; ++j) {
            const double step = 1e-5 * std::min(1.0, cfg.field.lambdas[j]);
            Point xp = x, xm = x;
            xp[j] += step;
            xm[j] -= step;
            div += (real.conductivity(xp) * grad_h_exact(cfg.mms, xp)[j] -
                    real.conductivity(xm) * grad_h_exact(cfg.mms, xm)[j]) /
                   (2 * step);
        }
        worst = std::max(worst, std::abs(source_f(cfg.mms, real, x) - div) / std::max(1.0, std::abs(div)));
    }
    const bool ok = worst <= tolerance;
    std::cout << "mms check: " << points << " points, max relative discrepancy " << worst << (ok ? " ok" : " FAILED")
              << '\n';
    return ok ? 0 : 1;
}

int pinn_train(const Common& c) {
    const auto cfg = resolve(c);
    const auto real = realize(primary_field(cfg));
    Rng colloc_rng(cfg.seeds.collocation);
    const auto colloc = sample_collocation(cfg.domain, cfg.train.n_interior, cfg.train.n_boundary, colloc_rng);
    const PinnProblem problem(colloc, real, cfg.mms);
    const auto net_cfg = network_for(cfg.domain, cfg.layers, cfg.neurons, cfg.activation);
    TrainReport rep;
    if (!cfg.pretrained.empty()) {
        rep = warm_start(load_checkpoint(cfg.pretrained), net_cfg, problem, fine_tune_config(cfg.train));
    } else {
        Rng init_rng(cfg.seeds.init);
        rep = train(Network::init_params(net_cfg, init_rng), problem, cfg.train);
    }
    write_trace_csv(out_path(cfg, "trace.csv").string(), rep);
    save_checkpoint(out_path(cfg, "model.ckpt").string(), rep.net);
    const auto pts = grid_points(default_eval_grid(cfg.domain));
    std::cout << "pinn: " << rep.iterations() << " iterations, loss " << rep.final_loss.total << ", delta_h "
              << relative_error(rep.net, cfg.mms, pts) << ", velocity error "
              << velocity_relative_error(rep.net, real, cfg.mms, pts) << ", " << rep.seconds << " s\n";
    return 0;
}

int fdm_solve(const Common& c) {
    const auto cfg = resolve(c);
    const auto spec = primary_field(cfg);
    const auto real = realize(spec);
    const FdmGrid grid = cfg.fdm_counts    ? FdmGrid::uniform(cfg.domain, *cfg.fdm_counts)
                         : cfg.fdm_spacing ? FdmGrid::with_spacing(cfg.domain, *cfg.fdm_spacing)
                                           : FdmGrid::resolved(cfg.domain, spec);
    const auto sol = solve(assemble(real, cfg.mms, grid));
    write_solution(out_path(cfg, "solution.grid").string(), grid, sol);
    std::cout << "fdm: " << grid.size() << " nodes, delta_h (nodes) " << fdm_relative_error(sol, cfg.mms, grid)
              << ", delta_h (eval grid) "
              << fdm_relative_error_at(sol, grid, cfg.mms, grid_points(default_eval_grid(cfg.domain))) << '\n';
    return 0;
}

void print_sa(const SaResult& r) {
    std::cout << r.method << " (" << r.evaluations << " evaluations), ranking:";
    for (auto i : r.ranking) std::cout << ' ' << r.names[i];
    std::cout << '\n';
}

int sa_run(const Common& c, const std::string& which) {
    const auto cfg = resolve(c);
    const auto trainer = make_pinn_trainer(search_setup(cfg));
    const auto space = SearchSpace::trainer_default();
    const auto obj = screening_objective(space, trainer);
    const PipelineOptions opts = cfg.sa.value_or(PipelineOptions{});
    Rng rng(cfg.seeds.search);
    const SaResult r =
        which == "morris" ? morris_screen(space, obj, opts.morris, rng) : efast(space, obj, opts.efast, rng);
    write_sa_csv(out_path(cfg, "sa_" + which + ".csv").string(), r);
    print_sa(r);
    return 0;
}

int nas_search(const Common& c, const std::string& method) {
    const auto cfg = resolve(c);
    NasOptions o = cfg.nas.value_or(NasOptions{});
    if (!method.empty()) o.method = method;
    if (cfg.sa) o.screening = *cfg.sa;
    o.out_dir = cfg.out_dir;
    o.seed = cfg.seeds.search;
    Rng rng(cfg.seeds.search);
    const auto res = nas_run(SearchSpace::trainer_default(), make_pinn_trainer(search_setup(cfg)), o, rng);
    std::cout << "nas " << o.method << ": winner";
    for (const auto& [k, v] : res.winner) std::cout << ' ' << k << '=' << v;
    std::cout << ", delta_h " << res.winner_delta_h << ", " << res.search.objective_calls << " objective calls\n";
    return 0;
}

int experiment_run(const Common& c) {
    const auto cfg = resolve(c);
    const auto summary = run_experiment(cfg, c.jobs);
    for (const auto& r : summary.rows)
        std::cout << std::left << std::setw(28) << r.cell() << std::setw(5) << r.method << " delta_h " << r.delta_h
                  << '\n';
    for (const auto& f : summary.failures) std::cerr << "failed: " << f << '\n';
    std::cout << summary.rows.size() << " rows -> " << out_path(cfg, "results.csv").string() << '\n';
    return summary.failures.empty() ? 0 : 1;
}

int compare(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<ResultRow> pinn, fdm;
    for (const auto& path : inputs) {
        auto rows = read_results_csv(path);
        // Wall times live next to the results, keyed by cell and method.
        std::map<std::pair<std::string, std::string>, double> secs;
        std::ifstream t(fs::path(path).parent_path() / "timings.csv");
        std::string line;
        if (t && std::getline(t, line) && line == "# schema=timings/1" && std::getline(t, line))
            while (std::getline(t, line)) {
                const auto a = line.find(','), b = line.rfind(',');
                if (a == std::string::npos || a == b) continue;
                secs[{line.substr(0, a), line.substr(a + 1, b - a - 1)}] = std::stod(line.substr(b + 1));
            }
        for (auto& r : rows) {
            if (auto it = secs.find({r.cell(), r.method}); it != secs.end()) r.seconds = it->second;
            (r.method == "pinn" ? pinn : fdm).push_back(r);
        }
    }
    const auto table = compare_report(pinn, fdm);
    if (out.empty()) {
        write_comparison_csv(std::cout, table);
    } else {
        std::ofstream f(out);
        write_comparison_csv(f, table);
        if (!f) throw std::runtime_error("cannot write '" + out + "'");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Darcy flow PINN/FDM experiments, sensitivity screening and architecture search"};
    app.require_subcommand(1);
    Common common;

    auto* field = app.add_subcommand("field", "random conductivity fields")->require_subcommand(1);
    auto* field_gen_cmd = field->add_subcommand("gen", "sample K on the evaluation grid");
    add_common(field_gen_cmd, common);

    int mms_points = 200;
    double mms_tol = 1e-3;
    auto* mms = app.add_subcommand("mms", "manufactured solutions")->require_subcommand(1);
    auto* mms_check_cmd = mms->add_subcommand("check", "compare the analytic source with a flux difference");
    add_common(mms_check_cmd, common);
    mms_check_cmd->add_option("--points", mms_points)->check(CLI::PositiveNumber);
    mms_check_cmd->add_option("--tolerance", mms_tol);

    auto* pinn = app.add_subcommand("pinn", "physics-informed network")->require_subcommand(1);
    auto* pinn_train_cmd = pinn->add_subcommand("train", "train (or fine-tune with solver.pretrained)");
    add_common(pinn_train_cmd, common);

    auto* fdm = app.add_subcommand("fdm", "finite differences")->require_subcommand(1);
    auto* fdm_solve_cmd = fdm->add_subcommand("solve", "assemble and solve on the configured grid");
    add_common(fdm_solve_cmd, common);

    auto* sa = app.add_subcommand("sa", "hyperparameter sensitivity")->require_subcommand(1);
    auto* sa_morris_cmd = sa->add_subcommand("morris", "Morris elementary effects");
    auto* sa_efast_cmd = sa->add_subcommand("efast", "extended FAST indices");
    add_common(sa_morris_cmd, common);
    add_common(sa_efast_cmd, common);

    std::string nas_method;
    auto* nas = app.add_subcommand("nas", "architecture search")->require_subcommand(1);
    auto* nas_search_cmd = nas->add_subcommand("search", "screen, search and train the winner");
    add_common(nas_search_cmd, common);
    nas_search_cmd->add_option("--method", nas_method)
        ->check(CLI::IsMember({"random", "bayes", "hyperband", "jaya"}));

    auto* experiment = app.add_subcommand("experiment", "experiment matrix")->require_subcommand(1);
    auto* experiment_run_cmd = experiment->add_subcommand("run", "run every matrix cell");
    add_common(experiment_run_cmd, common);

    std::vector<std::string> compare_inputs;
    std::string compare_out;
    auto* compare_cmd = app.add_subcommand("compare", "PINN vs FDM table from results.csv files");
    compare_cmd->add_option("results", compare_inputs, "results.csv files")->required();
    compare_cmd->add_option("--out", compare_out, "comparison CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*field_gen_cmd) return field_gen(common);
        if (*mms_check_cmd) return mms_check(common, mms_points, mms_tol);
        if (*pinn_train_cmd) return pinn_train(common);
        if (*fdm_solve_cmd) return fdm_solve(common);
        if (*sa_morris_cmd) return sa_run(common, "morris");
        if (*sa_efast_cmd) return sa_run(common, "efast");
        if (*nas_search_cmd) return nas_search(common, nas_method);
        if (*experiment_run_cmd) return experiment_run(common);
        if (*compare_cmd) return compare(compare_inputs, compare_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
