#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "darcynas/harness.hpp"

namespace py = pybind11;
using namespace darcynas;
using namespace pybind11::literals;

namespace {

std::vector<Point> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& xs, int dim) {
    if (xs.ndim() == 1 && dim == 1) {
        std::vector<Point> pts(xs.shape(0));
        for (py::ssize_t i = 0; i < xs.shape(0); ++i) pts[i] = {xs.at(i), 0.0, 0.0};
        return pts;
    }
    if (xs.ndim() != 2 || xs.shape(1) != dim)
        throw DomainError("points must have shape (n, " + std::to_string(dim) + ")");
    std::vector<Point> pts(xs.shape(0), Point{0, 0, 0});
    for (py::ssize_t i = 0; i < xs.shape(0); ++i)
        for (int j = 0; j < dim; ++j) pts[i][j] = xs.at(i, j);
    return pts;
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

SearchSpace make_space(const std::vector<std::tuple<std::string, int, int>>& params) {
    std::vector<Parameter> ps;
    for (const auto& [name, lo, hi] : params) ps.push_back({name, lo, hi});
    return SearchSpace(ps);
}

py::dict search_result(const SearchResult& r) {
    py::list log;
    for (const auto& t : r.log)
        log.append(py::dict("trial"_a = t.trial, "config"_a = t.config, "resource"_a = t.resource,
                            "value"_a = t.value, "cached"_a = t.cached, "note"_a = t.note));
    return py::dict("best_config"_a = r.best.config, "best_value"_a = r.best.value, "log"_a = log,
                    "objective_calls"_a = r.objective_calls);
}

py::dict sa_result(const SaResult& r) {
    return py::dict("method"_a = r.method, "names"_a = r.names, "mu_star"_a = r.mu_star, "mu"_a = r.mu,
                    "sigma"_a = r.sigma, "s1"_a = r.s1, "st"_a = r.st, "ranking"_a = r.ranking,
                    "evaluations"_a = r.evaluations);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Darcy flow PINN/FDM core";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    py::enum_<CorrelationKind>(m, "CorrelationKind")
        .value("exponential", CorrelationKind::Exponential)
        .value("gaussian", CorrelationKind::Gaussian);
    py::enum_<SolutionFamily>(m, "SolutionFamily")
        .value("sine_of_sum", SolutionFamily::SineOfSum)
        .value("sum_of_sines", SolutionFamily::SumOfSines)
        .value("linear", SolutionFamily::Linear);
    py::enum_<Activation>(m, "Activation").value("tanh", Activation::Tanh).value("identity", Activation::Identity);

    py::class_<FieldSpec>(m, "FieldSpec")
        .def(py::init([](int dim, CorrelationKind kind, double sigma2, std::vector<double> lambdas, int modes,
                         double mean_k, std::uint64_t seed) {
                 FieldSpec f{dim, kind, sigma2, lambdas.empty() ? std::vector<double>(dim, 1.0) : lambdas, modes,
                             mean_k, seed};
                 f.validate();
                 return f;
             }),
             "dim"_a = 1, "kind"_a = CorrelationKind::Gaussian, "sigma2"_a = 0.1,
             "lambdas"_a = std::vector<double>{}, "modes"_a = 1000, "mean_k"_a = 15.0, "seed"_a = 0)
        .def_readwrite("dim", &FieldSpec::dim)
        .def_readwrite("kind", &FieldSpec::kind)
        .def_readwrite("sigma2", &FieldSpec::sigma2)
        .def_readwrite("lambdas", &FieldSpec::lambdas)
        .def_readwrite("modes", &FieldSpec::n_modes)
        .def_readwrite("mean_k", &FieldSpec::mean_k)
        .def_readwrite("seed", &FieldSpec::seed);

    py::class_<FieldRealization>(m, "FieldRealization")
        .def("log_perturbation",
             [](const FieldRealization& r, const py::array_t<double>& xs) {
                 const auto pts = to_points(xs, r.spec().dim);
                 std::vector<double> v(pts.size());
                 for (std::size_t i = 0; i < pts.size(); ++i) v[i] = r.log_perturbation(pts[i]);
                 return to_array(v);
             })
        .def("conductivity", [](const FieldRealization& r, const py::array_t<double>& xs) {
            const auto pts = to_points(xs, r.spec().dim);
            std::vector<double> v(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) v[i] = r.conductivity(pts[i]);
            return to_array(v);
        });
    m.def("realize", py::overload_cast<const FieldSpec&, std::uint64_t>(&realize), "spec"_a, "index"_a = 0);
    m.def("covariance", &covariance, "kind"_a, "r"_a, "sigma2"_a, "lam"_a);

    py::class_<ManufacturedCase>(m, "ManufacturedCase")
        .def_readonly("dim", &ManufacturedCase::dim)
        .def_readonly("family", &ManufacturedCase::family)
        .def_readonly("coeffs", &ManufacturedCase::coeffs);
    m.def("canonical_case", &canonical_case, "dim"_a, "family"_a = SolutionFamily::SineOfSum);
    m.def("h_exact", [](const ManufacturedCase& c, const py::array_t<double>& xs) {
        const auto pts = to_points(xs, c.dim);
        std::vector<double> v(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) v[i] = h_exact(c, pts[i]);
        return to_array(v);
    });
    m.def("source_f", [](const ManufacturedCase& c, const FieldRealization& r, const py::array_t<double>& xs) {
        const auto pts = to_points(xs, c.dim);
        std::vector<double> v(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) v[i] = source_f(c, r, pts[i]);
        return to_array(v);
    });

    py::class_<Network>(m, "Network")
        .def_property_readonly("params", [](const Network& n) { return to_array(n.params()); })
        .def_property_readonly("layers", [](const Network& n) { return n.config().layers; })
        .def_property_readonly("neurons", [](const Network& n) { return n.config().neurons; })
        .def("__call__", [](const Network& n, const py::array_t<double>& xs) {
            const auto pts = to_points(xs, n.config().input_dim);
            const Eigen::VectorXd h = n.forward(pts);
            return to_array(std::vector<double>(h.data(), h.data() + h.size()));
        });
    m.def("save_checkpoint", py::overload_cast<const std::string&, const Network&>(&save_checkpoint));
    m.def("load_checkpoint", py::overload_cast<const std::string&>(&load_checkpoint));

    m.def(
        "train_pinn",
        [](const FieldSpec& spec, SolutionFamily family, int layers, int neurons, int adam_iters, int lbfgs_iters,
           int interior, int boundary, std::uint64_t seed) {
            const Domain dom = canonical_domain(spec.dim);
            const auto c = canonical_case(spec.dim, family);
            const auto real = realize(spec);
            TrainConfig tc;
            tc.adam_iters = adam_iters;
            tc.lbfgs_max_iters = lbfgs_iters;
            tc.n_interior = interior;
            tc.n_boundary = boundary;
            Rng colloc_rng(seed + 1000), init_rng(seed + 7);
            const PinnProblem problem(sample_collocation(dom, interior, boundary, colloc_rng), real, c);
            TrainReport rep;
            {
                py::gil_scoped_release release;
                rep = train(Network::init_params(network_for(dom, layers, neurons), init_rng), problem, tc);
            }
            std::vector<double> losses;
            for (const auto& row : rep.trace) losses.push_back(row.loss.total);
            const auto pts = grid_points(default_eval_grid(dom));
            return py::dict("network"_a = rep.net, "delta_h"_a = relative_error(rep.net, c, pts),
                            "final_loss"_a = rep.final_loss.total, "iterations"_a = rep.iterations(),
                            "loss_trace"_a = to_array(losses));
        },
        "spec"_a, "family"_a = SolutionFamily::SineOfSum, "layers"_a = 2, "neurons"_a = 37, "adam_iters"_a = 2000,
        "lbfgs_iters"_a = 5000, "interior"_a = 1000, "boundary"_a = 100, "seed"_a = 0);

    m.def(
        "fdm_solve",
        [](const FieldSpec& spec, SolutionFamily family, double spacing) {
            const Domain dom = canonical_domain(spec.dim);
            const auto c = canonical_case(spec.dim, family);
            const auto grid = spacing > 0 ? FdmGrid::with_spacing(dom, spacing) : FdmGrid::resolved(dom, spec);
            const auto sol = solve(assemble(realize(spec), c, grid));
            std::vector<int> shape;
            for (int a = grid.dim - 1; a >= 0; --a) shape.push_back(grid.counts[a]);
            return py::dict("solution"_a = to_array(sol), "shape"_a = shape,
                            "delta_h"_a = fdm_relative_error(sol, c, grid));
        },
        "spec"_a, "family"_a = SolutionFamily::SineOfSum, "spacing"_a = 0.0);

    m.def(
        "morris",
        [](const std::vector<std::tuple<std::string, int, int>>& params,
           const std::function<double(const std::vector<double>&)>& f, int trajectories, int levels,
           std::uint64_t seed) {
            const auto space = make_space(params);
            Rng rng(seed);
            return sa_result(morris_screen(space, f, {trajectories, levels}, rng));
        },
        "params"_a, "objective"_a, "trajectories"_a = 10, "levels"_a = 4, "seed"_a = 0);
    m.def(
        "efast",
        [](const std::vector<std::tuple<std::string, int, int>>& params,
           const std::function<double(const std::vector<double>&)>& f, int samples, int harmonics,
           std::uint64_t seed) {
            const auto space = make_space(params);
            Rng rng(seed);
            return sa_result(efast(space, f, {samples, harmonics}, rng));
        },
        "params"_a, "objective"_a, "samples"_a = 65, "harmonics"_a = 4, "seed"_a = 0);

    m.def("hyperband_schedule", [](double R, int eta) {
        py::list out;
        for (const auto& b : hyperband_schedule(R, eta)) {
            py::list rungs;
            for (const auto& r : b.rungs) rungs.append(py::make_tuple(r.n, r.r));
            out.append(py::dict("s"_a = b.s, "n"_a = b.n, "r"_a = b.r, "rungs"_a = rungs));
        }
        return out;
    });
    m.def("jaya_update", &jaya_update, "a"_a, "best"_a, "worst"_a, "r1"_a, "r2"_a, "literal_abs"_a = true);
    m.def("expected_improvement", &expected_improvement, "mean"_a, "sd"_a, "best"_a);
    m.def(
        "search",
        [](const std::string& method, const std::vector<std::tuple<std::string, int, int>>& params,
           const std::function<double(const std::vector<int>&)>& f, int budget, std::uint64_t seed) {
            const auto space = make_space(params);
            NasOptions o;
            o.budget = budget;
            Rng rng(seed);
            return search_result(run_search(method, space, value_objective(f), o, rng));
        },
        "method"_a, "params"_a, "objective"_a, "budget"_a = 30, "seed"_a = 0);

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& out_dir, int jobs) {
            auto cfg = load_experiment_config(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            ExperimentSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(cfg, jobs);
            }
            py::list rows;
            for (const auto& r : s.rows)
                rows.append(py::dict("cell"_a = r.cell(), "method"_a = r.method, "delta_h"_a = r.delta_h,
                                     "iterations"_a = r.iterations, "transfer"_a = r.transfer));
            return py::dict("rows"_a = rows, "failures"_a = s.failures);
        },
        "config"_a, "out_dir"_a = "", "jobs"_a = 1);
}
