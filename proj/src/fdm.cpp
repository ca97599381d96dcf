#include "darcynas/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace darcynas {

void FdmGrid::validate() const {
    if (dim < 1 || dim > 3) throw DomainError("grid dim must be 1, 2 or 3");
    for (int j = 0; j < dim; ++j) {
        if (counts[j] < 3) throw DomainError("grid needs at least 3 nodes per axis");
        if (!(lower[j] < upper[j])) throw DomainError("grid bounds must satisfy lower < upper");
    }
}

std::size_t FdmGrid::size() const noexcept {
    std::size_t n = 1;
    for (int j = 0; j < dim; ++j) n *= static_cast<std::size_t>(counts[j]);
    return n;
}

std::size_t FdmGrid::index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(counts[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(counts[1]) * k);
}

Point FdmGrid::node(std::size_t flat) const { return header().node(flat); }

GridHeader FdmGrid::header() const {
    GridHeader h;
    h.dim = dim;
    h.counts = {1, 1, 1};
    h.lower = {0.0, 0.0, 0.0};
    h.upper = {0.0, 0.0, 0.0};
    for (int j = 0; j < dim; ++j) {
        h.counts[j] = counts[j];
        h.lower[j] = lower[j];
        h.upper[j] = upper[j];
    }
    return h;
}

FdmGrid FdmGrid::uniform(const Domain& domain, const std::array<int, 3>& counts) {
    domain.validate();
    FdmGrid g;
    g.dim = domain.dim;
    g.counts = {1, 1, 1};
    for (int j = 0; j < domain.dim; ++j) g.counts[j] = counts[j];
    g.lower = domain.lower;
    g.upper = domain.upper;
    g.validate();
    return g;
}

FdmGrid FdmGrid::with_spacing(const Domain& domain, double h) {
    if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
    std::array<int, 3> counts{1, 1, 1};
    for (int j = 0; j < domain.dim; ++j)
        counts[j] = std::max(3, static_cast<int>(std::ceil(domain.extent(j) / h - 1e-9)) + 1);
    return uniform(domain, counts);
}

FdmGrid FdmGrid::resolved(const Domain& domain, const FieldSpec& spec, double ratio) {
    spec.validate();
    if (spec.dim != domain.dim) throw DomainError("field and domain dimensions differ");
    if (!(ratio > 0.0)) throw DomainError("resolution ratio must be positive");
    std::array<int, 3> counts{1, 1, 1};
    for (int j = 0; j < domain.dim; ++j)
        counts[j] = std::max(3, static_cast<int>(std::ceil(domain.extent(j) / (ratio * spec.lambdas[j]) - 1e-9)) + 1);
    return uniform(domain, counts);
}

double SparseSystem::coeff(int row, int col) const {
    for (int p = row_ptr[row]; p < row_ptr[row + 1]; ++p)
        if (cols[p] == col) return vals[p];
    return 0.0;
}

std::vector<double> SparseSystem::multiply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != n) throw DomainError("vector length does not match the system");
    std::vector<double> y(n, 0.0);
    for (int r = 0; r < n; ++r)
        for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) y[r] += vals[p] * x[cols[p]];
    return y;
}

SparseSystem assemble(const FieldRealization& real, const ManufacturedCase& c, const FdmGrid& grid,
                      bool eliminate_dirichlet) {
    grid.validate();
    c.validate();
    if (c.dim != grid.dim || real.dim() != grid.dim) throw DomainError("grid, field and case dimensions differ");

    const int d = grid.dim;
    const auto n = grid.size();
    SparseSystem sys;
    sys.n = static_cast<int>(n);
    sys.row_ptr.reserve(n + 1);
    sys.row_ptr.push_back(0);
    sys.rhs.assign(n, 0.0);

    std::vector<std::pair<int, double>> row;
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::array<int, 3> idx{0, 0, 0};
        std::size_t rest = flat;
        for (int a = 0; a < d; ++a) {
            idx[a] = static_cast<int>(rest % grid.counts[a]);
            rest /= grid.counts[a];
        }
        const Point x = grid.node(flat);
        row.clear();

        if (idx[0] == 0 || idx[0] == grid.counts[0] - 1) {
            row.emplace_back(static_cast<int>(flat), 1.0);
            sys.rhs[flat] = h_exact(c, x);
        } else {
            double diag = 0.0;
            double rhs = source_f(c, real, x);
            const Point grad_h = grad_h_exact(c, x);
            for (int a = 0; a < d; ++a) {
                const double h = grid.spacing(a);
                Point xm = x, xp = x;
                xm[a] = grid.lower[a] + (idx[a] - 0.5) * h;
                xp[a] = grid.lower[a] + (idx[a] + 0.5) * h;
                const double cm = real.conductivity(xm) / (h * h);
                const double cp = real.conductivity(xp) / (h * h);
                diag -= cm + cp;

                auto neighbour = [&](int offset) {
                    std::array<int, 3> j = idx;
                    j[a] += offset;
                    return j;
                };
                auto flat_of = [&](const std::array<int, 3>& j) {
                    return static_cast<int>(grid.index(j[0], j[1], j[2]));
                };
                auto add = [&](const std::array<int, 3>& j, double coef) {
                    const bool dirichlet = j[0] == 0 || j[0] == grid.counts[0] - 1;
                    if (dirichlet && eliminate_dirichlet)
                        rhs -= coef * h_exact(c, grid.node(flat_of(j)));
                    else
                        row.emplace_back(flat_of(j), coef);
                };

                if (idx[a] == 0) {
                    // Ghost below: h_{-1} = h_{1} - 2h dh/dx_a.
                    add(neighbour(+1), cm + cp);
                    rhs += cm * 2.0 * h * grad_h[a];
                } else if (idx[a] == grid.counts[a] - 1) {
                    // Ghost above: h_{n} = h_{n-2} + 2h dh/dx_a.
                    add(neighbour(-1), cm + cp);
                    rhs -= cp * 2.0 * h * grad_h[a];
                } else {
                    add(neighbour(-1), cm);
                    add(neighbour(+1), cp);
                }
            }
            row.emplace_back(static_cast<int>(flat), diag);
            sys.rhs[flat] = rhs;
        }

        std::sort(row.begin(), row.end());
        for (std::size_t p = 0; p < row.size(); ++p) {
            if (!sys.cols.empty() && static_cast<int>(sys.cols.size()) > sys.row_ptr.back() &&
                sys.cols.back() == row[p].first) {
                sys.vals.back() += row[p].second;
            } else {
                sys.cols.push_back(row[p].first);
                sys.vals.push_back(row[p].second);
            }
        }
        sys.row_ptr.push_back(static_cast<int>(sys.cols.size()));
    }
    return sys;
}

SparseSystem scale_1d_rows(const SparseSystem& sys, const FdmGrid& grid) {
    if (grid.dim != 1) throw DomainError("row scaling applies to 1D systems only");
    const double h2 = grid.spacing(0) * grid.spacing(0);
    SparseSystem out = sys;
    for (int r = 1; r + 1 < sys.n; ++r) {
        for (int p = out.row_ptr[r]; p < out.row_ptr[r + 1]; ++p) out.vals[p] *= h2;
        out.rhs[r] *= h2;
    }
    return out;
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::vector<double> solve(const SparseSystem& sys, const SolveOptions& opts) {
    if (sys.n <= 0 || static_cast<int>(sys.row_ptr.size()) != sys.n + 1 || static_cast<int>(sys.rhs.size()) != sys.n)
        throw DomainError("malformed sparse system");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(sys.vals.size());
    for (int r = 0; r < sys.n; ++r)
        for (int p = sys.row_ptr[r]; p < sys.row_ptr[r + 1]; ++p) trips.emplace_back(r, sys.cols[p], sys.vals[p]);
    Eigen::SparseMatrix<double> a(sys.n, sys.n);
    a.setFromTriplets(trips.begin(), trips.end());
    const Eigen::Map<const Eigen::VectorXd> b(sys.rhs.data(), sys.n);
    const double bnorm = inf_norm(b);
    const double limit = opts.residual_tolerance * (bnorm > 0.0 ? bnorm : 1.0);

    Eigen::VectorXd x;
    double residual = INFINITY;
    if (sys.n <= opts.direct_limit) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed", residual);
        x = lu.solve(b);
        for (int refine = 0; refine < 3; ++refine) {
            const Eigen::VectorXd r = b - a * x;
            residual = inf_norm(r);
            if (residual <= limit) break;
            x += lu.solve(r);
        }
    } else {
        Eigen::SparseMatrix<double, Eigen::RowMajor> ar = a;
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> it;
        it.preconditioner().setDroptol(1e-5);
        it.preconditioner().setFillfactor(20);
        it.setTolerance(opts.residual_tolerance * 1e-2);
        it.setMaxIterations(5000);
        it.compute(ar);
        if (it.info() != Eigen::Success) throw SolverError("ILUT preconditioner construction failed", residual);
        x = it.solve(b);
        for (int restart = 0; restart < 5; ++restart) {
            residual = inf_norm(b - a * x);
            if (residual <= limit) break;
            x = it.solveWithGuess(b, x);
        }
    }
    residual = inf_norm(b - a * x);
    if (!x.allFinite() || !(residual <= limit))
        throw SolverError("linear solve did not reach the residual bound", residual);
    return {x.data(), x.data() + x.size()};
}

double fdm_relative_error(const std::vector<double>& solution, const ManufacturedCase& c, const FdmGrid& grid) {
    if (solution.size() != grid.size()) throw DomainError("solution size does not match the grid");
    std::vector<double> exact(grid.size());
    for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = h_exact(c, grid.node(i));
    return relative_l2_error(solution, exact);
}

double interpolate(const FdmGrid& grid, const std::vector<double>& values, const Point& x) {
    if (values.size() != grid.size()) throw DomainError("value count does not match the grid");
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < grid.dim; ++a) {
        const double t = std::clamp((x[a] - grid.lower[a]) / grid.spacing(a), 0.0, static_cast<double>(grid.counts[a] - 1));
        base[a] = std::min(static_cast<int>(t), grid.counts[a] - 2);
        frac[a] = t - base[a];
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << grid.dim); ++corner) {
        std::array<int, 3> idx = base;
        double w = 1.0;
        for (int a = 0; a < grid.dim; ++a) {
            const bool up = (corner >> a) & 1;
            idx[a] += up;
            w *= up ? frac[a] : 1.0 - frac[a];
        }
        if (w != 0.0) v += w * values[grid.index(idx[0], idx[1], idx[2])];
    }
    return v;
}

double fdm_relative_error_at(const std::vector<double>& solution, const FdmGrid& grid, const ManufacturedCase& c,
                             const std::vector<Point>& points) {
    if (points.empty()) throw DomainError("evaluation grid is empty");
    std::vector<double> pred(points.size()), exact(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        pred[i] = interpolate(grid, solution, points[i]);
        exact[i] = h_exact(c, points[i]);
    }
    return relative_l2_error(pred, exact);
}

void write_solution(const std::string& path, const FdmGrid& grid, const std::vector<double>& solution) {
    write_grid_file(path, grid.header(), solution);
}

double observed_order(const std::vector<double>& spacings, const std::vector<double>& errors) {
    if (spacings.size() != errors.size() || spacings.size() < 2) throw DomainError("need at least two grids");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(spacings.size());
    for (std::size_t i = 0; i < spacings.size(); ++i) {
        if (!(spacings[i] > 0.0) || !(errors[i] > 0.0)) throw DomainError("spacings and errors must be positive");
        const double lx = std::log(spacings[i]);
        const double ly = std::log(errors[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw DomainError("spacings must differ");
    return (n * sxy - sx * sy) / den;
}

}  // namespace darcynas
