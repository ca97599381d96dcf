#pragma once

// Cell-centred flux finite differences for div(K grad h) = f on a tensor grid:
// K at half-indices, Dirichlet x-faces, ghost-node Neumann faces.

#include <array>
#include <string>
#include <vector>

#include "darcynas/mms.hpp"
#include "darcynas/randfield.hpp"

namespace darcynas {

struct FdmGrid {
    int dim = 1;
    std::array<int, 3> counts{3, 1, 1};
    std::array<double, 3> lower{0.0, 0.0, 0.0};
    std::array<double, 3> upper{1.0, 0.0, 0.0};

    void validate() const;
    double spacing(int axis) const { return (upper[axis] - lower[axis]) / (counts[axis] - 1); }
    std::size_t size() const noexcept;
    std::size_t index(int i, int j = 0, int k = 0) const noexcept;
    Point node(std::size_t flat) const;
    GridHeader header() const;

    /// `counts` nodes per axis over the domain (at least 3 each).
    static FdmGrid uniform(const Domain& domain, const std::array<int, 3>& counts);
    /// Smallest node counts with spacing <= h on every axis.
    static FdmGrid with_spacing(const Domain& domain, double h);
    /// Smallest node counts with spacing_j <= ratio * lambda_j.
    static FdmGrid resolved(const Domain& domain, const FieldSpec& spec, double ratio = 0.2);
};

/// Square system in CSR form.
struct SparseSystem {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> cols;
    std::vector<double> vals;
    std::vector<double> rhs;

    double coeff(int row, int col) const;
    int row_nnz(int row) const { return row_ptr[row + 1] - row_ptr[row]; }
    std::vector<double> multiply(const std::vector<double>& x) const;
};

/// Interior rows carry the half-index flux stencil with 1/spacing^2 folded in
/// and RHS f(x). With `eliminate_dirichlet` the known x-face values are moved
/// to the RHS of neighbouring rows; otherwise the interior stencil is kept whole.
SparseSystem assemble(const FieldRealization& real, const ManufacturedCase& c, const FdmGrid& grid,
                      bool eliminate_dirichlet = true);

/// 1D export form: every non-Dirichlet row multiplied by dx^2, so interior
/// rows read K-weighted [1, -2, 1] with RHS dx^2 f.
SparseSystem scale_1d_rows(const SparseSystem& sys, const FdmGrid& grid);

struct SolveOptions {
    double residual_tolerance = 1e-10;  // relative to ||b||_inf
    int direct_limit = 60000;           // unknowns solved with sparse LU
};

/// Solves A h = b; throws SolverError when ||A h - b||_inf > tol ||b||_inf.
std::vector<double> solve(const SparseSystem& sys, const SolveOptions& opts = {});

double fdm_relative_error(const std::vector<double>& solution, const ManufacturedCase& c, const FdmGrid& grid);

/// Multilinear interpolation of nodal values at x (clamped to the grid box).
double interpolate(const FdmGrid& grid, const std::vector<double>& values, const Point& x);

/// Relative error of the interpolated solution against h_MMS at `points`,
/// so FDM and PINN can share one evaluation grid.
double fdm_relative_error_at(const std::vector<double>& solution, const FdmGrid& grid, const ManufacturedCase& c,
                             const std::vector<Point>& points);

/// Head values in the grid-file format of randfield.
void write_solution(const std::string& path, const FdmGrid& grid, const std::vector<double>& solution);

/// Least-squares slope of log(err) against log(spacing).
double observed_order(const std::vector<double>& spacings, const std::vector<double>& errors);

}  // namespace darcynas
