#pragma once

// Manufactured solutions for the modified Darcy equation
// div(K grad h) = f, with exact head, gradient, source and boundary data.

#include <array>
#include <string>
#include <vector>

#include "darcynas/randfield.hpp"

namespace darcynas {

/// SineOfSum:  h = a0 + sin(sum_j a_j x_j)
/// SumOfSines: h = a0 + sum_j sin(a_j x_j)
/// Linear:     h = a0 + sum_j a_j x_j  (sanity family for exactly representable tests)
enum class SolutionFamily { SineOfSum, SumOfSines, Linear };

std::string to_string(SolutionFamily family);
SolutionFamily parse_solution_family(const std::string& name);

struct ManufacturedCase {
    int dim = 1;
    SolutionFamily family = SolutionFamily::SineOfSum;
    std::vector<double> coeffs{3.0, 1.0};  // a0 .. a_dim

    void validate() const;
};

/// Axis-aligned box domain.
struct Domain {
    int dim = 1;
    std::array<double, 3> lower{0.0, 0.0, 0.0};
    std::array<double, 3> upper{1.0, 1.0, 1.0};

    void validate() const;
    double extent(int axis) const { return upper[axis] - lower[axis]; }
};

/// [0,25], [0,20]^2 and [0,5]x[0,2]x[0,1].
Domain canonical_domain(int dim);

/// 1D: 3 + sin x; 2D: 1 + sin(2x + y) or 1 + sin 2x + sin y;
/// 3D: 1 + sin(3x + 2y + z) or 5 + sin 3x + sin 2y + sin z.
ManufacturedCase canonical_case(int dim, SolutionFamily family);

double h_exact(const ManufacturedCase& c, const Point& x);
Point grad_h_exact(const ManufacturedCase& c, const Point& x);
/// Pure second derivatives d^2h/dx_j^2.
Point hessian_diagonal_exact(const ManufacturedCase& c, const Point& x);

/// f = div(K grad h) = sum_j (dK/dx_j dh/dx_j + K d^2h/dx_j^2).
double source_f(const ManufacturedCase& c, const FieldRealization& real, const Point& x);

/// Same value given K and its gradient at x (avoids a second pass over the modes).
double source_f(const ManufacturedCase& c, const FieldRealization::Sample& k, const Point& x);

enum class BoundaryKind { Dirichlet, Neumann };

/// One face of the box: `axis` and `upper` select the face, the outward
/// normal is +e_axis on the upper face and -e_axis on the lower one.
struct Face {
    int axis = 0;
    bool upper = false;
    BoundaryKind kind = BoundaryKind::Dirichlet;

    double normal_sign() const { return upper ? 1.0 : -1.0; }
};

/// x-faces are Dirichlet, every other face is Neumann.
std::vector<Face> boundary_faces(const Domain& domain);

/// Boundary data for one case on one domain.
class BoundaryData {
public:
    BoundaryData(ManufacturedCase c, Domain domain);

    const std::vector<Face>& faces() const noexcept { return faces_; }
    /// h_MMS at a Dirichlet point.
    double dirichlet(const Point& x) const;
    /// Outward normal derivative dh_MMS/dn at a point on `face`.
    double neumann(const Face& face, const Point& x) const;
    /// dh_MMS/dx_axis at a point on the face (axis derivative, not normal).
    double axis_derivative(const Face& face, const Point& x) const;

private:
    ManufacturedCase case_;
    Domain domain_;
    std::vector<Face> faces_;
};

}  // namespace darcynas
