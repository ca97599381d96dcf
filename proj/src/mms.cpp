#include "darcynas/mms.hpp"

#include <cmath>

namespace darcynas {

std::string to_string(SolutionFamily family) {
    switch (family) {
        case SolutionFamily::SineOfSum: return "sine_of_sum";
        case SolutionFamily::SumOfSines: return "sum_of_sines";
        case SolutionFamily::Linear: return "linear";
    }
    return "?";
}

SolutionFamily parse_solution_family(const std::string& name) {
    if (name == "sine_of_sum") return SolutionFamily::SineOfSum;
    if (name == "sum_of_sines") return SolutionFamily::SumOfSines;
    if (name == "linear") return SolutionFamily::Linear;
    throw DomainError("unknown solution family '" + name + "'");
}

void ManufacturedCase::validate() const {
    if (dim < 1 || dim > 3) throw DomainError("case dim must be 1, 2 or 3");
    if (static_cast<int>(coeffs.size()) != dim + 1) throw DomainError("case needs coefficients a0..a_dim");
    for (int j = 1; j <= dim; ++j)
        if (coeffs[j] == 0.0 || !std::isfinite(coeffs[j]))
            throw DomainError("coefficients a1..a_dim must be finite and non-zero");
}

void Domain::validate() const {
    if (dim < 1 || dim > 3) throw DomainError("domain dim must be 1, 2 or 3");
    for (int j = 0; j < dim; ++j)
        if (!(lower[j] < upper[j])) throw DomainError("domain bounds must satisfy lower < upper");
}

Domain canonical_domain(int dim) {
    switch (dim) {
        case 1: return Domain{1, {0.0, 0.0, 0.0}, {25.0, 0.0, 0.0}};
        case 2: return Domain{2, {0.0, 0.0, 0.0}, {20.0, 20.0, 0.0}};
        case 3: return Domain{3, {0.0, 0.0, 0.0}, {5.0, 2.0, 1.0}};
        default: throw DomainError("dim must be 1, 2 or 3");
    }
}

ManufacturedCase canonical_case(int dim, SolutionFamily family) {
    switch (dim) {
        case 1: return ManufacturedCase{1, family, {3.0, 1.0}};
        case 2: return ManufacturedCase{2, family, {1.0, 2.0, 1.0}};
        case 3:
            return ManufacturedCase{3, family,
                                    family == SolutionFamily::SumOfSines ? std::vector{5.0, 3.0, 2.0, 1.0}
                                                                         : std::vector{1.0, 3.0, 2.0, 1.0}};
        default: throw DomainError("dim must be 1, 2 or 3");
    }
}

namespace {

double phase_sum(const ManufacturedCase& c, const Point& x) {
    double s = 0.0;
    for (int j = 0; j < c.dim; ++j) s += c.coeffs[j + 1] * x[j];
    return s;
}

}  // namespace

double h_exact(const ManufacturedCase& c, const Point& x) {
    const auto& a = c.coeffs;
    switch (c.family) {
        case SolutionFamily::SineOfSum: return a[0] + std::sin(phase_sum(c, x));
        case SolutionFamily::Linear: return a[0] + phase_sum(c, x);
        case SolutionFamily::SumOfSines: {
            double h = a[0];
            for (int j = 0; j < c.dim; ++j) h += std::sin(a[j + 1] * x[j]);
            return h;
        }
    }
    return 0.0;
}

Point grad_h_exact(const ManufacturedCase& c, const Point& x) {
    const auto& a = c.coeffs;
    Point g{0.0, 0.0, 0.0};
    switch (c.family) {
        case SolutionFamily::SineOfSum: {
            const double cs = std::cos(phase_sum(c, x));
            for (int j = 0; j < c.dim; ++j) g[j] = a[j + 1] * cs;
            break;
        }
        case SolutionFamily::SumOfSines:
            for (int j = 0; j < c.dim; ++j) g[j] = a[j + 1] * std::cos(a[j + 1] * x[j]);
            break;
        case SolutionFamily::Linear:
            for (int j = 0; j < c.dim; ++j) g[j] = a[j + 1];
            break;
    }
    return g;
}

Point hessian_diagonal_exact(const ManufacturedCase& c, const Point& x) {
    const auto& a = c.coeffs;
    Point d{0.0, 0.0, 0.0};
    switch (c.family) {
        case SolutionFamily::SineOfSum: {
            const double sn = std::sin(phase_sum(c, x));
            for (int j = 0; j < c.dim; ++j) d[j] = -a[j + 1] * a[j + 1] * sn;
            break;
        }
        case SolutionFamily::SumOfSines:
            for (int j = 0; j < c.dim; ++j) d[j] = -a[j + 1] * a[j + 1] * std::sin(a[j + 1] * x[j]);
            break;
        case SolutionFamily::Linear: break;
    }
    return d;
}

double source_f(const ManufacturedCase& c, const FieldRealization::Sample& k, const Point& x) {
    const Point g = grad_h_exact(c, x);
    const Point d = hessian_diagonal_exact(c, x);
    double f = 0.0;
    for (int j = 0; j < c.dim; ++j) f += k.grad[j] * g[j] + k.k * d[j];
    return f;
}

double source_f(const ManufacturedCase& c, const FieldRealization& real, const Point& x) {
    if (c.dim != real.dim()) throw DomainError("case and field dimensions differ");
    return source_f(c, real.conductivity_with_gradient(x), x);
}

std::vector<Face> boundary_faces(const Domain& domain) {
    std::vector<Face> faces;
    for (int axis = 0; axis < domain.dim; ++axis) {
        const BoundaryKind kind = axis == 0 ? BoundaryKind::Dirichlet : BoundaryKind::Neumann;
        faces.push_back(Face{axis, false, kind});
        faces.push_back(Face{axis, true, kind});
    }
    return faces;
}

BoundaryData::BoundaryData(ManufacturedCase c, Domain domain)
    : case_(std::move(c)), domain_(domain), faces_(boundary_faces(domain_)) {
    case_.validate();
    domain_.validate();
    if (case_.dim != domain_.dim) throw DomainError("case and domain dimensions differ");
}

double BoundaryData::dirichlet(const Point& x) const { return h_exact(case_, x); }

double BoundaryData::axis_derivative(const Face& face, const Point& x) const {
    return grad_h_exact(case_, x)[face.axis];
}

double BoundaryData::neumann(const Face& face, const Point& x) const {
    return face.normal_sign() * axis_derivative(face, x);
}

}  // namespace darcynas
