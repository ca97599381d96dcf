#pragma once

// Log-normal hydraulic conductivity fields from the randomized spectral
// method: Y'(x) = C2 * sum_i cos(xi_i + 2 pi k_i . x), K = C1 * exp(Y').

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "darcynas/common.hpp"

namespace darcynas {

enum class CorrelationKind { Exponential, Gaussian };

std::string to_string(CorrelationKind kind);
CorrelationKind parse_correlation_kind(const std::string& name);

/// A point in up to three dimensions; only the first `dim` entries are used.
using Point = std::array<double, 3>;

struct FieldSpec {
    int dim = 1;
    CorrelationKind kind = CorrelationKind::Gaussian;
    double sigma2 = 0.1;
    std::vector<double> lambdas{1.0};
    int n_modes = 1000;
    double mean_k = 15.0;
    std::uint64_t seed = 0;

    /// Throws DomainError when the invariants do not hold.
    void validate() const;
};

/// One frozen sample of the log-conductivity perturbation.
class FieldRealization {
public:
    /// Assembles a realization from explicit modes; used by `realize` and by
    /// tests that need hand-picked wavenumbers.
    FieldRealization(FieldSpec spec, std::vector<Point> wavenumbers, std::vector<double> phases);

    const FieldSpec& spec() const noexcept { return spec_; }
    int dim() const noexcept { return spec_.dim; }
    const std::vector<Point>& wavenumbers() const noexcept { return wavenumbers_; }
    const std::vector<double>& phases() const noexcept { return phases_; }
    double c1() const noexcept { return c1_; }
    double c2() const noexcept { return c2_; }

    double log_perturbation(std::span<const double> x) const;
    /// Y' at many points; faster than point-by-point calls.
    std::vector<double> log_perturbation(std::span<const Point> xs) const;
    double conductivity(std::span<const double> x) const;

    struct Sample {
        double k = 0.0;
        Point grad{0.0, 0.0, 0.0};
    };
    /// K and its exact gradient at x in one pass over the modes.
    Sample conductivity_with_gradient(std::span<const double> x) const;

    double log_perturbation(const Point& x) const { return log_perturbation(std::span(x.data(), dim())); }
    double conductivity(const Point& x) const { return conductivity(std::span(x.data(), dim())); }
    Sample conductivity_with_gradient(const Point& x) const {
        return conductivity_with_gradient(std::span(x.data(), dim()));
    }

private:
    void check_point(std::span<const double> x) const;

    FieldSpec spec_;
    std::vector<Point> wavenumbers_;
    std::vector<double> phases_;
    std::vector<Point> angular_;                 // 2 pi k_i
    std::array<std::vector<double>, 3> by_axis_;  // angular_ by axis
    double c1_ = 0.0;
    double c2_ = 0.0;
};

/// sigma^2 exp(-r/lambda) or sigma^2 exp(-r^2/lambda^2).
double covariance(CorrelationKind kind, double r, double sigma2, double lambda);

/// Spectral density of the correlation function in d dimensions.
double spectral_density(CorrelationKind kind, double k, double lambda, double sigma2, int d);

/// C1 = <K> exp(-sigma^2/2) in 1D/2D and <K> exp(-sigma^2/6) in 3D.
double geometric_mean_conductivity(const FieldSpec& spec);

/// Radius of the 3D exponential-kind wavenumber: root of
/// (2/pi)(atan r - r/(1+r^2)) = gamma by bisection.
double exponential_3d_radius(double gamma);

/// Radius of the 2D exponential-kind wavenumber, sqrt(1/mu^2 - 1).
double exponential_2d_radius(double mu);

/// Draws one wavenumber vector distributed by the normalized spectral density.
Point sample_wavenumber(const FieldSpec& spec, Rng& rng);

/// Draws N wavenumbers and N uniform phases; deterministic in (spec, rng state).
FieldRealization realize(const FieldSpec& spec, Rng& rng);

/// Realization `index` of an ensemble: uses the stream split(index) of spec.seed.
FieldRealization realize(const FieldSpec& spec, std::uint64_t index = 0);

/// Axis-aligned tensor grid description for plain-text grid files.
struct GridHeader {
    int dim = 1;
    std::array<int, 3> counts{1, 1, 1};
    std::array<double, 3> lower{0.0, 0.0, 0.0};
    std::array<double, 3> upper{0.0, 0.0, 0.0};

    std::size_t size() const noexcept;
    Point node(std::size_t flat) const;
};

/// Writes `dim nx [ny [nz]] x0 x1 [y0 y1 [z0 z1]]` then one value per line,
/// x fastest, 17 significant digits.
void write_grid_file(std::ostream& out, const GridHeader& header, std::span<const double> values);
void write_grid_file(const std::string& path, const GridHeader& header, std::span<const double> values);

struct GridFile {
    GridHeader header;
    std::vector<double> values;
};
GridFile read_grid_file(std::istream& in);

/// Samples K on every node of the grid.
std::vector<double> sample_conductivity(const FieldRealization& real, const GridHeader& grid);

}  // namespace darcynas
