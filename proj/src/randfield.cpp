#include "darcynas/randfield.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace darcynas {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + what);
}

}  // namespace

std::string to_string(CorrelationKind kind) {
    return kind == CorrelationKind::Exponential ? "exponential" : "gaussian";
}

CorrelationKind parse_correlation_kind(const std::string& name) {
    if (name == "exponential" || name == "exp") return CorrelationKind::Exponential;
    if (name == "gaussian" || name == "gauss") return CorrelationKind::Gaussian;
    throw DomainError("unknown correlation kind '" + name + "'");
}

void FieldSpec::validate() const {
    if (dim < 1 || dim > 3) throw DomainError("field dim must be 1, 2 or 3");
    if (static_cast<int>(lambdas.size()) != dim)
        throw DomainError("field needs exactly one correlation length per axis");
    for (double l : lambdas)
        if (!(l > 0.0) || !std::isfinite(l)) throw DomainError("correlation lengths must be positive");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw DomainError("sigma2 must be >= 0");
    if (n_modes < 1) throw DomainError("n_modes must be >= 1");
    if (!(mean_k > 0.0) || !std::isfinite(mean_k)) throw DomainError("mean conductivity must be > 0");
}

double covariance(CorrelationKind kind, double r, double sigma2, double lambda) {
    require_finite(r, "separation");
    require_finite(sigma2, "variance");
    require_finite(lambda, "correlation length");
    if (!(lambda > 0.0)) throw DomainError("correlation length must be positive");
    if (r < 0.0) throw DomainError("separation must be non-negative");
    const double s = r / lambda;
    return kind == CorrelationKind::Exponential ? sigma2 * std::exp(-s) : sigma2 * std::exp(-s * s);
}

double spectral_density(CorrelationKind kind, double k, double lambda, double sigma2, int d) {
    require_finite(k, "wavenumber");
    require_finite(lambda, "correlation length");
    require_finite(sigma2, "variance");
    if (d < 1 || d > 3) throw DomainError("dimension must be 1, 2 or 3");
    const double ld = std::pow(lambda, d);
    if (kind == CorrelationKind::Exponential) {
        const double t = kTwoPi * k * lambda;
        return sigma2 * ld * std::pow(1.0 + t * t, -(d + 1) / 2.0);
    }
    const double t = kPi * k * lambda;
    return sigma2 * std::pow(kPi, d / 2.0) * ld * std::exp(-t * t);
}

double geometric_mean_conductivity(const FieldSpec& spec) {
    return spec.dim == 3 ? spec.mean_k * std::exp(-spec.sigma2 / 6.0)
                         : spec.mean_k * std::exp(-spec.sigma2 / 2.0);
}

double exponential_2d_radius(double mu) {
    if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("mu must lie in (0, 1]");
    return std::sqrt(1.0 / (mu * mu) - 1.0);
}

double exponential_3d_radius(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
    // Upper quantiles compare the tail 1 - F(r) = (2/pi)(atan(1/r) + r/(1+r^2)),
    // which keeps full precision where F(r) rounds to 1.
    const bool upper = gamma >= 0.5;
    const double target = upper ? 1.0 - gamma : gamma;
    auto below = [&](double r) {
        if (upper) return (2.0 / kPi) * (std::atan(1.0 / r) + r / (1.0 + r * r)) > target;
        return (2.0 / kPi) * (std::atan(r) - r / (1.0 + r * r)) < target;
    };
    double lo = 0.0;
    double hi = 1.0;
    while (below(hi)) hi *= 2.0;  // 1 - F(r) ~ 4 / (pi r), so gamma < 1 keeps r finite
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (below(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Point sample_wavenumber(const FieldSpec& spec, Rng& rng) {
    Point k{0.0, 0.0, 0.0};
    const auto& l = spec.lambdas;
    if (spec.kind == CorrelationKind::Gaussian) {
        for (int j = 0; j < spec.dim; ++j) k[j] = rng.normal() / (std::numbers::sqrt2 * kPi * l[j]);
        return k;
    }
    // Exponential kind: the dimensionless radius is drawn from the printed
    // CDFs; the 1/(2 pi lambda) scale makes the covariance exp(-r/lambda).
    switch (spec.dim) {
        case 1: {
            const double u = rng.uniform_open();
            k[0] = std::tan(kPi * (u - 0.5)) / (kTwoPi * l[0]);
            break;
        }
        case 2: {
            const double r = exponential_2d_radius(rng.uniform_open());
            const double angle = kTwoPi * rng.uniform();
            k[0] = r * std::cos(angle) / (kTwoPi * l[0]);
            k[1] = r * std::sin(angle) / (kTwoPi * l[1]);
            break;
        }
        default: {
            const double theta = std::acos(1.0 - 2.0 * rng.uniform());
            const double azimuth = kTwoPi * rng.uniform();
            const double r = exponential_3d_radius(rng.uniform());
            k[0] = r * std::sin(theta) * std::cos(azimuth) / (kTwoPi * l[0]);
            k[1] = r * std::sin(theta) * std::sin(azimuth) / (kTwoPi * l[1]);
            k[2] = r * std::cos(theta) / (kTwoPi * l[2]);
            break;
        }
    }
    return k;
}

FieldRealization::FieldRealization(FieldSpec spec, std::vector<Point> wavenumbers,
                                   std::vector<double> phases)
    : spec_(std::move(spec)), wavenumbers_(std::move(wavenumbers)), phases_(std::move(phases)) {
    spec_.validate();
    if (wavenumbers_.size() != phases_.size() ||
        wavenumbers_.size() != static_cast<std::size_t>(spec_.n_modes))
        throw DomainError("realization needs exactly n_modes wavenumbers and phases");
    angular_.reserve(wavenumbers_.size());
    for (const auto& k : wavenumbers_) {
        Point scaled{0.0, 0.0, 0.0};
        for (int j = 0; j < spec_.dim; ++j) scaled[j] = kTwoPi * k[j];
        angular_.push_back(scaled);
        for (int j = 0; j < 3; ++j) by_axis_[j].push_back(scaled[j]);
    }
    c1_ = geometric_mean_conductivity(spec_);
    c2_ = std::sqrt(spec_.sigma2) * std::sqrt(2.0 / spec_.n_modes);
}

void FieldRealization::check_point(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != spec_.dim)
        throw DomainError("point dimension " + std::to_string(x.size()) + " does not match field dimension " +
                          std::to_string(spec_.dim));
}

double FieldRealization::log_perturbation(std::span<const double> x) const {
    check_point(x);
    if (c2_ == 0.0) return 0.0;
    double sum = 0.0;
    const std::size_t n = phases_.size();
    for (std::size_t i = 0; i < n; ++i) {
        double arg = phases_[i];
        for (int j = 0; j < spec_.dim; ++j) arg += angular_[i][j] * x[j];
        sum += std::cos(arg);
    }
    return c2_ * sum;
}

std::vector<double> FieldRealization::log_perturbation(std::span<const Point> xs) const {
    std::vector<double> out(xs.size(), 0.0);
    if (c2_ == 0.0) {
        for (const auto& x : xs) check_point(std::span(x.data(), dim()));
        return out;
    }
    const std::size_t n = phases_.size();
    std::vector<double> arg(n);
    for (std::size_t p = 0; p < xs.size(); ++p) {
        const Point& x = xs[p];
        check_point(std::span(x.data(), dim()));
        for (std::size_t i = 0; i < n; ++i) arg[i] = phases_[i] + by_axis_[0][i] * x[0];
        for (int j = 1; j < spec_.dim; ++j) {
            const double* k = by_axis_[j].data();
            for (std::size_t i = 0; i < n; ++i) arg[i] += k[i] * x[j];
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += std::cos(arg[i]);
        out[p] = c2_ * sum;
    }
    return out;
}

double FieldRealization::conductivity(std::span<const double> x) const {
    return c1_ * std::exp(log_perturbation(x));
}

FieldRealization::Sample FieldRealization::conductivity_with_gradient(std::span<const double> x) const {
    check_point(x);
    Sample out;
    if (c2_ == 0.0) {
        out.k = c1_;
        return out;
    }
    double sum = 0.0;
    Point dsum{0.0, 0.0, 0.0};
    const std::size_t n = phases_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& k = angular_[i];
        double arg = phases_[i];
        for (int j = 0; j < spec_.dim; ++j) arg += k[j] * x[j];
        sum += std::cos(arg);
        const double s = std::sin(arg);
        for (int j = 0; j < spec_.dim; ++j) dsum[j] -= k[j] * s;
    }
    out.k = c1_ * std::exp(c2_ * sum);
    for (int j = 0; j < spec_.dim; ++j) out.grad[j] = out.k * c2_ * dsum[j];
    return out;
}

FieldRealization realize(const FieldSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<Point> ks;
    std::vector<double> phases;
    ks.reserve(spec.n_modes);
    phases.reserve(spec.n_modes);
    for (int i = 0; i < spec.n_modes; ++i) {
        ks.push_back(sample_wavenumber(spec, rng));
        phases.push_back(kTwoPi * rng.uniform());
    }
    return FieldRealization(spec, std::move(ks), std::move(phases));
}

FieldRealization realize(const FieldSpec& spec, std::uint64_t index) {
    Rng rng = Rng(spec.seed).split(index);
    return realize(spec, rng);
}

std::size_t GridHeader::size() const noexcept {
    std::size_t n = 1;
    for (int j = 0; j < dim; ++j) n *= static_cast<std::size_t>(counts[j]);
    return n;
}

Point GridHeader::node(std::size_t flat) const {
    Point p{0.0, 0.0, 0.0};
    for (int j = 0; j < dim; ++j) {
        const auto n = static_cast<std::size_t>(counts[j]);
        const std::size_t i = flat % n;
        flat /= n;
        p[j] = n == 1 ? lower[j] : lower[j] + (upper[j] - lower[j]) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return p;
}

void write_grid_file(std::ostream& out, const GridHeader& header, std::span<const double> values) {
    if (values.size() != header.size()) throw DomainError("grid value count does not match header");
    out << header.dim;
    for (int j = 0; j < header.dim; ++j) out << ' ' << header.counts[j];
    out << std::setprecision(17);
    for (int j = 0; j < header.dim; ++j) out << ' ' << header.lower[j] << ' ' << header.upper[j];
    out << '\n';
    for (double v : values) out << v << '\n';
}

void write_grid_file(const std::string& path, const GridHeader& header, std::span<const double> values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_grid_file(out, header, values);
}

GridFile read_grid_file(std::istream& in) {
    GridFile file;
    std::string line;
    if (!std::getline(in, line)) throw DomainError("grid file: missing header");
    std::istringstream hs(line);
    auto& h = file.header;
    if (!(hs >> h.dim) || h.dim < 1 || h.dim > 3) throw DomainError("grid file: bad dimension");
    for (int j = 0; j < h.dim; ++j)
        if (!(hs >> h.counts[j]) || h.counts[j] < 1) throw DomainError("grid file: bad node count");
    for (int j = 0; j < h.dim; ++j)
        if (!(hs >> h.lower[j] >> h.upper[j])) throw DomainError("grid file: bad bounds");
    file.values.reserve(h.size());
    double v = 0.0;
    while (in >> v) file.values.push_back(v);
    if (file.values.size() != h.size()) throw DomainError("grid file: value count does not match header");
    return file;
}

std::vector<double> sample_conductivity(const FieldRealization& real, const GridHeader& grid) {
    if (grid.dim != real.dim()) throw DomainError("grid and field dimensions differ");
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = real.conductivity(grid.node(i));
    return values;
}

}  // namespace darcynas
