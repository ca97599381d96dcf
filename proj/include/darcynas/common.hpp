#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace darcynas {

/// Raised for invalid arguments, mismatched dimensions and undefined quantities.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a computation produces a non-finite value.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a linear solver cannot meet its residual contract.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seedable, splittable 64-bit generator (Mersenne twister core).
///
/// `split(i)` yields a generator whose stream depends only on the parent
/// seed and `i`, never on how many numbers the parent has drawn.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    Rng split(std::uint64_t stream) const {
        return Rng(mix64(seed_ ^ mix64(stream + 0x5851f42d4c957f2dULL)));
    }

    /// Uniform on [0, 1).
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    /// Uniform on the open interval (0, 1).
    double uniform_open() {
        double u = 0.0;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    /// Uniform integer in the closed range [lo, hi].
    long uniform_int(long lo, long hi) {
        return std::uniform_int_distribution<long>(lo, hi)(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Relative l2 error ||pred - exact|| / ||exact||.
double relative_l2_error(std::span<const double> predicted, std::span<const double> exact);

}  // namespace darcynas
