#include "darcynas/common.hpp"

#include <cmath>

namespace darcynas {

double relative_l2_error(std::span<const double> predicted, std::span<const double> exact) {
    if (predicted.empty()) throw DomainError("relative error needs at least one point");
    if (predicted.size() != exact.size()) throw DomainError("relative error: size mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const double d = predicted[i] - exact[i];
        num += d * d;
        den += exact[i] * exact[i];
    }
    if (den == 0.0) throw DomainError("relative error undefined for an all-zero reference");
    const double e = std::sqrt(num / den);
    if (!std::isfinite(e)) throw NumericError("relative error is not finite");
    return e;
}

}  // namespace darcynas
