#include "fpca/kernel.hpp"

#include <cmath>

#include "fpca/errors.hpp"

namespace fpca {

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "epanechnikov") return KernelFamily::epanechnikov;
    if (name == "quartic") return KernelFamily::quartic;
    if (name == "triangular") return KernelFamily::triangular;
    throw ValidationError("unknown kernel family: " + name);
}

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::epanechnikov: return "epanechnikov";
        case KernelFamily::quartic: return "quartic";
        case KernelFamily::triangular: return "triangular";
    }
    return "?";
}

double KernelSpec::operator()(double u) const {
    const double a = std::abs(u);
    if (a >= 1.0) return 0.0;
    switch (family_) {
        case KernelFamily::epanechnikov: return 0.75 * (1.0 - u * u);
        case KernelFamily::quartic: {
            const double w = 1.0 - u * u;
            return 0.9375 * w * w;
        }
        case KernelFamily::triangular: return 1.0 - a;
    }
    return 0.0;
}

double KernelSpec::kappa() const {
    switch (family_) {
        case KernelFamily::epanechnikov: return 3.0 / 5.0;
        case KernelFamily::quartic: return 5.0 / 7.0;
        case KernelFamily::triangular: return 2.0 / 3.0;
    }
    return 0.0;
}

double KernelSpec::kappa2() const {
    switch (family_) {
        case KernelFamily::epanechnikov: return 1.0 / 5.0;
        case KernelFamily::quartic: return 1.0 / 7.0;
        case KernelFamily::triangular: return 1.0 / 6.0;
    }
    return 0.0;
}

}  // namespace fpca
