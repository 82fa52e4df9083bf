#pragma once

#include <string>

namespace fpca {

enum class KernelFamily { epanechnikov, quartic, triangular };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

// Symmetric probability kernel supported on [-1, 1].
class KernelSpec {
  public:
    explicit KernelSpec(KernelFamily family = KernelFamily::epanechnikov)
        : family_(family) {}

    KernelFamily family() const { return family_; }

    double operator()(double u) const;

    // kappa = int K^2, kappa2 = int u^2 K(u) du
    double kappa() const;
    double kappa2() const;

  private:
    KernelFamily family_;
};

struct KernelMoments {
    double kappa;
    double kappa2;
};

inline KernelMoments kernel_moments(const KernelSpec& kernel) {
    return {kernel.kappa(), kernel.kappa2()};
}

}  // namespace fpca
