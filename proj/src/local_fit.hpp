#pragma once

#include <cmath>

namespace fpca::detail {

// Accumulators for a kernel-weighted local line fit at one node.
struct LocalLineAccum {
    double s0 = 0, s1 = 0, s2 = 0, r0 = 0, r1 = 0;

    void add(double du, double w, double y) {
        s0 += w;
        s1 += du * w;
        s2 += du * du * w;
        r0 += y * w;
        r1 += du * y * w;
    }

    // Intercept of the weighted least-squares line. When every windowed point
    // sits exactly at the node (s2 == 0) the intercept is still identified as
    // the weighted mean; a window concentrated at any other single time stays
    // singular, since the line's value off its support is undetermined.
    bool solve(double singular_tol, double& out) const {
        if (s0 == 0.0) return false;
        if (s2 == 0.0) {
            out = r0 / s0;
            return true;
        }
        const double denom = s0 * s2 - s1 * s1;
        const double scale = std::abs(s0 * s2) + s1 * s1;
        if (std::abs(denom) <= singular_tol * scale) return false;
        out = (s2 * r0 - s1 * r1) / denom;
        return true;
    }
};

}  // namespace fpca::detail
