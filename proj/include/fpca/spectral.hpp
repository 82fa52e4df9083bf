#pragma once

#include <vector>

#include "fpca/estimates.hpp"

namespace fpca {

struct EigenPair {
    double theta;
    CurveEstimate psi;
    bool negative;  // negative eigenvalues are reported, never clipped
};

struct EigenSystem {
    std::vector<EigenPair> pairs;  // ordered by eigenvalue, descending
    int j0;
    double gram_residual;  // max quadrature orthonormality defect

    bool has_negative() const {
        for (const auto& p : pairs)
            if (p.negative) return true;
        return false;
    }
};

// Nystrom eigendecomposition of a tabulated symmetric surface: with
// W = diag(quadrature weights), eigendecompose W^{1/2} C W^{1/2}, map
// eigenvectors back through W^{-1/2}, renormalize in the quadrature norm,
// and keep the top j0 pairs by eigenvalue.
EigenSystem eigendecompose_surface(const SurfaceEstimate& surface, int j0);

// flip sign iff <psi_hat, reference> < 0 (minimizes L2 distance to reference)
CurveEstimate align_sign(CurveEstimate psi_hat, const CurveEstimate& reference);

// no-reference convention: entry of largest magnitude made positive
CurveEstimate align_sign(CurveEstimate psi_hat);

// quadrature-weighted L2 norm of f - g
double l2_distance(const CurveEstimate& f, const CurveEstimate& g);

}  // namespace fpca
