#pragma once

#include <Eigen/Core>
#include <vector>

#include "fpca/estimates.hpp"
#include "fpca/kernel.hpp"
#include "fpca/panel.hpp"
#include "fpca/smoothers.hpp"

namespace fpca {

// Curves reconstructed subject-by-subject on a common grid.
struct SmoothedEnsemble {
    Grid grid;
    Eigen::MatrixXd curves;      // one row per kept subject
    Eigen::VectorXd mean_curve;  // nodewise average of kept curves
    double bandwidth;
    std::vector<int> kept;  // panel indices of kept subjects
    int dropped;            // subjects excluded as too sparse
};

struct PresmoothOptions : FitOptions {
    // Evaluate the fit at clamp(u, min t, max t) instead of extrapolating the
    // local line beyond the subject's observed span. Noisy two-point windows
    // otherwise send distant nodes arbitrarily far off.
    bool clamp_to_span = false;
    // Escalate windows whose kernel-weighted time spread falls below this
    // fraction of min(h, grid span). A window of near-coincident points is
    // algebraically fine but amplifies noise without bound.
    double min_relative_spread = 0.05;
};

// Local-linear fit of a single subject's observations on the grid.
CurveEstimate presmooth_subject(const std::vector<Observation>& obs, double h,
                                const Grid& grid, const KernelSpec& kernel,
                                const PresmoothOptions& options = {});

// Smooths every subject, dropping those that stay singular after escalation.
SmoothedEnsemble presmooth_ensemble(const SparsePanel& panel, double h, const Grid& grid,
                                    const KernelSpec& kernel,
                                    const PresmoothOptions& options = {});

// psi-check: (1/n) sum_i (Xhat_i - Xbar)(Xhat_i - Xbar), positive semidefinite
SurfaceEstimate sample_covariance(const SmoothedEnsemble& ensemble);

// Same estimator applied to directly tabulated curves (one row per subject);
// with the true curves this is the infeasible full-curve benchmark.
SurfaceEstimate curve_sample_covariance(const Eigen::MatrixXd& curves, const Grid& grid);

inline SurfaceEstimate full_curve_oracle(const Eigen::MatrixXd& true_curves, const Grid& grid) {
    return curve_sample_covariance(true_curves, grid);
}

}  // namespace fpca
