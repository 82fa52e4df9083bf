#pragma once

#include "fpca/estimates.hpp"
#include "fpca/grid.hpp"
#include "fpca/kernel.hpp"
#include "fpca/panel.hpp"

namespace fpca {

// Singularity handling shared by all local-linear fits: when the local
// normal-equation denominator falls below singular_tol times the scale of its
// terms, the node's bandwidth is escalated by escalation_factor up to
// max_escalations times before giving up.
struct FitOptions {
    double singular_tol = 1e-10;
    double escalation_factor = 1.5;
    int max_escalations = 4;
    unsigned threads = 1;
};

struct CovFitOptions : FitOptions {
    // Includes the j == k pairs that carry the sigma^2 noise bias; exists only
    // so tests can demonstrate the offset that diagonal exclusion removes.
    bool include_diagonal_pairs = false;
};

// Local-linear mean fit: intercept of the kernel-weighted least-squares line
// at each grid node, pooling observations across subjects.
CurveEstimate local_linear_mean(const SparsePanel& panel, double h_mu, const Grid& grid,
                                const KernelSpec& kernel, const FitOptions& options = {});

// Local-plane fit of raw products Y_ij * Y_ik over within-subject pairs with
// j != k; estimates E{X(u) X(v)}. Output is exactly symmetric.
SurfaceEstimate local_linear_cov_surface(const SparsePanel& panel, double h_phi,
                                         const Grid& grid, const KernelSpec& kernel,
                                         const CovFitOptions& options = {});

// psi(u,v) = phi(u,v) - mu(u) mu(v)
SurfaceEstimate center_surface(const SurfaceEstimate& phi_hat, const CurveEstimate& mu_hat);

enum class BandwidthRegime { eigenfunction, eigenvalue };

BandwidthRegime regime_from_string(const std::string& name);
std::string to_string(BandwidthRegime regime);

struct BandwidthPair {
    double h_mu;
    double h_phi;
};

// Theory-driven undersmoothing schedules. The eigenfunction regime pairs
// h_phi ~ n^{-1/5} with h_mu ~ n^{-3/10}; the eigenvalue regime shrinks both
// to n^{-3/10} so squared bias is o(1/n).
BandwidthPair bandwidth_schedule(long n, BandwidthRegime regime, double c_mu = 1.0,
                                 double c_phi = 1.0);

}  // namespace fpca
