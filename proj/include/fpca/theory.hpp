#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fpca/estimates.hpp"
#include "fpca/kernel.hpp"
#include "fpca/model.hpp"
#include "fpca/simulate.hpp"

namespace fpca {

// Bias kernel chi(u,v) = (kappa2/2) {psi_20 + psi_02 + mu''(u) mu(v) + mu(u) mu''(v)}.
SurfaceEstimate chi_surface(const TrajectoryModel& model, const KernelSpec& kernel,
                            const Grid& grid);

// Two forms of the C1 integrand are in circulation, differing by a
// psi(t1,t2)^2 term; the proof_form is what the variance calculation yields
// and is the primary one. Both stay available for comparison.
enum class C1Variant {
    proof_form,    // kappa int {beta(t1,t2,t1,t2) + sigma^2} psi_j(t2)^2 / (f f)
    display_form,  // kappa int {E x(t1)^2 x(t2)^2 + sigma^2} psi_j(t1)^2 / (f f)
};

// j is 1-based; quadrature on a quad_points^2 tensor grid
double constant_C1(const TrajectoryModel& model, const KernelSpec& kernel, int j,
                   C1Variant variant = C1Variant::proof_form, int quad_points = 1001);

// Per-k spacing-weighted bias terms for C2(j) given a tabulated chi: entries
// 0..r-1 are the model components (entry j-1 is zero), the last entry is the
// zero-eigenvalue complement handled through the projection identity.
std::vector<double> c2_terms(const TrajectoryModel& model, const SurfaceEstimate& chi, int j);

double c2_from_chi(const TrajectoryModel& model, const SurfaceEstimate& chi, int j);

double constant_C2(const TrajectoryModel& model, const KernelSpec& kernel, int j,
                   int quad_points = 1001);

// c(r,s) = int f^{-1} psi_r psi_s (1-based indices)
double constant_c_rs(const TrajectoryModel& model, int r, int s, int quad_points = 1001);

struct SigmaOptions {
    long mc_draws = 1000000;  // design draws for the nu(r,s) expectation
    std::uint64_t seed = 1;
    unsigned threads = 1;
    int quad_points = 1001;
    // When a draw has more pair-of-pair combinations than this, sample that
    // many uniformly instead of enumerating (0 = always enumerate). Keeps the
    // estimator unbiased while bounding per-draw cost for dense designs.
    long max_combos_per_draw = 0;
};

struct SigmaMatrix {
    Eigen::MatrixXd sigma;  // j0 x j0
    Eigen::MatrixXd nu;     // the four-index design expectation
    Eigen::MatrixXd c;      // c(r,s)
    double pair_count;      // design-expected N
};

// (Sigma)_{rs} = N^{-2} {nu(r,s) + N sigma^2 c(r,s)^2}; nu by seeded Monte
// Carlo over simulated subject designs, c(r,s) by quadrature.
SigmaMatrix sigma_matrix(const TrajectoryModel& model, const DesignSpec& design, long n,
                         int j0, const SigmaOptions& options = {});

// d(r,s) = int beta(u,v,w,z) psi_r(u) psi_r(v) psi_s(w) psi_s(z), evaluated
// through the independent-score expansion of beta with quadrature inner
// products (1-based indices).
double full_curve_limit_d(const TrajectoryModel& model, int r, int s, int quad_points = 1001);

struct AsymptoticConstants {
    std::vector<double> c1_proof;
    std::vector<double> c1_display;
    std::vector<double> c2;
    SurfaceEstimate chi;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd d;
    double pair_count;
    int j0;
    std::string model_tag;
    std::string design_tag;
};

AsymptoticConstants asymptotic_constants(const TrajectoryModel& model, const DesignSpec& design,
                                         long n, int j0, const KernelSpec& kernel,
                                         const SigmaOptions& options = {},
                                         int chi_grid_size = 101);

}  // namespace fpca
