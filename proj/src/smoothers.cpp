#include "fpca/smoothers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "fpca/errors.hpp"
#include "fpca/parallel.hpp"
#include "local_fit.hpp"

namespace fpca {

namespace {

using detail::LocalLineAccum;

// one gather pass for the mean fit at node u with bandwidth h;
// subjects visited in index order so sums are schedule-independent
LocalLineAccum gather_mean(const SparsePanel& panel, double u, double h,
                           const KernelSpec& kernel) {
    LocalLineAccum a;
    const double inv_h = 1.0 / h;
    for (const auto& subj : panel.subjects) {
        for (const auto& ob : subj) {
            const double w = kernel((ob.t - u) * inv_h);
            if (w == 0.0) continue;
            a.add(u - ob.t, w, ob.y);
        }
    }
    return a;
}

struct CovAccum {
    double s00 = 0, s10 = 0, s01 = 0, s20 = 0, s02 = 0, s11 = 0;
    double r00 = 0, r10 = 0, r01 = 0;

    void add(double du, double dv, double w, double z) {
        s00 += w;
        s10 += du * w;
        s01 += dv * w;
        s20 += du * du * w;
        s02 += dv * dv * w;
        s11 += du * dv * w;
        const double zw = z * w;
        r00 += zw;
        r10 += du * zw;
        r01 += dv * zw;
    }
};

bool cov_solve(const CovAccum& a, double singular_tol, double& out) {
    const double a1 = a.s20 * a.s02 - a.s11 * a.s11;
    const double a2 = a.s10 * a.s02 - a.s01 * a.s11;
    const double a3 = a.s01 * a.s20 - a.s10 * a.s11;
    const double b = a1 * a.s00 - a2 * a.s10 - a3 * a.s01;
    const double scale = std::abs(a1 * a.s00) + std::abs(a2 * a.s10) + std::abs(a3 * a.s01);
    if (scale == 0.0 || std::abs(b) <= singular_tol * scale) return false;
    out = (a1 * a.r00 - a2 * a.r10 - a3 * a.r01) / b;
    return true;
}

// gather pass for one covariance node pair (u, v) at bandwidth h
CovAccum gather_cov(const SparsePanel& panel, double u, double v, double h,
                    const KernelSpec& kernel, bool include_diagonal) {
    CovAccum a;
    const double inv_h = 1.0 / h;
    for (const auto& subj : panel.subjects) {
        const int m = static_cast<int>(subj.size());
        if (m < 2 && !include_diagonal) continue;
        for (int j = 0; j < m; ++j) {
            const double wu = kernel((subj[j].t - u) * inv_h);
            if (wu == 0.0) continue;
            const double du = u - subj[j].t;
            for (int k = 0; k < m; ++k) {
                if (j == k && !include_diagonal) continue;
                const double wv = kernel((subj[k].t - v) * inv_h);
                if (wv == 0.0) continue;
                a.add(du, v - subj[k].t, wu * wv, subj[j].y * subj[k].y);
            }
        }
    }
    return a;
}

// first/last grid index with |node - t| < h
std::pair<int, int> window_range(const Grid& grid, double t, double h) {
    const auto& nodes = grid.nodes();
    const double* begin = nodes.data();
    const double* end = begin + nodes.size();
    const double* lo = std::upper_bound(begin, end, t - h);
    const double* hi = std::lower_bound(begin, end, t + h);
    return {static_cast<int>(lo - begin), static_cast<int>(hi - begin) - 1};
}

}  // namespace

CurveEstimate local_linear_mean(const SparsePanel& panel, double h_mu, const Grid& grid,
                                const KernelSpec& kernel, const FitOptions& options) {
    if (!(h_mu > 0.0)) throw ValidationError("mean bandwidth must be > 0");
    if (panel.total_observations() == 0) throw ValidationError("panel has no observations");

    const int g = grid.size();
    Eigen::VectorXd values(g);
    std::vector<std::string> failures(g);

    parallel_for(0, static_cast<std::size_t>(g), options.threads, [&](std::size_t idx) {
        const double u = grid.node(static_cast<int>(idx));
        double h = h_mu;
        for (int attempt = 0; attempt <= options.max_escalations; ++attempt) {
            const LocalLineAccum a = gather_mean(panel, u, h, kernel);
            double fit;
            if (a.solve(options.singular_tol, fit)) {
                values[static_cast<int>(idx)] = fit;
                return;
            }
            h *= options.escalation_factor;
        }
        std::ostringstream os;
        os << "mean fit is singular at node " << idx << " (u = " << u
           << ") after bandwidth escalation; data too sparse";
        failures[idx] = os.str();
    });

    for (const auto& f : failures)
        if (!f.empty()) throw TooSparseError(f);
    return CurveEstimate{grid, std::move(values), h_mu};
}

SurfaceEstimate local_linear_cov_surface(const SparsePanel& panel, double h_phi,
                                         const Grid& grid, const KernelSpec& kernel,
                                         const CovFitOptions& options) {
    if (!(h_phi > 0.0)) throw ValidationError("covariance bandwidth must be > 0");
    if (!options.include_diagonal_pairs && panel.pair_count() < 1)
        throw ValidationError("covariance fitting needs at least one within-subject pair");

    const int g = grid.size();
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(g, g);
    // row-major list of (u, v) pairs with v >= u that stayed singular at h_phi
    std::vector<std::vector<int>> escalate(g);

    // Base pass: upper-triangle rows in parallel. Each row scatters ordered
    // within-subject pairs into kernel windows, visiting subjects in index
    // order; the mirror copy keeps phi(u,v) == phi(v,u) exact.
    parallel_for(0, static_cast<std::size_t>(g), options.threads, [&](std::size_t row) {
        const int ui = static_cast<int>(row);
        const double u = grid.node(ui);
        std::vector<CovAccum> acc(g);
        const double inv_h = 1.0 / h_phi;
        for (const auto& subj : panel.subjects) {
            const int m = static_cast<int>(subj.size());
            for (int j = 0; j < m; ++j) {
                const double wu = kernel((subj[j].t - u) * inv_h);
                if (wu == 0.0) continue;
                const double du = u - subj[j].t;
                for (int k = 0; k < m; ++k) {
                    if (j == k && !options.include_diagonal_pairs) continue;
                    auto [lo, hi] = window_range(grid, subj[k].t, h_phi);
                    lo = std::max(lo, ui);
                    if (lo > hi) continue;
                    const double z = subj[j].y * subj[k].y;
                    for (int vi = lo; vi <= hi; ++vi) {
                        const double v = grid.node(vi);
                        const double wv = kernel((subj[k].t - v) * inv_h);
                        if (wv == 0.0) continue;
                        acc[vi].add(du, v - subj[k].t, wu * wv, z);
                    }
                }
            }
        }
        for (int vi = ui; vi < g; ++vi) {
            double fit;
            if (cov_solve(acc[vi], options.singular_tol, fit))
                values(ui, vi) = fit;
            else
                escalate[ui].push_back(vi);
        }
    });

    // Escalation pass: re-gather flagged node pairs at widened bandwidths.
    std::vector<std::pair<int, int>> flagged;
    for (int ui = 0; ui < g; ++ui)
        for (int vi : escalate[ui]) flagged.emplace_back(ui, vi);
    std::vector<std::string> failures(flagged.size());
    parallel_for(0, flagged.size(), options.threads, [&](std::size_t idx) {
        const auto [ui, vi] = flagged[idx];
        const double u = grid.node(ui), v = grid.node(vi);
        double h = h_phi;
        for (int attempt = 0; attempt < options.max_escalations; ++attempt) {
            h *= options.escalation_factor;
            const CovAccum a =
                gather_cov(panel, u, v, h, kernel, options.include_diagonal_pairs);
            double fit;
            if (cov_solve(a, options.singular_tol, fit)) {
                values(ui, vi) = fit;
                return;
            }
        }
        std::ostringstream os;
        os << "covariance fit is singular at node pair (" << ui << ", " << vi << ") (u = " << u
           << ", v = " << v << ") after bandwidth escalation; data too sparse";
        failures[idx] = os.str();
    });
    for (const auto& f : failures)
        if (!f.empty()) throw TooSparseError(f);

    for (int ui = 0; ui < g; ++ui)
        for (int vi = ui + 1; vi < g; ++vi) values(vi, ui) = values(ui, vi);

    return SurfaceEstimate{grid, std::move(values), h_phi, true};
}

SurfaceEstimate center_surface(const SurfaceEstimate& phi_hat, const CurveEstimate& mu_hat) {
    if (!phi_hat.grid.same_as(mu_hat.grid))
        throw ValidationError("center_surface: surface and mean use different grids");
    SurfaceEstimate out = phi_hat;
    out.values.noalias() -= mu_hat.values * mu_hat.values.transpose();
    return out;
}

BandwidthRegime regime_from_string(const std::string& name) {
    if (name == "eigenfunction") return BandwidthRegime::eigenfunction;
    if (name == "eigenvalue") return BandwidthRegime::eigenvalue;
    throw ValidationError("unknown bandwidth regime: " + name);
}

std::string to_string(BandwidthRegime regime) {
    return regime == BandwidthRegime::eigenfunction ? "eigenfunction" : "eigenvalue";
}

BandwidthPair bandwidth_schedule(long n, BandwidthRegime regime, double c_mu, double c_phi) {
    if (n < 2) throw ValidationError("bandwidth schedule needs n >= 2");
    if (!(c_mu > 0.0) || !(c_phi > 0.0))
        throw ValidationError("bandwidth constants must be > 0");
    const double nn = static_cast<double>(n);
    switch (regime) {
        case BandwidthRegime::eigenfunction:
            return {c_mu * std::pow(nn, -0.3), c_phi * std::pow(nn, -0.2)};
        case BandwidthRegime::eigenvalue:
            return {c_mu * std::pow(nn, -0.3), c_phi * std::pow(nn, -0.3)};
    }
    return {0, 0};
}

}  // namespace fpca
