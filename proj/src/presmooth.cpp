#include "fpca/presmooth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpca/errors.hpp"
#include "fpca/parallel.hpp"
#include "local_fit.hpp"

namespace fpca {

namespace {

bool fit_node(const std::vector<Observation>& obs, double u, double h, double spread_floor,
              const KernelSpec& kernel, double singular_tol, double& out) {
    detail::LocalLineAccum a;
    const double inv_h = 1.0 / h;
    for (const auto& ob : obs) {
        const double w = kernel((ob.t - u) * inv_h);
        if (w == 0.0) continue;
        a.add(u - ob.t, w, ob.y);
    }
    if (a.s0 > 0.0 && a.s2 > 0.0) {
        const double mean_u = a.s1 / a.s0;
        const double spread_sq = a.s2 / a.s0 - mean_u * mean_u;
        if (spread_sq < spread_floor * spread_floor) return false;
    }
    return a.solve(singular_tol, out);
}

}  // namespace

CurveEstimate presmooth_subject(const std::vector<Observation>& obs, double h,
                                const Grid& grid, const KernelSpec& kernel,
                                const PresmoothOptions& options) {
    if (!(h > 0.0)) throw ValidationError("presmoothing bandwidth must be > 0");
    if (obs.size() < 2) throw TooSparseError("presmoothing needs at least 2 observations");

    double t_lo = obs[0].t, t_hi = obs[0].t;
    for (const auto& ob : obs) {
        t_lo = std::min(t_lo, ob.t);
        t_hi = std::max(t_hi, ob.t);
    }

    const int g = grid.size();
    const double grid_span = grid.b() - grid.a();
    Eigen::VectorXd values(g);
    for (int idx = 0; idx < g; ++idx) {
        double u = grid.node(idx);
        if (options.clamp_to_span) u = std::clamp(u, t_lo, t_hi);
        double hh = h;
        bool ok = false;
        for (int attempt = 0; attempt <= options.max_escalations; ++attempt) {
            const double floor =
                options.min_relative_spread * std::min(hh, grid_span);
            if (fit_node(obs, u, hh, floor, kernel, options.singular_tol, values[idx])) {
                ok = true;
                break;
            }
            hh *= options.escalation_factor;
        }
        if (!ok) {
            std::ostringstream os;
            os << "subject too sparse to presmooth at node " << idx << " (u = " << u << ")";
            throw TooSparseError(os.str());
        }
    }
    return CurveEstimate{grid, std::move(values), h};
}

SmoothedEnsemble presmooth_ensemble(const SparsePanel& panel, double h, const Grid& grid,
                                    const KernelSpec& kernel,
                                    const PresmoothOptions& options) {
    if (!(h > 0.0)) throw ValidationError("presmoothing bandwidth must be > 0");
    const int n = panel.n();
    const int g = grid.size();
    Eigen::MatrixXd all(n, g);
    std::vector<char> ok(n, 0);
    PresmoothOptions serial = options;
    serial.threads = 1;
    parallel_for(0, static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
        try {
            all.row(i) = presmooth_subject(panel.subjects[i], h, grid, kernel, serial)
                             .values.transpose();
            ok[i] = 1;
        } catch (const TooSparseError&) {
            ok[i] = 0;
        }
    });

    SmoothedEnsemble out{grid, {}, {}, h, {}, 0};
    for (int i = 0; i < n; ++i)
        if (ok[i]) out.kept.push_back(i);
    out.dropped = n - static_cast<int>(out.kept.size());
    out.curves.resize(out.kept.size(), g);
    for (std::size_t r = 0; r < out.kept.size(); ++r) out.curves.row(r) = all.row(out.kept[r]);
    if (!out.kept.empty())
        out.mean_curve = out.curves.colwise().mean().transpose();
    else
        out.mean_curve = Eigen::VectorXd::Zero(g);
    return out;
}

SurfaceEstimate curve_sample_covariance(const Eigen::MatrixXd& curves, const Grid& grid) {
    const long n = curves.rows();
    if (n < 2) throw ValidationError("sample covariance needs at least 2 curves");
    if (curves.cols() != grid.size())
        throw ValidationError("curves and grid have mismatched sizes");
    Eigen::MatrixXd centered = curves.rowwise() - curves.colwise().mean();
    Eigen::MatrixXd values = (centered.transpose() * centered) / static_cast<double>(n);
    const int g = grid.size();
    for (int i = 0; i < g; ++i)
        for (int k = i + 1; k < g; ++k) values(k, i) = values(i, k);
    return SurfaceEstimate{grid, std::move(values), 0.0, true};
}

SurfaceEstimate sample_covariance(const SmoothedEnsemble& ensemble) {
    SurfaceEstimate out = curve_sample_covariance(ensemble.curves, ensemble.grid);
    out.bandwidth = ensemble.bandwidth;
    return out;
}

}  // namespace fpca
