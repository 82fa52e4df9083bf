#include "fpca/spectral.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "fpca/errors.hpp"

namespace fpca {

EigenSystem eigendecompose_surface(const SurfaceEstimate& surface, int j0) {
    const Grid& grid = surface.grid;
    const int g = grid.size();
    if (j0 < 1 || j0 > g) throw ValidationError("j0 must lie in [1, grid size]");

    const double scale = 1.0 + surface.values.cwiseAbs().maxCoeff();
    const double asym = (surface.values - surface.values.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        std::ostringstream os;
        os << "eigendecompose_surface needs a symmetric surface; max asymmetry " << asym;
        throw ValidationError(os.str());
    }

    const Eigen::VectorXd sqrt_w = grid.weights().cwiseSqrt();
    Eigen::MatrixXd m = surface.values;
    for (int i = 0; i < g; ++i)
        for (int k = 0; k < g; ++k) m(i, k) *= sqrt_w[i] * sqrt_w[k];
    m = 0.5 * (m + m.transpose());  // kill rounding asymmetry before the solve

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigensolver failed to converge (matrix norm " << m.norm() << ")";
        throw DataError(os.str());
    }

    EigenSystem out;
    out.j0 = j0;
    out.pairs.reserve(j0);
    // solver returns ascending eigenvalues; we want the largest first
    for (int r = 0; r < j0; ++r) {
        const int col = g - 1 - r;
        const double theta = solver.eigenvalues()[col];
        Eigen::VectorXd psi = solver.eigenvectors().col(col).cwiseQuotient(sqrt_w);
        psi /= grid.norm(psi);
        out.pairs.push_back(
            EigenPair{theta, align_sign(CurveEstimate{grid, std::move(psi), 0.0}), theta < 0.0});
    }

    double residual = 0.0;
    for (int a = 0; a < j0; ++a) {
        for (int b = a; b < j0; ++b) {
            const double ip = grid.inner(out.pairs[a].psi.values, out.pairs[b].psi.values);
            residual = std::max(residual, std::abs(ip - (a == b ? 1.0 : 0.0)));
        }
    }
    out.gram_residual = residual;
    return out;
}

CurveEstimate align_sign(CurveEstimate psi_hat, const CurveEstimate& reference) {
    if (!psi_hat.grid.same_as(reference.grid))
        throw ValidationError("align_sign: curves use different grids");
    const double ip = psi_hat.grid.inner(psi_hat.values, reference.values);
    if (ip < 0.0) psi_hat.values = -psi_hat.values;
    return psi_hat;
}

CurveEstimate align_sign(CurveEstimate psi_hat) {
    const int g = static_cast<int>(psi_hat.values.size());
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < g; ++i) {
        const double a = std::abs(psi_hat.values[i]);
        if (a > best) {  // ties keep the earliest node
            best = a;
            arg = i;
        }
    }
    if (psi_hat.values[arg] < 0.0) psi_hat.values = -psi_hat.values;
    return psi_hat;
}

double l2_distance(const CurveEstimate& f, const CurveEstimate& g) {
    if (!f.grid.same_as(g.grid)) throw ValidationError("l2_distance: curves use different grids");
    return f.grid.norm(f.values - g.values);
}

}  // namespace fpca
