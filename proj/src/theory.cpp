#include "fpca/theory.hpp"

#include <cmath>
#include <sstream>

#include "fpca/errors.hpp"
#include "fpca/parallel.hpp"

namespace fpca {

namespace {

Eigen::MatrixXd tabulate_basis(const TrajectoryModel& model, const Grid& grid) {
    Eigen::MatrixXd tab(grid.size(), model.rank());
    for (int j = 0; j < model.rank(); ++j)
        for (int g = 0; g < grid.size(); ++g)
            tab(g, j) = model.components()[j].psi(grid.node(g));
    return tab;
}

void check_component_index(const TrajectoryModel& model, int j) {
    if (j < 1 || j > model.rank())
        throw ValidationError("component index j must lie in [1, rank]");
}

}  // namespace

SurfaceEstimate chi_surface(const TrajectoryModel& model, const KernelSpec& kernel,
                            const Grid& grid) {
    const int g = grid.size();
    const int r = model.rank();
    const double half_kappa2 = 0.5 * kernel.kappa2();

    Eigen::MatrixXd psi(g, r), d2psi(g, r);
    for (int j = 0; j < r; ++j) {
        const auto& basis = model.components()[j].psi;
        for (int i = 0; i < g; ++i) {
            psi(i, j) = basis(grid.node(i));
            d2psi(i, j) = basis.second_derivative(grid.node(i));
        }
    }
    Eigen::VectorXd mu(g), d2mu(g);
    for (int i = 0; i < g; ++i) {
        mu[i] = model.mean_value(grid.node(i));
        d2mu[i] = model.mean_second_derivative(grid.node(i));
    }

    Eigen::MatrixXd values(g, g);
    for (int i = 0; i < g; ++i) {
        for (int k = i; k < g; ++k) {
            double s = d2mu[i] * mu[k] + mu[i] * d2mu[k];
            for (int j = 0; j < r; ++j) {
                const double theta = model.components()[j].theta;
                s += theta * (d2psi(i, j) * psi(k, j) + psi(i, j) * d2psi(k, j));
            }
            values(i, k) = half_kappa2 * s;
            values(k, i) = values(i, k);
        }
    }
    return SurfaceEstimate{grid, std::move(values), 0.0, true};
}

double constant_C1(const TrajectoryModel& model, const KernelSpec& kernel, int j,
                   C1Variant variant, int quad_points) {
    check_component_index(model, j);
    const Grid grid = Grid::uniform(quad_points, model.domain().a, model.domain().b);
    const int g = grid.size();
    const int r = model.rank();
    const double sigma2 = model.noise_sd() * model.noise_sd();

    const Eigen::MatrixXd tab = tabulate_basis(model, grid);
    Eigen::VectorXd theta(r), gamma(r);
    for (int l = 0; l < r; ++l) {
        theta[l] = model.components()[l].theta;
        gamma[l] = model.fourth_cumulant(l);
    }
    Eigen::VectorXd f_inv(g), psi_j2(g), cov_diag(g);
    for (int i = 0; i < g; ++i) {
        f_inv[i] = 1.0 / model.density()(grid.node(i));
        psi_j2[i] = tab(i, j - 1) * tab(i, j - 1);
        double c = 0.0;
        for (int l = 0; l < r; ++l) c += theta[l] * tab(i, l) * tab(i, l);
        cov_diag[i] = c;
    }

    double total = 0.0;
    for (int i1 = 0; i1 < g; ++i1) {
        const double w1 = grid.weights()[i1];
        double inner = 0.0;
        for (int i2 = 0; i2 < g; ++i2) {
            double cov12 = 0.0, excess = 0.0;
            for (int l = 0; l < r; ++l) {
                const double p1 = tab(i1, l), p2 = tab(i2, l);
                cov12 += theta[l] * p1 * p2;
                excess += gamma[l] * p1 * p1 * p2 * p2;
            }
            const double diag_prod = cov_diag[i1] * cov_diag[i2];
            double core;
            if (variant == C1Variant::proof_form) {
                // beta(t1,t2,t1,t2) = E{x(t1)^2 x(t2)^2} - psi(t1,t2)^2
                core = (diag_prod + cov12 * cov12 + excess + sigma2) * psi_j2[i2];
            } else {
                core = (diag_prod + 2.0 * cov12 * cov12 + excess + sigma2) * psi_j2[i1];
            }
            inner += grid.weights()[i2] * core * f_inv[i2];
        }
        total += w1 * inner * f_inv[i1];
    }
    return kernel.kappa() * total;
}

std::vector<double> c2_terms(const TrajectoryModel& model, const SurfaceEstimate& chi, int j) {
    check_component_index(model, j);
    const Grid& grid = chi.grid;
    const int r = model.rank();
    const double theta_j = model.components()[j - 1].theta;
    for (int k = 0; k < r; ++k) {
        if (k == j - 1) continue;
        if (model.components()[k].theta == theta_j)
            throw ValidationError("C2 is undefined with tied eigenvalues");
    }

    const Eigen::MatrixXd tab = tabulate_basis(model, grid);
    // g_j(v) = int chi(u, v) psi_j(u) du
    Eigen::VectorXd weighted_psi_j = grid.weights().cwiseProduct(tab.col(j - 1));
    Eigen::VectorXd g_j = chi.values.transpose() * weighted_psi_j;

    std::vector<double> terms(r + 1, 0.0);
    double proj_sq_sum = 0.0;
    for (int k = 0; k < r; ++k) {
        const double proj = grid.inner(g_j, tab.col(k));
        proj_sq_sum += proj * proj;
        if (k == j - 1) continue;
        const double gap = theta_j - model.components()[k].theta;
        terms[k] = (proj / gap) * (proj / gap);
    }
    // all remaining eigenvalues are zero; Parseval turns the infinite tail
    // into the complement of the projections above
    const double norm_sq = grid.inner(g_j, g_j);
    const double complement = std::max(0.0, norm_sq - proj_sq_sum);
    if (theta_j > 0.0) {
        terms[r] = complement / (theta_j * theta_j);
    } else if (complement > 1e-12 * (1.0 + norm_sq)) {
        throw ValidationError("C2 is undefined: theta_j = 0 with nonzero bias projection");
    }
    return terms;
}

double c2_from_chi(const TrajectoryModel& model, const SurfaceEstimate& chi, int j) {
    double s = 0.0;
    for (double t : c2_terms(model, chi, j)) s += t;
    return s;
}

double constant_C2(const TrajectoryModel& model, const KernelSpec& kernel, int j,
                   int quad_points) {
    const Grid grid = Grid::uniform(quad_points, model.domain().a, model.domain().b);
    return c2_from_chi(model, chi_surface(model, kernel, grid), j);
}

double constant_c_rs(const TrajectoryModel& model, int r, int s, int quad_points) {
    check_component_index(model, r);
    check_component_index(model, s);
    const Grid grid = Grid::uniform(quad_points, model.domain().a, model.domain().b);
    const auto& psi_r = model.components()[r - 1].psi;
    const auto& psi_s = model.components()[s - 1].psi;
    double total = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        const double t = grid.node(i);
        total += grid.weights()[i] * psi_r(t) * psi_s(t) / model.density()(t);
    }
    return total;
}

SigmaMatrix sigma_matrix(const TrajectoryModel& model, const DesignSpec& design, long n,
                         int j0, const SigmaOptions& options) {
    if (j0 < 1 || j0 > model.rank())
        throw ValidationError("sigma_matrix needs 1 <= j0 <= rank");
    if (design.kind != DesignSpec::Kind::random)
        throw ValidationError("sigma_matrix needs a random design with a known density");
    design.validate();
    if (n < 1) throw ValidationError("sigma_matrix needs n >= 1");

    SigmaMatrix out;
    out.c.resize(j0, j0);
    for (int r = 0; r < j0; ++r)
        for (int s = 0; s < j0; ++s)
            out.c(r, s) = constant_c_rs(model, r + 1, s + 1, options.quad_points);

    // nu(r,s): Monte Carlo expectation of the pair-of-pairs sum over one
    // subject's design, times n. Chunked so worker count never changes sums.
    const long chunk_size = 16384;
    const long chunks = (options.mc_draws + chunk_size - 1) / chunk_size;
    std::vector<Eigen::MatrixXd> partial(chunks, Eigen::MatrixXd::Zero(j0, j0));
    std::vector<long> counts(chunks, 0);

    const int rank = model.rank();
    Eigen::VectorXd theta(rank), gamma(rank);
    for (int l = 0; l < rank; ++l) {
        theta[l] = model.components()[l].theta;
        gamma[l] = model.fourth_cumulant(l);
    }

    parallel_for(0, static_cast<std::size_t>(chunks), options.threads, [&](std::size_t c) {
        Rng rng(derive_stream(options.seed, static_cast<std::uint64_t>(c)));
        const long draws =
            std::min(chunk_size, options.mc_draws - static_cast<long>(c) * chunk_size);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(j0, j0);
        std::vector<double> times, f_inv;
        std::vector<std::pair<int, int>> pairs;
        Eigen::MatrixXd tab, cov;
        for (long d = 0; d < draws; ++d) {
            const int m = design.m_rule.draw(rng, n);
            times.resize(m);
            f_inv.resize(m);
            for (int i = 0; i < m; ++i) {
                times[i] = model.density().sample(rng);
                f_inv[i] = 1.0 / model.density()(times[i]);
            }
            if (m < 2) continue;
            tab.resize(m, rank);
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < rank; ++l) tab(i, l) = model.components()[l].psi(times[i]);
            cov.noalias() = tab * theta.asDiagonal() * tab.transpose();
            pairs.clear();
            for (int a = 0; a < m; ++a)
                for (int b = a + 1; b < m; ++b) pairs.emplace_back(a, b);

            auto add_combo = [&](int p1, int p2, double weight) {
                const auto [a1, b1] = pairs[p1];
                const auto [a2, b2] = pairs[p2];
                // beta via the independent-score pairing expansion
                double beta = cov(a1, a2) * cov(b1, b2) + cov(a1, b2) * cov(b1, a2);
                for (int l = 0; l < rank; ++l)
                    beta += gamma[l] * tab(a1, l) * tab(b1, l) * tab(a2, l) * tab(b2, l);
                const double base =
                    weight * beta * f_inv[a1] * f_inv[b1] * f_inv[a2] * f_inv[b2];
                for (int r = 0; r < j0; ++r) {
                    const double gr = tab(a1, r) * tab(b1, r);
                    for (int s = 0; s < j0; ++s)
                        acc(r, s) += base * gr * tab(a2, s) * tab(b2, s);
                }
            };

            const long p = static_cast<long>(pairs.size());
            const long combos = p * p;
            if (options.max_combos_per_draw > 0 && combos > options.max_combos_per_draw) {
                const long samples = options.max_combos_per_draw;
                const double weight = static_cast<double>(combos) / samples;
                for (long s = 0; s < samples; ++s) {
                    const int p1 = rng.uniform_int(0, static_cast<int>(p) - 1);
                    const int p2 = rng.uniform_int(0, static_cast<int>(p) - 1);
                    add_combo(p1, p2, weight);
                }
            } else {
                for (long p1 = 0; p1 < p; ++p1)
                    for (long p2 = 0; p2 < p; ++p2)
                        add_combo(static_cast<int>(p1), static_cast<int>(p2), 1.0);
            }
        }
        partial[c] = acc;
        counts[c] = draws;
    });

    Eigen::MatrixXd nu_mean = Eigen::MatrixXd::Zero(j0, j0);
    long total_draws = 0;
    for (long c = 0; c < chunks; ++c) {
        nu_mean += partial[c];
        total_draws += counts[c];
    }
    nu_mean /= static_cast<double>(total_draws);
    out.nu = static_cast<double>(n) * nu_mean;

    out.pair_count = static_cast<double>(n) * design.m_rule.expected_pairs(n);
    if (out.pair_count <= 0.0)
        throw ValidationError("design yields no within-subject pairs");
    const double sigma2 = model.noise_sd() * model.noise_sd();
    out.sigma.resize(j0, j0);
    for (int r = 0; r < j0; ++r)
        for (int s = 0; s < j0; ++s)
            out.sigma(r, s) = (out.nu(r, s) + out.pair_count * sigma2 * out.c(r, s) *
                                                  out.c(r, s)) /
                              (out.pair_count * out.pair_count);
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose().eval());
    return out;
}

double full_curve_limit_d(const TrajectoryModel& model, int r, int s, int quad_points) {
    check_component_index(model, r);
    check_component_index(model, s);
    const Grid grid = Grid::uniform(quad_points, model.domain().a, model.domain().b);
    const Eigen::MatrixXd tab = tabulate_basis(model, grid);
    const int rank = model.rank();

    // beta pairings reduce to quadrature inner products:
    //   G = int int psi(u,w) psi_r(u) psi_s(w); the two cross pairings each
    //   contribute G^2, the score fourth cumulants add the diagonal term.
    double g_rs = 0.0;
    for (int l = 0; l < rank; ++l) {
        const double ip_r = grid.inner(tab.col(l), tab.col(r - 1));
        const double ip_s = grid.inner(tab.col(l), tab.col(s - 1));
        g_rs += model.components()[l].theta * ip_r * ip_s;
    }
    double d = 2.0 * g_rs * g_rs;
    for (int l = 0; l < rank; ++l) {
        const double ip_r = grid.inner(tab.col(l), tab.col(r - 1));
        const double ip_s = grid.inner(tab.col(l), tab.col(s - 1));
        d += model.fourth_cumulant(l) * ip_r * ip_r * ip_s * ip_s;
    }
    return d;
}

AsymptoticConstants asymptotic_constants(const TrajectoryModel& model, const DesignSpec& design,
                                         long n, int j0, const KernelSpec& kernel,
                                         const SigmaOptions& options, int chi_grid_size) {
    AsymptoticConstants out{
        {},
        {},
        {},
        chi_surface(model, kernel,
                    Grid::uniform(chi_grid_size, model.domain().a, model.domain().b)),
        {},
        {},
        0.0,
        j0,
        {},
        {}};
    for (int j = 1; j <= j0; ++j) {
        out.c1_proof.push_back(
            constant_C1(model, kernel, j, C1Variant::proof_form, options.quad_points));
        out.c1_display.push_back(
            constant_C1(model, kernel, j, C1Variant::display_form, options.quad_points));
        out.c2.push_back(constant_C2(model, kernel, j, options.quad_points));
    }
    SigmaMatrix sm = sigma_matrix(model, design, n, j0, options);
    out.sigma = sm.sigma;
    out.pair_count = sm.pair_count;
    out.d.resize(j0, j0);
    for (int r = 0; r < j0; ++r)
        for (int s = 0; s < j0; ++s)
            out.d(r, s) = full_curve_limit_d(model, r + 1, s + 1, options.quad_points);

    std::ostringstream model_tag;
    model_tag << "rank" << model.rank() << ":" << to_string(model.score_law())
              << ":sigma=" << model.noise_sd() << ":f=" << model.density().describe();
    out.model_tag = model_tag.str();
    std::ostringstream design_tag;
    design_tag << (design.kind == DesignSpec::Kind::random ? "random" : "regular") << ":n="
               << n;
    out.design_tag = design_tag.str();
    return out;
}

}  // namespace fpca
