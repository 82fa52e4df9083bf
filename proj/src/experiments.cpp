#include "fpca/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fpca/errors.hpp"
#include "fpca/panel_io.hpp"
#include "fpca/parallel.hpp"
#include "fpca/presmooth.hpp"

namespace fpca {

using nlohmann::json;

// ---- config ---------------------------------------------------------------

namespace {

Interval interval_from_json(const json& j) {
    Interval iv;
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        iv.a = d.at(0).get<double>();
        iv.b = d.at(1).get<double>();
    }
    return iv;
}

BasisFunction basis_from_json(const json& j, Interval domain) {
    const std::string kind = j.at("basis").get<std::string>();
    const int k = j.value("k", 1);
    if (kind == "sin") return BasisFunction::fourier_sin(k, domain);
    if (kind == "cos") return BasisFunction::fourier_cos(k, domain);
    throw ValidationError("unknown basis kind: " + kind);
}

}  // namespace

namespace {
TrajectoryModel model_from_json_impl(const json& j);
DesignSpec design_from_json_impl(const json& j);
}  // namespace

TrajectoryModel model_from_json(const json& j) {
    try {
        return model_from_json_impl(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad model config: ") + e.what());
    }
}

namespace {
TrajectoryModel model_from_json_impl(const json& j) {
    const Interval domain = interval_from_json(j);

    MeanFunction mean;
    if (j.contains("mean")) {
        const auto& m = j.at("mean");
        mean.constant = m.value("constant", 0.0);
        mean.linear = m.value("linear", 0.0);
        if (m.contains("sin")) mean.sin_coeffs = m.at("sin").get<std::vector<double>>();
        if (m.contains("cos")) mean.cos_coeffs = m.at("cos").get<std::vector<double>>();
    }

    std::vector<Component> components;
    if (j.contains("components")) {
        for (const auto& c : j.at("components"))
            components.push_back(
                Component{c.at("theta").get<double>(), basis_from_json(c, domain)});
    }

    const ScoreLaw law = score_law_from_string(j.value("score_law", std::string("gaussian")));
    const double noise_sd = j.value("noise_sd", 0.0);

    DesignDensity density = DesignDensity::uniform(domain);
    if (j.contains("design_density")) {
        const auto& d = j.at("design_density");
        const std::string kind = d.value("kind", std::string("uniform"));
        if (kind == "uniform") {
            density = DesignDensity::uniform(domain);
        } else if (kind == "beta_mix") {
            density = DesignDensity::beta_mix(d.value("weight", 0.5), domain);
        } else {
            throw ValidationError("unknown design density kind: " + kind);
        }
    }

    return TrajectoryModel(domain, mean, std::move(components), law, noise_sd, density);
}
}  // namespace

DesignSpec design_from_json(const json& j) {
    try {
        return design_from_json_impl(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad design config: ") + e.what());
    }
}

namespace {
DesignSpec design_from_json_impl(const json& j) {
    DesignSpec spec;
    const std::string kind = j.value("kind", std::string("random"));
    if (kind == "random") {
        spec.kind = DesignSpec::Kind::random;
    } else if (kind == "regular") {
        spec.kind = DesignSpec::Kind::regular;
    } else {
        throw ValidationError("unknown design kind: " + kind);
    }
    if (j.contains("m_rule")) {
        const auto& m = j.at("m_rule");
        const std::string mk = m.value("kind", std::string("fixed"));
        if (mk == "fixed") {
            spec.m_rule.kind = MRule::Kind::fixed;
            spec.m_rule.m = m.at("m").get<int>();
        } else if (mk == "uniform_range") {
            spec.m_rule.kind = MRule::Kind::uniform_range;
            spec.m_rule.m_lo = m.at("m_lo").get<int>();
            spec.m_rule.m_hi = m.at("m_hi").get<int>();
        } else if (mk == "power") {
            spec.m_rule.kind = MRule::Kind::power;
            spec.m_rule.coeff = m.value("coeff", 1.0);
            spec.m_rule.expo = m.at("exponent").get<double>();
        } else {
            throw ValidationError("unknown m_rule kind: " + mk);
        }
    }
    spec.validate();
    return spec;
}
}  // namespace

StudyConfig StudyConfig::from_json(const json& j) {
    try {
        return from_json_impl(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config: ") + e.what());
    }
}

StudyConfig StudyConfig::from_json_impl(const json& j) {
    StudyConfig c;
    c.raw = j;
    c.raw.erase("threads");
    c.raw.erase("out_dir");

    c.model_json = j.at("model");
    c.build_model().validate();
    if (j.contains("design")) c.design = design_from_json(j.at("design"));
    if (j.contains("n_ladder")) c.n_ladder = j.at("n_ladder").get<std::vector<long>>();
    c.replicates = j.value("replicates", c.replicates);
    c.seed = j.value("seed", c.seed);
    c.c_mu = j.value("c_mu", c.c_mu);
    c.c_phi = j.value("c_phi", c.c_phi);
    if (j.contains("regime")) c.regime = regime_from_string(j.at("regime").get<std::string>());
    c.grid_size = j.value("grid_size", c.grid_size);
    c.j0 = j.value("j0", c.j0);
    if (j.contains("kernel"))
        c.kernel = kernel_family_from_string(j.at("kernel").get<std::string>());
    c.threads = j.value("threads", 1u);
    c.out_dir = j.value("out_dir", std::string());

    c.psi_slope_target = j.value("psi_slope_target", c.psi_slope_target);
    c.theta_slope_target = j.value("theta_slope_target", c.theta_slope_target);
    c.slope_tolerance = j.value("slope_tolerance", c.slope_tolerance);
    c.var_ratio_lo = j.value("var_ratio_lo", c.var_ratio_lo);
    c.var_ratio_hi = j.value("var_ratio_hi", c.var_ratio_hi);
    c.decomposition_lo = j.value("decomposition_lo", c.decomposition_lo);
    c.decomposition_hi = j.value("decomposition_hi", c.decomposition_hi);
    c.failure_budget = j.value("failure_budget", c.failure_budget);
    c.oracle_mc_draws = j.value("oracle_mc_draws", c.oracle_mc_draws);

    c.demo_m = j.value("demo_m", c.demo_m);
    c.alias_theta = j.value("alias_theta", c.alias_theta);
    c.alias_frequency = j.value("alias_frequency", c.alias_frequency);
    c.meta_replicates = j.value("meta_replicates", c.meta_replicates);
    c.test_alpha = j.value("test_alpha", c.test_alpha);
    c.separation_fraction = j.value("separation_fraction", c.separation_fraction);
    c.demo_random_c_phi = j.value("demo_random_c_phi", c.demo_random_c_phi);

    if (j.contains("m_exponents"))
        c.m_exponents = j.at("m_exponents").get<std::vector<double>>();
    c.h_coeff = j.value("h_coeff", c.h_coeff);
    c.h_exponent = j.value("h_exponent", c.h_exponent);
    c.transition_ratio_threshold =
        j.value("transition_ratio_threshold", c.transition_ratio_threshold);
    c.presmooth_clamp = j.value("presmooth_clamp", c.presmooth_clamp);
    return c;
}

StudyConfig StudyConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

// ---- statistics helpers ------------------------------------------------------

SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t k = x.size();
    if (k != y.size() || k < 3)
        throw ValidationError("slope fit needs at least 3 points");
    const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (x[i] - xbar) * (x[i] - xbar);
        sxy += (x[i] - xbar) * (y[i] - ybar);
    }
    if (sxx == 0.0) throw ValidationError("slope fit needs distinct x values");
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double resid = y[i] - ybar - slope * (x[i] - xbar);
        rss += resid * resid;
    }
    const double se = k > 2 ? std::sqrt(rss / ((k - 2) * sxx)) : 0.0;
    return {slope, se};
}

double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 == 0 || n2 == 0) throw ValidationError("rank-sum test needs nonempty samples");
    std::vector<std::pair<double, int>> all;
    all.reserve(n1 + n2);
    for (double v : a) all.emplace_back(v, 0);
    for (double v : b) all.emplace_back(v, 1);
    std::sort(all.begin(), all.end());

    const std::size_t nn = n1 + n2;
    std::vector<double> ranks(nn);
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < nn;) {
        std::size_t j = i;
        while (j + 1 < nn && all[j + 1].first == all[i].first) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[k] = r;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    double r1 = 0.0;
    for (std::size_t i = 0; i < nn; ++i)
        if (all[i].second == 0) r1 += ranks[i];

    const double u = r1 - 0.5 * n1 * (n1 + 1);
    const double mean = 0.5 * n1 * n2;
    const double var = (static_cast<double>(n1) * n2 / 12.0) *
                       (nn + 1 - tie_sum / (static_cast<double>(nn) * (nn - 1)));
    if (var <= 0.0) return 1.0;  // all observations tied
    double z = std::abs(u - mean) - 0.5;
    if (z < 0.0) z = 0.0;
    z /= std::sqrt(var);
    return std::erfc(z / std::sqrt(2.0));
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    return k % 2 == 1 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

// ---- shared pipeline ---------------------------------------------------------

PipelineResult fit_pipeline(const SparsePanel& panel, double h_mu, double h_phi,
                            const Grid& grid, const KernelSpec& kernel, int j0,
                            unsigned threads) {
    FitOptions mean_opts;
    mean_opts.threads = threads;
    CovFitOptions cov_opts;
    cov_opts.threads = threads;

    CurveEstimate mean = local_linear_mean(panel, h_mu, grid, kernel, mean_opts);
    SurfaceEstimate phi = local_linear_cov_surface(panel, h_phi, grid, kernel, cov_opts);
    SurfaceEstimate psi = center_surface(phi, mean);
    EigenSystem eig = eigendecompose_surface(psi, j0);
    int mean_only = 0;
    for (const auto& subj : panel.subjects)
        if (subj.size() < 2) ++mean_only;
    return PipelineResult{std::move(mean), std::move(phi), std::move(psi), std::move(eig),
                          panel.pair_count(), mean_only};
}

// ---- rate study ----------------------------------------------------------------

namespace {

struct ReplicateOutcome {
    bool ok = false;
    std::string fatal;  // non-sparsity failure: aborts the study
    std::vector<double> theta_err;
    std::vector<double> psi_l2;
};

std::vector<CurveEstimate> tabulate_true_eigenfunctions(const TrajectoryModel& model,
                                                        const Grid& grid, int count) {
    std::vector<CurveEstimate> out;
    for (int j = 0; j < count; ++j) {
        Eigen::VectorXd v(grid.size());
        for (int g = 0; g < grid.size(); ++g) v[g] = model.components()[j].psi(grid.node(g));
        out.push_back(CurveEstimate{grid, std::move(v), 0.0});
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

}  // namespace

StudyReport run_rate_study(const StudyConfig& config) {
    if (config.n_ladder.size() < 3)
        throw ValidationError("rate study needs an n-ladder with at least 3 rungs");
    for (std::size_t i = 1; i < config.n_ladder.size(); ++i)
        if (config.n_ladder[i] <= config.n_ladder[i - 1])
            throw ValidationError("n-ladder must be strictly increasing");
    if (config.replicates < 20)
        throw ValidationError("rate study needs at least 20 replicates");

    const TrajectoryModel model = config.build_model();
    model.validate();
    const KernelSpec kernel(config.kernel);
    const Grid grid =
        Grid::uniform(config.grid_size, model.domain().a, model.domain().b);
    const int j_report = std::min(config.j0, model.rank());
    if (j_report < 1) throw ValidationError("rate study needs a model with components");
    const auto true_psi = tabulate_true_eigenfunctions(model, grid, j_report);

    const int reps = config.replicates;
    const std::size_t rungs = config.n_ladder.size();
    std::vector<std::vector<ReplicateOutcome>> rows(rungs,
                                                    std::vector<ReplicateOutcome>(reps));

    for (std::size_t rung = 0; rung < rungs; ++rung) {
        const long n = config.n_ladder[rung];
        const BandwidthPair h = bandwidth_schedule(n, config.regime, config.c_mu, config.c_phi);
        parallel_for(0, static_cast<std::size_t>(reps), config.threads, [&](std::size_t rep) {
            ReplicateOutcome& row = rows[rung][rep];
            const std::uint64_t rep_seed = config.seed ^ static_cast<std::uint64_t>(rep);
            try {
                const SparsePanel panel = simulate_panel(model, config.design, n, rep_seed);
                PipelineResult fit =
                    fit_pipeline(panel, h.h_mu, h.h_phi, grid, kernel, config.j0, 1);
                for (int j = 0; j < j_report; ++j) {
                    const double theta_true = model.components()[j].theta;
                    row.theta_err.push_back(fit.eig.pairs[j].theta - theta_true);
                    const CurveEstimate aligned =
                        align_sign(fit.eig.pairs[j].psi, true_psi[j]);
                    row.psi_l2.push_back(l2_distance(aligned, true_psi[j]));
                }
                row.ok = true;
            } catch (const TooSparseError&) {
                row.ok = false;
            } catch (const std::exception& e) {
                row.fatal = e.what();
            }
        });
        int failures = 0;
        for (const auto& row : rows[rung]) {
            if (!row.fatal.empty()) throw DataError("rate study replicate failed: " + row.fatal);
            if (!row.ok) ++failures;
        }
        if (failures > config.failure_budget * reps) {
            std::ostringstream os;
            os << "rate study aborted: " << failures << "/" << reps
               << " replicates too sparse at n = " << n << " (budget "
               << config.failure_budget * 100 << "%)";
            throw DataError(os.str());
        }
    }

    // theory oracle values
    std::vector<double> c1_proof(j_report), c1_display(j_report), c2(j_report);
    for (int j = 1; j <= j_report; ++j) {
        c1_proof[j - 1] = constant_C1(model, kernel, j, C1Variant::proof_form);
        c1_display[j - 1] = constant_C1(model, kernel, j, C1Variant::display_form);
        c2[j - 1] = constant_C2(model, kernel, j);
    }
    SigmaOptions sig_opts;
    sig_opts.mc_draws = config.oracle_mc_draws;
    sig_opts.seed = derive_stream(config.seed, 0x5157);
    sig_opts.threads = config.threads;
    const long n_max = config.n_ladder.back();
    const SigmaMatrix sigma = sigma_matrix(model, config.design, n_max, j_report, sig_opts);

    // aggregates
    json aggregates = json::array();
    std::vector<double> log_n, log_rmse_theta1, log_rmse_psi1;
    double mean_sq_psi1_at_max = 0.0, var_theta1_at_max = 0.0;
    double pred_psi_sq_proof_at_max = 0.0, pred_psi_sq_display_at_max = 0.0;
    std::ostringstream csv;
    csv << "n,statistic,value\n";
    for (std::size_t rung = 0; rung < rungs; ++rung) {
        const long n = config.n_ladder[rung];
        const BandwidthPair h = bandwidth_schedule(n, config.regime, config.c_mu, config.c_phi);
        const double n_pairs = static_cast<double>(n) * config.design.m_rule.expected_pairs(n);
        json agg;
        agg["n"] = n;
        agg["h_mu"] = h.h_mu;
        agg["h_phi"] = h.h_phi;
        agg["expected_pair_count"] = n_pairs;
        int used = 0;
        for (const auto& row : rows[rung]) used += row.ok ? 1 : 0;
        agg["replicates_used"] = used;
        for (int j = 0; j < j_report; ++j) {
            std::vector<double> te, pe;
            for (const auto& row : rows[rung]) {
                if (!row.ok) continue;
                te.push_back(row.theta_err[j]);
                pe.push_back(row.psi_l2[j]);
            }
            double mse_t = 0.0, msq_p = 0.0;
            for (double v : te) mse_t += v * v;
            for (double v : pe) msq_p += v * v;
            mse_t /= te.size();
            msq_p /= pe.size();
            const std::string sj = std::to_string(j + 1);
            agg["rmse_theta_" + sj] = std::sqrt(mse_t);
            agg["rmse_psi_" + sj] = std::sqrt(msq_p);
            agg["mean_sq_psi_err_" + sj] = msq_p;
            agg["var_theta_" + sj] = variance_of(te);
            agg["mean_theta_err_" + sj] = mean_of(te);
            const double pred_proof = c1_proof[j] / (n_pairs * h.h_phi) +
                                      c2[j] * std::pow(h.h_phi, 4);
            const double pred_display = c1_display[j] / (n_pairs * h.h_phi) +
                                        c2[j] * std::pow(h.h_phi, 4);
            agg["theory_psi_sq_proof_" + sj] = pred_proof;
            agg["theory_psi_sq_display_" + sj] = pred_display;
            csv << n << ",rmse_theta_" << sj << "," << format_double(std::sqrt(mse_t)) << "\n";
            csv << n << ",rmse_psi_" << sj << "," << format_double(std::sqrt(msq_p)) << "\n";
            csv << n << ",mean_sq_psi_err_" << sj << "," << format_double(msq_p) << "\n";
            csv << n << ",var_theta_" << sj << "," << format_double(variance_of(te)) << "\n";
            csv << n << ",theory_psi_sq_proof_" << sj << "," << format_double(pred_proof)
                << "\n";
            if (j == 0) {
                log_n.push_back(std::log(static_cast<double>(n)));
                log_rmse_theta1.push_back(std::log(std::sqrt(mse_t)));
                log_rmse_psi1.push_back(std::log(std::sqrt(msq_p)));
                if (rung == rungs - 1) {
                    mean_sq_psi1_at_max = msq_p;
                    var_theta1_at_max = variance_of(te);
                    pred_psi_sq_proof_at_max = pred_proof;
                    pred_psi_sq_display_at_max = pred_display;
                }
            }
        }
        aggregates.push_back(agg);
    }

    const SlopeFit psi_slope = ols_slope(log_n, log_rmse_psi1);
    const SlopeFit theta_slope = ols_slope(log_n, log_rmse_theta1);

    const double sigma11 = sigma.sigma(0, 0);
    const double var_ratio =
        sigma11 > 0.0 ? static_cast<double>(n_max) * var_theta1_at_max /
                            (static_cast<double>(n_max) * sigma11)
                      : 0.0;
    const double decomp_ratio_proof =
        pred_psi_sq_proof_at_max > 0.0 ? mean_sq_psi1_at_max / pred_psi_sq_proof_at_max : 0.0;
    const double decomp_ratio_display = pred_psi_sq_display_at_max > 0.0
                                            ? mean_sq_psi1_at_max / pred_psi_sq_display_at_max
                                            : 0.0;

    json verdicts;
    const bool psi_slope_ok =
        std::abs(psi_slope.slope - config.psi_slope_target) <= config.slope_tolerance;
    const bool theta_slope_ok =
        std::abs(theta_slope.slope - config.theta_slope_target) <= config.slope_tolerance;
    const bool var_ratio_ok =
        var_ratio >= config.var_ratio_lo && var_ratio <= config.var_ratio_hi;
    const bool decomp_ok = decomp_ratio_proof >= config.decomposition_lo &&
                           decomp_ratio_proof <= config.decomposition_hi;
    verdicts["psi_slope"] = {{"value", psi_slope.slope},
                             {"stderr", psi_slope.stderr_},
                             {"target", config.psi_slope_target},
                             {"tolerance", config.slope_tolerance},
                             {"pass", psi_slope_ok}};
    verdicts["theta_slope"] = {{"value", theta_slope.slope},
                               {"stderr", theta_slope.stderr_},
                               {"target", config.theta_slope_target},
                               {"tolerance", config.slope_tolerance},
                               {"pass", theta_slope_ok}};
    verdicts["n_var_theta_vs_sigma"] = {{"value", var_ratio},
                                        {"band", {config.var_ratio_lo, config.var_ratio_hi}},
                                        {"sigma_11", sigma11},
                                        {"pass", var_ratio_ok}};
    verdicts["psi_sq_vs_theory"] = {
        {"value_proof_form", decomp_ratio_proof},
        {"value_display_form", decomp_ratio_display},
        {"band", {config.decomposition_lo, config.decomposition_hi}},
        {"pass", decomp_ok}};

    // the regime determines which checks gate the study
    const bool pass = config.regime == BandwidthRegime::eigenfunction
                          ? (psi_slope_ok && decomp_ok)
                          : (theta_slope_ok && var_ratio_ok);

    json replicate_table = json::array();
    for (std::size_t rung = 0; rung < rungs; ++rung) {
        for (int rep = 0; rep < reps; ++rep) {
            const auto& row = rows[rung][rep];
            json r;
            r["n"] = config.n_ladder[rung];
            r["replicate"] = rep;
            r["ok"] = row.ok;
            if (row.ok) {
                r["theta_err"] = row.theta_err;
                r["psi_l2"] = row.psi_l2;
            }
            replicate_table.push_back(r);
        }
    }

    StudyReport out;
    out.report["kind"] = "rate-study";
    out.report["library_version"] = kLibraryVersion;
    out.report["config"] = config.raw;
    out.report["seed"] = config.seed;
    out.report["aggregates"] = aggregates;
    out.report["replicate_table"] = replicate_table;
    out.report["theory"] = {{"c1_proof_form", c1_proof},
                            {"c1_display_form", c1_display},
                            {"c2", c2},
                            {"sigma_11", sigma11},
                            {"expected_pair_count_at_max_n", sigma.pair_count}};
    out.report["verdicts"] = verdicts;
    out.report["pass"] = pass;
    out.csv = csv.str();
    out.pass = pass;
    return out;
}

// ---- design demo ----------------------------------------------------------------

namespace {

TrajectoryModel insert_alias_component(const TrajectoryModel& base, double alias_theta,
                                       int alias_k) {
    if (base.rank() == 0)
        throw ValidationError("design demo needs a base model with components");
    if (!(alias_theta > base.components()[0].theta))
        throw ValidationError(
            "alias component must lead the spectrum so the true leading eigenvalues differ");
    std::vector<Component> comps;
    comps.push_back(Component{alias_theta, BasisFunction::fourier_sin(alias_k, base.domain())});
    for (const auto& c : base.components()) comps.push_back(c);
    return TrajectoryModel(base.domain(), base.mean(), std::move(comps), base.score_law(),
                           base.noise_sd(), base.density());
}

}  // namespace

StudyReport run_design_demo(const StudyConfig& config) {
    const TrajectoryModel base = config.build_model();
    base.validate();
    const int m = config.demo_m;
    if (m < 2) throw ValidationError("design demo needs m >= 2");
    const int alias_k = config.alias_frequency > 0 ? config.alias_frequency : 2 * m;

    // the alias eigenfunction must vanish at every regular observation time
    const BasisFunction alias_psi = BasisFunction::fourier_sin(alias_k, base.domain());
    for (int j = 1; j <= m; ++j) {
        const double t =
            base.domain().a + base.domain().length() * (static_cast<double>(j) / m);
        if (std::abs(alias_psi(t)) > 1e-8) {
            std::ostringstream os;
            os << "alias component (frequency " << alias_k
               << ") does not vanish at regular time " << t << "; value " << alias_psi(t);
            throw ValidationError(os.str());
        }
    }
    const TrajectoryModel aliased = insert_alias_component(base, config.alias_theta, alias_k);
    aliased.validate();

    const long n = config.n_ladder.empty() ? 800 : config.n_ladder.back();
    const KernelSpec kernel(config.kernel);
    const Grid grid = Grid::uniform(config.grid_size, base.domain().a, base.domain().b);
    const BandwidthPair h_regular =
        bandwidth_schedule(n, config.regime, config.c_mu, config.c_phi);
    const BandwidthPair h_random =
        bandwidth_schedule(n, BandwidthRegime::eigenfunction, config.c_mu,
                           config.demo_random_c_phi);

    DesignSpec regular;
    regular.kind = DesignSpec::Kind::regular;
    regular.m_rule = MRule{MRule::Kind::fixed, m};
    DesignSpec random;
    random.kind = DesignSpec::Kind::random;
    random.m_rule = MRule{MRule::Kind::fixed, m};

    struct Arm {
        const TrajectoryModel* model;
        const DesignSpec* design;
        const char* name;
    };
    const Arm arms[4] = {{&base, &regular, "base_regular"},
                         {&aliased, &regular, "aliased_regular"},
                         {&base, &random, "base_random"},
                         {&aliased, &random, "aliased_random"}};

    const int reps = config.replicates;
    const int metas = config.meta_replicates;

    // flatten (meta, arm, rep) so replicate fits parallelize freely
    const std::size_t total = static_cast<std::size_t>(metas) * 4 * reps;
    std::vector<double> theta1(total, 0.0);
    std::vector<std::string> errors(total);
    parallel_for(0, total, config.threads, [&](std::size_t flat) {
        const int rep = static_cast<int>(flat % reps);
        const int arm = static_cast<int>((flat / reps) % 4);
        const int meta = static_cast<int>(flat / (4 * static_cast<std::size_t>(reps)));
        const std::uint64_t arm_seed =
            derive_stream(config.seed, static_cast<std::uint64_t>(meta) * 4 + arm);
        const std::uint64_t rep_seed = arm_seed ^ static_cast<std::uint64_t>(rep);
        try {
            const SparsePanel panel =
                simulate_panel(*arms[arm].model, *arms[arm].design, n, rep_seed);
            const BandwidthPair& h = arm < 2 ? h_regular : h_random;
            PipelineResult fit = fit_pipeline(panel, h.h_mu, h.h_phi, grid, kernel, 1, 1);
            theta1[flat] = fit.eig.pairs[0].theta;
        } catch (const std::exception& e) {
            errors[flat] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DataError("design demo replicate failed: " + e);

    auto arm_values = [&](int meta, int arm) {
        std::vector<double> v(reps);
        for (int rep = 0; rep < reps; ++rep)
            v[rep] = theta1[(static_cast<std::size_t>(meta) * 4 + arm) * reps + rep];
        return v;
    };

    json metas_json = json::array();
    int regular_not_separated = 0, random_separated = 0;
    int paired_gap_wins = 0, paired_gap_total = 0;
    for (int meta = 0; meta < metas; ++meta) {
        const auto base_reg = arm_values(meta, 0);
        const auto alias_reg = arm_values(meta, 1);
        const auto base_rand = arm_values(meta, 2);
        const auto alias_rand = arm_values(meta, 3);
        const double p_reg = rank_sum_p(base_reg, alias_reg);
        const double p_rand = rank_sum_p(base_rand, alias_rand);
        if (p_reg > config.test_alpha) ++regular_not_separated;
        if (p_rand < config.test_alpha) ++random_separated;
        for (int rep = 0; rep < reps; ++rep) {
            ++paired_gap_total;
            if (std::abs(base_rand[rep] - alias_rand[rep]) >
                std::abs(base_reg[rep] - alias_reg[rep]))
                ++paired_gap_wins;
        }
        metas_json.push_back({{"meta", meta},
                              {"p_regular", p_reg},
                              {"p_random", p_rand},
                              {"mean_theta1_base_regular", mean_of(base_reg)},
                              {"mean_theta1_aliased_regular", mean_of(alias_reg)},
                              {"mean_theta1_base_random", mean_of(base_rand)},
                              {"mean_theta1_aliased_random", mean_of(alias_rand)},
                              {"theta1_base_regular", base_reg},
                              {"theta1_aliased_regular", alias_reg},
                              {"theta1_base_random", base_rand},
                              {"theta1_aliased_random", alias_rand}});
    }

    const double frac_reg = static_cast<double>(regular_not_separated) / metas;
    const double frac_rand = static_cast<double>(random_separated) / metas;
    const double frac_paired = static_cast<double>(paired_gap_wins) / paired_gap_total;
    const bool pass = frac_reg >= config.separation_fraction &&
                      frac_rand >= config.separation_fraction;

    std::ostringstream csv;
    csv << "n,statistic,value\n";
    csv << n << ",fraction_regular_not_separated," << format_double(frac_reg) << "\n";
    csv << n << ",fraction_random_separated," << format_double(frac_rand) << "\n";
    csv << n << ",fraction_random_gap_larger," << format_double(frac_paired) << "\n";

    StudyReport out;
    out.report["kind"] = "design-demo";
    out.report["library_version"] = kLibraryVersion;
    out.report["config"] = config.raw;
    out.report["seed"] = config.seed;
    out.report["n"] = n;
    out.report["alias_frequency"] = alias_k;
    out.report["true_theta1"] = {{"base", base.components()[0].theta},
                                 {"aliased", config.alias_theta}};
    out.report["meta_replicates"] = metas_json;
    out.report["verdicts"] = {
        {"regular_not_separated_fraction", frac_reg},
        {"random_separated_fraction", frac_rand},
        {"random_gap_larger_fraction", frac_paired},
        {"required_fraction", config.separation_fraction},
        {"alpha", config.test_alpha},
        {"pass", pass}};
    out.report["pass"] = pass;
    out.csv = csv.str();
    out.pass = pass;
    return out;
}

// ---- transition study --------------------------------------------------------------

std::vector<std::string> equivalence_constraint_violations(long n, int m, double h, double h_exponent) {
    std::vector<std::string> out;
    const double n_eta = std::pow(static_cast<double>(n), 0.01);
    if (!(h_exponent > 0.25))
        out.push_back("h = o(n^{-1/4}) requires the h exponent to exceed 1/4");
    if (!(m * h > n_eta))
        out.push_back("m h n^{-delta_1} -> infinity proxy failed: m*h <= n^{0.01}");
    if (!(std::pow(static_cast<double>(m), 0.99) * h > n_eta))
        out.push_back("m^{1-delta_2} h -> infinity proxy failed: m^{0.99}*h <= n^{0.01}");
    return out;
}

StudyReport run_transition_study(const StudyConfig& config) {
    if (config.n_ladder.empty())
        throw ValidationError("transition study needs an n-ladder");
    if (config.m_exponents.size() < 2)
        throw ValidationError("transition study needs at least two m-rules");
    std::vector<double> exponents = config.m_exponents;
    std::sort(exponents.begin(), exponents.end());
    const double top = exponents.back();

    // the equivalence arm must satisfy the equivalence constraints at every rung
    for (long n : config.n_ladder) {
        const int m = static_cast<int>(std::ceil(std::pow(static_cast<double>(n), top)));
        const double h =
            config.h_coeff * std::pow(static_cast<double>(n), -config.h_exponent);
        const auto violations = equivalence_constraint_violations(n, m, h, config.h_exponent);
        if (!violations.empty()) {
            std::ostringstream os;
            os << "transition study configuration violates the presmoothing equivalence constraints at n = " << n
               << ": " << violations.front();
            throw ValidationError(os.str());
        }
    }

    const TrajectoryModel model = config.build_model();
    model.validate();
    if (model.rank() < 1) throw ValidationError("transition study needs model components");
    const KernelSpec kernel(config.kernel);
    const Grid grid = Grid::uniform(config.grid_size, model.domain().a, model.domain().b);
    const double theta1_true = model.components()[0].theta;
    const auto true_psi = tabulate_true_eigenfunctions(model, grid, 1);

    const int reps = config.replicates;
    json rungs_json = json::array();
    std::ostringstream csv;
    csv << "n,statistic,value\n";

    // medians[rule][rung]
    std::vector<std::vector<double>> ratio_medians(exponents.size());
    std::vector<std::vector<double>> psi_ratio_medians(exponents.size());

    for (std::size_t rung = 0; rung < config.n_ladder.size(); ++rung) {
        const long n = config.n_ladder[rung];
        const double h =
            config.h_coeff * std::pow(static_cast<double>(n), -config.h_exponent);
        for (std::size_t rule = 0; rule < exponents.size(); ++rule) {
            const int m =
                static_cast<int>(std::ceil(std::pow(static_cast<double>(n), exponents[rule])));
            DesignSpec design = config.design;
            design.m_rule = MRule{MRule::Kind::fixed, std::max(2, m)};

            std::vector<double> ratios(reps), psi_ratios(reps);
            std::vector<long> dropped(reps, 0);
            std::vector<std::string> errors(reps);
            parallel_for(0, static_cast<std::size_t>(reps), config.threads,
                         [&](std::size_t rep) {
                try {
                    const std::uint64_t rep_seed =
                        config.seed ^ static_cast<std::uint64_t>(rep);
                    const SimulationDraw draw =
                        simulate_draw(model, design, n, rep_seed, &grid);

                    PresmoothOptions opts;
                    opts.clamp_to_span = config.presmooth_clamp;
                    const SmoothedEnsemble ens =
                        presmooth_ensemble(draw.panel, h, grid, kernel, opts);
                    dropped[rep] = ens.dropped;
                    if (static_cast<long>(ens.kept.size()) < 2)
                        throw TooSparseError("presmoothing kept fewer than 2 subjects");
                    const SurfaceEstimate psi_check = sample_covariance(ens);
                    const EigenSystem eig_check = eigendecompose_surface(psi_check, 1);

                    const SurfaceEstimate psi_bar = full_curve_oracle(draw.true_curves, grid);
                    const EigenSystem eig_bar = eigendecompose_surface(psi_bar, 1);

                    const double theta_check = eig_check.pairs[0].theta;
                    const double theta_bar = eig_bar.pairs[0].theta;
                    ratios[rep] =
                        std::abs(theta_check - theta_bar) / std::abs(theta_bar - theta1_true);

                    const CurveEstimate psi_bar1 =
                        align_sign(eig_bar.pairs[0].psi, true_psi[0]);
                    const CurveEstimate psi_check1 =
                        align_sign(eig_check.pairs[0].psi, psi_bar1);
                    psi_ratios[rep] = l2_distance(psi_check1, psi_bar1) /
                                      l2_distance(psi_bar1, true_psi[0]);
                } catch (const std::exception& e) {
                    errors[rep] = e.what();
                }
            });
            for (const auto& e : errors)
                if (!e.empty())
                    throw DataError("transition study replicate failed: " + e);

            const double med = median(ratios);
            const double med_psi = median(psi_ratios);
            ratio_medians[rule].push_back(med);
            psi_ratio_medians[rule].push_back(med_psi);
            long total_dropped = std::accumulate(dropped.begin(), dropped.end(), 0L);

            json r;
            r["n"] = n;
            r["m_exponent"] = exponents[rule];
            r["m"] = std::max(2, m);
            r["h"] = h;
            r["median_theta_ratio"] = med;
            r["median_psi_ratio"] = med_psi;
            r["theta_ratios"] = ratios;
            r["psi_ratios"] = psi_ratios;
            r["dropped_subjects_total"] = total_dropped;
            r["satisfies_equivalence_constraints"] =
                equivalence_constraint_violations(n, std::max(2, m), h, config.h_exponent).empty();
            rungs_json.push_back(r);
            csv << n << ",median_theta_ratio_m" << exponents[rule] << ","
                << format_double(med) << "\n";
            csv << n << ",median_psi_ratio_m" << exponents[rule] << ","
                << format_double(med_psi) << "\n";
        }
    }

    const std::size_t top_rule = exponents.size() - 1;
    const std::size_t last_rung = config.n_ladder.size() - 1;
    bool decreasing = true;
    for (std::size_t rung = 1; rung < config.n_ladder.size(); ++rung)
        if (ratio_medians[top_rule][rung] >= ratio_medians[top_rule][rung - 1])
            decreasing = false;
    bool smallest = true;
    for (std::size_t rule = 0; rule + 1 < exponents.size(); ++rule)
        if (ratio_medians[top_rule][last_rung] >= ratio_medians[rule][last_rung])
            smallest = false;
    const double final_ratio = ratio_medians[top_rule][last_rung];
    const bool below_threshold = final_ratio < config.transition_ratio_threshold;
    const bool pass = decreasing && smallest && below_threshold;

    StudyReport out;
    out.report["kind"] = "transition-study";
    out.report["library_version"] = kLibraryVersion;
    out.report["config"] = config.raw;
    out.report["seed"] = config.seed;
    out.report["rungs"] = rungs_json;
    out.report["verdicts"] = {{"top_rule_ratio_decreasing", decreasing},
                              {"top_rule_smallest_at_max_n", smallest},
                              {"final_ratio", final_ratio},
                              {"threshold", config.transition_ratio_threshold},
                              {"below_threshold", below_threshold},
                              {"pass", pass}};
    out.report["pass"] = pass;
    out.csv = csv.str();
    out.pass = pass;
    return out;
}

// ---- real-data fit ----------------------------------------------------------------

FitArtifacts fit_panel(const SparsePanel& panel, const FitRequest& request) {
    if (panel.n() == 0) throw DataError("panel has no subjects");
    double h_mu = request.h_mu, h_phi = request.h_phi;
    if (h_mu <= 0.0 || h_phi <= 0.0) {
        const BandwidthPair h = bandwidth_schedule(std::max<long>(panel.n(), 2),
                                                   request.regime, request.c_mu, request.c_phi);
        if (h_mu <= 0.0) h_mu = h.h_mu;
        if (h_phi <= 0.0) h_phi = h.h_phi;
    }
    double t_min = panel.subjects[0][0].t, t_max = t_min;
    for (const auto& subj : panel.subjects) {
        for (const auto& ob : subj) {
            t_min = std::min(t_min, ob.t);
            t_max = std::max(t_max, ob.t);
        }
    }
    if (!(t_min < t_max)) throw DataError("panel holds a single distinct time point");
    const Grid grid = Grid::uniform(request.grid_size, t_min, t_max);
    const KernelSpec kernel(request.kernel);

    FitArtifacts out{fit_pipeline(panel, h_mu, h_phi, grid, kernel, request.j0,
                                  request.threads),
                     h_mu, h_phi, {}};

    json meta;
    meta["library_version"] = kLibraryVersion;
    meta["n_subjects"] = panel.n();
    meta["total_observations"] = panel.total_observations();
    meta["pair_count"] = out.result.pair_count;
    meta["subjects_mean_only"] = out.result.mean_only_subjects;
    meta["h_mu"] = h_mu;
    meta["h_phi"] = h_phi;
    meta["grid_size"] = request.grid_size;
    meta["grid_interval"] = {t_min, t_max};
    meta["j0"] = request.j0;
    meta["kernel"] = to_string(request.kernel);
    meta["gram_residual"] = out.result.eig.gram_residual;
    meta["negative_eigenvalues"] = out.result.eig.has_negative();
    if (panel.provenance) {
        meta["seed"] = panel.provenance->seed;
        if (!panel.provenance->model_tag.empty())
            meta["model_tag"] = panel.provenance->model_tag;
    }
    out.metadata = meta;
    return out;
}

void write_fit_artifacts(const FitArtifacts& artifacts, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const Grid& grid = artifacts.result.mean.grid;

    {
        std::ofstream f(fs::path(out_dir) / "mean_curve.csv");
        f << "t,value\n";
        for (int g = 0; g < grid.size(); ++g)
            f << format_double(grid.node(g)) << ','
              << format_double(artifacts.result.mean.values[g]) << '\n';
    }
    {
        std::ofstream f(fs::path(out_dir) / "covariance_surface.csv");
        f << "u,v,value\n";
        for (int i = 0; i < grid.size(); ++i)
            for (int k = 0; k < grid.size(); ++k)
                f << format_double(grid.node(i)) << ',' << format_double(grid.node(k)) << ','
                  << format_double(artifacts.result.psi.values(i, k)) << '\n';
    }
    {
        json eig;
        eig["j0"] = artifacts.result.eig.j0;
        eig["gram_residual"] = artifacts.result.eig.gram_residual;
        json vals = json::array();
        for (std::size_t j = 0; j < artifacts.result.eig.pairs.size(); ++j) {
            vals.push_back({{"j", j + 1},
                            {"theta", artifacts.result.eig.pairs[j].theta},
                            {"negative", artifacts.result.eig.pairs[j].negative}});
        }
        eig["eigenvalues"] = vals;
        std::ofstream f(fs::path(out_dir) / "eigenvalues.json");
        f << eig.dump(2) << '\n';
    }
    {
        std::ofstream f(fs::path(out_dir) / "eigenfunctions.csv");
        f << "t";
        for (std::size_t j = 0; j < artifacts.result.eig.pairs.size(); ++j)
            f << ",psi_" << (j + 1);
        f << '\n';
        for (int g = 0; g < grid.size(); ++g) {
            f << format_double(grid.node(g));
            for (const auto& p : artifacts.result.eig.pairs)
                f << ',' << format_double(p.psi.values[g]);
            f << '\n';
        }
    }
    {
        std::ofstream f(fs::path(out_dir) / "run_metadata.json");
        f << artifacts.metadata.dump(2) << '\n';
    }
}

void write_study_outputs(const StudyReport& report, const std::string& out_dir,
                         const std::string& stem) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / (stem + ".json"));
        f << report.report_bytes();
    }
    {
        std::ofstream f(fs::path(out_dir) / (stem + ".csv"));
        f << report.csv;
    }
}

}  // namespace fpca
