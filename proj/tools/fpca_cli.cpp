// Command-line harness: simulation, fitting, and the reproducible studies.
#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fpca/errors.hpp"
#include "fpca/experiments.hpp"
#include "fpca/panel_io.hpp"
#include "fpca/parallel.hpp"

namespace {

using fpca::StudyConfig;
using nlohmann::json;

struct GlobalFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    unsigned threads = 0;
    int grid = 0;
};

StudyConfig load_config(const GlobalFlags& flags) {
    if (flags.config_path.empty())
        throw fpca::ValidationError("this subcommand needs --config <path>");
    StudyConfig config = StudyConfig::from_file(flags.config_path);
    if (flags.seed_set) config.seed = flags.seed;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.threads > 0) config.threads = flags.threads;
    if (flags.grid > 0) config.grid_size = flags.grid;
    if (config.threads == 0) config.threads = fpca::default_threads();
    if (config.out_dir.empty()) config.out_dir = ".";
    return config;
}

int run_study(const GlobalFlags& flags, const std::string& kind) {
    const StudyConfig config = load_config(flags);
    fpca::StudyReport report;
    if (kind == "rate-study")
        report = fpca::run_rate_study(config);
    else if (kind == "design-demo")
        report = fpca::run_design_demo(config);
    else
        report = fpca::run_transition_study(config);
    fpca::write_study_outputs(report, config.out_dir, kind);
    std::cout << "wrote " << config.out_dir << "/" << kind << ".json ("
              << (report.pass ? "pass" : "FAIL") << ")\n";
    return report.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse functional PCA: simulation, estimation and rate experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "JSON experiment config");
    app.add_option("--seed", flags.seed, "override config seed")
        ->each([&](const std::string&) { flags.seed_set = true; });
    app.add_option("--out", flags.out_dir, "output directory");
    app.add_option("--threads", flags.threads, "worker threads (0 = hardware)");
    app.add_option("--grid", flags.grid, "estimation grid size");

    auto* sim = app.add_subcommand("simulate", "simulate a sparse panel and write panel.csv");
    auto* fit = app.add_subcommand("fit", "fit a panel CSV and write estimate artifacts");
    std::string panel_path;
    double h_mu = 0.0, h_phi = 0.0;
    std::string regime_name = "eigenfunction";
    int j0 = 3;
    fit->add_option("--panel", panel_path, "panel CSV path")->required();
    fit->add_option("--h-mu", h_mu, "mean bandwidth (0 = schedule from n)");
    fit->add_option("--h-phi", h_phi, "covariance bandwidth (0 = schedule from n)");
    fit->add_option("--regime", regime_name, "bandwidth regime for the schedule");
    fit->add_option("--j0", j0, "number of eigenpairs to keep");
    auto* rate = app.add_subcommand("rate-study", "Monte Carlo convergence-rate study");
    auto* demo = app.add_subcommand("design-demo", "regular vs random design comparison");
    auto* trans = app.add_subcommand("transition-study", "presmoothing transition study");
    auto* oracle = app.add_subcommand("oracle", "print asymptotic constants for a config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const StudyConfig config = load_config(flags);
            if (config.n_ladder.empty())
                throw fpca::ValidationError("simulate needs an n_ladder entry (uses the last)");
            const fpca::TrajectoryModel model = config.build_model();
            const fpca::SparsePanel panel = fpca::simulate_panel(
                model, config.design, config.n_ladder.back(), config.seed);
            std::filesystem::create_directories(config.out_dir);
            const std::string path =
                (std::filesystem::path(config.out_dir) / "panel.csv").string();
            fpca::write_panel_csv_file(panel, path);
            std::cout << "wrote " << path << " (" << panel.n() << " subjects, "
                      << panel.total_observations() << " observations)\n";
            return 0;
        }
        if (fit->parsed()) {
            const fpca::SparsePanel panel = fpca::read_panel_csv_file(panel_path);
            fpca::FitRequest request;
            request.h_mu = h_mu;
            request.h_phi = h_phi;
            request.regime = fpca::regime_from_string(regime_name);
            request.j0 = j0;
            if (flags.grid > 0) request.grid_size = flags.grid;
            request.threads = flags.threads > 0 ? flags.threads : fpca::default_threads();
            const fpca::FitArtifacts artifacts = fpca::fit_panel(panel, request);
            const std::string out_dir = flags.out_dir.empty() ? "." : flags.out_dir;
            fpca::write_fit_artifacts(artifacts, out_dir);
            std::cout << "wrote fit artifacts under " << out_dir << "\n";
            return 0;
        }
        if (oracle->parsed()) {
            const StudyConfig config = load_config(flags);
            const fpca::TrajectoryModel model = config.build_model();
            const long n = config.n_ladder.empty() ? 800 : config.n_ladder.back();
            fpca::SigmaOptions opts;
            opts.mc_draws = config.oracle_mc_draws;
            opts.seed = fpca::derive_stream(config.seed, 0x5157);
            opts.threads = config.threads;
            const int j0_eff = std::min(config.j0, model.rank());
            const fpca::AsymptoticConstants constants = fpca::asymptotic_constants(
                model, config.design, n, j0_eff, fpca::KernelSpec(config.kernel), opts);
            json out;
            out["n"] = n;
            out["j0"] = constants.j0;
            out["expected_pair_count"] = constants.pair_count;
            out["c1_proof_form"] = constants.c1_proof;
            out["c1_display_form"] = constants.c1_display;
            out["c2"] = constants.c2;
            json sigma = json::array(), d = json::array();
            for (int r = 0; r < j0_eff; ++r) {
                json sr = json::array(), dr = json::array();
                for (int s = 0; s < j0_eff; ++s) {
                    sr.push_back(constants.sigma(r, s));
                    dr.push_back(constants.d(r, s));
                }
                sigma.push_back(sr);
                d.push_back(dr);
            }
            out["sigma"] = sigma;
            out["d"] = d;
            out["model_tag"] = constants.model_tag;
            out["design_tag"] = constants.design_tag;
            std::cout << out.dump(2) << "\n";
            if (!flags.out_dir.empty()) {
                std::filesystem::create_directories(flags.out_dir);
                const auto path = std::filesystem::path(flags.out_dir) / "chi_surface.csv";
                std::ofstream f(path);
                f << "u,v,value\n";
                const auto& grid = constants.chi.grid;
                for (int a = 0; a < grid.size(); ++a)
                    for (int b = 0; b < grid.size(); ++b)
                        f << fpca::format_double(grid.node(a)) << ','
                          << fpca::format_double(grid.node(b)) << ','
                          << fpca::format_double(constants.chi.values(a, b)) << '\n';
                std::cout << "wrote " << path.string() << "\n";
            }
            return 0;
        }
        if (rate->parsed()) return run_study(flags, "rate-study");
        if (demo->parsed()) return run_study(flags, "design-demo");
        if (trans->parsed()) return run_study(flags, "transition-study");
    } catch (const fpca::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const fpca::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
