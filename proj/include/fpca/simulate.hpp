#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "fpca/grid.hpp"
#include "fpca/model.hpp"
#include "fpca/panel.hpp"

namespace fpca {

struct MRule {
    enum class Kind { fixed, uniform_range, power };
    Kind kind = Kind::fixed;
    int m = 2;                     // fixed
    int m_lo = 2, m_hi = 2;        // uniform_range
    double coeff = 1.0, expo = 0;  // power: m = ceil(coeff * n^expo)

    int draw(Rng& rng, long n) const;
    double expected_pairs(long n) const;  // E[m (m-1) / 2]
    void validate() const;
};

struct DesignSpec {
    enum class Kind { random, regular };
    Kind kind = Kind::random;
    MRule m_rule;

    void validate() const;
};

// Panel plus the per-subject truth the panel was generated from; the truth is
// what the infeasible full-curve benchmarks consume.
struct SimulationDraw {
    SparsePanel panel;
    Eigen::MatrixXd scores;       // n x rank
    Eigen::MatrixXd true_curves;  // n x grid size; empty unless a grid was given
};

// Pure function of (model, design, n, seed); subject i draws from a stream
// derived from (seed, i), so panels are reproducible under any parallel split.
SparsePanel simulate_panel(const TrajectoryModel& model, const DesignSpec& design, long n,
                           std::uint64_t seed);

SimulationDraw simulate_draw(const TrajectoryModel& model, const DesignSpec& design, long n,
                             std::uint64_t seed, const Grid* curve_grid = nullptr);

}  // namespace fpca
