#include "fpca/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "fpca/errors.hpp"

namespace fpca {

int MRule::draw(Rng& rng, long n) const {
    switch (kind) {
        case Kind::fixed: return m;
        case Kind::uniform_range: return rng.uniform_int(m_lo, m_hi);
        case Kind::power:
            return static_cast<int>(std::ceil(coeff * std::pow(static_cast<double>(n), expo)));
    }
    return m;
}

double MRule::expected_pairs(long n) const {
    auto pairs = [](double mm) { return mm * (mm - 1.0) / 2.0; };
    switch (kind) {
        case Kind::fixed: return pairs(m);
        case Kind::uniform_range: {
            double s = 0.0;
            for (int mm = m_lo; mm <= m_hi; ++mm) s += pairs(mm);
            return s / (m_hi - m_lo + 1);
        }
        case Kind::power:
            return pairs(std::ceil(coeff * std::pow(static_cast<double>(n), expo)));
    }
    return 0.0;
}

void MRule::validate() const {
    switch (kind) {
        case Kind::fixed:
            if (m < 1) throw ValidationError("m_rule: fixed m must be >= 1");
            break;
        case Kind::uniform_range:
            if (m_lo < 1 || m_hi < m_lo)
                throw ValidationError("m_rule: need 1 <= m_lo <= m_hi");
            break;
        case Kind::power:
            if (coeff <= 0.0 || expo < 0.0)
                throw ValidationError("m_rule: power rule needs coeff > 0 and exponent >= 0");
            break;
    }
}

void DesignSpec::validate() const {
    m_rule.validate();
    if (kind == Kind::regular && m_rule.kind == MRule::Kind::uniform_range)
        throw ValidationError("regular design needs a deterministic m rule");
}

SimulationDraw simulate_draw(const TrajectoryModel& model, const DesignSpec& design, long n,
                             std::uint64_t seed, const Grid* curve_grid) {
    if (n < 1) throw ValidationError("need n >= 1 subjects");
    design.validate();
    model.validate();

    const int rank = model.rank();
    SimulationDraw out;
    out.panel.subjects.resize(n);
    out.scores.resize(n, rank);
    const int g = curve_grid ? curve_grid->size() : 0;
    if (curve_grid) out.true_curves.resize(n, g);

    const Interval domain = model.domain();
    const double sigma = model.noise_sd();

    for (long i = 0; i < n; ++i) {
        Rng rng(derive_stream(seed, static_cast<std::uint64_t>(i)));
        const int m = design.m_rule.draw(rng, n);

        std::vector<Observation> obs(m);
        if (design.kind == DesignSpec::Kind::regular) {
            for (int j = 0; j < m; ++j)
                obs[j].t = domain.a + domain.length() * (static_cast<double>(j + 1) / m);
        } else {
            for (int j = 0; j < m; ++j) obs[j].t = model.density().sample(rng);
            std::sort(obs.begin(), obs.end(),
                      [](const Observation& x, const Observation& y) { return x.t < y.t; });
        }

        for (int k = 0; k < rank; ++k) {
            const double theta = model.components()[k].theta;
            double z = 0.0;
            if (theta > 0.0) {
                switch (model.score_law()) {
                    case ScoreLaw::gaussian:
                        z = std::sqrt(theta) * rng.normal();
                        break;
                    case ScoreLaw::uniform:
                        z = std::sqrt(3.0 * theta) * (2.0 * rng.uniform() - 1.0);
                        break;
                }
            }
            out.scores(i, k) = z;
        }

        for (int j = 0; j < m; ++j) {
            double y = model.mean_value(obs[j].t);
            for (int k = 0; k < rank; ++k)
                y += out.scores(i, k) * model.components()[k].psi(obs[j].t);
            if (sigma > 0.0) y += sigma * rng.normal();
            obs[j].y = y;
        }
        out.panel.subjects[i] = std::move(obs);

        if (curve_grid) {
            for (int gg = 0; gg < g; ++gg) {
                const double t = curve_grid->node(gg);
                double x = model.mean_value(t);
                for (int k = 0; k < rank; ++k)
                    x += out.scores(i, k) * model.components()[k].psi(t);
                out.true_curves(i, gg) = x;
            }
        }
    }
    out.panel.provenance = Provenance{seed, ""};
    return out;
}

SparsePanel simulate_panel(const TrajectoryModel& model, const DesignSpec& design, long n,
                           std::uint64_t seed) {
    return simulate_draw(model, design, n, seed, nullptr).panel;
}

}  // namespace fpca
