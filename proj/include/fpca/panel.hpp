#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fpca {

struct Observation {
    double t;
    double y;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string model_tag;
};

// n subjects, subject i holding m_i (time, value) pairs.
struct SparsePanel {
    std::vector<std::vector<Observation>> subjects;
    std::optional<Provenance> provenance;

    int n() const { return static_cast<int>(subjects.size()); }

    long total_observations() const {
        long s = 0;
        for (const auto& subj : subjects) s += static_cast<long>(subj.size());
        return s;
    }

    // N = sum_i m_i (m_i - 1) / 2, the within-subject pair count
    long pair_count() const {
        long s = 0;
        for (const auto& subj : subjects) {
            const long m = static_cast<long>(subj.size());
            s += m * (m - 1) / 2;
        }
        return s;
    }

    int subjects_with_pairs() const {
        int c = 0;
        for (const auto& subj : subjects) c += subj.size() >= 2 ? 1 : 0;
        return c;
    }
};

}  // namespace fpca
