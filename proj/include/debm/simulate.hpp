#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "debm/dataset.hpp"
#include "debm/error.hpp"
#include "debm/rng.hpp"

namespace debm {

/// Sigmoid trajectory of one biomarker: value moves from the normal to the
/// abnormal level around the event time, with subject-specific levels drawn
/// from the population Gaussians.
struct BiomarkerTrajectory {
    double normal_mean = 0;
    double normal_std = 0.1;
    double abnormal_mean = 1;
    double abnormal_std = 0.1;
    double steepness = 10;   // 1 / disease-time units
    double event_time = 0.5; // position on the [0,1] disease-time axis
};

// Default trajectory parameters give substantial normal/abnormal overlap and
// slow transitions, so a sizeable share of subjects sits mid-transition per
// biomarker. Cleaner settings make the mixture fits trivial for every
// training strategy at once and hide the differences between them.
struct SimulationConfig {
    int n_biomarkers = 7;
    std::vector<int> group_sizes{500, 900};
    double epsilon_o = 0.0; // normalized Kendall distance between group orderings
    double epsilon_g = 0.0; // abnormal-mean shift of groups >= 2, as a multiple of d
    double cn_fraction = 0.4;
    double mci_fraction = 0.3; // AD gets the remainder
    double normal_mean = 0.0;
    double abnormal_mean = 1.0;
    double population_std = 0.3;
    double noise_std = 0.1;
    double steepness = 5.0;
    uint64_t seed = 42;
};

struct GroupGroundTruth {
    std::vector<size_t> ordering; // biomarker indices in event order
    std::vector<BiomarkerTrajectory> trajectories;
};

struct GroundTruth {
    std::vector<GroupGroundTruth> groups;
    std::vector<double> disease_time; // per subject, dataset row order
    SimulationConfig config;
};

namespace detail {

inline int realizable_swaps(double epsilon_o, int n_biomarkers) {
    const long pairs = static_cast<long>(n_biomarkers) * (n_biomarkers - 1) / 2;
    const double exact = epsilon_o * static_cast<double>(pairs);
    const long k = std::lround(exact);
    if (epsilon_o < 0.0 || epsilon_o > 1.0 || k < 0 || k > pairs)
        throw ConfigError("unrealizable Kendall distance: epsilon_O=" +
                          std::to_string(epsilon_o) + " with " +
                          std::to_string(pairs) + " biomarker pairs");
    return static_cast<int>(k);
}

inline long inversion_count_pairs(std::span<const size_t> perm) {
    long inv = 0;
    for (size_t u = 0; u < perm.size(); ++u)
        for (size_t v = u + 1; v < perm.size(); ++v)
            if (perm[u] > perm[v]) ++inv;
    return inv;
}

/// Uniform sample of a permutation of {0..n-1} with exactly k inversions via
/// its Lehmer code: position i contributes c_i in [0, n-1-i] inversions, and
/// the completions are counted (Mahonian numbers) so each code with total k
/// is drawn with equal probability.
inline std::vector<size_t> permutation_with_inversions(size_t n, long k, Rng& rng) {
    const size_t max_inv = n * (n - 1) / 2;
    // ways[i][r]: codes for positions i..n-1 summing to r
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(max_inv + 1, 0.0));
    ways[n][0] = 1.0;
    for (size_t i = n; i-- > 0;) {
        const size_t cmax = n - 1 - i;
        for (size_t r = 0; r <= max_inv; ++r) {
            double total = 0;
            for (size_t c = 0; c <= std::min(cmax, r); ++c) total += ways[i + 1][r - c];
            ways[i][r] = total;
        }
    }
    std::vector<size_t> code(n, 0);
    long remaining = k;
    for (size_t i = 0; i < n; ++i) {
        const size_t cmax = n - 1 - i;
        const double total = ways[i][remaining];
        double u = rng.uniform01() * total;
        size_t chosen = std::min<size_t>(cmax, static_cast<size_t>(remaining));
        for (size_t c = 0; c <= std::min<size_t>(cmax, static_cast<size_t>(remaining)); ++c) {
            const double w = ways[i + 1][remaining - c];
            if (u < w) {
                chosen = c;
                break;
            }
            u -= w;
        }
        code[i] = chosen;
        remaining -= static_cast<long>(chosen);
    }
    // decode: code[i] = number of later elements smaller than the value at i
    std::vector<size_t> pool(n);
    std::iota(pool.begin(), pool.end(), size_t{0});
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) {
        perm[i] = pool[code[i]];
        pool.erase(pool.begin() + static_cast<long>(code[i]));
    }
    return perm;
}

} // namespace detail

/// Random ordering at the exact requested Kendall distance from S1
/// (rounded to a realizable swap count k). Uniform among the orderings at
/// distance k: rejection sampling for N <= 8, Lehmer-code sampling above.
inline std::vector<size_t> make_group2_ordering(std::span<const size_t> S1,
                                                double epsilon_o, uint64_t seed) {
    const size_t n = S1.size();
    const long k = detail::realizable_swaps(epsilon_o, static_cast<int>(n));
    Rng rng(seed);
    std::vector<size_t> pos(n);
    if (n <= 8) {
        std::iota(pos.begin(), pos.end(), size_t{0});
        do {
            for (size_t i = n; i-- > 1;)
                std::swap(pos[i], pos[rng.uniform_index(i + 1)]);
        } while (detail::inversion_count_pairs(pos) != k);
    } else {
        pos = detail::permutation_with_inversions(n, k, rng);
    }
    std::vector<size_t> s2(n);
    for (size_t u = 0; u < n; ++u) s2[u] = S1[pos[u]];
    return s2;
}

/// Biomarker vector for one subject at the given disease time: draw
/// subject-specific normal and abnormal levels, blend them through the
/// sigmoid, add measurement noise. Draw order per biomarker is fixed
/// (normal level, abnormal level, noise).
inline std::vector<double> simulate_subject(double stage_time,
                                            std::span<const BiomarkerTrajectory> traj,
                                            double noise_std, Rng& rng) {
    std::vector<double> values(traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        const BiomarkerTrajectory& t = traj[i];
        const double a = rng.normal(t.normal_mean, t.normal_std);
        const double b = rng.normal(t.abnormal_mean, t.abnormal_std);
        const double s = 1.0 / (1.0 + std::exp(-t.steepness * (stage_time - t.event_time)));
        values[i] = a + (b - a) * s + rng.normal(0.0, noise_std);
    }
    return values;
}

/// Generates a stratified cohort with known ground truth. Group 1 uses the
/// canonical identity ordering; every further group gets a random ordering
/// at Kendall distance epsilon_o from it and abnormal means shifted by
/// epsilon_g * d (d = group-1 abnormal minus normal mean, per biomarker).
/// Labels are assigned by rounded fractions per group; disease times are
/// uniform over the early / middle / late third of the axis for CN / MCI /
/// AD respectively. Every subject draws from its own derived RNG stream, so
/// regeneration is bit-identical regardless of evaluation order.
inline std::pair<BiomarkerDataset, GroundTruth>
simulate_dataset(const SimulationConfig& config) {
    const int n = config.n_biomarkers;
    if (n < 1) throw ConfigError("n_biomarkers must be >= 1");
    if (config.group_sizes.empty()) throw ConfigError("at least one group required");
    if (config.cn_fraction < 0 || config.mci_fraction < 0 ||
        config.cn_fraction + config.mci_fraction > 1.0)
        throw ConfigError("label fractions must be non-negative and sum to <= 1");
    if (config.population_std < 0 || config.noise_std < 0)
        throw ConfigError("standard deviations must be non-negative");
    if (config.steepness <= 0) throw ConfigError("steepness must be positive");
    if (!(config.abnormal_mean > config.normal_mean))
        throw ConfigError("abnormal mean must exceed normal mean");
    (void)detail::realizable_swaps(config.epsilon_o, n); // validate early

    GroundTruth gt;
    gt.config = config;

    std::vector<size_t> s1(static_cast<size_t>(n));
    std::iota(s1.begin(), s1.end(), size_t{0});

    auto event_times_for = [&](const std::vector<size_t>& ordering) {
        std::vector<double> t(ordering.size());
        for (size_t q = 0; q < ordering.size(); ++q)
            t[ordering[q]] = ordering.size() == 1
                                 ? 0.5
                                 : 0.2 + 0.6 * static_cast<double>(q) /
                                             static_cast<double>(ordering.size() - 1);
        return t;
    };

    const double d = config.abnormal_mean - config.normal_mean;
    for (size_t g = 0; g < config.group_sizes.size(); ++g) {
        GroupGroundTruth group;
        group.ordering =
            g == 0 ? s1
                   : make_group2_ordering(s1, config.epsilon_o,
                                          derive_seed(config.seed, "ordering", g));
        const auto times = event_times_for(group.ordering);
        for (int i = 0; i < n; ++i) {
            BiomarkerTrajectory t;
            t.normal_mean = config.normal_mean;
            t.normal_std = config.population_std;
            t.abnormal_mean = config.abnormal_mean + (g == 0 ? 0.0 : config.epsilon_g * d);
            t.abnormal_std = config.population_std;
            t.steepness = config.steepness;
            t.event_time = times[static_cast<size_t>(i)];
            group.trajectories.push_back(t);
        }
        gt.groups.push_back(std::move(group));
    }

    BiomarkerDataset ds;
    for (int i = 0; i < n; ++i)
        ds.biomarker_names.push_back("bm" + std::to_string(i + 1));
    ds.directions.assign(static_cast<size_t>(n), Direction::INCREASING);

    size_t global_index = 0;
    for (size_t g = 0; g < config.group_sizes.size(); ++g) {
        const int size = config.group_sizes[g];
        if (size < 1) throw ConfigError("group sizes must be >= 1");
        const int n_cn = static_cast<int>(std::lround(config.cn_fraction * size));
        const int n_mci = static_cast<int>(std::lround(config.mci_fraction * size));
        const int n_ad = size - n_cn - n_mci;
        if (n_cn < 2 || n_ad < 2)
            throw ConfigError("group " + std::to_string(g + 1) +
                              ": label fractions leave fewer than 2 CN or AD subjects");
        for (int j = 0; j < size; ++j, ++global_index) {
            Subject s;
            s.group = static_cast<int>(g + 1);
            s.diagnosis = j < n_cn              ? Diagnosis::CN
                          : j < n_cn + n_mci    ? Diagnosis::MCI
                                                : Diagnosis::AD;
            {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "g%zu_s%04d", g + 1, j + 1);
                s.id = buf;
            }
            Rng rng(derive_seed(config.seed, "subject", global_index));
            const double band_lo = s.diagnosis == Diagnosis::CN    ? 0.0
                                   : s.diagnosis == Diagnosis::MCI ? 1.0 / 3.0
                                                                   : 2.0 / 3.0;
            const double t = rng.uniform(band_lo, band_lo + 1.0 / 3.0);
            gt.disease_time.push_back(t);
            s.values = simulate_subject(t, gt.groups[g].trajectories, config.noise_std, rng);
            s.missing.assign(static_cast<size_t>(n), 0);
            ds.subjects.push_back(std::move(s));
        }
    }
    validate(ds);
    return {std::move(ds), std::move(gt)};
}

} // namespace debm
