#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "debm/error.hpp"

namespace debm {

/// M x N matrix of posterior event probabilities, missing-mask aligned with
/// the source dataset. Missing entries are flagged and never read as numbers.
struct PosteriorMatrix {
    size_t n_subjects = 0;
    size_t n_biomarkers = 0;
    std::vector<double> p;         // row-major, n_subjects x n_biomarkers
    std::vector<uint8_t> missing;  // same layout

    double at(size_t j, size_t i) const { return p[j * n_biomarkers + i]; }
    bool is_missing(size_t j, size_t i) const { return missing[j * n_biomarkers + i] != 0; }
};

/// One subject's event sequence: the non-missing biomarker indices sorted by
/// posterior descending, with the posteriors alongside.
struct SubjectOrdering {
    size_t subject_index = 0;
    std::vector<size_t> order;
    std::vector<double> weights;
};

struct SubjectOrderings {
    std::vector<SubjectOrdering> orderings;
    std::vector<size_t> excluded; // subjects with zero non-missing biomarkers
};

/// Central ordering S over all biomarkers plus event-centers lambda
/// (non-decreasing along S, inside (0,1)).
struct DiseaseTimeline {
    std::vector<size_t> ordering;
    std::vector<double> event_centers;
    double total_distance = 0;
};

/// Penalty charged per discordant pair; the default vanishes for ties and
/// reduces to the classic Kendall distance on 0/1 posteriors. Alternative
/// kernels can be passed to the distance and aggregation entry points.
using PairKernel = double (*)(double, double);

inline double abs_diff_kernel(double pa, double pb) { return std::abs(pa - pb); }

/// Sorts each subject's non-missing biomarkers by posterior descending, ties
/// broken by ascending biomarker index. Subjects with no usable biomarker
/// are excluded and reported.
inline SubjectOrderings subject_orderings(const PosteriorMatrix& P) {
    SubjectOrderings out;
    for (size_t j = 0; j < P.n_subjects; ++j) {
        SubjectOrdering s;
        s.subject_index = j;
        for (size_t i = 0; i < P.n_biomarkers; ++i)
            if (!P.is_missing(j, i)) s.order.push_back(i);
        if (s.order.empty()) {
            out.excluded.push_back(j);
            continue;
        }
        std::sort(s.order.begin(), s.order.end(), [&](size_t a, size_t b) {
            const double pa = P.at(j, a), pb = P.at(j, b);
            if (pa != pb) return pa > pb;
            return a < b;
        });
        s.weights.reserve(s.order.size());
        for (size_t i : s.order) s.weights.push_back(P.at(j, i));
        out.orderings.push_back(std::move(s));
    }
    return out;
}

/// Probabilistic Kendall distance between a subject's ordering and a
/// candidate central ordering: the kernel penalty summed over pairs whose
/// strict posterior order disagrees with S. Pairs with equal posteriors are
/// never discordant.
inline double prob_kendall_distance(const SubjectOrdering& subject,
                                    std::span<const size_t> S,
                                    PairKernel kernel = abs_diff_kernel) {
    std::vector<size_t> rank(S.size(), 0);
    for (size_t pos = 0; pos < S.size(); ++pos) {
        if (S[pos] >= rank.size())
            throw ValidationError("ordering refers to biomarker index out of range");
        rank[S[pos]] = pos;
    }
    double d = 0;
    const size_t n = subject.order.size();
    for (size_t u = 0; u < n; ++u) {
        for (size_t v = u + 1; v < n; ++v) {
            const double pu = subject.weights[u], pv = subject.weights[v];
            if (pu == pv) continue; // tie: no strict order, no penalty
            // subject places order[u] strictly before order[v]
            if (rank[subject.order[u]] > rank[subject.order[v]])
                d += kernel(pu, pv);
        }
    }
    return d;
}

namespace detail {

/// Pairwise cost matrix: cost(a, b) = total penalty incurred by placing a
/// before b, i.e. the summed kernel over subjects that strictly order b
/// ahead of a. The total distance of any ordering is the sum of cost over
/// its ordered pairs, which makes swap deltas O(1).
inline std::vector<double> pair_costs(const PosteriorMatrix& P,
                                      PairKernel kernel = abs_diff_kernel) {
    const size_t n = P.n_biomarkers;
    std::vector<double> cost(n * n, 0.0);
    for (size_t j = 0; j < P.n_subjects; ++j) {
        for (size_t a = 0; a < n; ++a) {
            if (P.is_missing(j, a)) continue;
            const double pa = P.at(j, a);
            for (size_t b = a + 1; b < n; ++b) {
                if (P.is_missing(j, b)) continue;
                const double pb = P.at(j, b);
                if (pa == pb) continue;
                if (pb > pa) cost[a * n + b] += kernel(pa, pb); // a-before-b discordant
                else cost[b * n + a] += kernel(pa, pb);
            }
        }
    }
    return cost;
}

inline double total_cost(const std::vector<double>& cost, std::span<const size_t> S) {
    const size_t n = S.size();
    double d = 0;
    for (size_t u = 0; u < n; ++u)
        for (size_t v = u + 1; v < n; ++v) d += cost[S[u] * n + S[v]];
    return d;
}

/// Mean posterior per biomarker over its non-missing entries (0 when a
/// biomarker is missing everywhere, which sorts it last).
inline std::vector<double> mean_posteriors(const PosteriorMatrix& P) {
    std::vector<double> mean(P.n_biomarkers, 0.0);
    std::vector<size_t> count(P.n_biomarkers, 0);
    for (size_t j = 0; j < P.n_subjects; ++j)
        for (size_t i = 0; i < P.n_biomarkers; ++i)
            if (!P.is_missing(j, i)) {
                mean[i] += P.at(j, i);
                ++count[i];
            }
    for (size_t i = 0; i < P.n_biomarkers; ++i)
        if (count[i] > 0) mean[i] /= static_cast<double>(count[i]);
    return mean;
}

} // namespace detail

/// Sum of probabilistic Kendall distances from every usable subject to S.
inline double total_distance(const PosteriorMatrix& P, std::span<const size_t> S,
                             PairKernel kernel = abs_diff_kernel) {
    return detail::total_cost(detail::pair_costs(P, kernel), S);
}

/// Central ordering minimizing the summed probabilistic Kendall distance to
/// the subject-specific orderings: mean-posterior initialization followed by
/// greedy adjacent-transposition descent until no swap improves.
/// Deterministic; event_centers is left empty for event_centers() to fill.
inline DiseaseTimeline central_ordering(const PosteriorMatrix& P,
                                        PairKernel kernel = abs_diff_kernel) {
    const size_t n = P.n_biomarkers;
    if (n == 0) throw ValidationError("posterior matrix has no biomarkers");
    bool any_usable = false;
    for (size_t j = 0; j < P.n_subjects && !any_usable; ++j)
        for (size_t i = 0; i < n; ++i)
            if (!P.is_missing(j, i)) {
                any_usable = true;
                break;
            }
    if (!any_usable) throw ValidationError("no usable subjects for central ordering");

    const auto mean = detail::mean_posteriors(P);
    DiseaseTimeline t;
    t.ordering.resize(n);
    std::iota(t.ordering.begin(), t.ordering.end(), size_t{0});
    std::sort(t.ordering.begin(), t.ordering.end(), [&](size_t a, size_t b) {
        if (mean[a] != mean[b]) return mean[a] > mean[b];
        return a < b;
    });

    const auto cost = detail::pair_costs(P, kernel);
    bool improved = true;
    while (improved) {
        improved = false;
        for (size_t pos = 0; pos + 1 < n; ++pos) {
            const size_t a = t.ordering[pos], b = t.ordering[pos + 1];
            const double delta = cost[b * n + a] - cost[a * n + b];
            if (delta < 0) {
                std::swap(t.ordering[pos], t.ordering[pos + 1]);
                improved = true;
            }
        }
    }
    t.total_distance = detail::total_cost(cost, t.ordering);
    return t;
}

/// Exhaustive minimizer over all N! orderings (N <= 8). Serves as the
/// reference the greedy search is checked against; ties resolve to the
/// lexicographically smallest ordering.
inline DiseaseTimeline central_ordering_exhaustive(const PosteriorMatrix& P,
                                                   PairKernel kernel = abs_diff_kernel) {
    const size_t n = P.n_biomarkers;
    if (n == 0 || n > 8)
        throw ValidationError("exhaustive search supports 1..8 biomarkers");
    const auto cost = detail::pair_costs(P, kernel);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    DiseaseTimeline best;
    best.ordering = perm;
    best.total_distance = detail::total_cost(cost, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double d = detail::total_cost(cost, perm);
        if (d < best.total_distance) {
            best.total_distance = d;
            best.ordering = perm;
        }
    }
    return best;
}

namespace detail {

/// Pool-adjacent-violators isotonic regression (non-decreasing, unweighted).
inline std::vector<double> isotonic_non_decreasing(std::span<const double> y) {
    std::vector<double> level;  // block means
    std::vector<size_t> size;   // block sizes
    for (double v : y) {
        level.push_back(v);
        size.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged = (level[level.size() - 2] * size[size.size() - 2] +
                                   level.back() * size.back()) /
                                  static_cast<double>(size[size.size() - 2] + size.back());
            size[size.size() - 2] += size.back();
            level[level.size() - 2] = merged;
            level.pop_back();
            size.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (size_t b = 0; b < level.size(); ++b)
        out.insert(out.end(), size[b], level[b]);
    return out;
}

} // namespace detail

/// Event-centers on [0,1] for the events along S: the raw center of
/// position q is 1 - theta of the biomarker at q (earlier events have larger
/// abnormal fractions), made non-decreasing by isotonic regression and
/// min-max rescaled to [1/(N+1), N/(N+1)]. A constant raw sequence maps to
/// even spacing. The posterior matrix is accepted so alternative estimators
/// can slot in behind the same signature; the default only validates against
/// it.
inline std::vector<double> event_centers(const PosteriorMatrix& P,
                                         std::span<const size_t> S,
                                         std::span<const double> thetas) {
    const size_t n = S.size();
    if (P.n_biomarkers != n || thetas.size() != n)
        throw ValidationError("event_centers: inconsistent sizes");
    std::vector<double> raw(n);
    for (size_t q = 0; q < n; ++q) raw[q] = 1.0 - thetas[S[q]];
    const auto iso = detail::isotonic_non_decreasing(raw);
    const double lo = 1.0 / static_cast<double>(n + 1);
    const double hi = static_cast<double>(n) / static_cast<double>(n + 1);
    const double mn = *std::min_element(iso.begin(), iso.end());
    const double mx = *std::max_element(iso.begin(), iso.end());
    std::vector<double> lambda(n);
    if (mx - mn < 1e-12) {
        for (size_t q = 0; q < n; ++q)
            lambda[q] = static_cast<double>(q + 1) / static_cast<double>(n + 1);
    } else {
        for (size_t q = 0; q < n; ++q)
            lambda[q] = lo + (iso[q] - mn) / (mx - mn) * (hi - lo);
    }
    return lambda;
}

} // namespace debm
