#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "debm/ordering.hpp"
#include "debm/rng.hpp"

using namespace debm;

namespace {

PosteriorMatrix make_matrix(size_t m, size_t n, const std::vector<double>& p,
                            const std::vector<uint8_t>& missing = {}) {
    PosteriorMatrix P;
    P.n_subjects = m;
    P.n_biomarkers = n;
    P.p = p;
    P.missing = missing.empty() ? std::vector<uint8_t>(m * n, 0) : missing;
    return P;
}

PosteriorMatrix random_matrix(size_t m, size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p(m * n);
    for (double& v : p) v = rng.uniform01();
    return make_matrix(m, n, p);
}

} // namespace

// ---------------------------------------------------------------------------
// subject_orderings
// ---------------------------------------------------------------------------

TEST(SubjectOrderings, SortsByPosteriorDescending) {
    const auto P = make_matrix(1, 3, {0.9, 0.1, 0.5});
    const auto result = subject_orderings(P);
    ASSERT_EQ(result.orderings.size(), 1u);
    EXPECT_EQ(result.orderings[0].order, (std::vector<size_t>{0, 2, 1}));
    EXPECT_EQ(result.orderings[0].weights, (std::vector<double>{0.9, 0.5, 0.1}));
}

TEST(SubjectOrderings, TiesBreakByBiomarkerIndex) {
    const auto P = make_matrix(1, 2, {0.4, 0.4});
    const auto result = subject_orderings(P);
    EXPECT_EQ(result.orderings[0].order, (std::vector<size_t>{0, 1}));
}

TEST(SubjectOrderings, MissingEntriesSkipped) {
    const auto P = make_matrix(1, 3, {0.9, 0.0, 0.5}, {0, 1, 0});
    const auto result = subject_orderings(P);
    EXPECT_EQ(result.orderings[0].order, (std::vector<size_t>{0, 2}));
}

TEST(SubjectOrderings, AllMissingSubjectExcludedAndReported) {
    const auto P = make_matrix(2, 2, {0.9, 0.1, 0.0, 0.0}, {0, 0, 1, 1});
    const auto result = subject_orderings(P);
    EXPECT_EQ(result.orderings.size(), 1u);
    EXPECT_EQ(result.excluded, (std::vector<size_t>{1}));
}

// ---------------------------------------------------------------------------
// prob_kendall_distance
// ---------------------------------------------------------------------------

TEST(ProbKendall, AgreementHasZeroDistance) {
    const auto P = make_matrix(1, 4, {0.9, 0.7, 0.4, 0.2});
    const auto subject = subject_orderings(P).orderings[0];
    const std::vector<size_t> S{0, 1, 2, 3};
    EXPECT_DOUBLE_EQ(prob_kendall_distance(subject, S), 0.0);
}

TEST(ProbKendall, SingleDiscordantPairPenalty) {
    // posteriors (0.9, 0.1); S places biomarker 1 before 0 -> one discordant
    // pair with penalty |0.9 - 0.1| = 0.8
    const auto P = make_matrix(1, 2, {0.9, 0.1});
    const auto subject = subject_orderings(P).orderings[0];
    const std::vector<size_t> S{1, 0};
    EXPECT_DOUBLE_EQ(prob_kendall_distance(subject, S), 0.8);
}

TEST(ProbKendall, EqualPosteriorsAlwaysZero) {
    const auto P = make_matrix(1, 3, {0.5, 0.5, 0.5});
    const auto subject = subject_orderings(P).orderings[0];
    std::vector<size_t> S{0, 1, 2};
    do {
        EXPECT_DOUBLE_EQ(prob_kendall_distance(subject, S), 0.0);
    } while (std::next_permutation(S.begin(), S.end()));
}

TEST(ProbKendall, ZeroIffStrictPairsAgree) {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto P = random_matrix(1, 5, 100 + trial);
        const auto subject = subject_orderings(P).orderings[0];
        std::vector<size_t> S(5);
        std::iota(S.begin(), S.end(), size_t{0});
        for (size_t i = 5; i-- > 1;) std::swap(S[i], S[rng.uniform_index(i + 1)]);
        std::vector<size_t> rank(5);
        for (size_t pos = 0; pos < 5; ++pos) rank[S[pos]] = pos;
        bool agree = true;
        for (size_t u = 0; u < subject.order.size() && agree; ++u)
            for (size_t v = u + 1; v < subject.order.size() && agree; ++v)
                if (subject.weights[u] != subject.weights[v] &&
                    rank[subject.order[u]] > rank[subject.order[v]])
                    agree = false;
        EXPECT_EQ(prob_kendall_distance(subject, S) == 0.0, agree);
    }
}

TEST(ProbKendall, MatrixTotalMatchesPerSubjectSum) {
    const auto P = random_matrix(25, 6, 55);
    const auto subjects = subject_orderings(P);
    std::vector<size_t> S{3, 1, 5, 0, 4, 2};
    double sum = 0;
    for (const auto& s : subjects.orderings) sum += prob_kendall_distance(s, S);
    EXPECT_NEAR(total_distance(P, S), sum, 1e-9);
}

// ---------------------------------------------------------------------------
// central_ordering
// ---------------------------------------------------------------------------

TEST(CentralOrdering, SharedStrictOrderIsRecovered) {
    // every subject has the same strictly decreasing posteriors along Q
    const std::vector<size_t> Q{2, 0, 3, 1};
    std::vector<double> row(4);
    for (size_t pos = 0; pos < 4; ++pos) row[Q[pos]] = 0.9 - 0.2 * double(pos);
    std::vector<double> p;
    for (int j = 0; j < 10; ++j) p.insert(p.end(), row.begin(), row.end());
    const auto t = central_ordering(make_matrix(10, 4, p));
    EXPECT_EQ(t.ordering, Q);
    EXPECT_DOUBLE_EQ(t.total_distance, 0.0);
}

TEST(CentralOrdering, MatchesExhaustiveMinimumOnRandomMatrices) {
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = random_matrix(20, 4, 700 + trial);
        const auto greedy = central_ordering(P);
        const auto exact = central_ordering_exhaustive(P);
        EXPECT_NEAR(greedy.total_distance, exact.total_distance, 1e-12)
            << "trial " << trial;
    }
}

TEST(CentralOrdering, SingleSubjectMinimizerIsItsOwnOrdering) {
    const auto P = make_matrix(1, 4, {0.2, 0.9, 0.4, 0.7});
    const auto t = central_ordering(P);
    EXPECT_EQ(t.ordering, (std::vector<size_t>{1, 3, 2, 0}));
    EXPECT_DOUBLE_EQ(t.total_distance, 0.0);
}

TEST(CentralOrdering, SingleSubjectWithMissingExtendsByMeanPosterior) {
    // biomarker 1 missing: the usable part must follow the subject's own
    // order, the missing biomarker lands by its (zero) mean posterior
    const auto P = make_matrix(1, 3, {0.8, 0.0, 0.3}, {0, 1, 0});
    const auto t = central_ordering(P);
    EXPECT_EQ(t.ordering, (std::vector<size_t>{0, 2, 1}));
}

TEST(CentralOrdering, LocallyOptimalUnderAdjacentSwaps) {
    for (int trial = 0; trial < 10; ++trial) {
        const auto P = random_matrix(15, 7, 900 + trial);
        const auto t = central_ordering(P);
        const double base = total_distance(P, t.ordering);
        for (size_t pos = 0; pos + 1 < t.ordering.size(); ++pos) {
            auto neighbor = t.ordering;
            std::swap(neighbor[pos], neighbor[pos + 1]);
            EXPECT_GE(total_distance(P, neighbor), base - 1e-12);
        }
    }
}

TEST(CentralOrdering, NoUsableSubjectsIsError) {
    const auto P = make_matrix(2, 2, {0, 0, 0, 0}, {1, 1, 1, 1});
    EXPECT_THROW(central_ordering(P), ValidationError);
}

TEST(CentralOrdering, DeterministicAcrossCalls) {
    const auto P = random_matrix(30, 6, 123);
    const auto a = central_ordering(P);
    const auto b = central_ordering(P);
    EXPECT_EQ(a.ordering, b.ordering);
    EXPECT_DOUBLE_EQ(a.total_distance, b.total_distance);
}

// ---------------------------------------------------------------------------
// event_centers
// ---------------------------------------------------------------------------

TEST(EventCenters, ThetaBasedEstimatorWithRescale) {
    // thetas along S: (0.9, 0.5, 0.1) -> raw (0.1, 0.5, 0.9), already
    // isotonic, rescaled to [0.25, 0.75]
    const auto P = make_matrix(1, 3, {0.5, 0.5, 0.5});
    const std::vector<size_t> S{0, 1, 2};
    const std::vector<double> thetas{0.9, 0.5, 0.1};
    const auto lambda = event_centers(P, S, thetas);
    ASSERT_EQ(lambda.size(), 3u);
    EXPECT_NEAR(lambda[0], 0.25, 1e-12);
    EXPECT_NEAR(lambda[1], 0.5, 1e-12);
    EXPECT_NEAR(lambda[2], 0.75, 1e-12);
}

TEST(EventCenters, EqualThetasGiveEvenSpacing) {
    const auto P = make_matrix(1, 4, {0.5, 0.5, 0.5, 0.5});
    const std::vector<size_t> S{0, 1, 2, 3};
    const std::vector<double> thetas{0.3, 0.3, 0.3, 0.3};
    const auto lambda = event_centers(P, S, thetas);
    for (size_t q = 0; q < 4; ++q) EXPECT_NEAR(lambda[q], (q + 1) / 5.0, 1e-12);
}

TEST(EventCenters, SingleBiomarkerIsMidpoint) {
    const auto P = make_matrix(1, 1, {0.5});
    const auto lambda = event_centers(P, std::vector<size_t>{0}, std::vector<double>{0.4});
    ASSERT_EQ(lambda.size(), 1u);
    EXPECT_NEAR(lambda[0], 0.5, 1e-12);
}

TEST(EventCenters, NonMonotoneRawIsPooledByIsotonicRegression) {
    // thetas along S: (0.5, 0.7, 0.1) -> raw (0.5, 0.3, 0.9); PAV pools the
    // first two to 0.4 -> (0.4, 0.4, 0.9) -> rescaled (0.25, 0.25, 0.75)
    const auto P = make_matrix(1, 3, {0.5, 0.5, 0.5});
    const std::vector<size_t> S{0, 1, 2};
    const std::vector<double> thetas{0.5, 0.7, 0.1};
    const auto lambda = event_centers(P, S, thetas);
    EXPECT_NEAR(lambda[0], 0.25, 1e-12);
    EXPECT_NEAR(lambda[1], 0.25, 1e-12);
    EXPECT_NEAR(lambda[2], 0.75, 1e-12);
}

TEST(EventCenters, AlwaysInsideUnitIntervalAndMonotone) {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const size_t n = 2 + rng.uniform_index(8);
        std::vector<size_t> S(n);
        std::iota(S.begin(), S.end(), size_t{0});
        for (size_t i = n; i-- > 1;) std::swap(S[i], S[rng.uniform_index(i + 1)]);
        std::vector<double> thetas(n);
        for (double& t : thetas) t = rng.uniform01();
        const auto P = make_matrix(1, n, std::vector<double>(n, 0.5));
        const auto lambda = event_centers(P, S, thetas);
        for (size_t q = 0; q < n; ++q) {
            EXPECT_GT(lambda[q], 0.0);
            EXPECT_LT(lambda[q], 1.0);
            if (q > 0) EXPECT_GE(lambda[q], lambda[q - 1] - 1e-15);
        }
    }
}
