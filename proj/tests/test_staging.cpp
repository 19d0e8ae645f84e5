#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "debm/rng.hpp"
#include "debm/staging.hpp"

using namespace debm;

namespace {

/// Fits whose posteriors are forced to the given values for any input:
/// theta 0 or 1 gives exact 0/1; anything else is realized by centering the
/// abnormal component so the density ratio yields p at x = 0.
std::vector<MixtureFit> fits_with_posteriors(const std::vector<double>& p) {
    std::vector<MixtureFit> fits(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) {
            fits[i].theta = 0.0;
        } else if (p[i] >= 1.0) {
            fits[i].theta = 1.0;
        } else {
            // with equal sigmas and theta = p, posterior at the midpoint of
            // the two means is exactly p... solve instead via the logit:
            // p = 1/(1+exp(-z)) with z = log(theta/(1-theta)) at x where the
            // two densities are equal; place x=0 equidistant to both means
            fits[i].theta = p[i];
            fits[i].gaussians = {-1.0, 1.0, 1.0, 1.0};
        }
    }
    return fits;
}

DiseaseTimeline make_timeline(std::vector<size_t> order, std::vector<double> lambda) {
    DiseaseTimeline t;
    t.ordering = std::move(order);
    t.event_centers = std::move(lambda);
    return t;
}

} // namespace

TEST(StagePosterior, EnumeratedThreeEventExample) {
    // posteriors (0.9, 0.8, 0.2) along S: unnormalized weights
    // (0.1*0.2*0.8, 0.9*0.2*0.8, 0.9*0.8*0.8, 0.9*0.8*0.2)
    //   = (0.016, 0.144, 0.576, 0.144), sum 0.88
    const auto fits = fits_with_posteriors({0.9, 0.8, 0.2});
    const auto t = make_timeline({0, 1, 2}, {0.25, 0.5, 0.75});
    const std::vector<double> x{0, 0, 0};
    const std::vector<uint8_t> missing{0, 0, 0};
    const auto w = stage_posterior(x, missing, t, fits);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_NEAR(w[0], 0.016 / 0.88, 1e-12);
    EXPECT_NEAR(w[1], 0.144 / 0.88, 1e-12);
    EXPECT_NEAR(w[2], 0.576 / 0.88, 1e-12);
    EXPECT_NEAR(w[3], 0.144 / 0.88, 1e-12);
}

TEST(Stage, EnumeratedThreeEventExpectation) {
    // with lambda = (0.25, 0.5, 0.75) the i>=1 expectation works out to
    // exactly 0.5: (0.25+0.75)*(0.144/0.88) + 0.5*(0.576/0.88) over
    // (0.144+0.576+0.144)/0.88
    const auto fits = fits_with_posteriors({0.9, 0.8, 0.2});
    const auto t = make_timeline({0, 1, 2}, {0.25, 0.5, 0.75});
    const std::vector<double> x{0, 0, 0};
    const std::vector<uint8_t> missing{0, 0, 0};
    const auto s = stage(x, missing, t, fits);
    EXPECT_NEAR(s.upsilon, 0.5, 1e-12);
}

TEST(StagePosterior, AllEventsCertainConcentratesAtEnd) {
    const auto fits = fits_with_posteriors({1, 1, 1});
    const auto t = make_timeline({0, 1, 2}, {0.25, 0.5, 0.75});
    const std::vector<double> x{0, 0, 0};
    const std::vector<uint8_t> missing{0, 0, 0};
    const auto w = stage_posterior(x, missing, t, fits);
    EXPECT_DOUBLE_EQ(w[3], 1.0);
    const auto s = stage(x, missing, t, fits);
    EXPECT_DOUBLE_EQ(s.upsilon, 0.75); // lambda(N)
}

TEST(StagePosterior, NoEventsCertainConcentratesAtZero) {
    const auto fits = fits_with_posteriors({0, 0, 0});
    const auto t = make_timeline({0, 1, 2}, {0.25, 0.5, 0.75});
    const std::vector<double> x{0, 0, 0};
    const std::vector<uint8_t> missing{0, 0, 0};
    const auto w = stage_posterior(x, missing, t, fits);
    EXPECT_DOUBLE_EQ(w[0], 1.0);
    const auto s = stage(x, missing, t, fits);
    EXPECT_DOUBLE_EQ(s.upsilon, 0.0); // all-normal convention
}

TEST(Stage, SingleBiomarkerUpsilonIsItsEventCenter) {
    const auto fits = fits_with_posteriors({0.7});
    const auto t = make_timeline({0}, {0.5});
    const std::vector<double> x{0};
    const std::vector<uint8_t> missing{0};
    const auto s = stage(x, missing, t, fits);
    EXPECT_NEAR(s.upsilon, 0.5, 1e-12);
}

TEST(StagePosterior, MissingBiomarkerContributesNeutralFactor) {
    // middle biomarker missing: weights must equal the direct two-factor
    // products with the missing position contributing 1 to both sides
    const auto fits = fits_with_posteriors({0.9, 0.5, 0.2});
    const auto t = make_timeline({0, 1, 2}, {0.25, 0.5, 0.75});
    const std::vector<double> x{0, 0, 0};
    const std::vector<uint8_t> missing{0, 1, 0};
    const auto w = stage_posterior(x, missing, t, fits);
    const double raw[4] = {0.1 * 0.8, 0.9 * 0.8, 0.9 * 0.8, 0.9 * 0.2};
    const double sum = raw[0] + raw[1] + raw[2] + raw[3];
    for (size_t i = 0; i < 4; ++i) EXPECT_NEAR(w[i], raw[i] / sum, 1e-12);
}

TEST(StagePosterior, ContradictoryCertainPosteriorsCannotBeStaged) {
    // p = 0 for the first event in S, p = 1 for the second: every stage
    // weight is exactly zero
    const auto fits = fits_with_posteriors({0, 1});
    const auto t = make_timeline({0, 1}, {1.0 / 3, 2.0 / 3});
    const std::vector<double> x{0, 0};
    const std::vector<uint8_t> missing{0, 0};
    EXPECT_THROW(stage_posterior(x, missing, t, fits), StagingError);
}

TEST(StagePosterior, NormalizesToOne) {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 1 + rng.uniform_index(10);
        std::vector<double> p(n);
        for (double& v : p) v = rng.uniform01();
        const auto fits = fits_with_posteriors(p);
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::vector<double> lambda(n);
        for (size_t q = 0; q < n; ++q) lambda[q] = (q + 1.0) / (n + 1.0);
        const auto t = make_timeline(order, lambda);
        const std::vector<double> x(n, 0.0);
        const std::vector<uint8_t> missing(n, 0);
        const auto w = stage_posterior(x, missing, t, fits);
        double sum = 0;
        for (double v : w) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Stage, RaisingOnePosteriorNeverLowersUpsilon) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 2 + rng.uniform_index(6);
        std::vector<double> p(n);
        for (double& v : p) v = 0.05 + 0.9 * rng.uniform01();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::vector<double> lambda(n);
        for (size_t q = 0; q < n; ++q) lambda[q] = (q + 1.0) / (n + 1.0);
        const auto t = make_timeline(order, lambda);
        const std::vector<double> x(n, 0.0);
        const std::vector<uint8_t> missing(n, 0);

        const double base =
            stage(x, missing, t, fits_with_posteriors(p)).upsilon;
        const size_t raise = rng.uniform_index(n);
        auto p2 = p;
        p2[raise] = p[raise] + (1.0 - p[raise]) * rng.uniform01();
        const double raised =
            stage(x, missing, t, fits_with_posteriors(p2)).upsilon;
        EXPECT_GE(raised, base - 1e-12);
    }
}
