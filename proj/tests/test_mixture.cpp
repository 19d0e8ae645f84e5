#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "debm/mixture.hpp"
#include "debm/rng.hpp"
#include "test_util.hpp"

using namespace debm;
using testutil::DatasetBuilder;

namespace {

std::vector<std::pair<int, BiomarkerDataset>>
one_group(const BiomarkerDataset& ds, int id = 1) {
    return {{id, ds}};
}

/// Two-diagnosis synthetic group: CN around mu_n, AD around mu_a, MCI mixed.
BiomarkerDataset gaussian_group(uint64_t seed, int n_cn, int n_mci, int n_ad,
                                double mu_n, double mu_a, double sigma) {
    Rng rng(seed);
    DatasetBuilder b({"x"});
    int j = 0;
    for (int i = 0; i < n_cn; ++i)
        b.subject("c" + std::to_string(j++), Diagnosis::CN, {rng.normal(mu_n, sigma)});
    for (int i = 0; i < n_mci; ++i)
        b.subject("m" + std::to_string(j++), Diagnosis::MCI,
                  {rng.normal(i % 2 == 0 ? mu_n : mu_a, sigma)});
    for (int i = 0; i < n_ad; ++i)
        b.subject("a" + std::to_string(j++), Diagnosis::AD, {rng.normal(mu_a, sigma)});
    return b.build();
}

bool fits_identical(const MixtureFit& a, const MixtureFit& b) {
    return a.gaussians.mu_normal == b.gaussians.mu_normal &&
           a.gaussians.sigma_normal == b.gaussians.sigma_normal &&
           a.gaussians.mu_abnormal == b.gaussians.mu_abnormal &&
           a.gaussians.sigma_abnormal == b.gaussians.sigma_abnormal &&
           a.theta == b.theta && a.converged == b.converged &&
           a.iterations == b.iterations;
}

} // namespace

// ---------------------------------------------------------------------------
// init_truncated
// ---------------------------------------------------------------------------

TEST(InitTruncated, NoOverlapUsesPlainStats) {
    const std::vector<double> cn{1, 2, 3}, ad{10, 11, 12};
    const auto g = init_truncated(cn, ad);
    EXPECT_DOUBLE_EQ(g.mu_normal, 2.0);
    EXPECT_DOUBLE_EQ(g.sigma_normal, 1.0); // sample std of {1,2,3}
    EXPECT_DOUBLE_EQ(g.mu_abnormal, 11.0);
    EXPECT_DOUBLE_EQ(g.sigma_abnormal, 1.0);
}

TEST(InitTruncated, OverlapTruncatesBothSides) {
    // overlap region [2.5, 9]: normal side keeps CN <= 2.5 -> {1,2},
    // abnormal side keeps AD >= 9 -> {10,11,12}
    const std::vector<double> cn{1, 2, 3, 9}, ad{2.5, 10, 11, 12};
    const auto g = init_truncated(cn, ad);
    EXPECT_DOUBLE_EQ(g.mu_normal, 1.5);
    EXPECT_NEAR(g.sigma_normal, 0.7071067811865476, 1e-15); // sample std of {1,2}
    EXPECT_DOUBLE_EQ(g.mu_abnormal, 11.0);
    EXPECT_DOUBLE_EQ(g.sigma_abnormal, 1.0);
}

TEST(InitTruncated, IdenticalValuesAreDegenerate) {
    const std::vector<double> v{5, 5, 5, 5};
    EXPECT_THROW(init_truncated(v, v), FitError);
}

TEST(InitTruncated, HeavyOverlapFallsBackToExtremeHalves) {
    // truncation leaves <2 CN values (only one CN <= min(ad) = 1.5), so the
    // normal side falls back to the lowest half of CN = {1, 2}
    const std::vector<double> cn{1, 2, 3, 4}, ad{1.5, 8, 9, 10};
    const auto g = init_truncated(cn, ad);
    EXPECT_DOUBLE_EQ(g.mu_normal, 1.5);
    // abnormal side: AD >= max(cn) = 4 -> {8, 9, 10}
    EXPECT_DOUBLE_EQ(g.mu_abnormal, 9.0);
    EXPECT_LE(g.mu_normal, g.mu_abnormal);
}

// ---------------------------------------------------------------------------
// posterior
// ---------------------------------------------------------------------------

TEST(Posterior, MidpointWithEqualSigmasIsHalf) {
    MixtureFit fit;
    fit.gaussians = {0.0, 1.0, 6.0, 1.0};
    fit.theta = 0.5;
    EXPECT_NEAR(posterior(3.0, fit), 0.5, 1e-12);
}

TEST(Posterior, PriorOneForcesPosteriorOne) {
    MixtureFit fit;
    fit.gaussians = {0.0, 1.0, 6.0, 1.0};
    fit.theta = 1.0;
    for (double x : {-10.0, 0.0, 3.0, 100.0}) EXPECT_DOUBLE_EQ(posterior(x, fit), 1.0);
    fit.theta = 0.0;
    for (double x : {-10.0, 0.0, 3.0, 100.0}) EXPECT_DOUBLE_EQ(posterior(x, fit), 0.0);
}

TEST(Posterior, FarTailMatchesDensityRatio) {
    MixtureFit fit;
    fit.gaussians = {0.0, 1.0, 6.0, 1.0};
    fit.theta = 0.5;
    // at x=0 the density ratio gives p = 1 / (1 + e^{18})
    const double expected = 1.0 / (1.0 + std::exp(18.0));
    EXPECT_NEAR(posterior(0.0, fit), expected, 1e-12 * expected);
}

TEST(Posterior, MonotoneInValueForEqualSigmas) {
    MixtureFit fit;
    fit.gaussians = {0.0, 0.7, 4.0, 0.7};
    fit.theta = 0.3;
    double prev = -1;
    for (double x = -5; x <= 9; x += 0.05) {
        const double p = posterior(x, fit);
        EXPECT_GE(p, prev);
        prev = p;
    }
}

TEST(Posterior, ExtremeUnderflowStaysClamped) {
    MixtureFit fit;
    fit.gaussians = {0.0, 1.0, 1000.0, 1.0};
    fit.theta = 0.5;
    EXPECT_GE(posterior(0.0, fit), 1e-300);
    EXPECT_LE(posterior(1000.0, fit), 1.0 - 1e-16);
}

// ---------------------------------------------------------------------------
// optimize_alternating
// ---------------------------------------------------------------------------

TEST(OptimizeAlternating, NoFreeParametersReturnsInit) {
    const GaussianPair init{0.0, 1.0, 6.0, 1.0};
    const std::vector<double> values{0.1, 0.2, 5.9, 6.1};
    const auto fit = optimize_alternating(values, init, 0.4, FreeParams{false, false});
    EXPECT_DOUBLE_EQ(fit.gaussians.mu_normal, 0.0);
    EXPECT_DOUBLE_EQ(fit.gaussians.mu_abnormal, 6.0);
    EXPECT_DOUBLE_EQ(fit.theta, 0.4);
    EXPECT_TRUE(fit.converged);
    EXPECT_EQ(fit.iterations, 0);
}

TEST(OptimizeAlternating, ThetaOnlyDrivesToOneWhenAllValuesAbnormal) {
    // every value sits at the abnormal mean of a well-separated init; the EM
    // update sets theta to the mean responsibility, which is ~1 immediately
    const GaussianPair init{0.0, 1.0, 8.0, 1.0};
    const std::vector<double> values(50, 8.0);
    const auto fit = optimize_alternating(values, init, 0.5, FreeParams{false, true});
    EXPECT_GT(fit.theta, 0.999);
    EXPECT_DOUBLE_EQ(fit.gaussians.mu_normal, 0.0); // untouched
}

TEST(OptimizeAlternating, RecoversWellSeparatedMixture) {
    Rng rng(2024);
    std::vector<double> values;
    for (int i = 0; i < 500; ++i) values.push_back(rng.normal(0.0, 1.0));
    for (int i = 0; i < 500; ++i) values.push_back(rng.normal(6.0, 1.0));
    const GaussianPair init{0.0, 1.0, 6.0, 1.0};
    const auto fit = optimize_alternating(values, init, 0.5, FreeParams{});
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.gaussians.mu_normal, 0.0, 0.15);
    EXPECT_NEAR(fit.gaussians.mu_abnormal, 6.0, 0.15);
    EXPECT_NEAR(fit.theta, 0.5, 0.05);
}

TEST(OptimizeAlternating, LogLikelihoodNeverDecreases) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> values;
        const double sep = 1.0 + 0.5 * trial;
        for (int i = 0; i < 80; ++i) values.push_back(rng.normal(0.0, 1.0));
        for (int i = 0; i < 40; ++i) values.push_back(rng.normal(sep, 1.2));
        const GaussianPair init{0.0, 1.0, sep, 1.0};
        const auto fit = optimize_alternating(values, init, 0.3, FreeParams{});
        for (size_t k = 1; k < fit.loglik_trace.size(); ++k) {
            const double prev = fit.loglik_trace[k - 1];
            const double tol = 1e-9 * std::abs(prev);
            EXPECT_GE(fit.loglik_trace[k], prev - tol)
                << "trial " << trial << " iteration " << k;
        }
    }
}

// ---------------------------------------------------------------------------
// fitting strategies
// ---------------------------------------------------------------------------

TEST(FitStrategies, SingleGroupReducesIdentically) {
    const auto ds = gaussian_group(11, 30, 20, 30, 0.0, 4.0, 0.8);
    const auto groups = one_group(ds);
    const auto indep = fit_independent(groups);
    const auto coupled = fit_coupled(groups);
    const auto coinit = fit_coinit(groups);
    ASSERT_EQ(indep.fits.size(), 1u);
    EXPECT_TRUE(fits_identical(indep.fits[0][0], coupled.fits[0][0]));
    EXPECT_TRUE(fits_identical(indep.fits[0][0], coinit.fits[0][0]));
}

TEST(FitIndependent, MatchesSeparateSingleGroupFits) {
    const auto g1 = gaussian_group(21, 25, 10, 25, 0.0, 5.0, 0.7);
    const auto g2 = gaussian_group(22, 25, 10, 25, 100.0, 110.0, 1.5);
    const auto both = fit_independent({{1, g1}, {2, g2}});
    const auto alone1 = fit_independent(one_group(g1));
    const auto alone2 = fit_independent(one_group(g2, 2));
    EXPECT_TRUE(fits_identical(both.fits[0][0], alone1.fits[0][0]));
    EXPECT_TRUE(fits_identical(both.fits[1][0], alone2.fits[0][0]));
}

TEST(FitIndependent, IdenticalGroupsGetIdenticalFits) {
    const auto g = gaussian_group(31, 20, 15, 20, 0.0, 3.0, 0.6);
    const auto set = fit_independent({{1, g}, {2, g}});
    EXPECT_TRUE(fits_identical(set.fits[0][0], set.fits[1][0]));
}

TEST(FitCoupled, SharesGaussiansRecoversPerGroupTheta) {
    // same two components in both groups but very different mixing: group 1
    // mostly normal, group 2 mostly abnormal
    Rng rng(2025);
    auto make_group = [&](double theta, int n) {
        DatasetBuilder b({"x"});
        int cn = 0, ad = 0, j = 0;
        for (int i = 0; i < n; ++i) {
            const bool abnormal = rng.uniform01() < theta;
            const double v = rng.normal(abnormal ? 6.0 : 0.0, 1.0);
            Diagnosis dx = Diagnosis::MCI;
            // keep a few clean labels so initialization has CN/AD support
            if (!abnormal && cn < n / 4) { dx = Diagnosis::CN; ++cn; }
            else if (abnormal && ad < n / 4) { dx = Diagnosis::AD; ++ad; }
            b.subject("s" + std::to_string(j++), dx, {v});
        }
        return b.build();
    };
    const auto g1 = make_group(0.3, 1000);
    const auto g2 = make_group(0.7, 1000);
    const auto set = fit_coupled({{1, g1}, {2, g2}});
    // Gaussian parameters are bit-identical across groups
    EXPECT_EQ(set.fits[0][0].gaussians.mu_normal, set.fits[1][0].gaussians.mu_normal);
    EXPECT_EQ(set.fits[0][0].gaussians.sigma_abnormal,
              set.fits[1][0].gaussians.sigma_abnormal);
    EXPECT_NEAR(set.fits[0][0].gaussians.mu_normal, 0.0, 0.15);
    EXPECT_NEAR(set.fits[0][0].gaussians.mu_abnormal, 6.0, 0.15);
    EXPECT_NEAR(set.fits[0][0].theta, 0.3, 0.05);
    EXPECT_NEAR(set.fits[1][0].theta, 0.7, 0.05);
}

TEST(FitCoinit, IdenticalGroupsGetIdenticalFits) {
    const auto g = gaussian_group(41, 25, 10, 25, 0.0, 4.0, 0.7);
    const auto set = fit_coinit({{1, g}, {2, g}});
    EXPECT_TRUE(fits_identical(set.fits[0][0], set.fits[1][0]));
}

TEST(FitCoinit, InitializationComesFromPooledData) {
    const auto g1 = gaussian_group(51, 25, 10, 25, 0.0, 4.0, 0.7);
    const auto g2 = gaussian_group(52, 25, 10, 25, 0.5, 4.5, 0.7);
    const auto set = fit_coinit({{1, g1}, {2, g2}});

    // re-run the init on the pooled CN/AD values and replay the per-group
    // optimization by hand; fit_coinit must match it exactly
    std::vector<double> cn, ad, pooled_all;
    for (const auto* g : {&g1, &g2})
        for (const auto& s : g->subjects) {
            pooled_all.push_back(s.values[0]);
            if (s.diagnosis == Diagnosis::CN) cn.push_back(s.values[0]);
            if (s.diagnosis == Diagnosis::AD) ad.push_back(s.values[0]);
        }
    const auto init = init_truncated(cn, ad);
    const auto bounds = derive_bounds(init, cn, ad, pooled_all);
    size_t gi = 0;
    for (const auto* g : {&g1, &g2}) {
        std::vector<double> values;
        for (const auto& s : g->subjects) values.push_back(s.values[0]);
        const auto replay =
            optimize_alternating(values, init, theta_init(values, init), FreeParams{}, &bounds);
        EXPECT_TRUE(fits_identical(replay, set.fits[gi][0])) << "group " << gi + 1;
        ++gi;
    }
}

TEST(FitStrategies, ErrorsAreTaggedWithGroupAndBiomarker) {
    // group 2's biomarker is constant -> degenerate init
    DatasetBuilder b2({"x"});
    for (int i = 0; i < 4; ++i)
        b2.subject("c" + std::to_string(i), i < 2 ? Diagnosis::CN : Diagnosis::AD, {5.0});
    const auto g1 = gaussian_group(61, 10, 5, 10, 0.0, 4.0, 0.7);
    try {
        fit_independent({{1, g1}, {2, b2.build()}});
        FAIL() << "expected FitError";
    } catch (const FitError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("group 2"), std::string::npos);
        EXPECT_NE(msg.find("'x'"), std::string::npos);
    }
}

TEST(FitCoupled, EmptyGroupListIsError) {
    EXPECT_THROW(fit_coupled({}), ValidationError);
}

TEST(ThetaInit, CountsValuesCloserToAbnormal) {
    const GaussianPair g{0.0, 1.0, 10.0, 1.0};
    const std::vector<double> values{0, 1, 2, 9, 10}; // two closer to abnormal
    EXPECT_NEAR(theta_init(values, g), 0.4, 1e-12);
}
