#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "debm/dataset.hpp"
#include "debm/error.hpp"

namespace debm {

/// Normal/abnormal component parameters of one biomarker, in sign-normalized
/// units (abnormal mean >= normal mean by construction).
struct GaussianPair {
    double mu_normal = 0;
    double sigma_normal = 1;
    double mu_abnormal = 0;
    double sigma_abnormal = 1;
};

/// One fitted two-component mixture: Gaussians plus the mixing fraction of
/// the abnormal component (the event prior). `loglik_trace` holds the data
/// log-likelihood before iteration 1 and after each alternating iteration;
/// it is kept in memory for diagnostics and monotonicity checks but is not
/// serialized.
struct MixtureFit {
    GaussianPair gaussians;
    double theta = 0.5;
    bool converged = false;
    int iterations = 0;
    std::vector<double> loglik_trace;
};

/// Per-biomarker fits for each group, fits[g][i] aligned with group_ids[g]
/// and biomarker_names[i].
struct MixtureSet {
    std::vector<std::string> biomarker_names;
    std::vector<int> group_ids;
    std::vector<std::vector<MixtureFit>> fits;
};

enum class Strategy { independent, coupled, coinit };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::independent: return "independent";
        case Strategy::coupled: return "coupled";
        case Strategy::coinit: return "coinit";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "independent") return Strategy::independent;
    if (s == "coupled") return Strategy::coupled;
    if (s == "coinit") return Strategy::coinit;
    throw ConfigError("unknown strategy: '" + s + "'");
}

/// Which parameter blocks the alternating optimizer may update.
struct FreeParams {
    bool gaussians = true;
    bool theta = true;
};

/// Box constraints applied after each M-step so that label noise cannot let
/// one component swallow the other.
struct MixtureBounds {
    double mu_normal_lo, mu_normal_hi;
    double mu_abnormal_lo, mu_abnormal_hi;
    double sigma_lo, sigma_hi;
};

namespace detail {

inline double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n-1 denominator), 0 for n < 2.
inline double sample_std(std::span<const double> v) {
    const size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

/// Population standard deviation (n denominator).
inline double population_std(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

inline double log_normal_pdf(double x, double mu, double sigma) {
    static constexpr double half_log_2pi = 0.9189385332046727; // 0.5*ln(2*pi)
    const double z = (x - mu) / sigma;
    return -half_log_2pi - std::log(sigma) - 0.5 * z * z;
}

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

} // namespace detail

/// Initializes the normal/abnormal Gaussians from CN and AD values by
/// truncating the overlapping tails: with overlap present, normal stats come
/// from CN values <= min(AD) and abnormal stats from AD values >= max(CN).
/// A side left with fewer than 2 points falls back to the 50% most extreme
/// untruncated values of that side for its mean; the fallback sigma comes
/// from the full side, since the extreme-half spread is shrunken by
/// construction and a too-tight init lets the other component swallow this
/// one during optimization. Standard deviations are floored at 1e-6 x the
/// combined value range.
inline GaussianPair init_truncated(std::span<const double> cn_values,
                                   std::span<const double> ad_values) {
    if (cn_values.size() < 2 || ad_values.size() < 2)
        throw FitError("mixture init needs >=2 CN and >=2 AD values");

    std::vector<double> cn(cn_values.begin(), cn_values.end());
    std::vector<double> ad(ad_values.begin(), ad_values.end());
    std::sort(cn.begin(), cn.end());
    std::sort(ad.begin(), ad.end());

    const double global_lo = std::min(cn.front(), ad.front());
    const double global_hi = std::max(cn.back(), ad.back());
    const double sigma_floor = 1e-6 * (global_hi - global_lo);

    // 50% most extreme values: lowest half for the normal side, highest half
    // for the abnormal side, never fewer than 2 points
    auto fallback_low = [](const std::vector<double>& v) {
        const size_t k = std::max<size_t>(2, (v.size() + 1) / 2);
        return std::vector<double>(v.begin(), v.begin() + k);
    };
    auto fallback_high = [](const std::vector<double>& v) {
        const size_t k = std::max<size_t>(2, (v.size() + 1) / 2);
        return std::vector<double>(v.end() - k, v.end());
    };

    // a truncated side is unusable when it has fewer than 2 points or no
    // real spread relative to its full side (duplicated resampled subjects
    // can leave 2+ copies of one extreme value, and a near-delta init pins
    // the bounds and flips the component roles during optimization)
    auto side_degenerate = [](const std::vector<double>& side,
                              const std::vector<double>& full) {
        return side.size() < 2 ||
               detail::sample_std(side) < 1e-3 * detail::sample_std(full);
    };

    std::vector<double> normal_side = cn;
    std::vector<double> abnormal_side = ad;
    bool normal_fell_back = false, abnormal_fell_back = false;
    if (cn.back() > ad.front()) { // overlapping tails
        normal_side.clear();
        for (double x : cn)
            if (x <= ad.front()) normal_side.push_back(x);
        abnormal_side.clear();
        for (double x : ad)
            if (x >= cn.back()) abnormal_side.push_back(x);
        if (side_degenerate(normal_side, cn)) {
            normal_side = fallback_low(cn);
            normal_fell_back = true;
        }
        if (side_degenerate(abnormal_side, ad)) {
            abnormal_side = fallback_high(ad);
            abnormal_fell_back = true;
        }
    }

    GaussianPair g;
    g.mu_normal = detail::mean_of(normal_side);
    g.sigma_normal = std::max(
        normal_fell_back ? detail::sample_std(cn) : detail::sample_std(normal_side),
        sigma_floor);
    g.mu_abnormal = detail::mean_of(abnormal_side);
    g.sigma_abnormal = std::max(
        abnormal_fell_back ? detail::sample_std(ad) : detail::sample_std(abnormal_side),
        sigma_floor);
    if (g.sigma_normal <= 0 || g.sigma_abnormal <= 0)
        throw FitError("degenerate mixture init: zero spread");
    return g;
}

/// Posterior event probability p(E|x): abnormal-component density weighted
/// by the mixing prior, computed in log space. theta of exactly 0 or 1
/// forces the posterior to exactly 0 or 1; otherwise the result is clamped
/// to [1e-300, 1 - 1e-16] so downstream staging products never hit hard
/// zeros from rounding alone.
inline double posterior(double x, const MixtureFit& fit) {
    if (fit.theta >= 1.0) return 1.0;
    if (fit.theta <= 0.0) return 0.0;
    const GaussianPair& g = fit.gaussians;
    const double la = std::log(fit.theta) +
                      detail::log_normal_pdf(x, g.mu_abnormal, g.sigma_abnormal);
    const double lb = std::log1p(-fit.theta) +
                      detail::log_normal_pdf(x, g.mu_normal, g.sigma_normal);
    const double p = std::exp(la - detail::log_add_exp(la, lb));
    return std::clamp(p, 1e-300, 1.0 - 1e-16);
}

/// Data-driven starting value for the mixing fraction: the fraction of
/// values closer in z-score to the abnormal init component, clamped to
/// [0.01, 0.99] so the EM iteration starts strictly interior.
inline double theta_init(std::span<const double> values, const GaussianPair& g) {
    size_t abnormal = 0;
    for (double x : values) {
        const double za = std::abs(x - g.mu_abnormal) / g.sigma_abnormal;
        const double zn = std::abs(x - g.mu_normal) / g.sigma_normal;
        if (za < zn) ++abnormal;
    }
    const double frac = values.empty()
                            ? 0.5
                            : static_cast<double>(abnormal) / static_cast<double>(values.size());
    return std::clamp(frac, 0.01, 0.99);
}

/// Bounds derived from the initialization data: means are confined to
/// [min CN, init mu_normal + init sigma_normal] and the mirror-image window
/// on the AD side; sigmas to [1e-3, 2] x the pooled std of all fitted values.
inline MixtureBounds derive_bounds(const GaussianPair& init,
                                   std::span<const double> cn_values,
                                   std::span<const double> ad_values,
                                   std::span<const double> all_values) {
    const double pooled = detail::population_std(all_values);
    MixtureBounds b;
    b.mu_normal_lo = *std::min_element(cn_values.begin(), cn_values.end());
    b.mu_normal_hi = init.mu_normal + init.sigma_normal;
    b.mu_abnormal_lo = init.mu_abnormal - init.sigma_abnormal;
    b.mu_abnormal_hi = *std::max_element(ad_values.begin(), ad_values.end());
    b.sigma_lo = 1e-3 * pooled;
    b.sigma_hi = 2.0 * pooled;
    // keep the boxes non-empty even for degenerate inits
    b.mu_normal_hi = std::max(b.mu_normal_hi, b.mu_normal_lo);
    b.mu_abnormal_lo = std::min(b.mu_abnormal_lo, b.mu_abnormal_hi);
    b.sigma_hi = std::max(b.sigma_hi, b.sigma_lo);
    return b;
}

/// Fallback bounds when no CN/AD split is available (direct calls): the
/// extremes of the fitted values stand in for the CN minimum / AD maximum.
inline MixtureBounds derive_bounds(const GaussianPair& init,
                                   std::span<const double> all_values) {
    return derive_bounds(init, all_values, all_values, all_values);
}

namespace detail {

struct SharedEmResult {
    GaussianPair gaussians;
    std::vector<double> thetas;
    bool converged = false;
    int iterations = 0;
    std::vector<double> loglik_trace;
};

inline double mixture_loglik(const std::vector<std::span<const double>>& groups,
                             const GaussianPair& g, const std::vector<double>& thetas) {
    double ll = 0;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const double th = thetas[gi];
        const double log_th = th > 0 ? std::log(th) : -std::numeric_limits<double>::infinity();
        const double log_1mth = th < 1 ? std::log1p(-th) : -std::numeric_limits<double>::infinity();
        for (double x : groups[gi]) {
            const double la = log_th + log_normal_pdf(x, g.mu_abnormal, g.sigma_abnormal);
            const double lb = log_1mth + log_normal_pdf(x, g.mu_normal, g.sigma_normal);
            ll += log_add_exp(la, lb);
        }
    }
    return ll;
}

/// Alternating bounded EM over one biomarker with the Gaussian parameters
/// shared across all supplied groups and one mixing fraction per group.
/// Each iteration runs (a) one responsibility-weighted Gaussian update with
/// the thetas fixed, projected onto the bounds, then (b) a closed-form
/// per-group theta update with the Gaussians fixed. Convergence is reached
/// when every free parameter moves less than `tol` relative to its scale.
///
/// The single-group strategies call this with one group, so a G=1 dataset
/// takes a bit-identical path through all three fitting strategies.
inline SharedEmResult em_shared(const std::vector<std::span<const double>>& groups,
                                const GaussianPair& init, std::vector<double> thetas,
                                const MixtureBounds& bounds, FreeParams free_params,
                                double tol = 1e-4, int max_iterations = 200) {
    for (const auto& g : groups)
        if (g.empty()) throw FitError("empty group in mixture optimization");
    if (groups.size() != thetas.size())
        throw FitError("theta count does not match group count");
    for (double th : thetas)
        if (!(th >= 0.0 && th <= 1.0)) throw FitError("theta outside [0,1]");

    SharedEmResult res;
    res.gaussians = init;
    res.thetas = std::move(thetas);
    if (!free_params.gaussians && !free_params.theta) {
        res.converged = true;
        return res;
    }

    // parameter scale for the relative convergence test
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const double value_scale = std::max(population_std(pooled), 1e-30);

    auto responsibility = [](double x, const GaussianPair& g, double th) {
        if (th >= 1.0) return 1.0;
        if (th <= 0.0) return 0.0;
        const double la = std::log(th) + log_normal_pdf(x, g.mu_abnormal, g.sigma_abnormal);
        const double lb = std::log1p(-th) + log_normal_pdf(x, g.mu_normal, g.sigma_normal);
        return std::exp(la - log_add_exp(la, lb));
    };

    res.loglik_trace.push_back(mixture_loglik(groups, res.gaussians, res.thetas));
    if (!std::isfinite(res.loglik_trace.back()))
        throw FitError("mixture log-likelihood is not finite at initialization");

    for (int iter = 1; iter <= max_iterations; ++iter) {
        const GaussianPair prev_g = res.gaussians;
        const std::vector<double> prev_th = res.thetas;

        if (free_params.gaussians) {
            // weighted sufficient statistics pooled over all groups, each
            // group's responsibilities taken under its own theta
            double wa = 0, wa_x = 0, wa_xx = 0; // abnormal component
            double wn = 0, wn_x = 0, wn_xx = 0; // normal component
            for (size_t gi = 0; gi < groups.size(); ++gi) {
                for (double x : groups[gi]) {
                    const double r = responsibility(x, res.gaussians, res.thetas[gi]);
                    wa += r;
                    wa_x += r * x;
                    wa_xx += r * x * x;
                    const double q = 1.0 - r;
                    wn += q;
                    wn_x += q * x;
                    wn_xx += q * x * x;
                }
            }
            // clamped mean first, then the spread around the clamped mean:
            // this keeps the projected M-step an exact constrained maximizer,
            // which preserves the EM monotonicity guarantee
            if (wa > 1e-300) {
                const double mu = std::clamp(wa_x / wa, bounds.mu_abnormal_lo,
                                             bounds.mu_abnormal_hi);
                const double var = std::max(0.0, wa_xx / wa - 2.0 * mu * (wa_x / wa) + mu * mu);
                res.gaussians.mu_abnormal = mu;
                res.gaussians.sigma_abnormal =
                    std::clamp(std::sqrt(var), bounds.sigma_lo, bounds.sigma_hi);
            }
            if (wn > 1e-300) {
                const double mu = std::clamp(wn_x / wn, bounds.mu_normal_lo,
                                             bounds.mu_normal_hi);
                const double var = std::max(0.0, wn_xx / wn - 2.0 * mu * (wn_x / wn) + mu * mu);
                res.gaussians.mu_normal = mu;
                res.gaussians.sigma_normal =
                    std::clamp(std::sqrt(var), bounds.sigma_lo, bounds.sigma_hi);
            }
        }

        if (free_params.theta) {
            for (size_t gi = 0; gi < groups.size(); ++gi) {
                double sum = 0;
                for (double x : groups[gi])
                    sum += responsibility(x, res.gaussians, res.thetas[gi]);
                res.thetas[gi] = sum / static_cast<double>(groups[gi].size());
            }
        }

        res.iterations = iter;
        res.loglik_trace.push_back(mixture_loglik(groups, res.gaussians, res.thetas));
        if (!std::isfinite(res.loglik_trace.back()))
            throw FitError("mixture log-likelihood became non-finite");

        double delta = 0;
        if (free_params.gaussians) {
            delta = std::max({delta,
                              std::abs(res.gaussians.mu_normal - prev_g.mu_normal) / value_scale,
                              std::abs(res.gaussians.sigma_normal - prev_g.sigma_normal) / value_scale,
                              std::abs(res.gaussians.mu_abnormal - prev_g.mu_abnormal) / value_scale,
                              std::abs(res.gaussians.sigma_abnormal - prev_g.sigma_abnormal) / value_scale});
        }
        if (free_params.theta)
            for (size_t gi = 0; gi < groups.size(); ++gi)
                delta = std::max(delta, std::abs(res.thetas[gi] - prev_th[gi]));
        if (delta < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace detail

/// Alternating GMM optimization of a single biomarker on one value list.
/// Non-convergence within the iteration cap is reported via the flag, not
/// treated as an error.
inline MixtureFit optimize_alternating(std::span<const double> values,
                                       const GaussianPair& init, double theta0,
                                       FreeParams free_params,
                                       const MixtureBounds* bounds = nullptr) {
    if (values.empty()) throw FitError("no values to fit");
    const MixtureBounds b = bounds ? *bounds : derive_bounds(init, values);
    auto r = detail::em_shared({values}, init, {theta0}, b, free_params);
    MixtureFit fit;
    fit.gaussians = r.gaussians;
    fit.theta = r.thetas[0];
    fit.converged = r.converged;
    fit.iterations = r.iterations;
    fit.loglik_trace = std::move(r.loglik_trace);
    return fit;
}

namespace detail {

struct BiomarkerColumns {
    std::vector<double> cn, ad, all;
};

inline BiomarkerColumns collect_columns(const BiomarkerDataset& ds, size_t i) {
    BiomarkerColumns c;
    for (const Subject& s : ds.subjects) {
        if (s.missing[i]) continue;
        c.all.push_back(s.values[i]);
        if (s.diagnosis == Diagnosis::CN) c.cn.push_back(s.values[i]);
        else if (s.diagnosis == Diagnosis::AD) c.ad.push_back(s.values[i]);
    }
    return c;
}

inline void check_groups(const std::vector<std::pair<int, BiomarkerDataset>>& groups) {
    if (groups.empty()) throw ValidationError("no groups to fit");
    const auto& names = groups.front().second.biomarker_names;
    for (const auto& [id, g] : groups) {
        try {
            validate(g);
        } catch (const ValidationError& e) {
            throw ValidationError("group " + std::to_string(id) + ": " + e.what());
        }
        if (g.biomarker_names != names)
            throw ValidationError("groups disagree on biomarker names");
    }
}

template <typename Fn>
inline auto with_fit_context(int group_id, const std::string& biomarker, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw FitError("group " + std::to_string(group_id) + ", biomarker '" +
                       biomarker + "': " + e.what());
    }
}

} // namespace detail

/// Approach 1: every group is fitted as an independent dataset
/// (initialization and optimization both group-specific).
inline MixtureSet fit_independent(const std::vector<std::pair<int, BiomarkerDataset>>& groups) {
    detail::check_groups(groups);
    MixtureSet set;
    set.biomarker_names = groups.front().second.biomarker_names;
    set.fits.resize(groups.size());
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& [id, g] = groups[gi];
        set.group_ids.push_back(id);
        for (size_t i = 0; i < set.biomarker_names.size(); ++i) {
            set.fits[gi].push_back(detail::with_fit_context(id, set.biomarker_names[i], [&] {
                const auto cols = detail::collect_columns(g, i);
                const GaussianPair init = init_truncated(cols.cn, cols.ad);
                const MixtureBounds b = derive_bounds(init, cols.cn, cols.ad, cols.all);
                return optimize_alternating(cols.all, init, theta_init(cols.all, init),
                                            FreeParams{}, &b);
            }));
        }
    }
    return set;
}

/// Approach 2: one jointly initialized and jointly optimized Gaussian pair
/// per biomarker, shared by all groups, with a group-specific mixing
/// fraction. The shared Gaussian update maximizes the summed log-likelihood
/// over all groups, each group weighted through its own theta.
inline MixtureSet fit_coupled(const std::vector<std::pair<int, BiomarkerDataset>>& groups) {
    detail::check_groups(groups);
    MixtureSet set;
    set.biomarker_names = groups.front().second.biomarker_names;
    set.fits.resize(groups.size());
    for (const auto& [id, g] : groups) set.group_ids.push_back(id);

    for (size_t i = 0; i < set.biomarker_names.size(); ++i) {
        std::vector<detail::BiomarkerColumns> cols;
        detail::BiomarkerColumns pooled;
        for (const auto& [id, g] : groups) {
            cols.push_back(detail::collect_columns(g, i));
            const auto& c = cols.back();
            pooled.cn.insert(pooled.cn.end(), c.cn.begin(), c.cn.end());
            pooled.ad.insert(pooled.ad.end(), c.ad.begin(), c.ad.end());
            pooled.all.insert(pooled.all.end(), c.all.begin(), c.all.end());
        }
        const auto r = detail::with_fit_context(0, set.biomarker_names[i], [&] {
            const GaussianPair init = init_truncated(pooled.cn, pooled.ad);
            const MixtureBounds b = derive_bounds(init, pooled.cn, pooled.ad, pooled.all);
            std::vector<std::span<const double>> spans;
            std::vector<double> theta0;
            for (const auto& c : cols) {
                spans.emplace_back(c.all);
                theta0.push_back(theta_init(c.all, init));
            }
            return detail::em_shared(spans, init, std::move(theta0), b, FreeParams{});
        });
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            MixtureFit fit;
            fit.gaussians = r.gaussians;
            fit.theta = r.thetas[gi];
            fit.converged = r.converged;
            fit.iterations = r.iterations;
            fit.loglik_trace = r.loglik_trace;
            set.fits[gi].push_back(std::move(fit));
        }
    }
    return set;
}

/// Approach 3: jointly initialized from the pooled CN/AD values, then
/// optimized independently per group (Gaussians may drift apart).
inline MixtureSet fit_coinit(const std::vector<std::pair<int, BiomarkerDataset>>& groups) {
    detail::check_groups(groups);
    MixtureSet set;
    set.biomarker_names = groups.front().second.biomarker_names;
    set.fits.resize(groups.size());
    for (const auto& [id, g] : groups) set.group_ids.push_back(id);

    for (size_t i = 0; i < set.biomarker_names.size(); ++i) {
        std::vector<detail::BiomarkerColumns> cols;
        detail::BiomarkerColumns pooled;
        for (const auto& [id, g] : groups) {
            cols.push_back(detail::collect_columns(g, i));
            const auto& c = cols.back();
            pooled.cn.insert(pooled.cn.end(), c.cn.begin(), c.cn.end());
            pooled.ad.insert(pooled.ad.end(), c.ad.begin(), c.ad.end());
            pooled.all.insert(pooled.all.end(), c.all.begin(), c.all.end());
        }
        const GaussianPair init = detail::with_fit_context(0, set.biomarker_names[i], [&] {
            return init_truncated(pooled.cn, pooled.ad);
        });
        const MixtureBounds b = derive_bounds(init, pooled.cn, pooled.ad, pooled.all);
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            set.fits[gi].push_back(
                detail::with_fit_context(set.group_ids[gi], set.biomarker_names[i], [&] {
                    return optimize_alternating(cols[gi].all, init,
                                                theta_init(cols[gi].all, init),
                                                FreeParams{}, &b);
                }));
        }
    }
    return set;
}

inline MixtureSet fit_strategy(Strategy s,
                               const std::vector<std::pair<int, BiomarkerDataset>>& groups) {
    switch (s) {
        case Strategy::independent: return fit_independent(groups);
        case Strategy::coupled: return fit_coupled(groups);
        case Strategy::coinit: return fit_coinit(groups);
    }
    throw ConfigError("invalid strategy");
}

} // namespace debm
