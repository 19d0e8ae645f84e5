#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "debm/error.hpp"
#include "debm/mixture.hpp"
#include "debm/ordering.hpp"

namespace debm {

/// Stage posterior over i = 0..N (probability that exactly the first i
/// events of S have occurred) plus its event-center expectation.
struct PatientStage {
    std::vector<double> stage_posterior;
    double upsilon = 0;
};

/// Posterior over the number of occurred events: the unnormalized weight of
/// stage i is the product of p(E) over the first i events of S and p(notE)
/// over the rest, evaluated in log space. Missing biomarkers contribute a
/// neutral factor to both products. Stage 0 (no events yet) is included so
/// fully normal subjects have a well-defined distribution.
inline std::vector<double> stage_posterior(std::span<const double> values,
                                           std::span<const uint8_t> missing,
                                           const DiseaseTimeline& timeline,
                                           std::span<const MixtureFit> fits) {
    const size_t n = timeline.ordering.size();
    if (values.size() != n || missing.size() != n || fits.size() != n)
        throw StagingError("stage_posterior: inconsistent sizes");

    std::vector<double> log_p(n), log_not_p(n);
    for (size_t q = 0; q < n; ++q) {
        const size_t i = timeline.ordering[q];
        if (missing[i]) {
            log_p[q] = 0.0;
            log_not_p[q] = 0.0;
        } else {
            const double p = posterior(values[i], fits[i]);
            log_p[q] = std::log(p);
            log_not_p[q] = std::log1p(-p);
        }
    }

    // logw[i] = sum of log_p over positions < i plus log_not_p over the
    // rest; prefix/suffix sums avoid subtracting infinities when a posterior
    // is exactly 0 or 1
    std::vector<double> suffix(n + 1, 0.0);
    for (size_t q = n; q-- > 0;) suffix[q] = suffix[q + 1] + log_not_p[q];
    std::vector<double> logw(n + 1);
    double prefix = 0;
    for (size_t i = 0; i <= n; ++i) {
        if (i > 0) prefix += log_p[i - 1];
        logw[i] = prefix + suffix[i];
    }

    double max_log = -std::numeric_limits<double>::infinity();
    for (double v : logw) max_log = std::max(max_log, v);
    if (max_log == -std::numeric_limits<double>::infinity())
        throw StagingError("all stage weights underflow to zero");

    std::vector<double> w(n + 1);
    double sum = 0;
    for (size_t i = 0; i <= n; ++i) {
        w[i] = std::exp(logw[i] - max_log);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Patient stage: expectation of the event-centers under the stage
/// posterior restricted to i >= 1 (the stage-0 mass is excluded from both
/// sums). A subject with all mass at stage 0 gets upsilon = 0.
inline PatientStage stage(std::span<const double> values,
                          std::span<const uint8_t> missing,
                          const DiseaseTimeline& timeline,
                          std::span<const MixtureFit> fits) {
    PatientStage out;
    out.stage_posterior = stage_posterior(values, missing, timeline, fits);
    const size_t n = timeline.ordering.size();
    double num = 0, den = 0;
    for (size_t i = 1; i <= n; ++i) {
        num += timeline.event_centers[i - 1] * out.stage_posterior[i];
        den += out.stage_posterior[i];
    }
    out.upsilon = den > 0 ? num / den : 0.0;
    return out;
}

} // namespace debm
