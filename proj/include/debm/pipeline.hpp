#pragma once

#include <string>
#include <vector>

#include "debm/dataset.hpp"
#include "debm/mixture.hpp"
#include "debm/ordering.hpp"

namespace debm {

/// Fitted model of one group: its mixture fits and disease timeline, plus
/// the subjects that could not contribute an ordering.
struct GroupModel {
    int group_id = 1;
    std::vector<MixtureFit> fits;
    DiseaseTimeline timeline;
    std::vector<size_t> excluded_subjects; // indices within the group
};

/// Full fit of a (possibly stratified) cohort under one training strategy.
struct FitResult {
    Strategy strategy = Strategy::coinit;
    std::vector<std::string> biomarker_names;
    std::vector<Direction> directions;
    std::vector<GroupModel> groups;
};

/// Posterior event probabilities for every subject of `ds` under the given
/// per-biomarker fits; the missing mask carries over.
inline PosteriorMatrix posterior_matrix(const BiomarkerDataset& ds,
                                        std::span<const MixtureFit> fits) {
    if (fits.size() != ds.n_biomarkers())
        throw ValidationError("posterior_matrix: fit count does not match biomarkers");
    PosteriorMatrix P;
    P.n_subjects = ds.n_subjects();
    P.n_biomarkers = ds.n_biomarkers();
    P.p.assign(P.n_subjects * P.n_biomarkers, 0.0);
    P.missing.assign(P.n_subjects * P.n_biomarkers, 0);
    for (size_t j = 0; j < P.n_subjects; ++j) {
        const Subject& s = ds.subjects[j];
        for (size_t i = 0; i < P.n_biomarkers; ++i) {
            if (s.missing[i]) {
                P.missing[j * P.n_biomarkers + i] = 1;
            } else {
                P.p[j * P.n_biomarkers + i] = posterior(s.values[i], fits[i]);
            }
        }
    }
    return P;
}

/// Splits the dataset, runs the chosen mixture strategy and estimates the
/// central ordering and event-centers per group. A dataset without group
/// ids is treated as one implicit group for the independent strategy; the
/// stratified strategies require an explicit group column.
inline FitResult fit_timelines(const BiomarkerDataset& ds, Strategy strategy) {
    std::vector<std::pair<int, BiomarkerDataset>> groups;
    if (ds.has_groups()) {
        groups = split_groups(ds);
    } else {
        if (strategy != Strategy::independent)
            throw ValidationError("stratified strategy requires group column");
        groups.emplace_back(1, ds);
    }

    const MixtureSet set = fit_strategy(strategy, groups);

    FitResult result;
    result.strategy = strategy;
    result.biomarker_names = ds.biomarker_names;
    result.directions = ds.directions;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        GroupModel model;
        model.group_id = set.group_ids[gi];
        model.fits = set.fits[gi];
        const PosteriorMatrix P = posterior_matrix(groups[gi].second, model.fits);
        model.excluded_subjects = subject_orderings(P).excluded;
        model.timeline = central_ordering(P);
        std::vector<double> thetas(model.fits.size());
        for (size_t i = 0; i < model.fits.size(); ++i) thetas[i] = model.fits[i].theta;
        model.timeline.event_centers = event_centers(P, model.timeline.ordering, thetas);
        result.groups.push_back(std::move(model));
    }
    return result;
}

} // namespace debm
