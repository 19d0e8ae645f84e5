#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "debm/csv.hpp"
#include "debm/dataset.hpp"
#include "debm/error.hpp"
#include "debm/evaluate.hpp"
#include "debm/mixture.hpp"
#include "debm/pipeline.hpp"
#include "debm/simulate.hpp"
#include "debm/staging.hpp"

namespace debm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// mixtures.json: flat array of per-(biomarker, group) fit records
// ---------------------------------------------------------------------------

inline json mixture_set_to_json(const MixtureSet& set) {
    json arr = json::array();
    for (size_t gi = 0; gi < set.group_ids.size(); ++gi) {
        for (size_t i = 0; i < set.biomarker_names.size(); ++i) {
            const MixtureFit& f = set.fits[gi][i];
            arr.push_back({{"biomarker", set.biomarker_names[i]},
                           {"group", set.group_ids[gi]},
                           {"mu_normal", f.gaussians.mu_normal},
                           {"sigma_normal", f.gaussians.sigma_normal},
                           {"mu_abnormal", f.gaussians.mu_abnormal},
                           {"sigma_abnormal", f.gaussians.sigma_abnormal},
                           {"theta", f.theta},
                           {"converged", f.converged},
                           {"iterations", f.iterations}});
        }
    }
    return arr;
}

inline MixtureSet mixture_set_from_json(const json& arr) {
    MixtureSet set;
    std::map<int, std::map<std::string, MixtureFit>> by_group;
    std::vector<std::string> name_order;
    for (const auto& rec : arr) {
        MixtureFit f;
        f.gaussians.mu_normal = rec.at("mu_normal").get<double>();
        f.gaussians.sigma_normal = rec.at("sigma_normal").get<double>();
        f.gaussians.mu_abnormal = rec.at("mu_abnormal").get<double>();
        f.gaussians.sigma_abnormal = rec.at("sigma_abnormal").get<double>();
        f.theta = rec.at("theta").get<double>();
        f.converged = rec.at("converged").get<bool>();
        f.iterations = rec.at("iterations").get<int>();
        const auto name = rec.at("biomarker").get<std::string>();
        const int group = rec.at("group").get<int>();
        if (std::find(name_order.begin(), name_order.end(), name) == name_order.end())
            name_order.push_back(name);
        by_group[group][name] = f;
    }
    if (by_group.empty()) throw ValidationError("mixture JSON has no records");
    set.biomarker_names = name_order;
    for (const auto& [group, fits] : by_group) {
        set.group_ids.push_back(group);
        std::vector<MixtureFit> row;
        for (const auto& name : name_order) {
            auto it = fits.find(name);
            if (it == fits.end())
                throw ValidationError("mixture JSON: group " + std::to_string(group) +
                                      " is missing biomarker '" + name + "'");
            row.push_back(it->second);
        }
        set.fits.push_back(std::move(row));
    }
    return set;
}

// ---------------------------------------------------------------------------
// timeline_group<g>.json
// ---------------------------------------------------------------------------

inline json timeline_to_json(const DiseaseTimeline& t,
                             std::span<const std::string> biomarker_names) {
    json ordering = json::array();
    for (size_t idx : t.ordering) ordering.push_back(biomarker_names[idx]);
    return {{"ordering", ordering},
            {"event_centers", t.event_centers},
            {"total_distance", t.total_distance}};
}

inline DiseaseTimeline timeline_from_json(const json& j,
                                          std::span<const std::string> biomarker_names) {
    DiseaseTimeline t;
    for (const auto& name : j.at("ordering")) {
        const auto it = std::find(biomarker_names.begin(), biomarker_names.end(),
                                  name.get<std::string>());
        if (it == biomarker_names.end())
            throw ValidationError("timeline references unknown biomarker '" +
                                  name.get<std::string>() + "'");
        t.ordering.push_back(static_cast<size_t>(it - biomarker_names.begin()));
    }
    t.event_centers = j.at("event_centers").get<std::vector<double>>();
    t.total_distance = j.at("total_distance").get<double>();
    if (t.event_centers.size() != t.ordering.size())
        throw ValidationError("timeline JSON: event_centers/ordering size mismatch");
    return t;
}

// ---------------------------------------------------------------------------
// model.json: manifest tying a fit together (biomarker order, directions,
// strategy); needed to stage new data with the directions used at fit time
// ---------------------------------------------------------------------------

inline json model_manifest_to_json(const FitResult& fit) {
    json dirs = json::array();
    for (Direction d : fit.directions)
        dirs.push_back(d == Direction::INCREASING ? "increasing" : "decreasing");
    json groups = json::array();
    for (const auto& g : fit.groups) groups.push_back(g.group_id);
    return {{"biomarkers", fit.biomarker_names},
            {"directions", dirs},
            {"strategy", to_string(fit.strategy)},
            {"groups", groups}};
}

struct ModelManifest {
    std::vector<std::string> biomarkers;
    std::map<std::string, Direction> directions;
    Strategy strategy = Strategy::coinit;
    std::vector<int> groups;
};

inline ModelManifest model_manifest_from_json(const json& j) {
    ModelManifest m;
    m.biomarkers = j.at("biomarkers").get<std::vector<std::string>>();
    const auto dirs = j.at("directions").get<std::vector<std::string>>();
    if (dirs.size() != m.biomarkers.size())
        throw ValidationError("model manifest: directions/biomarkers size mismatch");
    for (size_t i = 0; i < dirs.size(); ++i) {
        if (dirs[i] != "increasing" && dirs[i] != "decreasing")
            throw ValidationError("model manifest: bad direction '" + dirs[i] + "'");
        m.directions[m.biomarkers[i]] =
            dirs[i] == "increasing" ? Direction::INCREASING : Direction::DECREASING;
    }
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    m.groups = j.at("groups").get<std::vector<int>>();
    return m;
}

// ---------------------------------------------------------------------------
// ground_truth.json
// ---------------------------------------------------------------------------

inline json ground_truth_to_json(const GroundTruth& gt,
                                 std::span<const std::string> biomarker_names) {
    const SimulationConfig& c = gt.config;
    json groups = json::array();
    for (size_t g = 0; g < gt.groups.size(); ++g) {
        json ordering = json::array();
        for (size_t idx : gt.groups[g].ordering) ordering.push_back(biomarker_names[idx]);
        json traj = json::array();
        for (size_t i = 0; i < gt.groups[g].trajectories.size(); ++i) {
            const BiomarkerTrajectory& t = gt.groups[g].trajectories[i];
            traj.push_back({{"biomarker", biomarker_names[i]},
                            {"normal_mean", t.normal_mean},
                            {"normal_std", t.normal_std},
                            {"abnormal_mean", t.abnormal_mean},
                            {"abnormal_std", t.abnormal_std},
                            {"steepness", t.steepness},
                            {"event_time", t.event_time}});
        }
        groups.push_back({{"group", g + 1}, {"ordering", ordering}, {"trajectories", traj}});
    }
    return {{"seed", c.seed},
            {"config",
             {{"n_biomarkers", c.n_biomarkers},
              {"group_sizes", c.group_sizes},
              {"epsilon_o", c.epsilon_o},
              {"epsilon_g", c.epsilon_g},
              {"cn_fraction", c.cn_fraction},
              {"mci_fraction", c.mci_fraction},
              {"normal_mean", c.normal_mean},
              {"abnormal_mean", c.abnormal_mean},
              {"population_std", c.population_std},
              {"noise_std", c.noise_std},
              {"steepness", c.steepness}}},
            {"groups", groups},
            {"disease_times", gt.disease_time}};
}

// ---------------------------------------------------------------------------
// CSV outputs
// ---------------------------------------------------------------------------

/// staging.csv: subject_id, group, upsilon, then the N+1 stage-posterior
/// columns p0..pN. Unstageable rows keep their id/group and leave the
/// numeric cells empty.
inline std::string staging_csv(const std::vector<std::string>& subject_ids,
                               const std::vector<int>& groups,
                               const std::vector<std::optional<PatientStage>>& stages,
                               size_t n_biomarkers) {
    std::string out = "subject_id,group,upsilon";
    for (size_t i = 0; i <= n_biomarkers; ++i) out += ",p" + std::to_string(i);
    out += "\n";
    for (size_t j = 0; j < subject_ids.size(); ++j) {
        out += csv::quote_if_needed(subject_ids[j]) + "," + std::to_string(groups[j]);
        if (stages[j]) {
            out += "," + csv::format_double(stages[j]->upsilon, 12);
            for (double p : stages[j]->stage_posterior)
                out += "," + csv::format_double(p, 12);
        } else {
            out += std::string(n_biomarkers + 2, ',');
        }
        out += "\n";
    }
    return out;
}

/// experiment<id>.csv: one row per (strategy, group, cell).
inline std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
    std::string out =
        "strategy,group,epsilon_O,epsilon_G,n1,n2,reps,mean_eps_S,std_eps_S,failures\n";
    for (const ExperimentRow& r : rows) {
        out += std::string(to_string(r.strategy)) + "," + std::to_string(r.group) + "," +
               csv::format_double(r.epsilon_o, 12) + "," +
               csv::format_double(r.epsilon_g, 12) + "," + std::to_string(r.n1) + "," +
               std::to_string(r.n2) + "," + std::to_string(r.reps) + "," +
               csv::format_double(r.mean_eps_s, 12) + "," +
               csv::format_double(r.std_eps_s, 12) + "," + std::to_string(r.failures) +
               "\n";
    }
    return out;
}

/// bootstrap_group<g>.csv: biomarker rows (full-data ordering) x position
/// columns, counts per cell.
inline std::string positional_variance_csv(const PositionalVariance& pv) {
    std::string out = "biomarker";
    for (size_t pos = 0; pos < pv.biomarkers.size(); ++pos)
        out += ",pos" + std::to_string(pos + 1);
    out += "\n";
    for (size_t row = 0; row < pv.biomarkers.size(); ++row) {
        out += csv::quote_if_needed(pv.biomarkers[row]);
        for (long c : pv.counts[row]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

inline json positional_variance_sidecar(const PositionalVariance& pv, Strategy strategy,
                                        uint64_t seed) {
    return {{"group", pv.group_id},
            {"biomarkers_in_ordering", pv.biomarkers},
            {"completed", pv.completed},
            {"skipped", pv.skipped},
            {"strategy", to_string(strategy)},
            {"seed", seed}};
}

inline void write_json(const json& j, const std::string& path) {
    csv::write_file(path, j.dump(2) + "\n");
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw LoadError(path + ": invalid JSON: " + e.what());
    }
    return j;
}

} // namespace debm
