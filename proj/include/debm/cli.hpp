#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "debm/dataset.hpp"
#include "debm/error.hpp"
#include "debm/evaluate.hpp"
#include "debm/pipeline.hpp"
#include "debm/serialize.hpp"
#include "debm/simulate.hpp"
#include "debm/staging.hpp"

namespace debm::cli {

namespace fs = std::filesystem;

/// Non-fatal findings (unstageable subjects, non-converged fits) surfaced to
/// the caller; the CLI prints them as `warning:` lines.
struct CommandReport {
    std::vector<std::string> warnings;
    std::vector<std::string> outputs; // paths written
};

inline void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    SimulationConfig config;
    std::string out_dir = ".";
};

inline CommandReport cmd_simulate(const SimulateArgs& args) {
    CommandReport report;
    ensure_out_dir(args.out_dir);
    const auto [ds, gt] = simulate_dataset(args.config);
    const std::string csv_path = (fs::path(args.out_dir) / "dataset.csv").string();
    const std::string gt_path = (fs::path(args.out_dir) / "ground_truth.json").string();
    write_csv(ds, csv_path);
    write_json(ground_truth_to_json(gt, ds.biomarker_names), gt_path);
    report.outputs = {csv_path, gt_path};
    return report;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string input;
    Strategy strategy = Strategy::coinit;
    CsvSchema schema;
    std::map<std::string, Direction> direction_override;
    std::string out_dir = ".";
};

inline MixtureSet to_mixture_set(const FitResult& fit) {
    MixtureSet set;
    set.biomarker_names = fit.biomarker_names;
    for (const GroupModel& g : fit.groups) {
        set.group_ids.push_back(g.group_id);
        set.fits.push_back(g.fits);
    }
    return set;
}

inline CommandReport cmd_fit(const FitArgs& args) {
    CommandReport report;
    ensure_out_dir(args.out_dir);
    LoadOptions options;
    options.direction_override = args.direction_override;
    const BiomarkerDataset ds = load_csv(args.input, args.schema, options);
    const FitResult fit = fit_timelines(ds, args.strategy);

    for (const GroupModel& g : fit.groups) {
        for (size_t i = 0; i < g.fits.size(); ++i)
            if (!g.fits[i].converged)
                report.warnings.push_back("group " + std::to_string(g.group_id) +
                                          ", biomarker '" + fit.biomarker_names[i] +
                                          "': mixture fit did not converge within the "
                                          "iteration cap");
        for (size_t idx : g.excluded_subjects)
            report.warnings.push_back("group " + std::to_string(g.group_id) + ", subject '" +
                                      std::to_string(idx) +
                                      "': no usable biomarkers, excluded from ordering");
    }

    const std::string mix_path = (fs::path(args.out_dir) / "mixtures.json").string();
    write_json(mixture_set_to_json(to_mixture_set(fit)), mix_path);
    report.outputs.push_back(mix_path);
    for (const GroupModel& g : fit.groups) {
        const std::string t_path =
            (fs::path(args.out_dir) / ("timeline_group" + std::to_string(g.group_id) + ".json"))
                .string();
        write_json(timeline_to_json(g.timeline, fit.biomarker_names), t_path);
        report.outputs.push_back(t_path);
    }
    const std::string manifest_path = (fs::path(args.out_dir) / "model.json").string();
    write_json(model_manifest_to_json(fit), manifest_path);
    report.outputs.push_back(manifest_path);
    return report;
}

// ---------------------------------------------------------------------------
// stage
// ---------------------------------------------------------------------------

struct StageArgs {
    std::string input;     // test cohort CSV
    std::string model_dir; // directory written by `fit`
    CsvSchema schema;
    std::string out_dir = ".";
};

namespace detail {

/// Biomarker columns a CSV would expose under the schema (header pre-pass).
inline std::vector<std::string> csv_biomarker_columns(const std::string& path,
                                                      const CsvSchema& schema) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw LoadError(path + ": empty file (header row required)");
    const auto header = csv::split_record(lines[0]);
    if (!schema.biomarker_cols.empty()) return schema.biomarker_cols;
    std::vector<std::string> out;
    for (const auto& raw : header) {
        const std::string name = csv::trim(raw);
        if (name == schema.subject_col || name == schema.diagnosis_col ||
            name == schema.group_col)
            continue;
        out.push_back(name);
    }
    return out;
}

} // namespace detail

inline CommandReport cmd_stage(const StageArgs& args) {
    CommandReport report;
    ensure_out_dir(args.out_dir);

    const ModelManifest manifest =
        model_manifest_from_json(read_json((fs::path(args.model_dir) / "model.json").string()));
    const MixtureSet mixtures = mixture_set_from_json(
        read_json((fs::path(args.model_dir) / "mixtures.json").string()));

    // the test set must carry exactly the model's biomarkers
    const auto csv_cols = detail::csv_biomarker_columns(args.input, args.schema);
    const std::set<std::string> have(csv_cols.begin(), csv_cols.end());
    const std::set<std::string> want(manifest.biomarkers.begin(), manifest.biomarkers.end());
    if (have != want) {
        std::string msg = "biomarker mismatch between model and input CSV;";
        for (const auto& name : want)
            if (!have.count(name)) msg += " missing: '" + name + "'";
        for (const auto& name : have)
            if (!want.count(name)) msg += " unexpected: '" + name + "'";
        throw ValidationError(msg);
    }

    CsvSchema schema = args.schema;
    schema.biomarker_cols = manifest.biomarkers; // model column order
    LoadOptions options;
    options.direction_override = manifest.directions;
    options.require_cn_ad = false;
    const BiomarkerDataset ds = load_csv(args.input, schema, options);

    std::map<int, size_t> group_slot;
    for (size_t gi = 0; gi < mixtures.group_ids.size(); ++gi)
        group_slot[mixtures.group_ids[gi]] = gi;
    std::map<int, DiseaseTimeline> timelines;
    for (int g : manifest.groups)
        timelines[g] = timeline_from_json(
            read_json((fs::path(args.model_dir) / ("timeline_group" + std::to_string(g) +
                                                   ".json"))
                          .string()),
            manifest.biomarkers);

    std::vector<std::string> ids;
    std::vector<int> groups;
    std::vector<std::optional<PatientStage>> stages;
    for (const Subject& s : ds.subjects) {
        int group;
        if (s.group) {
            group = *s.group;
        } else if (manifest.groups.size() == 1) {
            group = manifest.groups.front();
        } else {
            throw ValidationError("subject '" + s.id +
                                  "' has no group id but the model is stratified");
        }
        const auto slot = group_slot.find(group);
        if (slot == group_slot.end() || !timelines.count(group))
            throw ValidationError("subject '" + s.id + "': model has no group " +
                                  std::to_string(group));
        ids.push_back(s.id);
        groups.push_back(group);
        const bool all_missing =
            std::all_of(s.missing.begin(), s.missing.end(), [](uint8_t m) { return m != 0; });
        if (all_missing) {
            stages.emplace_back(std::nullopt);
            report.warnings.push_back("subject '" + s.id +
                                      "': all biomarkers missing, unstageable");
        } else {
            stages.emplace_back(
                stage(s.values, s.missing, timelines.at(group), mixtures.fits[slot->second]));
        }
    }

    const std::string out_path = (fs::path(args.out_dir) / "staging.csv").string();
    csv::write_file(out_path, staging_csv(ids, groups, stages, ds.n_biomarkers()));
    report.outputs = {out_path};
    return report;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentArgs {
    int id = 1;
    ExperimentConfig config;
    std::string out_dir = ".";
};

inline CommandReport cmd_experiment(const ExperimentArgs& args) {
    CommandReport report;
    ensure_out_dir(args.out_dir);
    std::vector<ExperimentRow> rows;
    if (args.id == 1) rows = run_experiment1(args.config);
    else if (args.id == 2) rows = run_experiment2(args.config);
    else throw ConfigError("experiment id must be 1 or 2, got " + std::to_string(args.id));
    const std::string path =
        (fs::path(args.out_dir) / ("experiment" + std::to_string(args.id) + ".csv")).string();
    csv::write_file(path, experiment_csv(rows));
    report.outputs = {path};
    return report;
}

// ---------------------------------------------------------------------------
// bootstrap
// ---------------------------------------------------------------------------

struct BootstrapArgs {
    std::string input;
    Strategy strategy = Strategy::coinit;
    CsvSchema schema;
    std::map<std::string, Direction> direction_override;
    int repetitions = 100;
    uint64_t seed = 42;
    int jobs = 1;
    std::string out_dir = ".";
};

inline CommandReport cmd_bootstrap(const BootstrapArgs& args) {
    CommandReport report;
    ensure_out_dir(args.out_dir);
    LoadOptions options;
    options.direction_override = args.direction_override;
    const BiomarkerDataset ds = load_csv(args.input, args.schema, options);
    const auto matrices =
        bootstrap_positional_variance(ds, args.strategy, args.repetitions, args.seed, args.jobs);
    for (const PositionalVariance& pv : matrices) {
        if (pv.skipped > 0)
            report.warnings.push_back("group " + std::to_string(pv.group_id) + ": " +
                                      std::to_string(pv.skipped) +
                                      " bootstrap replicates skipped after redraws");
        const std::string base =
            (fs::path(args.out_dir) / ("bootstrap_group" + std::to_string(pv.group_id)))
                .string();
        csv::write_file(base + ".csv", positional_variance_csv(pv));
        write_json(positional_variance_sidecar(pv, args.strategy, args.seed), base + ".json");
        report.outputs.push_back(base + ".csv");
        report.outputs.push_back(base + ".json");
    }
    return report;
}

} // namespace debm::cli
