// debm: estimate disease-progression timelines from cross-sectional
// biomarker cohorts, with co-training strategies for stratified populations,
// plus the simulation / benchmark / bootstrap harness around them.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "debm/cli.hpp"

namespace {

std::map<std::string, debm::Direction>
parse_direction_flags(const std::vector<std::string>& flags) {
    std::map<std::string, debm::Direction> out;
    for (const std::string& f : flags) {
        const auto eq = f.find('=');
        if (eq == std::string::npos)
            throw debm::ConfigError("--direction expects <biomarker>=<increasing|decreasing>");
        const std::string name = f.substr(0, eq);
        const std::string dir = f.substr(eq + 1);
        if (dir == "increasing" || dir == "inc")
            out[name] = debm::Direction::INCREASING;
        else if (dir == "decreasing" || dir == "dec")
            out[name] = debm::Direction::DECREASING;
        else
            throw debm::ConfigError("--direction: unknown direction '" + dir + "'");
    }
    return out;
}

void print_report(const debm::cli::CommandReport& report) {
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& o : report.outputs) std::cout << o << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disease-progression timelines from cross-sectional biomarker data"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    uint64_t seed = 42;
    int jobs = 1;
    std::string out_dir = ".";
    app.add_option("--seed", seed, "Base seed; every random stream derives from it");
    app.add_option("--jobs", jobs, "Worker threads for independent work items");
    app.add_option("--out-dir", out_dir, "Directory for output files");

    // shared schema / strategy flags
    std::string subject_col = "subject_id", diagnosis_col = "diagnosis", group_col = "group";
    std::string biomarker_list;
    std::vector<std::string> direction_flags;
    std::string strategy_name = "coinit";
    auto add_schema_flags = [&](CLI::App* cmd) {
        cmd->add_option("--subject-col", subject_col, "Subject-id column name");
        cmd->add_option("--diagnosis-col", diagnosis_col, "Diagnosis column name");
        cmd->add_option("--group-col", group_col, "Group column name");
        cmd->add_option("--biomarkers", biomarker_list,
                        "Comma-separated biomarker columns (default: all other columns)");
    };
    auto make_schema = [&] {
        debm::CsvSchema schema;
        schema.subject_col = subject_col;
        schema.diagnosis_col = diagnosis_col;
        schema.group_col = group_col;
        if (!biomarker_list.empty())
            for (const auto& f : debm::csv::split_record(biomarker_list))
                schema.biomarker_cols.push_back(debm::csv::trim(f));
        return schema;
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic stratified cohort");
    debm::SimulationConfig sim_cfg;
    int n1 = 500, n2 = 900;
    sim->add_option("--n-biomarkers", sim_cfg.n_biomarkers, "Number of biomarkers");
    sim->add_option("--n1", n1, "Subjects in group 1");
    sim->add_option("--n2", n2, "Subjects in group 2");
    sim->add_option("--eps-o", sim_cfg.epsilon_o,
                    "Normalized Kendall distance between the group orderings");
    sim->add_option("--eps-g", sim_cfg.epsilon_g,
                    "Group-2 abnormal-mean shift as a multiple of d");
    sim->add_option("--cn-frac", sim_cfg.cn_fraction, "CN label fraction");
    sim->add_option("--mci-frac", sim_cfg.mci_fraction, "MCI label fraction");
    sim->add_option("--pop-std", sim_cfg.population_std, "Population std of the levels");
    sim->add_option("--noise-std", sim_cfg.noise_std, "Measurement noise std");
    sim->add_option("--steepness", sim_cfg.steepness, "Sigmoid steepness");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit mixtures and per-group timelines");
    std::string fit_input;
    fit->add_option("--input", fit_input, "Cohort CSV")->required();
    fit->add_option("--strategy", strategy_name, "independent | coupled | coinit");
    fit->add_option("--direction", direction_flags,
                    "Direction override <biomarker>=<increasing|decreasing>");
    add_schema_flags(fit);

    // stage
    auto* stg = app.add_subcommand("stage", "Place subjects on a fitted timeline");
    std::string stage_input, model_dir;
    stg->add_option("--input", stage_input, "Test cohort CSV")->required();
    stg->add_option("--model-dir", model_dir, "Directory written by `fit`")->required();
    add_schema_flags(stg);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a simulation benchmark");
    int experiment_id = 1;
    debm::ExperimentConfig exp_cfg;
    std::string eps_o_grid, eps_g_grid, n1_grid;
    exp->add_option("--id", experiment_id, "Experiment id (1 or 2)")->required();
    exp->add_option("--reps", exp_cfg.reps, "Repetitions per grid cell");
    exp->add_option("--n2", exp_cfg.n2, "Subjects in group 2");
    exp->add_option("--eps-o-grid", eps_o_grid, "Comma-separated epsilon_O values");
    exp->add_option("--eps-g-grid", eps_g_grid, "Comma-separated epsilon_G values");
    exp->add_option("--n1-grid", n1_grid, "Comma-separated group-1 sizes");

    // bootstrap
    auto* boot = app.add_subcommand("bootstrap", "Positional variance via bootstrapping");
    debm::cli::BootstrapArgs boot_args;
    boot->add_option("--input", boot_args.input, "Cohort CSV")->required();
    boot->add_option("--strategy", strategy_name, "independent | coupled | coinit");
    boot->add_option("-B,--repetitions", boot_args.repetitions, "Bootstrap repetitions");
    boot->add_option("--direction", direction_flags,
                     "Direction override <biomarker>=<increasing|decreasing>");
    add_schema_flags(boot);

    try {
        app.parse(argc, argv);

        if (sim->parsed()) {
            debm::cli::SimulateArgs args;
            args.config = sim_cfg;
            args.config.group_sizes = {n1, n2};
            args.config.seed = seed;
            args.out_dir = out_dir;
            print_report(debm::cli::cmd_simulate(args));
        } else if (fit->parsed()) {
            debm::cli::FitArgs args;
            args.input = fit_input;
            args.strategy = debm::parse_strategy(strategy_name);
            args.schema = make_schema();
            args.direction_override = parse_direction_flags(direction_flags);
            args.out_dir = out_dir;
            print_report(debm::cli::cmd_fit(args));
        } else if (stg->parsed()) {
            debm::cli::StageArgs args;
            args.input = stage_input;
            args.model_dir = model_dir;
            args.schema = make_schema();
            args.out_dir = out_dir;
            print_report(debm::cli::cmd_stage(args));
        } else if (exp->parsed()) {
            debm::cli::ExperimentArgs args;
            args.id = experiment_id;
            args.config = exp_cfg;
            args.config.seed = seed;
            args.config.jobs = jobs;
            auto parse_grid_d = [](const std::string& s, std::vector<double>& out) {
                if (s.empty()) return;
                out.clear();
                for (const auto& f : debm::csv::split_record(s))
                    out.push_back(std::stod(debm::csv::trim(f)));
            };
            parse_grid_d(eps_o_grid, args.config.epsilon_o_grid);
            parse_grid_d(eps_g_grid, args.config.epsilon_g_grid);
            if (!n1_grid.empty()) {
                args.config.n1_grid.clear();
                for (const auto& f : debm::csv::split_record(n1_grid))
                    args.config.n1_grid.push_back(std::stoi(debm::csv::trim(f)));
            }
            args.out_dir = out_dir;
            print_report(debm::cli::cmd_experiment(args));
        } else if (boot->parsed()) {
            boot_args.strategy = debm::parse_strategy(strategy_name);
            boot_args.schema = make_schema();
            boot_args.direction_override = parse_direction_flags(direction_flags);
            boot_args.seed = seed;
            boot_args.jobs = jobs;
            boot_args.out_dir = out_dir;
            print_report(debm::cli::cmd_bootstrap(boot_args));
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
