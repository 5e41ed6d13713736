#include "shapestab/config.hpp"
#include "shapestab/matching.hpp"
#include "shapestab/simulator.hpp"
#include "shapestab/synthesis.hpp"
#include "shapestab/tensor_core.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace ss = shapestab;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitSynthesisRefused = 3;

void emit(const json& report, const std::string& out_path) {
    const std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ss::ConfigError("cannot open output file " + out_path);
        out << text;
    }
}

json issues_to_json(const ss::ConsistencyReport& rep) {
    json out = json::array();
    for (const auto& issue : rep.issues) out.push_back(issue.what);
    return out;
}

ss::StateSampler sampler_for(const ss::RunConfig& cfg, const ss::MechanicalModel& model) {
    return ss::StateSampler::for_model(model, ss::effective_seed(cfg), cfg.sample_count);
}

int run_check_matching(const std::string& config_path, const std::string& out_path) {
    const ss::RunConfig cfg = ss::parse_config_file(config_path);
    const ss::MechanicalModel model = ss::build_model(cfg);
    const ss::ShapingCandidate cand = ss::build_candidate(cfg, model);
    const ss::Equilibrium eq = ss::build_equilibrium(cfg, model);

    const auto model_check = ss::consistency_check(model);
    const auto cand_check = ss::consistency_check(model, cand);
    const auto eq_check = ss::validate_equilibrium(model, eq);
    const auto matching = ss::matching_report(model, cand, sampler_for(cfg, model));

    const bool pass = model_check.pass && cand_check.pass && eq_check.pass && matching.pass;
    json report = {
        {"command", "check-matching"},
        {"model", model.name},
        {"candidate", cand.name},
        {"consistency",
         {{"model_pass", model_check.pass},
          {"candidate_pass", cand_check.pass},
          {"issues", issues_to_json(model_check)},
          {"candidate_issues", issues_to_json(cand_check)}}},
        {"equilibrium", {{"pass", eq_check.pass}, {"grad_norm", eq_check.grad_norm}}},
        {"sup_kinetic_residual", matching.sup_kinetic_residual},
        {"sup_potential_residual", matching.sup_potential_residual},
        {"sup_bracket", matching.sup_bracket},
        {"lambda_split_max_error", matching.lambda_split_max_error},
        {"tolerance", matching.tolerance},
        {"samples", matching.samples},
        {"seed", matching.seed},
        {"pass", pass},
    };
    emit(report, out_path);
    return pass ? kExitPass : kExitCheckFailed;
}

int run_simulate(const std::string& config_path, const std::string& route,
                 const std::string& out_dir) {
    const ss::RunConfig cfg = ss::parse_config_file(config_path);
    const ss::MechanicalModel model = ss::build_model(cfg);
    const ss::ShapingCandidate cand = ss::build_candidate(cfg, model);
    const ss::Equilibrium eq = ss::build_equilibrium(cfg, model);

    if (route == "single" && model.m != 1)
        throw ss::ConfigError("route 'single' requires a single actuator, model has m = " +
                              std::to_string(model.m));
    if (cfg.x0.size() != 2 * model.n)
        throw ss::ConfigError("[integrator] x0 must list q then p (2n numbers)");
    const ss::CotangentState x0{cfg.x0.head(model.n), cfg.x0.tail(model.n)};
    if (!model.chart_box.contains(x0.q))
        throw ss::ConfigError("[integrator] x0 configuration outside the declared box");

    ss::DissipationSpec diss;
    if (cfg.xi_fixed) {
        if (cfg.xi_fixed->size() != model.n)
            throw ss::ConfigError("[dissipation] xi dimension mismatch");
        diss.xi = [v = *cfg.xi_fixed](const ss::Vec&) { return v; };
    }
    const ss::Connection conn = ss::Connection::flat_connection(model.n);

    ss::ControlLaw law;
    if (route == "ch")
        law = ss::control_CH(model, cand, ss::GyroSpec::zero(), diss, conn);
    else if (route == "lcb")
        law = ss::control_LCB(model, cand, diss, conn);
    else
        law = ss::single_actuator_control(model, cand, diss, conn);

    ss::TrajectoryRecord record = ss::integrate(model, law, x0, cfg.dt, cfg.T);
    const ss::MonitorReport monitor = ss::lyapunov_monitor(record);
    ss::convergence_check(record, eq, cfg.convergence_radius);
    const auto definiteness = ss::candidate_definiteness_check(model, cand, eq);

    std::filesystem::create_directories(out_dir);
    const std::string csv_path = out_dir + "/trajectory.csv";
    ss::write_trajectory_csv(record, model.n, csv_path);

    const bool pass = monitor.pass && !record.aborted;
    json summary = {
        {"command", "simulate"},
        {"route", route},
        {"model", model.name},
        {"candidate", cand.name},
        {"integrator", {{"dt", cfg.dt}, {"T", cfg.T}, {"steps", record.size() - 1}}},
        {"monitor",
         {{"pass", monitor.pass},
          {"max_step_increase", monitor.max_step_increase},
          {"max_rate_mismatch", monitor.max_rate_mismatch},
          {"first_violation", monitor.first_violation},
          {"step_tolerance", monitor.step_tolerance},
          {"rate_tolerance", monitor.rate_tolerance}}},
        {"convergence",
         {{"converged", record.converged},
          {"final_distance", record.final_distance},
          {"radius", cfg.convergence_radius}}},
        {"candidate_definite", definiteness.pass},
        {"aborted", record.aborted},
        {"abort_reason", record.abort_reason},
        {"trajectory_csv", "trajectory.csv"},
        {"pass", pass},
    };
    emit(summary, out_dir + "/summary.json");
    return pass ? kExitPass : kExitCheckFailed;
}

int run_verify_equivalence(const std::string& config_path, const std::string& out_path) {
    const ss::RunConfig cfg = ss::parse_config_file(config_path);
    const ss::MechanicalModel model = ss::build_model(cfg);
    const ss::ShapingCandidate cand = ss::build_candidate(cfg, model);

    ss::DissipationSpec diss;
    if (cfg.xi_fixed) {
        if (cfg.xi_fixed->size() != model.n)
            throw ss::ConfigError("[dissipation] xi dimension mismatch");
        diss.xi = [v = *cfg.xi_fixed](const ss::Vec&) { return v; };
    }
    const ss::Connection conn = ss::Connection::flat_connection(model.n);
    const auto report =
        ss::verify_equivalence(model, cand, diss, conn, sampler_for(cfg, model));

    json out = {
        {"command", "verify-equivalence"},
        {"model", model.name},
        {"candidate", cand.name},
        {"sup_law_difference", report.sup_law_difference},
        {"szd_max_violation", report.szd_max_violation},
        {"reconstruction_difference", report.reconstruction_difference},
        {"tolerance", report.tolerance},
        {"samples", report.samples},
        {"pass", report.pass},
    };
    emit(out, out_path);
    return report.pass ? kExitPass : kExitCheckFailed;
}

int run_count_equations(int n, int m, const std::string& out_path) {
    const auto [traditional, simple] = ss::count_equations(n, m);
    json out = {
        {"command", "count-equations"},
        {"n", n},
        {"m", m},
        {"traditional", traditional},
        {"simple", simple},
    };
    emit(out, out_path);
    return kExitPass;
}

int run_list_models() {
    json out = {{"command", "list-models"},
                {"models", ss::registry_names()},
                {"candidates", ss::candidate_registry_names()}};
    std::cout << out.dump(2) << "\n";
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shapestab: matching verification, control synthesis, and closed-loop "
                 "simulation for underactuated mechanical systems"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir = ".", route = "ch";
    int count_n = 0, count_m = 0;

    auto* check = app.add_subcommand("check-matching", "evaluate the matching residuals");
    check->add_option("-c,--config", config_path, "run configuration file")->required();
    check->add_option("-o,--output", out_path, "also write the JSON report here");

    auto* sim = app.add_subcommand("simulate", "synthesize a law and integrate the loop");
    sim->add_option("-c,--config", config_path, "run configuration file")->required();
    sim->add_option("--route", route, "synthesis route")
        ->check(CLI::IsMember({"ch", "lcb", "single"}))
        ->required();
    sim->add_option("-o,--output", out_dir, "output directory for CSV and summary");

    auto* verify = app.add_subcommand("verify-equivalence",
                                      "compare the two synthesis routes pointwise");
    verify->add_option("-c,--config", config_path, "run configuration file")->required();
    verify->add_option("-o,--output", out_path, "also write the JSON report here");

    auto* count = app.add_subcommand("count-equations",
                                     "equation counts for the two kinetic formulations");
    count->add_option("n", count_n, "configuration dimension")->required();
    count->add_option("m", count_m, "number of actuators")->required();
    count->add_option("-o,--output", out_path, "also write the JSON report here");

    app.add_subcommand("list-models", "registered models and candidates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (check->parsed()) return run_check_matching(config_path, out_path);
        if (sim->parsed()) return run_simulate(config_path, route, out_dir);
        if (verify->parsed()) return run_verify_equivalence(config_path, out_path);
        if (count->parsed()) return run_count_equations(count_n, count_m, out_path);
        return run_list_models();
    } catch (const ss::MatchingError& e) {
        std::cerr << "synthesis refused: " << e.what() << "\n";
        return kExitSynthesisRefused;
    } catch (const ss::RankError& e) {
        std::cerr << "synthesis refused: " << e.what() << "\n";
        return kExitSynthesisRefused;
    } catch (const ss::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const ss::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}
