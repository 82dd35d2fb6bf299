// Command line front end: compile a model + scenario into the sparse program,
// solve it, verify the result, and write the run outputs. The regress command
// re-runs a list of scenarios against frozen reference values.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hfn/model_io.hpp"
#include "hfn/report.hpp"
#include "hfn/solver.hpp"
#include "hfn/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGoldenMismatch = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNoConvergence = 4;

// Fixed output names for the operands the reports are organized around.
// Models without these operands simply skip the corresponding file.
constexpr const char* kEmissionOperand = "CO2";
constexpr const char* kGasOperand = "CH4";
constexpr const char* kHydrogenOperand = "H2";

void print_diagnostics(const std::string& path,
                       const std::vector<hfn::Diagnostic>& diags) {
    for (const hfn::Diagnostic& d : diags)
        std::cerr << path << ":" << d.line << ":" << d.col << ": error: " << d.message
                  << "\n";
}

int status_exit(hfn::SolveStatus status) {
    switch (status) {
        case hfn::SolveStatus::Optimal: return kExitOk;
        case hfn::SolveStatus::Infeasible: return kExitInfeasible;
        case hfn::SolveStatus::MaxIterations: return kExitNoConvergence;
    }
    return kExitNoConvergence;
}

struct RunResult {
    hfn::Solution solution;
    hfn::VerificationReport verification;
    double emissions = 0.0;
};

int solve_scenario(const hfn::SystemModel& model, const hfn::ScenarioSpec& scenario,
                   const hfn::SolverSettings& settings, RunResult& out) {
    hfn::CompiledProblem problem = hfn::compile(model, scenario);
    out.solution = hfn::solve(problem.qp, settings);
    if (out.solution.status != hfn::SolveStatus::Optimal) {
        std::cerr << "solver: " << to_string(out.solution.status);
        if (!out.solution.note.empty()) std::cerr << " (" << out.solution.note << ")";
        std::cerr << "\n";
        return status_exit(out.solution.status);
    }
    out.verification = hfn::verify(out.solution.x, problem);
    int co2 = model.find_operand(kEmissionOperand);
    out.emissions =
        co2 >= 0 ? hfn::export_total(model, problem, out.solution.x, co2) : 0.0;
    return kExitOk;
}

int cmd_run(const std::string& model_path, const std::string& scn_path,
            const std::string& outdir, bool dims_only, const std::string& export_qp,
            const hfn::SolverSettings& settings) {
    hfn::ParsedModel pm = hfn::load_model(model_path);
    if (!pm.ok()) {
        print_diagnostics(model_path, pm.diagnostics);
        return kExitValidation;
    }
    hfn::ParsedScenario ps = hfn::load_scenario(scn_path, *pm.model);
    if (!ps.ok()) {
        print_diagnostics(scn_path, ps.diagnostics);
        return kExitValidation;
    }

    hfn::CompiledProblem problem;
    try {
        problem = hfn::compile(*pm.model, *ps.scenario);
    } catch (const std::exception& e) {
        std::cerr << "compile: " << e.what() << "\n";
        return kExitValidation;
    }
    std::cout << problem.report.to_text();
    if (!export_qp.empty())
        hfn::write_file(export_qp, hfn::export_qp_text(problem.qp, problem.report));
    if (dims_only) return kExitOk;

    hfn::Solution sol = hfn::solve(problem.qp, settings);
    std::cout << "status: " << to_string(sol.status) << ", iterations "
              << sol.iterations << (sol.polished ? ", polished" : "") << "\n";
    if (sol.status != hfn::SolveStatus::Optimal) {
        if (!sol.note.empty()) std::cerr << "solver: " << sol.note << "\n";
        return status_exit(sol.status);
    }
    char obj[64];
    std::snprintf(obj, sizeof obj, "%.2f", sol.objective);
    std::cout << "objective: " << obj << "\n";

    hfn::VerificationReport ver = hfn::verify(sol.x, problem);
    std::cout << "verification " << (ver.ok(1e-6) ? "passed" : "FAILED") << "\n";
    if (!ver.ok(1e-6)) std::cout << ver.to_text();

    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        auto path = [&](const char* name) { return outdir + "/" + name; };
        hfn::write_file(path("report.json"),
                        hfn::run_report_json(*pm.model, problem, sol, ver,
                                             ps.scenario->id));
        hfn::write_file(path("objective.txt"), hfn::objective_text(sol.objective));
        hfn::write_file(path("flows.csv"), hfn::flows_csv(*pm.model, problem, sol.x));
        int co2 = pm.model->find_operand(kEmissionOperand);
        if (co2 >= 0)
            hfn::write_file(path("co2_by_resource.csv"),
                            hfn::export_flow_csv(*pm.model, problem, sol.x, co2));
        int gas = pm.model->find_operand(kGasOperand);
        if (gas >= 0)
            hfn::write_file(path("gas_balance.csv"),
                            hfn::balance_csv(*pm.model, problem, sol.x, gas));
        int h2 = pm.model->find_operand(kHydrogenOperand);
        if (h2 >= 0)
            hfn::write_file(path("hydrogen_balance.csv"),
                            hfn::balance_csv(*pm.model, problem, sol.x, h2));
        std::cout << "outputs written to " << outdir << "\n";
    }
    return kExitOk;
}

struct GoldenRow {
    std::string scenario;
    double objective = 0.0;
    double emissions = 0.0;
};

std::vector<GoldenRow> load_goldens(const std::string& path, bool& ok) {
    std::vector<GoldenRow> rows;
    std::ifstream in(path);
    ok = static_cast<bool>(in);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        GoldenRow row;
        std::istringstream is(line);
        if (is >> row.scenario >> row.objective >> row.emissions) rows.push_back(row);
    }
    return rows;
}

int cmd_regress(const std::string& model_path, const std::string& goldens_path,
                const std::string& outdir, const std::vector<std::string>& scn_paths,
                const hfn::SolverSettings& settings) {
    hfn::ParsedModel pm = hfn::load_model(model_path);
    if (!pm.ok()) {
        print_diagnostics(model_path, pm.diagnostics);
        return kExitValidation;
    }
    bool goldens_ok = false;
    std::vector<GoldenRow> goldens = load_goldens(goldens_path, goldens_ok);
    if (!goldens_ok) {
        std::cerr << "cannot open goldens file '" << goldens_path << "'\n";
        return kExitValidation;
    }

    const double rel_tol = 1e-6;
    // Near-zero entries (an emission column taxed down to noise) are judged
    // against the column's scale across the golden set, not against zero.
    double obj_scale = 1.0, emis_scale = 1.0;
    for (const GoldenRow& g : goldens) {
        obj_scale = std::max(obj_scale, std::abs(g.objective));
        emis_scale = std::max(emis_scale, std::abs(g.emissions));
    }
    bool all_ok = true;
    std::ostringstream table;
    table << "scenario      objective          reference          emissions     "
             "reference     status\n";
    for (const std::string& scn_path : scn_paths) {
        hfn::ParsedScenario ps = hfn::load_scenario(scn_path, *pm.model);
        if (!ps.ok()) {
            print_diagnostics(scn_path, ps.diagnostics);
            return kExitValidation;
        }
        RunResult result;
        int code = solve_scenario(*pm.model, *ps.scenario, settings, result);
        if (code != kExitOk) return code;

        const GoldenRow* golden = nullptr;
        for (const GoldenRow& g : goldens)
            if (g.scenario == ps.scenario->id) golden = &g;
        char row[256];
        if (!golden) {
            std::snprintf(row, sizeof row, "%-12s  %17.2f  %17s  %12.2f  %12s  %s\n",
                          ps.scenario->id.c_str(), result.solution.objective,
                          "(missing)", result.emissions, "(missing)", "NO-REFERENCE");
            all_ok = false;
        } else {
            auto close = [&](double a, double b, double scale) {
                return std::abs(a - b) <= rel_tol * std::max(scale, std::abs(b));
            };
            bool ok = close(result.solution.objective, golden->objective, obj_scale) &&
                      close(result.emissions, golden->emissions, emis_scale) &&
                      result.verification.ok(1e-6);
            all_ok = all_ok && ok;
            std::snprintf(row, sizeof row,
                          "%-12s  %17.2f  %17.2f  %12.2f  %12.2f  %s\n",
                          ps.scenario->id.c_str(), result.solution.objective,
                          golden->objective, result.emissions, golden->emissions,
                          ok ? "OK" : "MISMATCH");
        }
        table << row;
        std::cout << row;
    }
    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        hfn::write_file(outdir + "/regress.txt", table.str());
    }
    return all_ok ? kExitOk : kExitGoldenMismatch;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hetero-functional network minimum-cost flow"};
    app.require_subcommand(1);

    std::string model_path, scn_path, outdir, export_qp, goldens_path;
    std::vector<std::string> scn_paths;
    bool dims_only = false, no_polish = false, verbose = false;
    hfn::SolverSettings settings;

    CLI::App* run = app.add_subcommand("run", "compile and solve one scenario");
    run->add_option("-m,--model", model_path, "model file")->required();
    run->add_option("-s,--scenario", scn_path, "scenario file")->required();
    run->add_option("-o,--out", outdir, "output directory");
    run->add_flag("--dims-only", dims_only, "print program dimensions and stop");
    run->add_option("--export-qp", export_qp, "write the assembled program to a file");
    run->add_option("--tol", settings.tol, "solver tolerance");
    run->add_option("--max-iter", settings.max_iter, "solver iteration limit");
    run->add_flag("--no-polish", no_polish, "skip the active-set polish");
    run->add_flag("--verbose", verbose, "per-iteration solver trace");

    CLI::App* regress =
        app.add_subcommand("regress", "re-run scenarios against reference values");
    regress->add_option("-m,--model", model_path, "model file")->required();
    regress->add_option("-g,--goldens", goldens_path, "reference values file")
        ->required();
    regress->add_option("-o,--out", outdir, "output directory");
    regress->add_option("scenarios", scn_paths, "scenario files")->required();
    regress->add_option("--tol", settings.tol, "solver tolerance");
    regress->add_option("--max-iter", settings.max_iter, "solver iteration limit");

    CLI11_PARSE(app, argc, argv);
    settings.polish = !no_polish;
    settings.verbose = verbose;

    try {
        if (run->parsed())
            return cmd_run(model_path, scn_path, outdir, dims_only, export_qp, settings);
        return cmd_regress(model_path, goldens_path, outdir, scn_paths, settings);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
