#include "hfn/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace hfn {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Pure sinks of the operand, aggregated by host resource in capability order.
struct SinkGroups {
    std::vector<std::string> resource_ids;
    std::vector<std::vector<int>> capabilities; // per resource
};

SinkGroups sink_groups(const SystemModel& model, int operand) {
    SinkGroups g;
    for (int psi = 0; psi < model.capability_count(); ++psi) {
        const Capability& c = model.capabilities[psi];
        if (!c.pushes.empty() || c.pulls.empty()) continue;
        bool all_op = true;
        for (const CapabilityFlow& fl : c.pulls)
            if (fl.operand != operand) all_op = false;
        if (!all_op) continue;
        const std::string& rid = model.resources[c.resource].id;
        auto it = std::find(g.resource_ids.begin(), g.resource_ids.end(), rid);
        if (it == g.resource_ids.end()) {
            g.resource_ids.push_back(rid);
            g.capabilities.push_back({psi});
        } else {
            g.capabilities[it - g.resource_ids.begin()].push_back(psi);
        }
    }
    return g;
}

double ratio_minus(const SystemModel& model, int operand, int psi) {
    return model.device_minus.coeff(operand, model.pmap(psi));
}
double ratio_plus(const SystemModel& model, int operand, int psi) {
    return model.device_plus.coeff(operand, model.pmap(psi));
}

} // namespace

double export_total(const SystemModel& model, const CompiledProblem& problem,
                    const Vec& x, int operand) {
    const DecisionVectorLayout& l = problem.qp.layout;
    SinkGroups g = sink_groups(model, operand);
    double total = 0.0;
    for (const auto& caps : g.capabilities)
        for (int psi : caps)
            for (int t = 0; t < l.K; ++t)
                total += ratio_minus(model, operand, psi) * x(l.um(t, psi));
    return total;
}

std::map<std::string, double> export_by_resource(const SystemModel& model,
                                                 const CompiledProblem& problem,
                                                 const Vec& x, int operand) {
    const DecisionVectorLayout& l = problem.qp.layout;
    SinkGroups g = sink_groups(model, operand);
    std::map<std::string, double> out;
    for (size_t r = 0; r < g.resource_ids.size(); ++r) {
        double total = 0.0;
        for (int psi : g.capabilities[r])
            for (int t = 0; t < l.K; ++t)
                total += ratio_minus(model, operand, psi) * x(l.um(t, psi));
        out[g.resource_ids[r]] = total;
    }
    return out;
}

std::string export_flow_csv(const SystemModel& model, const CompiledProblem& problem,
                            const Vec& x, int operand) {
    const DecisionVectorLayout& l = problem.qp.layout;
    SinkGroups g = sink_groups(model, operand);
    std::string out = "day";
    for (const std::string& rid : g.resource_ids) out += "," + rid;
    out += ",total\n";
    for (int t = 0; t < l.K; ++t) {
        out += std::to_string(t + 1);
        double total = 0.0;
        for (size_t r = 0; r < g.resource_ids.size(); ++r) {
            double v = 0.0;
            for (int psi : g.capabilities[r])
                v += ratio_minus(model, operand, psi) * x(l.um(t, psi));
            total += v;
            out += "," + fixed(v, 6);
        }
        out += "," + fixed(total, 6) + "\n";
    }
    return out;
}

std::string flows_csv(const SystemModel& model, const CompiledProblem& problem,
                      const Vec& x) {
    const DecisionVectorLayout& l = problem.qp.layout;
    std::string out = "day";
    for (const Capability& c : model.capabilities) out += "," + c.id;
    out += "\n";
    for (int t = 0; t < l.K; ++t) {
        out += std::to_string(t + 1);
        for (int psi = 0; psi < model.capability_count(); ++psi)
            out += "," + fixed(x(l.um(t, psi)), 6);
        out += "\n";
    }
    return out;
}

std::string balance_csv(const SystemModel& model, const CompiledProblem& problem,
                        const Vec& x, int operand) {
    const DecisionVectorLayout& l = problem.qp.layout;
    const int nb = model.buffer_count();
    std::string out = "day,produced,consumed,stock,in_transit\n";
    for (int t = 0; t < l.K; ++t) {
        double produced = 0.0, consumed = 0.0, stock = 0.0, transit = 0.0;
        for (int psi = 0; psi < model.capability_count(); ++psi) {
            bool transport = model.process_space.is_transport_row(model.pmap(psi));
            double rp = ratio_plus(model, operand, psi);
            double rm = ratio_minus(model, operand, psi);
            if (!transport && rp != 0.0) produced += rp * x(l.up(t, psi));
            if (!transport && rm != 0.0) consumed += rm * x(l.um(t, psi));
            if (rp != 0.0) transit += rp * x(l.qe(t + 1, psi));
        }
        for (int y = 0; y < nb; ++y) stock += x(l.qb(t + 1, operand * nb + y));
        out += std::to_string(t + 1) + "," + fixed(produced, 6) + "," +
               fixed(consumed, 6) + "," + fixed(stock, 6) + "," + fixed(transit, 6) +
               "\n";
    }
    return out;
}

std::string run_report_json(const SystemModel& model, const CompiledProblem& problem,
                            const Solution& solution, const VerificationReport& verify,
                            const std::string& scenario_id) {
    nlohmann::ordered_json j;
    j["scenario"] = scenario_id;
    j["status"] = to_string(solution.status);
    j["objective"] = solution.objective;
    j["iterations"] = solution.iterations;
    j["polished"] = solution.polished;
    j["residuals"] = {{"primal", solution.primal_residual},
                      {"dual", solution.dual_residual},
                      {"gap", solution.gap}};
    j["verification"] = {{"equality", verify.equality_residual},
                         {"inequality", verify.inequality_violation},
                         {"nonnegativity", verify.nonnegativity_violation},
                         {"duration", verify.duration_mismatch},
                         {"synchronization", verify.sync_mismatch},
                         {"state_replay", verify.replay_state_error},
                         {"service_replay", verify.replay_service_error},
                         {"ok", verify.ok(1e-6)}};
    const CompileReport& rep = problem.report;
    j["dimensions"] = {{"variables", rep.sigma_x},
                       {"equalities", rep.sigma_a},
                       {"inequalities", rep.sigma_d},
                       {"capabilities", rep.capability_count},
                       {"buffers", rep.buffer_count},
                       {"service_places", rep.service_places},
                       {"service_transitions", rep.service_transitions},
                       {"incidence_joint", rep.tensor_joint_nnz},
                       {"incidence_signed", rep.tensor_signed_nnz}};
    const DecisionVectorLayout& l = problem.qp.layout;
    for (int op = 0; op < model.operand_count(); ++op) {
        auto by_res = export_by_resource(model, problem, solution.x, op);
        if (by_res.empty()) continue;
        double total = 0.0;
        nlohmann::ordered_json res;
        for (const auto& [rid, v] : by_res) {
            res[rid] = v;
            total += v;
        }
        SinkGroups g = sink_groups(model, op);
        nlohmann::ordered_json daily = nlohmann::ordered_json::array();
        for (int t = 0; t < l.K; ++t) {
            nlohmann::ordered_json row;
            row["day"] = t + 1;
            for (size_t r = 0; r < g.resource_ids.size(); ++r) {
                double v = 0.0;
                for (int psi : g.capabilities[r])
                    v += ratio_minus(model, op, psi) * solution.x(l.um(t, psi));
                row[g.resource_ids[r]] = v;
            }
            daily.push_back(row);
        }
        j["exports"][model.operands[op].id] = {
            {"total", total}, {"by_resource", res}, {"daily", daily}};
    }
    const int nb = model.buffer_count();
    for (int op = 0; op < model.operand_count(); ++op) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int t = 0; t < l.K; ++t) {
            double produced = 0.0, consumed = 0.0, stock = 0.0, transit = 0.0;
            for (int psi = 0; psi < model.capability_count(); ++psi) {
                bool transport =
                    model.process_space.is_transport_row(model.pmap(psi));
                double rp = ratio_plus(model, op, psi);
                double rm = ratio_minus(model, op, psi);
                if (!transport && rp != 0.0) produced += rp * solution.x(l.up(t, psi));
                if (!transport && rm != 0.0) consumed += rm * solution.x(l.um(t, psi));
                if (rp != 0.0) transit += rp * solution.x(l.qe(t + 1, psi));
            }
            for (int y = 0; y < nb; ++y)
                stock += solution.x(l.qb(t + 1, op * nb + y));
            rows.push_back({{"day", t + 1},
                            {"produced", produced},
                            {"consumed", consumed},
                            {"stock", stock},
                            {"in_transit", transit}});
        }
        j["balances"][model.operands[op].id] = rows;
    }
    return j.dump(2) + "\n";
}

std::string objective_text(double objective) { return fixed(objective, 2) + "\n"; }

void write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

} // namespace hfn
