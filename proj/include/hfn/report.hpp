// Run outputs: the structured run report and the per-operand CSV views of an
// optimized schedule. All text is byte-stable for identical inputs.
#ifndef HFN_REPORT_HPP
#define HFN_REPORT_HPP

#include <map>
#include <string>

#include "hfn/qp.hpp"
#include "hfn/solver.hpp"
#include "hfn/verify.hpp"

namespace hfn {

// Sum over the horizon of every pure-sink capability of the operand
// (capabilities that pull it and push nothing), weighted by the device ratio.
double export_total(const SystemModel& model, const CompiledProblem& problem,
                    const Vec& x, int operand);

// Same flows, split by the host resource of each sink capability.
std::map<std::string, double> export_by_resource(const SystemModel& model,
                                                 const CompiledProblem& problem,
                                                 const Vec& x, int operand);

// Daily sink flows: day, one column per host resource, total.
std::string export_flow_csv(const SystemModel& model, const CompiledProblem& problem,
                            const Vec& x, int operand);

// Daily dispatch: day, one column per capability with the quantity started
// that day (the input-side firing of the capability's transition).
std::string flows_csv(const SystemModel& model, const CompiledProblem& problem,
                      const Vec& x);

// Daily operand balance: day, produced, consumed, stock, in_transit.
// Production and consumption count transformation capabilities only; stock is
// the buffer content after the day; in_transit weighs tokens inside
// transitions by their output ratio.
std::string balance_csv(const SystemModel& model, const CompiledProblem& problem,
                        const Vec& x, int operand);

std::string run_report_json(const SystemModel& model, const CompiledProblem& problem,
                            const Solution& solution, const VerificationReport& verify,
                            const std::string& scenario_id);

std::string objective_text(double objective);

// Writes through a temporary file in the same directory, then renames, so a
// crash never leaves a half-written output behind.
void write_file(const std::string& path, const std::string& content);

} // namespace hfn

#endif
