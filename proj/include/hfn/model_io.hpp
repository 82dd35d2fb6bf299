// Text formats for system models and scenarios: parsing with full error
// recovery (every problem is reported with its line and column), lowering to
// the in-memory structures, and canonical serialization for round-trips.
#ifndef HFN_MODEL_IO_HPP
#define HFN_MODEL_IO_HPP

#include "hfn/core.hpp"
#include "hfn/qp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hfn {

struct Diagnostic {
    int line = 0;
    int col = 0;
    std::string message;

    std::string to_text() const;
};

struct ParsedModel {
    std::optional<SystemModel> model;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return model.has_value(); }
};

struct ParsedScenario {
    std::optional<ScenarioSpec> scenario;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return scenario.has_value(); }
};

// Parses and lowers a model document ("hfn-model v1"). On failure the model
// is absent and diagnostics carry every error found, not only the first.
ParsedModel parse_model(const std::string& text);
ParsedModel load_model(const std::string& path);

// Parses a scenario document ("hfn-scenario v1") against an already lowered
// model; capability and operand references are resolved here.
ParsedScenario parse_scenario(const std::string& text, const SystemModel& model);
ParsedScenario load_scenario(const std::string& path, const SystemModel& model);

// Canonical text form. Parsing the output reproduces an identical model, and
// serializing again reproduces identical text (the round-trip contract).
std::string serialize_model(const SystemModel& model);

} // namespace hfn

#endif
