#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadlasso/simulate.hpp"

namespace quadlasso {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNotConverged = 2 };

struct ExperimentConfig {
    ExampleSpec spec;
    ReplicationConfig replication;
    std::string output;          // report CSV
    std::string summary_output;  // defaults to output + ".summary.json"
};

/// Strict: unknown keys and wrong types throw InputError naming the field.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

/// Runs one subcommand (`fit`, `experiment`, `diagnose`, `generate`). `args` excludes the
/// program name. Returns an ExitCode; never throws.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace quadlasso
