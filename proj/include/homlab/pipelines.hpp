#pragma once

#include "homlab/config.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace homlab {

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    // "<=", ">=", "<" or "==" relating value to bound
    std::string relation = "<=";
    bool pass = false;
    std::string note;
};

Check check_le(const std::string& name, double value, double bound, const std::string& note = "");
Check check_ge(const std::string& name, double value, double bound, const std::string& note = "");
Check check_lt(const std::string& name, double value, double bound, const std::string& note = "");

struct PipelineResult {
    std::string pipeline;
    std::vector<Check> checks;
    // grid sizes and pipeline-specific numbers for the manifest
    nlohmann::json summary = nlohmann::json::object();
    std::map<std::string, double> runtimes;
    std::vector<std::string> artifacts;

    bool pass() const;
    const Check* find(const std::string& name) const;
};

// Runs cfg.pipeline and writes its artifacts under out_dir (created if missing).
// Library errors propagate as homlab::Error.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir);

PipelineResult run_direct_convergence(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_bgk_invariants(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_hydrodynamic_limit(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_cell_relaxation(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_contraction_suite(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_multiplier_sign(const ExperimentConfig& cfg, const std::string& out_dir);
PipelineResult run_k0_invariance(const ExperimentConfig& cfg, const std::string& out_dir);

struct RunStatus {
    // pass | fail | schema_error | invariant_violation | numerical_failure
    std::string status = "pass";
    int exit_code = 0;
    std::string message;
    double seconds = 0.0;
};

nlohmann::json manifest_json(const ExperimentConfig* cfg, const PipelineResult* result, const RunStatus& status);
void write_manifest(const std::string& out_dir, const nlohmann::json& manifest);

// Catalog of fluxes, cell families and pipelines, in a fixed order.
nlohmann::json catalog_json();
std::string catalog_text();

} // namespace homlab
