#include "homlab/config.hpp"
#include "homlab/pipelines.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

using namespace homlab;

namespace {

const char* status_of(ErrorKind k)
{
    switch (k) {
    case ErrorKind::schema: return "schema_error";
    case ErrorKind::invariant: return "invariant_violation";
    case ErrorKind::numerical: return "numerical_failure";
    }
    return "numerical_failure";
}

void print_checks(const PipelineResult& r)
{
    for (const auto& c : r.checks)
        std::printf("%s %-40s %.6e %s %.6e\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(),
                    c.bound);
}

int run(const std::string& config_path, const std::string& out_dir, std::optional<int> threads,
        std::optional<unsigned> seed)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<ExperimentConfig> cfg;
    std::optional<PipelineResult> result;
    RunStatus st;
    try {
        cfg = load_config(config_path);
        if (threads) cfg->threads = *threads;
        if (seed) cfg->seed = *seed;
        result = run_pipeline(*cfg, out_dir);
        if (!result->pass()) {
            st.status = "fail";
            st.exit_code = exit_code(ErrorKind::invariant);
            st.message = "one or more checks failed";
        }
    } catch (const Error& e) {
        st.status = status_of(e.kind());
        st.exit_code = exit_code(e.kind());
        st.message = e.what();
    } catch (const std::exception& e) {
        st.status = status_of(ErrorKind::numerical);
        st.exit_code = exit_code(ErrorKind::numerical);
        st.message = e.what();
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_manifest(out_dir, manifest_json(cfg ? &*cfg : nullptr, result ? &*result : nullptr, st));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (st.exit_code == 0) st.exit_code = exit_code(ErrorKind::numerical);
    }
    if (result) print_checks(*result);
    if (!st.message.empty()) std::cerr << st.status << ": " << st.message << "\n";
    std::printf("%s (exit %d), manifest in %s\n", st.status.c_str(), st.exit_code, out_dir.c_str());
    return st.exit_code;
}

int validate(const std::string& config_path, bool as_json)
{
    try {
        const ExperimentConfig cfg = load_config(config_path);
        if (as_json)
            std::cout << to_json(cfg).dump(2) << "\n";
        else
            std::printf("ok: %s (pipeline %s, hash %016llx)\n", config_path.c_str(), cfg.pipeline.c_str(),
                        static_cast<unsigned long long>(cfg.hash()));
        return 0;
    } catch (const Error& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_code(e.kind());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"homlab: two-scale conservation law experiments"};
    app.require_subcommand(1);

    std::string config, out = "results";
    int threads = 0;
    unsigned seed = 0;
    bool as_json = false;

    auto* run_cmd = app.add_subcommand("run", "Run the pipeline named in a config");
    run_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    run_cmd->add_option("--out", out, "Artifact directory")->capture_default_str();
    auto* threads_opt = run_cmd->add_option("--threads", threads, "Worker threads (overrides the config)");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Random seed (overrides the config)");

    auto* list_cmd = app.add_subcommand("list", "Print the catalog of fluxes, families and pipelines");
    list_cmd->add_flag("--json", as_json, "Machine-readable output");

    auto* validate_cmd = app.add_subcommand("validate", "Check a config against the schema");
    validate_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    validate_cmd->add_flag("--json", as_json, "Print the resolved config");

    if (argc > 1 && argv[1][0] != '-') {
        const std::string sub = argv[1];
        if (sub != "run" && sub != "list" && sub != "validate") {
            std::cerr << "unknown subcommand '" << sub << "'\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    if (*run_cmd)
        return run(config, out, *threads_opt ? std::optional<int>(threads) : std::nullopt,
                   *seed_opt ? std::optional<unsigned>(seed) : std::nullopt);
    if (*list_cmd) {
        if (as_json)
            std::cout << catalog_json().dump(2) << "\n";
        else
            std::cout << catalog_text();
        return 0;
    }
    return validate(config, as_json);
}
