#include "homlab/config.hpp"
#include "homlab/pipelines.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace homlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("homlab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

// Runs the CLI; returns its exit code and captures stdout + stderr.
int cli(const std::string& args, std::string* output = nullptr)
{
    const fs::path log = fs::temp_directory_path() / "homlab_cli_output.txt";
    const std::string cmd = std::string("\"") + HOMLAB_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_multiplier()
{
    return json::parse(R"({
      "schema_version": 1,
      "pipeline": "multiplier_sign",
      "seed": 3,
      "flux": {"name": "shear"},
      "grid": {"x_cells": [16, 16], "y_cells": [1, 8], "xi_cells": 16},
      "solver": {"t_end": 0.25},
      "initial_data": {"family": "row_profile", "row_amp": 0.25,
                       "modulation": {"kind": "sin_cos", "mean": 0.5, "amp": 0.3}},
      "space": {"kind": "exact_rows"},
      "multiplier": {"probes": 10, "tests": 4}
    })");
}

std::string schema_message(const json& j)
{
    try {
        (void)parse_config(j);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::schema);
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("config defaults and round trip")
{
    const ExperimentConfig c = parse_config(small_multiplier());
    CHECK(c.pipeline == "multiplier_sign");
    CHECK(c.x_cells[0] == 16);
    CHECK(c.solver.cfl == 0.5);
    const ExperimentConfig again = parse_config(to_json(c));
    CHECK(again.hash() == c.hash());
    CHECK(to_json(again) == to_json(c));

    json j = small_multiplier();
    j["seed"] = 4;
    CHECK(parse_config(j).hash() != c.hash());
}

TEST_CASE("config validation names the violated constraint")
{
    json j = small_multiplier();
    j["grid"]["xi_L"] = 0.5;
    j["grid"]["xi_M"] = 0.8;
    CHECK(schema_message(j).find("L > M") != std::string::npos);

    j = small_multiplier();
    j["grid"]["colour"] = "blue";
    CHECK(schema_message(j).find("grid.colour") != std::string::npos);

    j = small_multiplier();
    j["solver"]["cfl"] = "fast";
    CHECK(schema_message(j).find("cfl") != std::string::npos);

    j = small_multiplier();
    j["schema_version"] = 7;
    CHECK(schema_message(j).find("schema_version") != std::string::npos);

    j = small_multiplier();
    j["pipeline"] = "everything";
    CHECK(schema_message(j).find("pipeline") != std::string::npos);

    j = small_multiplier();
    j["initial_data"]["p_min"] = 0.4;
    CHECK(schema_message(j).find("p_min") != std::string::npos);
}

TEST_CASE("every shipped config validates")
{
    int count = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(HOMLAB_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path().string()));
        CHECK(cli("validate --config \"" + entry.path().string() + "\"") == 0);
        ++count;
    }
    CHECK(count >= 7);
}

TEST_CASE("cli list prints the catalog, optionally as JSON")
{
    std::string out;
    REQUIRE(cli("list", &out) == 0);
    for (const char* name : {"shear", "hamiltonian", "separate_burgers", "hetero_1d", "homogeneous_burgers"})
        CHECK(out.find(name) != std::string::npos);
    REQUIRE(cli("list --json", &out) == 0);
    const json j = json::parse(out);
    CHECK(j["fluxes"].size() == 5);
    CHECK(j["pipelines"].size() == pipeline_names().size());
    std::string again;
    cli("list --json", &again);
    CHECK(again == out);
}

TEST_CASE("cli usage errors exit 2")
{
    std::string out;
    CHECK(cli("frobnicate", &out) == 2);
    CHECK(out.find("unknown subcommand 'frobnicate'") != std::string::npos);
    CHECK(out.find("Usage") != std::string::npos);
    CHECK(cli("", &out) == 2);
    CHECK(cli("run", &out) == 2);
    CHECK(cli("validate --config /nonexistent/config.json", &out) == 2);
}

TEST_CASE("cli run: schema error writes a manifest and exits 2")
{
    const fs::path dir = scratch("schema");
    json j = small_multiplier();
    j["grid"]["xi_L"] = 0.5;
    j["grid"]["xi_M"] = 0.8;
    write_json(dir / "bad.json", j);
    std::string out;
    CHECK(cli("run --config \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "out").string() + "\"", &out) == 2);
    CHECK(out.find("L > M") != std::string::npos);
    const json m = json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["status"] == "schema_error");
    CHECK(m["exit_code"] == 2);
}

TEST_CASE("cli run: failed checks exit 3 with a manifest")
{
    const fs::path dir = scratch("fail");
    const json j = json::parse(R"({
      "schema_version": 1,
      "pipeline": "hydrodynamic_limit",
      "flux": {"name": "shear"},
      "grid": {"x_cells": [8, 8], "y_cells": [1, 4], "xi_cells": 16},
      "initial_data": {"family": "row_profile", "modulation": {"kind": "sin_cos", "mean": 0.5, "amp": 0.3}},
      "space": {"kind": "exact_rows"},
      "bgk": {"lambdas": [10, 1000], "t_end": 0.1}
    })");
    write_json(dir / "hydro.json", j);
    std::string out;
    CHECK(cli("run --config \"" + (dir / "hydro.json").string() + "\" --out \"" + (dir / "out").string() + "\"", &out) == 3);
    const json m = json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["status"] == "fail");
    CHECK(m["exit_code"] == 3);
    bool saw_failure = false;
    for (const auto& c : m["checks"]) saw_failure = saw_failure || !c["pass"].get<bool>();
    CHECK(saw_failure);
    CHECK(fs::exists(dir / "out" / "hydrodynamic.csv"));
}

TEST_CASE("cli run: outputs are bit-identical across runs and thread counts")
{
    const fs::path dir = scratch("determinism");
    write_json(dir / "m.json", small_multiplier());
    const std::string cfg = "run --config \"" + (dir / "m.json").string() + "\"";
    REQUIRE(cli(cfg + " --threads 1 --out \"" + (dir / "a").string() + "\"") == 0);
    REQUIRE(cli(cfg + " --threads 1 --out \"" + (dir / "b").string() + "\"") == 0);
    REQUIRE(cli(cfg + " --threads 3 --out \"" + (dir / "c").string() + "\"") == 0);
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        if (entry.path().extension() != ".csv") continue;
        const std::string name = entry.path().filename().string();
        CAPTURE(name);
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
        CHECK(slurp(dir / "a" / name) == slurp(dir / "c" / name));
        ++compared;
    }
    CHECK(compared >= 1);

    const json m = json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(m["status"] == "pass");
    CHECK(m["exit_code"] == 0);
    CHECK(m.contains("config_hash"));
    CHECK(m.contains("runtimes"));
    CHECK(m["checks"].size() >= 3);
}

TEST_CASE("seed override changes the config fingerprint only through the seed")
{
    const fs::path dir = scratch("seed");
    write_json(dir / "m.json", small_multiplier());
    const std::string cfg = "run --config \"" + (dir / "m.json").string() + "\" --threads 1";
    REQUIRE(cli(cfg + " --seed 5 --out \"" + (dir / "a").string() + "\"") == 0);
    const json m = json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(m["config"]["seed"] == 5);
}
