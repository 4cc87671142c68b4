#pragma once

#include "homlab/bgk_relax.hpp"
#include "homlab/cell_problem.hpp"
#include "homlab/flux_model.hpp"
#include "homlab/fv_solver.hpp"
#include "homlab/limit_solver.hpp"
#include "homlab/projections.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace homlab {

inline constexpr int kSchemaVersion = 1;

const std::vector<std::string>& pipeline_names();

// Macroscopic modulation p(x) of a cell family.
struct ModulationSpec {
    // constant | sin | sin_cos
    std::string kind = "sin_cos";
    double mean = 0.5;
    double amp = 0.3;
    int k1 = 1;
    int k2 = 1;

    double operator()(const Vec2& x) const;
    double min() const { return mean - std::abs(amp); }
    double max() const { return mean + std::abs(amp); }
};

struct DataSpec {
    std::string family = "row_profile";
    CellParams cell;
    ModulationSpec modulation;
    // barrier parameters; NaN means the modulation range
    double p_min = std::numeric_limits<double>::quiet_NaN();
    double p_max = std::numeric_limits<double>::quiet_NaN();

    CellFamily family_kind() const { return cell_family_from_name(family); }
    double lower() const { return std::isnan(p_min) ? modulation.min() : p_min; }
    double upper() const { return std::isnan(p_max) ? modulation.max() : p_max; }
};

struct ConvergenceOptions {
    std::vector<double> eps{0.25, 0.125, 0.0625};
    std::vector<double> delta{0.25, 0.125, 0.0625};
    double delta_star = 0.0625;
    // x cells per unit length per eps-period
    int cells_per_period = 32;
    // exact_transport (linear separate fluxes) or limit_solver
    std::string reference = "exact_transport";
    std::array<int, 2> reference_x_cells{128, 128};
    std::array<int, 2> reference_y_cells{1, 64};
    double bound_factor = 0.05;
    double runtime_limit = 300.0;
    double barrier_tol = 1e-12;
};

struct BgkOptions {
    std::vector<double> lambdas{10.0, 100.0, 1000.0};
    double ratio = 1.0 / 3.0;
    double runtime_limit = 600.0;
    BgkConfig run;
};

struct CellOptions {
    std::string family = "hamiltonian";
    std::vector<int> refinement{16, 32, 64, 128};
    double min_order = 0.8;
    int hetero_cells = 64;
    double hetero_q = 2.0;
    double hetero_tol = 1e-10;
    double perturbation = 0.1;
    int relax_cells = 32;
    double pseudo_time = 200.0;
    RelaxOptions relax;
};

struct ContractionOptions {
    double step_tol = 1e-12;
    double margin_factor = 10.0;
    double limit_t_end = 1.0;
    std::array<int, 2> limit_x_cells{64, 64};
    std::array<int, 2> limit_y_cells{1, 16};
    double eps = 0.25;
};

struct K0Options {
    std::vector<int> refinement{16, 32};
    double t_end = 1.0;
    int frames = 5;
    double min_order = 0.8;
    // multiple of (dx + dy) bounding the residual
    double constant = 20.0;
    double control_floor = 0.1;
    double control_amp = 0.25;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string pipeline;
    std::string name;
    unsigned seed = 1;
    int threads = 0;

    std::string flux = "shear";
    FluxParams flux_params;

    std::array<int, 2> x_cells{64, 64};
    double box_lo = 0.0;
    double box_hi = 1.0;
    std::array<int, 2> y_cells{1, 32};
    int xi_cells = 32;
    // 0: derived from the data (M) and xi_cells (L)
    double xi_L = 0.0;
    double xi_M = 0.0;

    SpaceKind space = SpaceKind::exact_rows;
    SpaceOptions space_opt;
    SolverConfig solver;
    DataSpec data;
    DataSpec second;

    ConvergenceOptions convergence;
    BgkOptions bgk;
    CellOptions cell;
    ContractionOptions contraction;
    MultiplierOptions multiplier;
    K0Options k0;

    // The config as given.
    nlohmann::json raw;

    // FNV-1a of the resolved config.
    std::uint64_t hash() const;
    FluxModel make_flux() const;
    XGrid make_x(std::array<int, 2> cells) const;
    YGrid make_y(std::array<int, 2> cells) const;
    // Explicit xi bounds win; otherwise L follows from M and the cell count.
    XiGrid make_xi(double data_M) const;
};

// Throws a schema error naming the offending key or constraint.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
// Fully resolved config with every default filled in.
nlohmann::json to_json(const ExperimentConfig& c);

} // namespace homlab
