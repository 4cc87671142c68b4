#pragma once

#include "homlab/discretization.hpp"
#include "homlab/flux_model.hpp"
#include "homlab/fv_solver.hpp"
#include "homlab/projections.hpp"

#include <functional>
#include <string>
#include <vector>

namespace homlab {

struct LimitSolution {
    TwoScaleTrajectory traj;
    // projected advection field per Y cell
    std::vector<Vec2> a_tilde;
    Profile g;
    // K0 residual of the initial data (max over x)
    double preparation_residual = 0.0;
};

// K0 residual of a two-scale field: for each x, the L1(Y) norm of the
// discrete div_y(a0 G(u(x, .))).  Reports the max and the mean over x.
struct K0Residual {
    double t = 0.0;
    double flux_max = 0.0;
    double flux_mean = 0.0;
    // same for div_y(a0 chi(xi, u)) integrated over xi
    double chi_max = 0.0;
};

K0Residual k0_residual(const TwoScaleField& u, const FluxModel& flux, int threads = 0);

// Homogenized separate problem d_t u + div_x(a~0(y) g(u)) = 0, one x-problem per Y cell.
// Throws a schema error when u0 has K0 residual above prep_tol.
LimitSolution solve_limit_separate(const TwoScaleField& u0, const FluxModel& flux, const ConstraintSpace& space,
                                   const SolverConfig& cfg, double prep_tol);

std::vector<K0Residual> check_K0_invariance(const TwoScaleTrajectory& traj, const FluxModel& flux, int threads = 0);

// Test functions psi(y, xi) with d_xi psi >= 0 and div_y(a0 psi) = 0.
struct KineticTest {
    std::string name;
    std::function<double(const Vec2& y, double xi)> psi;
    bool admissible = true;
};

std::vector<KineticTest> generate_tests(const FluxModel& flux, const XiGrid& xi, int count, unsigned seed,
                                        bool include_negative_control = true);

struct PairingProbe {
    double t = 0.0;
    Vec2 x{0.0, 0.0};
    std::string test;
    bool admissible = true;
    double pairing = 0.0;
};

struct MultiplierReport {
    std::vector<PairingProbe> probes;
    double worst_admissible = -1e300;
    double tolerance = 0.0;
    // integral of the unmollified pairing with psi = 1 over x, per step
    double conservation_defect = 0.0;
    bool pass = false;
};

struct MultiplierOptions {
    int probes = 50;
    int tests = 10;
    double delta_t = 0.1;
    double delta_x = 0.125;
    unsigned seed = 3;
    double tol_floor = 1e-8;
    double tol_factor = 10.0;
};

// Mollified pairings of the discrete multiplier D_t f + D_x(a f), f = 1_{xi < u},
// computed with the upwind stencils of the limit scheme.  traj must hold every step.
MultiplierReport check_multiplier_sign(const LimitSolution& sol, const FluxModel& flux, const XiGrid& xi,
                                       const MultiplierOptions& opt);

// Weight equal to exp(-(1 + |x - c|^2) / 2) inside the unit ball around c and
// exp(-|x - c|) outside; Lipschitz with |grad w| <= w.
double contraction_weight(const Vec2& x, const Vec2& center, int dim);

struct AveragingGap {
    double gap = 0.0;
    double dx = 0.0;
    double mean_speed_x = 0.0;
};

// L1 distance at t_end between the Y-average of the limit solution and the
// solution of the problem with Y-averaged coefficients and Y-averaged data.
AveragingGap averaging_gap(const TwoScaleField& u0, const FluxModel& flux, const ConstraintSpace& space,
                           const SolverConfig& cfg);

} // namespace homlab
