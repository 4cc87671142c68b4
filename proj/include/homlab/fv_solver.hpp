#pragma once

#include "homlab/discretization.hpp"
#include "homlab/flux_model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace homlab {

enum class Scheme { engquist_osher, godunov_exact_1d, upwind_linear };
enum class Splitting { unsplit, strang };

Scheme scheme_from_name(const std::string& name);
Splitting splitting_from_name(const std::string& name);

struct SolverConfig {
    Scheme scheme = Scheme::engquist_osher;
    double cfl = 0.5;
    double t_end = 1.0;
    Splitting splitting = Splitting::unsplit;
    // Extra output times in (0, t_end); t = 0 and t_end are always recorded.
    std::vector<double> output_times;
    bool record_every_step = false;
    bool track_entropy = false;
    // Kruzkov constants; empty means {-M, -M/2, 0, M/2, M}.
    std::vector<double> kruzkov;
    // Support bound used for the time step; <= 0 means sup |u0|.
    double M = 0.0;
    int threads = 0;

    void validate() const;
};

// Flux coefficients on the face to the right of each cell, per direction:
// A_d(face, xi) = alpha * g(xi) + beta with the y-argument taken at the
// interface (averaged across the face in the transverse direction).
struct FaceField {
    XGrid grid;
    bool uniform = false;
    Vec2 u_alpha{0.0, 0.0};
    Vec2 u_beta{0.0, 0.0};
    std::array<std::vector<double>, 2> alpha;
    std::array<std::vector<double>, 2> beta;

    double a(int d, std::size_t i) const { return uniform ? u_alpha[d] : alpha[d][i]; }
    double b(int d, std::size_t i) const { return uniform ? u_beta[d] : beta[d][i]; }
};

FaceField face_coefficients(const FluxModel& flux, const XGrid& x, double eps);
FaceField uniform_faces(const XGrid& x, const Vec2& alpha, const Vec2& beta = {0.0, 0.0});

// Numerical flux for alpha g + beta.
double numerical_flux(Scheme scheme, const Profile& g, double alpha, double beta, double ul, double ur);

struct EntropyResidual {
    std::vector<double> k;
    // per step: min over cells and k of the pointwise production
    std::vector<double> min_production;
    // per step: total production mass (sum over cells and k, times cell volume)
    std::vector<double> mass;
    // per k, per cell: production mass accumulated over all steps
    std::vector<std::vector<double>> accumulated;

    double min_over_run() const;
};

class ConservativeStepper {
public:
    ConservativeStepper(FaceField faces, Profile g, const SolverConfig& cfg, double M);

    double dt() const { return dt_; }
    double speed() const { return speed_; }
    // Largest sum of outgoing coefficients times dt / dx over cells; monotone iff <= 1.
    double monotonicity_number(double dt) const;
    void step(std::vector<double>& u, double dt, EntropyResidual* entropy = nullptr) const;

    const FaceField& faces() const { return faces_; }
    const Profile& profile() const { return g_; }

private:
    void sweep(const std::vector<double>& u, std::vector<double>& out, double dt, int dir_mask,
               const std::vector<double>* k, std::vector<double>* production) const;

    FaceField faces_;
    Profile g_;
    SolverConfig cfg_;
    double M_;
    double dt_;
    double speed_;
};

struct Trajectory {
    std::vector<MacroField> frames;
    EntropyResidual entropy;
    int steps = 0;
    double dt = 0.0;
    double mass_drift = 0.0;
};

struct TwoScaleTrajectory {
    std::vector<TwoScaleField> frames;
    int steps = 0;
    double dt = 0.0;
};

std::vector<double> output_schedule(const SolverConfig& cfg);
// Step sizes reaching every scheduled time exactly; hits mark scheduled arrivals.
void plan_steps(double dt, const std::vector<double>& schedule, std::vector<double>& sizes, std::vector<char>& hits);

using StepHook = std::function<void(int step, double t, const std::vector<double>& u)>;

MacroField step_direct(const MacroField& u, const FluxModel& flux, double eps, const SolverConfig& cfg);

Trajectory solve_direct(const MacroField& u0, const FluxModel& flux, double eps, const SolverConfig& cfg,
                        const StepHook& hook = {});

// Independent per-row solves of d_t u + div_x(speed(y) g(u)) = 0.
TwoScaleTrajectory solve_parametric(const TwoScaleField& u0, const std::function<Vec2(const Vec2&)>& speed,
                                    const Profile& g, const SolverConfig& cfg);
TwoScaleTrajectory solve_parametric(const TwoScaleField& u0, const std::vector<Vec2>& row_speeds,
                                    const Profile& g, const SolverConfig& cfg);

double total_mass(const std::vector<double>& u, double cell_volume);

} // namespace homlab
