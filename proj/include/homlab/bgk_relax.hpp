#pragma once

#include "homlab/discretization.hpp"
#include "homlab/flux_model.hpp"
#include "homlab/projections.hpp"

#include <functional>
#include <string>
#include <vector>

namespace homlab {

struct BgkConfig {
    double lambda = 10.0;
    double t_end = 0.5;
    double cfl = 0.5;
    std::vector<double> output_times;
    double fp_tol = 1e-10;
    int fp_max = 0; // 0: the contraction-factor bound
    bool check_invariants = true;
    bool abort_on_violation = true;
    double inv_tol = 1e-9;
    int ml_samples = 20;
    unsigned seed = 1;
    int threads = 0;
    // Optional per-Y-cell bounds for the zeroth moment.
    std::vector<double> lower;
    std::vector<double> upper;

    void validate() const;
};

struct BgkState {
    KineticField f;
    double lambda = 0.0;
    double t = 0.0;
};

struct BgkStepLog {
    int step = 0;
    double t = 0.0;
    double dt = 0.0;
    int fp_iterations = 0;
    double l2_sq = 0.0;
    double l2_increase = 0.0;
    double sign_violation = 0.0;
    double support_violation = 0.0;
    // max over x-slabs and sampled g of the slab pairing of M with (Pf - g)
    double ml_pairing = 0.0;
    double barrier_violation = 0.0;
    double l1_from_initial = 0.0;
    bool ok = true;
};

// Transport at frozen speed a(y, xi) = alpha(y) g'(xi) per (y, xi) channel,
// followed by the implicit relaxation f = (f* + mu P f) / (1 + mu), mu = lambda dt.
class BgkModel {
public:
    BgkModel(const FluxModel& flux, const XGrid& x, KineticProjector projector, double cfl = 0.5);

    double stable_dt() const { return dt_; }
    const KineticProjector& projector() const { return proj_; }
    const std::vector<Vec2>& speeds() const { return speeds_; }

    // Returns the number of fixed-point iterations of the relaxation solve.
    int step(BgkState& s, double dt, double fp_tol = 1e-10, int fp_max = 0, int threads = 0) const;
    void transport(const KineticField& in, KineticField& out, double dt, int threads = 0) const;
    // Relaxation of one slab; returns the iteration count.
    int relax(const double* fstar, double* out, double mu, double fp_tol = 1e-10, int fp_max = 0) const;
    // L1 norm of the upwind x-divergence of a f (rate of change under pure transport).
    double transport_rate(const KineticField& f) const;

private:
    XGrid x_;
    KineticProjector proj_;
    std::vector<Vec2> speeds_;
    double dt_ = 0.0;
    double cfl_ = 0.5;
};

// Cap on fixed-point iterations from the contraction factor mu / (1 + mu).
int relaxation_iteration_cap(double mu, double tol);

double kinetic_l2_sq(const KineticField& f);
double kinetic_l1_distance(const KineticField& a, const KineticField& b);

struct BgkRun {
    std::vector<BgkStepLog> log;
    std::vector<TwoScaleField> moments;
    std::vector<double> times;
    KineticField final;
    double initial_l2_sq = 0.0;
    double u0_l1 = 0.0;
    double transport_rate = 0.0;
    int violations = 0;
};

using BgkHook = std::function<void(const BgkState&)>;

// Relaxation run from f(0) = chi(xi, u0(x, y)).  Invariants are checked after every step.
BgkRun run_bgk(const TwoScaleField& u0, const FluxModel& flux, const KineticProjector& projector,
               const BgkConfig& cfg, const BgkHook& hook = {});

struct HydroRow {
    double lambda = 0.0;
    double error = 0.0;
    double final_error = 0.0;
    double seconds = 0.0;
};

using ReferenceFrames = std::function<TwoScaleField(double t)>;

// L2((0,T) x box x Y x R) distance to chi(xi, u_ref), trapezoid rule over the output times.
std::vector<HydroRow> hydrodynamic_study(const TwoScaleField& u0, const FluxModel& flux,
                                         const KineticProjector& projector, const std::vector<double>& lambdas,
                                         const BgkConfig& cfg, const ReferenceFrames& reference);

struct EnvelopeReport {
    std::vector<double> times;
    std::vector<double> envelope;
    double rate_bound = 0.0;
    double worst_ratio = 0.0;
    bool pass = false;
};

// Common modulus of continuity at t = 0 over several lambdas: the largest
// |f(t) - f(0)|_L1 must stay below 2 t times the pure transport rate.
EnvelopeReport continuity_envelope(const std::vector<BgkRun>& runs);

std::string bgk_log_csv(const std::vector<BgkStepLog>& log);

} // namespace homlab
