#pragma once

#include "homlab/discretization.hpp"
#include "homlab/flux_model.hpp"
#include "homlab/fv_solver.hpp"

#include <string>
#include <vector>

namespace homlab {

enum class CellFamily { constant, hamiltonian, hetero_1d_branch, row_profile };

CellFamily cell_family_from_name(const std::string& name);
std::string cell_family_name(CellFamily f);

struct CellParams {
    // Family parameter: constant value, additive shift, or hetero level q.
    double p = 0.0;
    // hamiltonian: G(s) = gain s + curvature s^2
    double gain = 1.0;
    double curvature = 0.0;
    // hetero_1d_branch: +1 or -1 branch; sampling "center" or "upwind_face"
    double sign = 1.0;
    std::string sampling = "center";
    // row_profile: v = p + row_amp cos(2 pi y2)
    double row_amp = 0.25;
};

struct CellSolution {
    YGrid y;
    std::vector<double> v;
    std::string family;
    double param = 0.0;
    // L1 norm of the scheme's conservative divergence of A(y, v)
    double residual = 0.0;
    // max over smooth test functions of |int A(y,v) . grad psi| / |grad psi|_L1
    double weak_residual = 0.0;
    // L1 mass of the negative part of the discrete stationary entropy defect
    double kinetic_residual = 0.0;
    double mean = 0.0;
    // relaxation only
    std::vector<double> history;
    bool converged = true;
    bool monotone_tail = true;
    double pseudo_time = 0.0;
    int steps = 0;
};

struct BarrierPair {
    CellSolution u1;
    CellSolution u2;
};

// Closed-form value of the family member with parameter p at y.
// For sampling = upwind_face the hetero branch is evaluated at the upwind
// interface of the cell of width h containing y.
double family_value(const FluxModel& flux, CellFamily family, const CellParams& params, double p, const Vec2& y,
                    double h = 0.0);

void check_family(const FluxModel& flux, CellFamily family, const CellParams& params);

CellSolution stationary_family(const FluxModel& flux, CellFamily family, const CellParams& params, const YGrid& y);

// Conservative EO divergence of alpha(y) G(v) + beta(y) on the torus with the
// face coefficients computed once; G is any profile (the flux's own, or linear
// for kinetic slices).
class CellDivergence {
public:
    CellDivergence(const FluxModel& flux, const YGrid& y);

    void eval(const Profile& g, const double* v, double* out, bool with_beta = true) const;
    double l1(const Profile& g, const double* v, bool with_beta = true) const;
    const YGrid& grid() const { return y_; }

private:
    YGrid y_;
    FaceField faces_;
    std::array<std::vector<std::size_t>, 2> right_;
    std::array<std::vector<std::size_t>, 2> left_;
};

// Conservative EO divergence of A(y, v) on the torus, per cell.
std::vector<double> cell_divergence(const FluxModel& flux, const YGrid& y, const std::vector<double>& v);
double cell_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v);
double weak_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v, int tests = 100,
                     unsigned seed = 11);
double kinetic_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v, int levels = 41);
// Interface values of the EO flux (1D torus), used to test A(y, v) = const.
std::vector<double> interface_fluxes(const FluxModel& flux, const YGrid& y, const std::vector<double>& v);

void fill_reports(const FluxModel& flux, CellSolution& s);

struct RelaxOptions {
    double tol = 1e-4;
    int window = 100;
    double plateau = 1e-10;
};

CellSolution relax_to_cell(const FluxModel& flux, const YGrid& y, const std::vector<double>& v_init, double pseudo_t,
                           const SolverConfig& cfg, const RelaxOptions& opt = {});

struct PreparedData {
    TwoScaleFn u0;
    TwoScaleField field;
    BarrierPair barriers;
    std::function<double(const Vec2& y)> lower;
    std::function<double(const Vec2& y)> upper;
    double M = 0.0;
};

// u0(x, y) = family member with parameter x_profile(x).
PreparedData prepare_initial_data(const FluxModel& flux, const std::function<double(const Vec2&)>& x_profile,
                                  CellFamily family, const CellParams& params, double p_min, double p_max,
                                  const XGrid& x, const YGrid& y);

} // namespace homlab
