#pragma once

#include "homlab/discretization.hpp"
#include "homlab/fv_solver.hpp"

#include <functional>
#include <string>
#include <vector>

namespace homlab {

// Separable bump kernel of half-width delta, normalized discretely per axis.
struct MollifierSpec {
    double delta = 1.0 / 16.0;

    static double base(double s);
    // Offsets -m..m (index j + m) with sum w = 1 on a grid of spacing h.
    std::vector<double> weights(double h) const;
    double support_radius() const { return delta; }
};

// Periodic x-convolution of every Y slice.
TwoScaleField mollify(const TwoScaleField& u, const MollifierSpec& moll);
MacroField mollify(const MacroField& u, const MollifierSpec& moll);

// Bilinear in x and periodic bilinear in y.
double evaluate_two_scale(const TwoScaleField& u, const Vec2& x, const Vec2& y);

struct Window {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 1.0};

    bool contains(const Vec2& p, int dim) const;
    // central half of the box
    static Window central_half(const XGrid& x);
};

double l1_on_window(const MacroField& u, const Window& K);

// Trapezoid-in-time L1(K) distance between the direct frames and the
// mollified reference evaluated at (x, x / eps).  Frames are matched by time.
double strong_convergence_metric(const std::vector<MacroField>& direct, const std::vector<TwoScaleField>& reference,
                                 const MollifierSpec& moll, double eps, const Window& K, int threads = 0);
// Same with the reference frames already mollified.
double distance_to_mollified(const std::vector<MacroField>& direct, const std::vector<TwoScaleField>& mollified,
                             double eps, const Window& K, int threads = 0);

double two_scale_pairing(const MacroField& u_eps, const TwoScaleField& u_ref,
                         const std::function<double(const Vec2&)>& psi_x,
                         const std::function<double(const Vec2&)>& psi_y, double eps);

struct MarginPoint {
    double t = 0.0;
    double initial = 0.0;
    double current = 0.0;
    double margin = 0.0;
};

using Weight = std::function<double(const Vec2&)>;

// margin(t) = e^{C t} int |u1(0) - u2(0)| w - int |u1(t) - u2(t)| w
std::vector<MarginPoint> contraction_check(const std::vector<TwoScaleField>& a, const std::vector<TwoScaleField>& b,
                                           double C, const Weight& w);
std::vector<MarginPoint> contraction_check(const std::vector<MacroField>& a, const std::vector<MacroField>& b,
                                           double C, const Weight& w);

// Largest amount by which u leaves [lower(x/eps), upper(x/eps)] over all frames (<= 0 when inside).
double barrier_check(const std::vector<MacroField>& frames, const std::function<double(const Vec2&)>& lower,
                     const std::function<double(const Vec2&)>& upper, double eps);

struct ConvergenceReport {
    std::vector<double> eps;
    std::vector<double> delta;
    // D[i][j] for eps[i], delta[j]
    std::vector<std::vector<double>> D;
    std::vector<double> pairing_gap;
    std::vector<double> seconds;
    std::vector<int> x_cells;
    int y_cells = 0;
    double t_end = 0.0;
    double u0_l1_window = 0.0;

    bool valid() const;
    std::string csv() const;
    std::string json() const;
};

} // namespace homlab
