#pragma once

#include "homlab/discretization.hpp"
#include "homlab/flux_model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace homlab {

enum class SpaceKind { exact_rows, ergodic, nullspace };

SpaceKind space_kind_from_name(const std::string& name);
std::string space_kind_name(SpaceKind k);

// Partition of the Y cells into invariant classes; projection = class average.
struct Partition {
    std::vector<int> label;
    std::vector<std::vector<int>> classes;

    static Partition from_labels(const std::vector<int>& raw);
    bool same_as(const Partition& other) const;
};

struct SpaceOptions {
    // ergodic: horizon in cell-crossing times
    double horizon_crossings = 200.0;
    // ergodic: integrator step as a fraction of min dy / sup |a|
    double step_fraction = 0.5;
    bool doubling_check = true;
    // ergodic: volume check of the flow map over the horizon
    double flow_step_fraction = 0.1;
    int flow_probes = 20;
    double volume_tol = 1e-6;
    // nullspace: singular values below svd_tol * sigma_max span the kernel
    double svd_tol = 1e-9;
};

// Discrete K (or K0) for fluxes a(y, xi) = alpha(y) g'(xi).  The transport
// direction on a xi-slice only depends on the sign of g', so one operator per
// sign class is stored: index 0 for g' < 0, 1 for g' = 0 (whole space), 2 for g' > 0.
struct ConstraintSpace {
    SpaceKind kind = SpaceKind::exact_rows;
    YGrid y;
    XiGrid xi;
    std::vector<int> slice_class;
    std::array<bool, 3> identity{true, true, true};
    std::array<Partition, 3> partition;
    std::array<Eigen::MatrixXd, 3> basis;
    double horizon = 0.0;
    int doubling_mismatch = 0;
    double volume_defect = 0.0;

    // Projection of one y-field belonging to sign class c.
    void project_slice(int c, const double* in, double* out, std::size_t stride = 1) const;
    // y-fields spanning K on class c.
    std::vector<std::vector<double>> spanning_set(int c) const;
    int dimension(int c) const;
};

ConstraintSpace build_space(SpaceKind kind, const FluxModel& flux, const YGrid& y, const XiGrid& xi,
                            const SpaceOptions& opt = {});

// Upwind discrete div_y(s alpha f) on the torus as a dense matrix.
Eigen::MatrixXd transport_matrix(const FluxModel& flux, const YGrid& y, double sign);

// Invariant classes of Y cells swept by the characteristics of alpha over the horizon.
Partition characteristic_partition(const FluxModel& flux, const YGrid& y, double horizon, double step);

// Largest |det DX(T) - 1| over the probe points, integrating the variational equation.
double flow_volume_defect(const FluxModel& flux, double horizon, double step, int probes, unsigned seed = 5);

// P f on a y-by-xi slab: index iy * xi.n() + k.
void project_K(const ConstraintSpace& space, const double* in, double* out);
std::vector<double> project_K(const ConstraintSpace& space, const std::vector<double>& f);
// |f - P f| in the slab norm.
double K_residual(const ConstraintSpace& space, const std::vector<double>& f);

struct ChiCone {
    XiGrid xi;

    int zero() const { return xi.zero_interface(); }
    int lo() const { return xi.window_lo(); }
    int hi() const { return xi.window_hi(); }
    // Largest constraint violation of a profile (0 for members).
    double violation(const double* phi) const;
};

// Antitonic least squares fit, unit weights (pool adjacent violators).
void antitonic_regression(double* v, int n);

// Euclidean projection of one xi-profile onto the chi cone.
void project_chi_cone(const ChiCone& cone, const double* in, double* out);
std::vector<double> project_chi_cone(const ChiCone& cone, const std::vector<double>& phi);

struct KKStats {
    int iterations = 0;
    double gap = 0.0;
    double k_residual = 0.0;
};

// Projection onto the intersection of K and the cone (slab layout).
class KineticProjector {
public:
    KineticProjector(ConstraintSpace space, double tol = 1e-11, int max_iter = 5000);

    void apply(const double* in, double* out, KKStats* stats = nullptr) const;
    std::vector<double> apply(const std::vector<double>& f, KKStats* stats = nullptr) const;

    const ConstraintSpace& space() const { return space_; }
    const ChiCone& cone() const { return cone_; }
    bool trivial_space() const { return trivial_; }
    double tol() const { return tol_; }

private:
    ConstraintSpace space_;
    ChiCone cone_;
    double tol_;
    int max_iter_;
    bool trivial_;
};

// Slab inner product and norm: cell-average weights dy * dxi.
double slab_dot(const ConstraintSpace& space, const double* a, const double* b);
double slab_norm(const ConstraintSpace& space, const std::vector<double>& f);

// Projected advection field per Y cell on the g' > 0 class.
std::vector<Vec2> project_vector_field(const FluxModel& flux, const ConstraintSpace& space);

} // namespace homlab
