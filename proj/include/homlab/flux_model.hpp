#pragma once

#include "homlab/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace homlab {

// Scalar profile g in A(y, xi) = alpha(y) g(xi) + beta(y).
enum class ProfileKind { linear, burgers };

struct Profile {
    ProfileKind kind = ProfileKind::linear;

    double g(double xi) const;
    double dg(double xi) const;
    double d2g(double xi) const;
    // Integrals from 0 to u of the positive / negative part of g'.
    double pos_integral(double u) const;
    double neg_integral(double u) const;
    // sup |g'| over [-bound, bound]
    double max_slope(double bound) const;
    std::string name() const;
};

Profile profile_from_name(const std::string& name);

struct FluxTags {
    bool divergence_free = false;
    bool separate = false;
    // alpha = (alpha_1(y_2), 0): transport along y_1 rows only.
    bool rows = false;
};

struct FluxParams {
    std::map<std::string, double> num;
    std::map<std::string, std::string> str;

    double get(const std::string& key, double fallback) const;
    std::string get(const std::string& key, const std::string& fallback) const;
};

using VecField = std::function<Vec2(const Vec2&)>;
using ScalarField = std::function<double(const Vec2&)>;

struct FluxModel {
    std::string name;
    int dim = 1;
    Vec2 period{1.0, 1.0};

    // Structural form consumed by the solvers.
    VecField alpha;
    VecField beta;
    ScalarField div_alpha;
    ScalarField div_beta;
    Profile g;
    // Stream function phi with alpha = (-d2 phi, d1 phi), when the field has one.
    ScalarField stream;
    // Cell averages of phi and phi^2.
    double stream_mean = 0.0;
    double stream_mean_sq = 0.0;

    // Pointwise evaluators: N flux components and N+1 kinetic coefficients.
    std::function<Vec2(const Vec2&, double)> eval_A;
    std::function<Vec3(const Vec2&, double)> eval_a;

    FluxTags tags;
    Vec2 alpha_sup{0.0, 0.0};
    Vec2 beta_sup{0.0, 0.0};
    // Bound on third derivatives of A and a; scales the validation threshold.
    double smoothness = 1.0;
    // Gradient bound of the divergence-free part, used for the characteristic integrator.
    double alpha_lip = 0.0;

    // max_i sup |a_i| over Y x [-xi_bound, xi_bound], i <= N
    double speed_bound(double xi_bound) const;
};

// Separate structure A = a0(y) g(xi) with div a0 = 0.
struct SeparateFlux {
    int dim = 1;
    VecField a0;
    Profile g;
};

SeparateFlux separate_part(const FluxModel& model);

struct CatalogEntry {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, std::string>> params;
};

const std::vector<CatalogEntry>& flux_catalog();

FluxModel builtin_flux(const std::string& name, const FluxParams& params = {});

struct ValidationReport {
    double h = 0.0;
    double threshold = 0.0;
    double periodicity = 0.0;
    double a_consistency = 0.0;
    double source_consistency = 0.0;
    double kinetic_divergence = 0.0;
    double divergence_free_tag = 0.0;
    double separate_factor = 0.0;
    double separate_divergence = 0.0;
    bool pass = false;

    std::vector<std::pair<std::string, double>> entries() const;
};

ValidationReport validate_flux(const FluxModel& model, int probes, double h,
                               double xi_window = 2.0, unsigned seed = 7);

// Halton points in [0,1)^dims with a seeded Cranley-Patterson shift.
std::vector<std::array<double, 3>> halton_points(int count, int dims, unsigned seed);

} // namespace homlab
