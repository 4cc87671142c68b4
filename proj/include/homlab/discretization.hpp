#pragma once

#include "homlab/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace homlab {

// Uniform cell-centered axis on [lo, hi].
struct Axis {
    int n = 1;
    double lo = 0.0;
    double hi = 1.0;

    double h() const { return (hi - lo) / n; }
    double center(int i) const { return lo + (i + 0.5) * h(); }
    double edge(int i) const { return lo + i * h(); }
    double length() const { return hi - lo; }
};

// Kinetic variable grid on [-L, L] with an even cell count, so xi = 0 is a
// cell interface.  M is the support bound of the data, strictly inside.
struct XiGrid {
    Axis axis;
    double M = 1.0;

    int n() const { return axis.n; }
    double h() const { return axis.h(); }
    double L() const { return axis.hi; }
    double center(int k) const { return axis.center(k); }
    // index of the first cell with xi > 0
    int zero_interface() const { return axis.n / 2; }
    // Cells meeting (-M, M): [window_lo, window_hi)
    int window_lo() const;
    int window_hi() const;

    // L = M + 4 dxi with n cells.
    static XiGrid from_support(double M, int n);
    static XiGrid make(double L, int n, double M);
};

// Periodic cell Y = (0,1)^N.  A direction may be collapsed to one cell when
// the data are known to be constant along it.
struct YGrid {
    int dim = 1;
    std::array<int, 2> n{1, 1};

    std::size_t size() const { return static_cast<std::size_t>(n[0]) * (dim > 1 ? n[1] : 1); }
    double h(int d) const { return 1.0 / n[d]; }
    Vec2 center(std::size_t idx) const;
    std::size_t index(int i0, int i1) const { return static_cast<std::size_t>(i0) * (dim > 1 ? n[1] : 1) + i1; }
    double cell_volume() const { return h(0) * (dim > 1 ? h(1) : 1.0); }
};

// Periodic macroscopic box.
struct XGrid {
    int dim = 1;
    std::array<Axis, 2> ax{};

    std::size_t size() const { return static_cast<std::size_t>(ax[0].n) * (dim > 1 ? ax[1].n : 1); }
    Vec2 center(std::size_t idx) const;
    std::size_t index(int i0, int i1) const { return static_cast<std::size_t>(i0) * (dim > 1 ? ax[1].n : 1) + i1; }
    int stride(int d) const { return d == 0 ? (dim > 1 ? ax[1].n : 1) : 1; }
    double cell_volume() const { return ax[0].h() * (dim > 1 ? ax[1].h() : 1.0); }
    double min_h() const;

    static XGrid box(int dim, int cells, double lo, double hi);
};

struct GridSpec {
    XGrid x;
    YGrid y;
    XiGrid xi;
    double eps = 1.0;
    bool resolved = true;

    // Throws a schema error naming the violated constraint.
    void validate() const;
};

struct MacroField {
    XGrid x;
    std::vector<double> v;
    double t = 0.0;
};

// u(x, y): index = ix * y.size() + iy
struct TwoScaleField {
    XGrid x;
    YGrid y;
    std::vector<double> v;
    double t = 0.0;

    double& at(std::size_t ix, std::size_t iy) { return v[ix * y.size() + iy]; }
    double at(std::size_t ix, std::size_t iy) const { return v[ix * y.size() + iy]; }
};

// f(x, y, xi): index = (ix * y.size() + iy) * xi.n() + k
struct KineticField {
    XGrid x;
    YGrid y;
    XiGrid xi;
    std::vector<double> v;
    double t = 0.0;

    std::size_t slab() const { return y.size() * static_cast<std::size_t>(xi.n()); }
    double* slab_ptr(std::size_t ix) { return v.data() + ix * slab(); }
    const double* slab_ptr(std::size_t ix) const { return v.data() + ix * slab(); }
};

// Cell averages of chi(., u); dxi * sum = u exactly up to round-off.
std::vector<double> chi_profile(double u, const XiGrid& xi);
void chi_profile_into(double u, const XiGrid& xi, double* out);
// Cell averages of 1_{xi < u} = chi + 1_{xi < 0}.
std::vector<double> indicator_profile(double u, const XiGrid& xi);
void indicator_profile_into(double u, const XiGrid& xi, double* out);
// Cell average of 1_{xi < 0}.
double negative_part(const XiGrid& xi, int k);

double moment(const double* f, const XiGrid& xi);
double moment(const std::vector<double>& f, const XiGrid& xi);
// Zeroth moment of a kinetic field: a two-scale field.
TwoScaleField moment(const KineticField& f);

KineticField chi_field(const TwoScaleField& u, const XiGrid& xi);

// u0(x, x/eps) sampled at cell centers.
using TwoScaleFn = std::function<double(const Vec2& x, const Vec2& y)>;
MacroField compose_oscillating(const TwoScaleFn& u0, const XGrid& x, double eps);
TwoScaleField sample_two_scale(const TwoScaleFn& u0, const XGrid& x, const YGrid& y);

// Periodic bilinear interpolation of a Y-field at y (any real coordinates).
double interpolate_y(const double* values, const YGrid& y, const Vec2& point);
// Periodic bilinear interpolation of an x-field.
double interpolate_x(const double* values, std::size_t stride, const XGrid& x, const Vec2& point);

double sup_norm(const std::vector<double>& v);
double l1_norm(const std::vector<double>& v, double cell_volume);

} // namespace homlab
