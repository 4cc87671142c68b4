#include "homlab/discretization.hpp"

#include <algorithm>
#include <cmath>

namespace homlab {

int XiGrid::window_lo() const
{
    const int z = zero_interface();
    for (int k = 0; k < n(); ++k)
        if ((k + 1 - z) * h() > -M) return k;
    return n();
}

int XiGrid::window_hi() const
{
    const int z = zero_interface();
    for (int k = n() - 1; k >= 0; --k)
        if ((k - z) * h() < M) return k + 1;
    return 0;
}

XiGrid XiGrid::from_support(double M, int n)
{
    if (n <= 8 || n % 2 != 0) schema_error("xi_cells must be even and larger than 8");
    if (!(M > 0.0)) schema_error("support bound M must be positive");
    return make(M * n / (n - 8.0), n, M);
}

XiGrid XiGrid::make(double L, int n, double M)
{
    if (n < 2 || n % 2 != 0) schema_error("xi_cells must be a positive even number");
    if (!(M > 0.0)) schema_error("support bound M must be positive");
    if (!(L > M)) schema_error("xi window half-width L must exceed the support bound M (L > M)");
    XiGrid g;
    g.axis = Axis{n, -L, L};
    g.M = M;
    return g;
}

Vec2 YGrid::center(std::size_t idx) const
{
    if (dim == 1) return {(static_cast<double>(idx) + 0.5) / n[0], 0.0};
    const std::size_t i0 = idx / n[1];
    const std::size_t i1 = idx % n[1];
    return {(static_cast<double>(i0) + 0.5) / n[0], (static_cast<double>(i1) + 0.5) / n[1]};
}

Vec2 XGrid::center(std::size_t idx) const
{
    if (dim == 1) return {ax[0].center(static_cast<int>(idx)), 0.0};
    const int i0 = static_cast<int>(idx / ax[1].n);
    const int i1 = static_cast<int>(idx % ax[1].n);
    return {ax[0].center(i0), ax[1].center(i1)};
}

double XGrid::min_h() const
{
    return dim > 1 ? std::min(ax[0].h(), ax[1].h()) : ax[0].h();
}

XGrid XGrid::box(int dim, int cells, double lo, double hi)
{
    if (dim != 1 && dim != 2) schema_error("spatial dimension must be 1 or 2");
    if (cells < 1) schema_error("x_cells must be positive");
    if (!(hi > lo)) schema_error("box extent must be positive");
    XGrid g;
    g.dim = dim;
    g.ax[0] = Axis{cells, lo, hi};
    g.ax[1] = dim > 1 ? Axis{cells, lo, hi} : Axis{1, 0.0, 1.0};
    return g;
}

void GridSpec::validate() const
{
    if (!(xi.L() > xi.M)) schema_error("xi window half-width L must exceed the support bound M (L > M)");
    if (!(eps > 0.0)) schema_error("epsilon must be positive");
    if (resolved) {
        const int ny = std::max(y.n[0], y.dim > 1 ? y.n[1] : 1);
        if (x.min_h() > eps / (4.0 * ny) * (1.0 + 1e-12))
            schema_error("resolved mode requires dx <= eps / (4 y_cells)");
    }
}

void chi_profile_into(double u, const XiGrid& xi, double* out)
{
    const int n = xi.n();
    const double h = xi.h();
    if (!(std::abs(u) <= xi.L() * (1.0 + 1e-14)))
        numerical_error("chi_profile: |u| exceeds the xi window half-width L");
    std::fill(out, out + n, 0.0);
    const int z = xi.zero_interface();
    if (u > 0.0) {
        for (int k = z; k < n; ++k) {
            const double a = (k - z) * h;
            if (a >= u) break;
            const double b = a + h;
            out[k] = b <= u ? 1.0 : (u - a) / h;
        }
    } else if (u < 0.0) {
        for (int k = z - 1; k >= 0; --k) {
            const double b = (k + 1 - z) * h;
            if (b <= u) break;
            const double a = b - h;
            out[k] = a >= u ? -1.0 : -(b - u) / h;
        }
    }
}

std::vector<double> chi_profile(double u, const XiGrid& xi)
{
    std::vector<double> out(static_cast<std::size_t>(xi.n()));
    chi_profile_into(u, xi, out.data());
    return out;
}

double negative_part(const XiGrid& xi, int k)
{
    return k < xi.zero_interface() ? 1.0 : 0.0;
}

void indicator_profile_into(double u, const XiGrid& xi, double* out)
{
    chi_profile_into(u, xi, out);
    for (int k = 0; k < xi.zero_interface(); ++k) out[k] += 1.0;
}

std::vector<double> indicator_profile(double u, const XiGrid& xi)
{
    std::vector<double> out(static_cast<std::size_t>(xi.n()));
    indicator_profile_into(u, xi, out.data());
    return out;
}

double moment(const double* f, const XiGrid& xi)
{
    double s = 0.0;
    for (int k = 0; k < xi.n(); ++k) s += f[k];
    return s * xi.h();
}

double moment(const std::vector<double>& f, const XiGrid& xi)
{
    return moment(f.data(), xi);
}

TwoScaleField moment(const KineticField& f)
{
    TwoScaleField u{f.x, f.y, std::vector<double>(f.x.size() * f.y.size()), f.t};
    const std::size_t nk = static_cast<std::size_t>(f.xi.n());
    for (std::size_t c = 0; c < u.v.size(); ++c) u.v[c] = moment(f.v.data() + c * nk, f.xi);
    return u;
}

KineticField chi_field(const TwoScaleField& u, const XiGrid& xi)
{
    KineticField f{u.x, u.y, xi, {}, u.t};
    const std::size_t nk = static_cast<std::size_t>(xi.n());
    f.v.assign(u.v.size() * nk, 0.0);
    for (std::size_t c = 0; c < u.v.size(); ++c) chi_profile_into(u.v[c], xi, f.v.data() + c * nk);
    return f;
}

MacroField compose_oscillating(const TwoScaleFn& u0, const XGrid& x, double eps)
{
    MacroField m{x, std::vector<double>(x.size()), 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec2 xc = x.center(i);
        m.v[i] = u0(xc, Vec2{xc[0] / eps, xc[1] / eps});
    }
    return m;
}

TwoScaleField sample_two_scale(const TwoScaleFn& u0, const XGrid& x, const YGrid& y)
{
    TwoScaleField f{x, y, std::vector<double>(x.size() * y.size()), 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec2 xc = x.center(i);
        for (std::size_t j = 0; j < y.size(); ++j) f.at(i, j) = u0(xc, y.center(j));
    }
    return f;
}

namespace {

// Periodic linear weights on a cell-centered axis: nodes i0, i0+1 with weight w on i0+1.
inline void periodic_weights(double s, int n, int& i0, int& i1, double& w)
{
    const double fl = std::floor(s);
    w = s - fl;
    i0 = static_cast<int>(fl) % n;
    if (i0 < 0) i0 += n;
    i1 = (i0 + 1) % n;
}

} // namespace

double interpolate_y(const double* values, const YGrid& y, const Vec2& p)
{
    int a0, a1, b0 = 0, b1 = 0;
    double wa, wb = 0.0;
    periodic_weights(p[0] * y.n[0] - 0.5, y.n[0], a0, a1, wa);
    if (y.dim == 1) return (1.0 - wa) * values[a0] + wa * values[a1];
    periodic_weights(p[1] * y.n[1] - 0.5, y.n[1], b0, b1, wb);
    const auto v = [&](int i, int j) { return values[y.index(i, j)]; };
    return (1.0 - wa) * ((1.0 - wb) * v(a0, b0) + wb * v(a0, b1)) + wa * ((1.0 - wb) * v(a1, b0) + wb * v(a1, b1));
}

double interpolate_x(const double* values, std::size_t stride, const XGrid& x, const Vec2& p)
{
    int a0, a1, b0 = 0, b1 = 0;
    double wa, wb = 0.0;
    periodic_weights((p[0] - x.ax[0].lo) / x.ax[0].h() - 0.5, x.ax[0].n, a0, a1, wa);
    const auto v = [&](int i, int j) { return values[x.index(i, j) * stride]; };
    if (x.dim == 1) return (1.0 - wa) * v(a0, 0) + wa * v(a1, 0);
    periodic_weights((p[1] - x.ax[1].lo) / x.ax[1].h() - 0.5, x.ax[1].n, b0, b1, wb);
    return (1.0 - wa) * ((1.0 - wb) * v(a0, b0) + wb * v(a0, b1)) + wa * ((1.0 - wb) * v(a1, b0) + wb * v(a1, b1));
}

double sup_norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

double l1_norm(const std::vector<double>& v, double cell_volume)
{
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s * cell_volume;
}

} // namespace homlab
