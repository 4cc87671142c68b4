#include "homlab/diagnostics.hpp"

#include "homlab/field_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace homlab {

double MollifierSpec::base(double s) { return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

std::vector<double> MollifierSpec::weights(double h) const
{
    if (!(delta > 0.0)) schema_error("mollifier width must be positive");
    const int m = std::max(1, static_cast<int>(std::ceil(delta / h)));
    std::vector<double> w(static_cast<std::size_t>(2 * m + 1));
    double s = 0.0;
    for (int j = -m; j <= m; ++j) {
        w[static_cast<std::size_t>(j + m)] = base(j * h / delta);
        s += w[static_cast<std::size_t>(j + m)];
    }
    if (s <= 0.0) {
        std::fill(w.begin(), w.end(), 0.0);
        w[static_cast<std::size_t>(m)] = 1.0;
        return w;
    }
    for (double& v : w) v /= s;
    return w;
}

namespace {

// Periodic convolution along direction d of an x-field with a stride between cells.
void convolve(std::vector<double>& v, const XGrid& x, int d, const std::vector<double>& w, std::size_t stride,
              std::size_t offset)
{
    const int m = static_cast<int>(w.size() / 2);
    const int n0 = x.ax[0].n, n1 = x.dim > 1 ? x.ax[1].n : 1;
    std::vector<double> out(x.size());
    for (std::size_t ix = 0; ix < x.size(); ++ix) {
        const int i0 = static_cast<int>(ix) / n1, i1 = static_cast<int>(ix) % n1;
        double s = 0.0;
        for (int j = -m; j <= m; ++j) {
            const std::size_t src = d == 0 ? x.index(((i0 + j) % n0 + n0) % n0, i1) : x.index(i0, ((i1 + j) % n1 + n1) % n1);
            s += w[static_cast<std::size_t>(j + m)] * v[src * stride + offset];
        }
        out[ix] = s;
    }
    for (std::size_t ix = 0; ix < x.size(); ++ix) v[ix * stride + offset] = out[ix];
}

void periodic_weights(double s, int n, int& a, int& b, double& w)
{
    const double fl = std::floor(s);
    w = s - fl;
    a = ((static_cast<int>(fl) % n) + n) % n;
    b = (a + 1) % n;
}

} // namespace

TwoScaleField mollify(const TwoScaleField& u, const MollifierSpec& moll)
{
    TwoScaleField out = u;
    const std::size_t ny = u.y.size();
    for (int d = 0; d < u.x.dim; ++d) {
        const auto w = moll.weights(u.x.ax[d].h());
        parallel_for(ny, 0, [&](std::size_t iy) { convolve(out.v, u.x, d, w, ny, iy); });
    }
    return out;
}

MacroField mollify(const MacroField& u, const MollifierSpec& moll)
{
    MacroField out = u;
    for (int d = 0; d < u.x.dim; ++d) convolve(out.v, u.x, d, moll.weights(u.x.ax[d].h()), 1, 0);
    return out;
}

double evaluate_two_scale(const TwoScaleField& u, const Vec2& x, const Vec2& y)
{
    const YGrid& yg = u.y;
    const std::size_t ny = yg.size();
    int a0, a1, b0 = 0, b1 = 0;
    double wa, wb = 0.0;
    periodic_weights(y[0] * yg.n[0] - 0.5, yg.n[0], a0, a1, wa);
    auto at_y = [&](int i, int j) { return interpolate_x(u.v.data() + yg.index(i, j), ny, u.x, x); };
    if (yg.dim == 1) return (1.0 - wa) * at_y(a0, 0) + wa * at_y(a1, 0);
    periodic_weights(y[1] * yg.n[1] - 0.5, yg.n[1], b0, b1, wb);
    double s = 0.0;
    if (wa < 1.0) s += (1.0 - wa) * ((wb < 1.0 ? (1.0 - wb) * at_y(a0, b0) : 0.0) + (wb > 0.0 ? wb * at_y(a0, b1) : 0.0));
    if (wa > 0.0) s += wa * ((wb < 1.0 ? (1.0 - wb) * at_y(a1, b0) : 0.0) + (wb > 0.0 ? wb * at_y(a1, b1) : 0.0));
    return s;
}

bool Window::contains(const Vec2& p, int dim) const
{
    if (p[0] < lo[0] || p[0] > hi[0]) return false;
    return dim < 2 || (p[1] >= lo[1] && p[1] <= hi[1]);
}

Window Window::central_half(const XGrid& x)
{
    Window K;
    for (int d = 0; d < 2; ++d) {
        const Axis& a = x.ax[d];
        K.lo[d] = a.lo + 0.25 * a.length();
        K.hi[d] = a.hi - 0.25 * a.length();
    }
    return K;
}

double l1_on_window(const MacroField& u, const Window& K)
{
    double s = 0.0;
    for (std::size_t i = 0; i < u.x.size(); ++i)
        if (K.contains(u.x.center(i), u.x.dim)) s += std::abs(u.v[i]);
    return s * u.x.cell_volume();
}

double distance_to_mollified(const std::vector<MacroField>& direct, const std::vector<TwoScaleField>& mollified,
                             double eps, const Window& K, int threads)
{
    if (direct.empty() || direct.size() != mollified.size()) schema_error("direct and reference frames do not match");
    std::vector<double> dist(direct.size());
    for (std::size_t f = 0; f < direct.size(); ++f) {
        if (std::abs(direct[f].t - mollified[f].t) > 1e-9 * std::max(1.0, direct[f].t))
            schema_error("frame times of direct and reference runs differ");
        const TwoScaleField& R = mollified[f];
        const MacroField& u = direct[f];
        std::vector<double> part(u.x.size(), 0.0);
        parallel_for(u.x.size(), threads, [&](std::size_t i) {
            const Vec2 c = u.x.center(i);
            if (!K.contains(c, u.x.dim)) return;
            const Vec2 y{c[0] / eps, u.x.dim > 1 ? c[1] / eps : 0.0};
            part[i] = std::abs(u.v[i] - evaluate_two_scale(R, c, y));
        });
        double s = 0.0;
        for (double v : part) s += v;
        dist[f] = s * u.x.cell_volume();
    }
    if (direct.size() == 1) return dist[0];
    double D = 0.0;
    for (std::size_t f = 1; f < direct.size(); ++f) D += 0.5 * (direct[f].t - direct[f - 1].t) * (dist[f] + dist[f - 1]);
    return D;
}

double strong_convergence_metric(const std::vector<MacroField>& direct, const std::vector<TwoScaleField>& reference,
                                 const MollifierSpec& moll, double eps, const Window& K, int threads)
{
    std::vector<TwoScaleField> R;
    R.reserve(reference.size());
    for (const auto& r : reference) R.push_back(mollify(r, moll));
    return distance_to_mollified(direct, R, eps, K, threads);
}

double two_scale_pairing(const MacroField& u_eps, const TwoScaleField& u_ref,
                         const std::function<double(const Vec2&)>& psi_x,
                         const std::function<double(const Vec2&)>& psi_y, double eps)
{
    double direct = 0.0;
    for (std::size_t i = 0; i < u_eps.x.size(); ++i) {
        const Vec2 c = u_eps.x.center(i);
        direct += u_eps.v[i] * psi_x(c) * psi_y({c[0] / eps, u_eps.x.dim > 1 ? c[1] / eps : 0.0});
    }
    direct *= u_eps.x.cell_volume();
    double limit = 0.0;
    const std::size_t ny = u_ref.y.size();
    std::vector<double> py(ny);
    for (std::size_t iy = 0; iy < ny; ++iy) py[iy] = psi_y(u_ref.y.center(iy));
    for (std::size_t ix = 0; ix < u_ref.x.size(); ++ix) {
        const double px = psi_x(u_ref.x.center(ix));
        for (std::size_t iy = 0; iy < ny; ++iy) limit += u_ref.at(ix, iy) * px * py[iy];
    }
    limit *= u_ref.x.cell_volume() * u_ref.y.cell_volume();
    return std::abs(direct - limit);
}

namespace {

template <class Field>
double weighted_distance(const Field& a, const Field& b, const Weight& w, std::size_t ny, double vol)
{
    double s = 0.0;
    for (std::size_t ix = 0; ix < a.x.size(); ++ix) {
        const double wx = w(a.x.center(ix));
        for (std::size_t iy = 0; iy < ny; ++iy) s += std::abs(a.v[ix * ny + iy] - b.v[ix * ny + iy]) * wx;
    }
    return s * vol;
}

template <class Field>
std::vector<MarginPoint> margins(const std::vector<Field>& a, const std::vector<Field>& b, double C, const Weight& w,
                                 std::size_t ny, double vol)
{
    if (a.empty() || a.size() != b.size()) schema_error("contraction check needs matching trajectories");
    std::vector<MarginPoint> out;
    const double d0 = weighted_distance(a[0], b[0], w, ny, vol);
    for (std::size_t f = 0; f < a.size(); ++f) {
        MarginPoint p;
        p.t = a[f].t;
        p.initial = std::exp(C * p.t) * d0;
        p.current = weighted_distance(a[f], b[f], w, ny, vol);
        p.margin = p.initial - p.current;
        out.push_back(p);
    }
    return out;
}

} // namespace

std::vector<MarginPoint> contraction_check(const std::vector<TwoScaleField>& a, const std::vector<TwoScaleField>& b,
                                           double C, const Weight& w)
{
    if (a.empty()) schema_error("contraction check needs matching trajectories");
    return margins(a, b, C, w, a[0].y.size(), a[0].x.cell_volume() * a[0].y.cell_volume());
}

std::vector<MarginPoint> contraction_check(const std::vector<MacroField>& a, const std::vector<MacroField>& b,
                                           double C, const Weight& w)
{
    if (a.empty()) schema_error("contraction check needs matching trajectories");
    return margins(a, b, C, w, 1, a[0].x.cell_volume());
}

double barrier_check(const std::vector<MacroField>& frames, const std::function<double(const Vec2&)>& lower,
                     const std::function<double(const Vec2&)>& upper, double eps)
{
    if (frames.empty()) return 0.0;
    const XGrid& x = frames[0].x;
    std::vector<double> lo(x.size()), hi(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec2 c = x.center(i);
        const Vec2 y{c[0] / eps, x.dim > 1 ? c[1] / eps : 0.0};
        lo[i] = lower(y);
        hi[i] = upper(y);
    }
    double worst = -1e300;
    for (const auto& f : frames)
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max({worst, lo[i] - f.v[i], f.v[i] - hi[i]});
    return worst;
}

bool ConvergenceReport::valid() const
{
    if (D.size() != eps.size()) return false;
    for (const auto& row : D) {
        if (row.size() != delta.size()) return false;
        for (double v : row)
            if (!std::isfinite(v) || v < 0.0) return false;
    }
    return true;
}

std::string ConvergenceReport::csv() const
{
    CsvWriter w({"eps", "delta", "D", "x_cells", "y_cells", "t_end", "u0_l1_window"});
    for (std::size_t i = 0; i < eps.size(); ++i)
        for (std::size_t j = 0; j < delta.size(); ++j)
            w.row(std::vector<double>{eps[i], delta[j], D[i][j], i < x_cells.size() ? double(x_cells[i]) : 0.0,
                                      double(y_cells), t_end, u0_l1_window});
    return w.str();
}

std::string ConvergenceReport::json() const
{
    nlohmann::json j;
    j["eps"] = eps;
    j["delta"] = delta;
    j["D"] = D;
    j["pairing_gap"] = pairing_gap;
    j["seconds"] = seconds;
    j["x_cells"] = x_cells;
    j["y_cells"] = y_cells;
    j["t_end"] = t_end;
    j["u0_l1_window"] = u0_l1_window;
    return j.dump(2);
}

} // namespace homlab
