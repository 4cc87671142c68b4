#include "homlab/cell_problem.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace homlab {

CellFamily cell_family_from_name(const std::string& name)
{
    if (name == "constant") return CellFamily::constant;
    if (name == "hamiltonian") return CellFamily::hamiltonian;
    if (name == "hetero_1d_branch") return CellFamily::hetero_1d_branch;
    if (name == "row_profile") return CellFamily::row_profile;
    schema_error("unknown cell family '" + name + "'");
}

std::string cell_family_name(CellFamily f)
{
    switch (f) {
    case CellFamily::constant: return "constant";
    case CellFamily::hamiltonian: return "hamiltonian";
    case CellFamily::hetero_1d_branch: return "hetero_1d_branch";
    case CellFamily::row_profile: return "row_profile";
    }
    return "?";
}

namespace {

XGrid torus(const YGrid& y)
{
    XGrid x;
    x.dim = y.dim;
    x.ax[0] = Axis{y.n[0], 0.0, 1.0};
    x.ax[1] = y.dim > 1 ? Axis{y.n[1], 0.0, 1.0} : Axis{1, 0.0, 1.0};
    return x;
}

std::size_t torus_neighbor(const XGrid& x, std::size_t i, int d, int shift)
{
    if (x.dim == 1) {
        const int n = x.ax[0].n;
        return static_cast<std::size_t>(((static_cast<int>(i) + shift) % n + n) % n);
    }
    const int n1 = x.ax[1].n;
    int i0 = static_cast<int>(i) / n1, i1 = static_cast<int>(i) % n1;
    if (d == 0)
        i0 = ((i0 + shift) % x.ax[0].n + x.ax[0].n) % x.ax[0].n;
    else
        i1 = ((i1 + shift) % n1 + n1) % n1;
    return x.index(i0, i1);
}

double hetero_branch(const FluxModel& flux, double q, double sign, double y)
{
    const double b = flux.beta(Vec2{y, 0.0})[0];
    const double s = 2.0 * (q - b);
    return sign * std::sqrt(std::max(s, 0.0));
}

} // namespace

void check_family(const FluxModel& flux, CellFamily family, const CellParams& params)
{
    switch (family) {
    case CellFamily::constant:
        if (!flux.tags.divergence_free) schema_error("constant cell family requires a divergence-free flux");
        break;
    case CellFamily::hamiltonian:
        if (!flux.stream) schema_error("hamiltonian cell family requires a flux with a stream function");
        break;
    case CellFamily::hetero_1d_branch:
        if (flux.name != "hetero_1d") schema_error("hetero_1d_branch family requires the hetero_1d flux");
        if (params.sign != 1.0 && params.sign != -1.0) schema_error("branch sign must be +1 or -1");
        if (params.sampling != "center" && params.sampling != "upwind_face")
            schema_error("sampling must be center or upwind_face");
        break;
    case CellFamily::row_profile:
        if (!flux.tags.rows) schema_error("row_profile cell family requires a shear-type flux");
        break;
    }
}

double family_value(const FluxModel& flux, CellFamily family, const CellParams& params, double p, const Vec2& y,
                    double h)
{
    switch (family) {
    case CellFamily::constant: return p;
    case CellFamily::hamiltonian: {
        const double s = flux.stream(y);
        const double mean = params.gain * flux.stream_mean + params.curvature * flux.stream_mean_sq;
        return p + params.gain * s + params.curvature * s * s - mean;
    }
    case CellFamily::hetero_1d_branch: {
        if (!(p > flux.beta_sup[0])) schema_error("hetero branch level q must exceed max b");
        double yy = y[0];
        if (params.sampling == "upwind_face") yy += params.sign > 0.0 ? 0.5 * h : -0.5 * h;
        return hetero_branch(flux, p, params.sign, yy);
    }
    case CellFamily::row_profile: return p + params.row_amp * std::cos(two_pi * y[1]);
    }
    return 0.0;
}

CellDivergence::CellDivergence(const FluxModel& flux, const YGrid& y)
    : y_(y), faces_(face_coefficients(flux, torus(y), 1.0))
{
    const XGrid x = torus(y);
    for (int d = 0; d < x.dim; ++d) {
        right_[d].resize(x.size());
        left_[d].resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            right_[d][i] = torus_neighbor(x, i, d, 1);
            left_[d][i] = torus_neighbor(x, i, d, -1);
        }
    }
}

void CellDivergence::eval(const Profile& g, const double* v, double* out, bool with_beta) const
{
    const std::size_t n = y_.size();
    std::fill(out, out + n, 0.0);
    std::vector<double> F(n);
    for (int d = 0; d < y_.dim; ++d) {
        if (y_.n[d] == 1) continue;
        for (std::size_t i = 0; i < n; ++i)
            F[i] = numerical_flux(Scheme::engquist_osher, g, faces_.a(d, i), with_beta ? faces_.b(d, i) : 0.0, v[i],
                                  v[right_[d][i]]);
        const double inv_h = 1.0 / y_.h(d);
        for (std::size_t i = 0; i < n; ++i) out[i] += (F[i] - F[left_[d][i]]) * inv_h;
    }
}

double CellDivergence::l1(const Profile& g, const double* v, bool with_beta) const
{
    std::vector<double> div(y_.size());
    eval(g, v, div.data(), with_beta);
    return l1_norm(div, y_.cell_volume());
}

std::vector<double> cell_divergence(const FluxModel& flux, const YGrid& y, const std::vector<double>& v)
{
    std::vector<double> div(y.size());
    CellDivergence(flux, y).eval(flux.g, v.data(), div.data());
    return div;
}

double cell_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v)
{
    return l1_norm(cell_divergence(flux, y, v), y.cell_volume());
}

std::vector<double> interface_fluxes(const FluxModel& flux, const YGrid& y, const std::vector<double>& v)
{
    const XGrid x = torus(y);
    const FaceField faces = face_coefficients(flux, x, 1.0);
    std::vector<double> F(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        F[i] = numerical_flux(Scheme::engquist_osher, flux.g, faces.a(0, i), faces.b(0, i), v[i],
                              v[torus_neighbor(x, i, 0, 1)]);
    return F;
}

double weak_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v, int tests, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int kmax = 3;
    const bool active[2] = {y.n[0] > 1, y.dim > 1 && y.n[1] > 1};
    const double vol = y.cell_volume();
    std::vector<Vec2> A(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) A[i] = flux.eval_A(y.center(i), v[i]);

    double worst = 0.0;
    for (int t = 0; t < tests; ++t) {
        struct Mode { int m0, m1; double c, s; };
        std::vector<Mode> modes;
        for (int m0 = active[0] ? -kmax : 0; m0 <= (active[0] ? kmax : 0); ++m0)
            for (int m1 = active[1] ? -kmax : 0; m1 <= (active[1] ? kmax : 0); ++m1)
                if (m0 != 0 || m1 != 0) modes.push_back({m0, m1, normal(rng), normal(rng)});
        double pairing = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const Vec2 p = y.center(i);
            double g0 = 0.0, g1 = 0.0;
            for (const auto& m : modes) {
                const double arg = two_pi * (m.m0 * p[0] + m.m1 * p[1]);
                const double dphase = -m.c * std::sin(arg) + m.s * std::cos(arg);
                g0 += two_pi * m.m0 * dphase;
                g1 += two_pi * m.m1 * dphase;
            }
            pairing += A[i][0] * g0 + (y.dim > 1 ? A[i][1] * g1 : 0.0);
            norm += std::hypot(g0, g1);
        }
        if (norm > 0.0) worst = std::max(worst, std::abs(pairing) / norm);
    }
    (void)vol;
    return worst;
}

double kinetic_residual(const FluxModel& flux, const YGrid& y, const std::vector<double>& v, int levels)
{
    const XGrid x = torus(y);
    const FaceField faces = face_coefficients(flux, x, 1.0);
    const std::size_t n = x.size();
    const double bound = sup_norm(v);
    if (bound == 0.0 || levels < 2) return 0.0;
    const double dk = 2.0 * bound / (levels - 1);
    double negative = 0.0;
    for (int l = 0; l < levels; ++l) {
        const double k = -bound + l * dk;
        std::vector<double> defect(n, 0.0);
        for (int d = 0; d < x.dim; ++d) {
            std::vector<double> Q(n), S(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = torus_neighbor(x, i, d, 1);
                const double a = faces.a(d, i), b = faces.b(d, i);
                Q[i] = numerical_flux(Scheme::engquist_osher, flux.g, a, b, std::max(v[i], k), std::max(v[r], k)) -
                       numerical_flux(Scheme::engquist_osher, flux.g, a, b, std::min(v[i], k), std::min(v[r], k));
                S[i] = numerical_flux(Scheme::engquist_osher, flux.g, a, b, k, k);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t lft = torus_neighbor(x, i, d, -1);
                const double sg = v[i] > k ? 1.0 : (v[i] < k ? -1.0 : 0.0);
                defect[i] -= ((Q[i] - Q[lft]) + sg * (S[i] - S[lft])) / x.ax[d].h();
            }
        }
        for (double m : defect) negative += std::max(0.0, -m);
    }
    return negative * y.cell_volume() * dk;
}

void fill_reports(const FluxModel& flux, CellSolution& s)
{
    s.residual = cell_residual(flux, s.y, s.v);
    s.weak_residual = weak_residual(flux, s.y, s.v);
    s.kinetic_residual = kinetic_residual(flux, s.y, s.v);
    double m = 0.0;
    for (double v : s.v) m += v;
    s.mean = s.v.empty() ? 0.0 : m / static_cast<double>(s.v.size());
}

CellSolution stationary_family(const FluxModel& flux, CellFamily family, const CellParams& params, const YGrid& y)
{
    check_family(flux, family, params);
    if (flux.dim != y.dim) schema_error("flux dimension does not match the cell grid");
    CellSolution s;
    s.y = y;
    s.family = cell_family_name(family);
    s.param = params.p;
    s.v.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) s.v[i] = family_value(flux, family, params, params.p, y.center(i), y.h(0));
    if (family == CellFamily::hamiltonian) {
        // discrete mean removal so that <v> = p on the grid
        double m = 0.0;
        for (double v : s.v) m += v;
        m /= static_cast<double>(s.v.size());
        for (double& v : s.v) v += params.p - m;
    }
    fill_reports(flux, s);
    return s;
}

CellSolution relax_to_cell(const FluxModel& flux, const YGrid& y, const std::vector<double>& v_init, double pseudo_t,
                           const SolverConfig& cfg_in, const RelaxOptions& opt)
{
    if (v_init.size() != y.size()) schema_error("initial cell field has the wrong size");
    if (!(pseudo_t > 0.0)) schema_error("pseudo time must be positive");
    SolverConfig cfg = cfg_in;
    cfg.t_end = pseudo_t;
    cfg.validate();
    const XGrid x = torus(y);
    double M = 1.5 * std::max(sup_norm(v_init), 1e-12);
    auto st = std::make_unique<ConservativeStepper>(face_coefficients(flux, x, 1.0), flux.g, cfg, M);

    CellSolution s;
    s.y = y;
    s.family = "relaxed";
    s.v = v_init;
    s.history.push_back(cell_residual(flux, y, s.v));
    double tau = 0.0;
    while (tau < pseudo_t) {
        const double h = std::min(st->dt(), pseudo_t - tau);
        st->step(s.v, h);
        tau += h;
        ++s.steps;
        const double sup = sup_norm(s.v);
        if (!std::isfinite(sup)) numerical_error("cell relaxation blew up");
        if (sup > M) {
            M = 1.5 * sup;
            st = std::make_unique<ConservativeStepper>(face_coefficients(flux, x, 1.0), flux.g, cfg, M);
        }
        if (s.steps % opt.window == 0) {
            const double r = cell_residual(flux, y, s.v);
            const double prev = s.history.back();
            s.history.push_back(r);
            if (std::abs(r - prev) < opt.plateau) break;
        }
    }
    s.pseudo_time = tau;
    fill_reports(flux, s);
    const std::size_t skip = std::max<std::size_t>(1, s.history.size() / 10);
    for (std::size_t j = skip; j + 1 < s.history.size(); ++j)
        if (s.history[j + 1] > s.history[j] * (1.0 + 1e-9) + 1e-15) s.monotone_tail = false;
    s.converged = s.residual <= opt.tol && s.monotone_tail;
    return s;
}

PreparedData prepare_initial_data(const FluxModel& flux, const std::function<double(const Vec2&)>& x_profile,
                                  CellFamily family, const CellParams& params, double p_min, double p_max,
                                  const XGrid& x, const YGrid& y)
{
    check_family(flux, family, params);
    if (!(p_min <= p_max)) schema_error("parameter range is empty");
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = x_profile(x.center(i));
        if (p < p_min - 1e-12 || p > p_max + 1e-12)
            schema_error("modulation leaves the admissible parameter range");
    }
    PreparedData d;
    const double hy = y.h(0);
    d.u0 = [=](const Vec2& xp, const Vec2& yp) { return family_value(flux, family, params, x_profile(xp), yp, hy); };
    d.field = sample_two_scale(d.u0, x, y);

    CellParams lo = params, hi = params;
    lo.p = p_min;
    hi.p = p_max;
    d.barriers.u1 = stationary_family(flux, family, lo, y);
    d.barriers.u2 = stationary_family(flux, family, hi, y);
    const auto f_lo = [=](const Vec2& yp) { return family_value(flux, family, params, p_min, yp, hy); };
    const auto f_hi = [=](const Vec2& yp) { return family_value(flux, family, params, p_max, yp, hy); };
    bool ordered = true;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (d.barriers.u1.v[i] > d.barriers.u2.v[i]) ordered = false;
    if (ordered) {
        d.lower = f_lo;
        d.upper = f_hi;
    } else {
        std::swap(d.barriers.u1, d.barriers.u2);
        d.lower = f_hi;
        d.upper = f_lo;
    }
    for (std::size_t i = 0; i < y.size(); ++i)
        if (d.barriers.u1.v[i] > d.barriers.u2.v[i]) invariant_error("barrier family is not ordered");
    double M = std::max(sup_norm(d.barriers.u1.v), sup_norm(d.barriers.u2.v));
    M = std::max(M, sup_norm(d.field.v));
    const int fine = y.dim == 1 ? 1024 : 128;
    for (int a = 0; a < fine; ++a)
        for (int b = 0; b < (y.dim == 1 ? 1 : fine); ++b) {
            const Vec2 yp{(a + 0.5) / fine, (b + 0.5) / fine};
            M = std::max({M, std::abs(d.lower(yp)), std::abs(d.upper(yp))});
        }
    d.M = M;
    return d;
}

} // namespace homlab
