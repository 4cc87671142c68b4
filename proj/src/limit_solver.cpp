#include "homlab/limit_solver.hpp"

#include "homlab/cell_problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace homlab {

K0Residual k0_residual(const TwoScaleField& u, const FluxModel& flux, int threads)
{
    if (!flux.tags.divergence_free) schema_error("K0 residual requires a divergence-free flux");
    const CellDivergence op(flux, u.y);
    const std::size_t nx = u.x.size(), ny = u.y.size();
    const double M = std::max(sup_norm(u.v), 1e-12);
    const XiGrid xi = XiGrid::from_support(M * (1.0 + 1e-9), 32);
    const Profile lin{ProfileKind::linear};
    std::vector<double> rf(nx), rc(nx);
    parallel_for(nx, threads, [&](std::size_t ix) {
        const double* row = u.v.data() + ix * ny;
        rf[ix] = op.l1(flux.g, row, false);
        std::vector<double> chi(ny * static_cast<std::size_t>(xi.n())), slice(ny);
        for (std::size_t iy = 0; iy < ny; ++iy) chi_profile_into(row[iy], xi, chi.data() + iy * xi.n());
        double s = 0.0;
        for (int k = 0; k < xi.n(); ++k) {
            bool any = false;
            for (std::size_t iy = 0; iy < ny; ++iy) {
                slice[iy] = chi[iy * xi.n() + static_cast<std::size_t>(k)];
                any = any || slice[iy] != 0.0;
            }
            if (any) s += op.l1(lin, slice.data(), false) * xi.h();
        }
        rc[ix] = s;
    });
    K0Residual r;
    r.t = u.t;
    for (std::size_t ix = 0; ix < nx; ++ix) {
        r.flux_max = std::max(r.flux_max, rf[ix]);
        r.flux_mean += rf[ix] / static_cast<double>(nx);
        r.chi_max = std::max(r.chi_max, rc[ix]);
    }
    return r;
}

LimitSolution solve_limit_separate(const TwoScaleField& u0, const FluxModel& flux, const ConstraintSpace& space,
                                   const SolverConfig& cfg, double prep_tol)
{
    if (!flux.tags.separate) schema_error("the homogenized separate problem requires a separate flux");
    if (space.y.size() != u0.y.size() || space.y.dim != u0.y.dim) schema_error("constraint space grid does not match the data");
    const SeparateFlux sf = separate_part(flux);
    LimitSolution sol;
    sol.g = sf.g;
    sol.preparation_residual = k0_residual(u0, flux, cfg.threads).flux_max;
    if (sol.preparation_residual > prep_tol)
        schema_error("initial data are not well prepared: K0 residual " + std::to_string(sol.preparation_residual) +
                     " exceeds " + std::to_string(prep_tol));
    sol.a_tilde = project_vector_field(flux, space);
    sol.traj = solve_parametric(u0, sol.a_tilde, sf.g, cfg);
    return sol;
}

std::vector<K0Residual> check_K0_invariance(const TwoScaleTrajectory& traj, const FluxModel& flux, int threads)
{
    std::vector<K0Residual> out;
    for (const auto& f : traj.frames) out.push_back(k0_residual(f, flux, threads));
    return out;
}

std::vector<KineticTest> generate_tests(const FluxModel& flux, const XiGrid& xi, int count, unsigned seed,
                                        bool include_negative_control)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<KineticTest> out;
    const double M = xi.M;
    for (int j = 0; j < count; ++j) {
        const double center = M * (2.0 * U(rng) - 1.0);
        const double width = M * (0.02 + 0.3 * U(rng));
        const double amp = 0.8 * U(rng);
        const double phase = two_pi * U(rng);
        const int mode = 1 + static_cast<int>(3 * U(rng));
        auto step = [center, width](double xi_v) { return 0.5 * (1.0 + std::tanh((xi_v - center) / width)); };
        KineticTest t;
        if (j % 2 == 1 && flux.tags.rows) {
            t.name = "row_weighted_" + std::to_string(j);
            t.psi = [=](const Vec2& y, double xi_v) { return (1.0 + amp * std::sin(two_pi * mode * y[1] + phase)) * step(xi_v); };
        } else if (j % 2 == 1 && flux.stream) {
            const auto phi = flux.stream;
            const double scale = 1.0 / std::max(1e-12, std::max(flux.alpha_sup[0], flux.alpha_sup[1]));
            t.name = "stream_weighted_" + std::to_string(j);
            t.psi = [=](const Vec2& y, double xi_v) { return (1.0 + amp * std::sin(scale * phi(y) + phase)) * step(xi_v); };
        } else {
            t.name = "step_" + std::to_string(j);
            t.psi = [=](const Vec2&, double xi_v) { return step(xi_v); };
        }
        out.push_back(std::move(t));
    }
    if (include_negative_control) {
        const double width = 0.1 * M;
        KineticTest t;
        t.name = "decreasing_control";
        t.admissible = false;
        t.psi = [=](const Vec2&, double xi_v) { return 0.5 * (1.0 - std::tanh(xi_v / width)); };
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

// Psi(u) = int psi(xi) w(xi) 1_{xi < u} dxi from the left end of the grid, psi
// constant per cell, with w = 1, (g')^+ or (g')^- integrated exactly.
class CumTable {
public:
    CumTable(const XiGrid& xi, const std::vector<double>& psi, const std::function<double(double)>& antider)
        : xi_(xi), psi_(psi), F_(antider), prefix_(psi.size() + 1, 0.0)
    {
        for (int k = 0; k < xi.n(); ++k)
            prefix_[k + 1] = prefix_[k] + psi[k] * (F_(xi.axis.edge(k + 1)) - F_(xi.axis.edge(k)));
    }
    double operator()(double u) const
    {
        const double h = xi_.h();
        int j = static_cast<int>(std::floor((u - xi_.axis.lo) / h));
        j = std::clamp(j, 0, xi_.n() - 1);
        return prefix_[j] + psi_[j] * (F_(u) - F_(xi_.axis.edge(j)));
    }

private:
    XiGrid xi_;
    std::vector<double> psi_;
    std::function<double(double)> F_;
    std::vector<double> prefix_;
};

double bump(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

} // namespace

MultiplierReport check_multiplier_sign(const LimitSolution& sol, const FluxModel& flux, const XiGrid& xi,
                                       const MultiplierOptions& opt)
{
    const auto& frames = sol.traj.frames;
    if (frames.size() < 3) schema_error("multiplier check needs a trajectory recorded at every step");
    const TwoScaleField& f0 = frames.front();
    const XGrid& x = f0.x;
    const YGrid& y = f0.y;
    const std::size_t nx = x.size(), ny = y.size();
    const Profile g = sol.g;
    auto tests = generate_tests(flux, xi, opt.tests, opt.seed, true);

    // tables per test and Y cell
    struct Tables {
        std::vector<CumTable> plain, pos, neg;
    };
    std::vector<Tables> tabs(tests.size());
    std::vector<double> psi(static_cast<std::size_t>(xi.n()));
    for (std::size_t j = 0; j < tests.size(); ++j)
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (int k = 0; k < xi.n(); ++k) psi[k] = tests[j].psi(y.center(iy), xi.center(k));
            tabs[j].plain.emplace_back(xi, psi, [](double v) { return v; });
            tabs[j].pos.emplace_back(xi, psi, [g](double v) { return g.pos_integral(v); });
            tabs[j].neg.emplace_back(xi, psi, [g](double v) { return g.neg_integral(v); });
        }
    std::vector<double> ones(static_cast<std::size_t>(xi.n()), 1.0);
    Tables unit_tab;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        unit_tab.plain.emplace_back(xi, ones, [](double v) { return v; });
        unit_tab.pos.emplace_back(xi, ones, [g](double v) { return g.pos_integral(v); });
        unit_tab.neg.emplace_back(xi, ones, [g](double v) { return g.neg_integral(v); });
    }

    const int n0 = x.ax[0].n, n1 = x.dim > 1 ? x.ax[1].n : 1;
    auto pairing_field = [&](const Tables& tb, std::size_t n) {
        const TwoScaleField& a = frames[n];
        const TwoScaleField& b = frames[n + 1];
        const double dt = b.t - a.t;
        std::vector<double> q(nx, 0.0);
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const int i0 = static_cast<int>(ix) / n1, i1 = static_cast<int>(ix) % n1;
            const std::size_t right[2] = {x.index((i0 + 1) % n0, i1), x.index(i0, (i1 + 1) % n1)};
            const std::size_t left[2] = {x.index((i0 + n0 - 1) % n0, i1), x.index(i0, (i1 + n1 - 1) % n1)};
            double s = 0.0;
            for (std::size_t iy = 0; iy < ny; ++iy) {
                s += (tb.plain[iy](b.at(ix, iy)) - tb.plain[iy](a.at(ix, iy))) / dt;
                for (int d = 0; d < x.dim; ++d) {
                    const double al = sol.a_tilde[iy][d];
                    if (al == 0.0) continue;
                    auto F = [&](std::size_t l, std::size_t r) {
                        const double ul = a.at(l, iy), ur = a.at(r, iy);
                        return al > 0.0 ? al * (tb.pos[iy](ul) + tb.neg[iy](ur)) : al * (tb.neg[iy](ul) + tb.pos[iy](ur));
                    };
                    s += (F(ix, right[d]) - F(left[d], ix)) / x.ax[d].h();
                }
            }
            q[ix] = s * y.cell_volume();
        }
        return q;
    };

    MultiplierReport rep;
    const std::size_t steps = frames.size() - 1;
    double max_dt = 0.0;
    for (std::size_t n = 0; n < steps; ++n) max_dt = std::max(max_dt, frames[n + 1].t - frames[n].t);
    rep.tolerance = opt.tol_floor + opt.tol_factor * (x.min_h() + max_dt);
    for (std::size_t n = 0; n < steps; ++n) {
        const auto q = pairing_field(unit_tab, n);
        double s = 0.0;
        for (double v : q) s += v;
        rep.conservation_defect = std::max(rep.conservation_defect, std::abs(s * x.cell_volume()));
    }

    std::vector<std::vector<std::vector<double>>> q(tests.size());
    parallel_for(tests.size(), 0, [&](std::size_t j) {
        q[j].resize(steps);
        for (std::size_t n = 0; n < steps; ++n) q[j][n] = pairing_field(tabs[j], n);
    });

    std::mt19937_64 rng(opt.seed + 101);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double T = frames.back().t;
    if (!(opt.delta_t < T)) schema_error("mollifier time width must be shorter than the run");
    for (int p = 0; p < opt.probes; ++p) {
        const double tp = U(rng) * (T - opt.delta_t);
        Vec2 xp{x.ax[0].lo + U(rng) * x.ax[0].length(), x.dim > 1 ? x.ax[1].lo + U(rng) * x.ax[1].length() : 0.0};
        // kernel weights: time over steps in [tp, tp + delta_t], space separable bump (periodic)
        std::vector<double> wt(steps, 0.0);
        double st = 0.0;
        for (std::size_t n = 0; n < steps; ++n) {
            const double tn = 0.5 * (frames[n].t + frames[n + 1].t);
            wt[n] = bump(2.0 * (tn - tp) / opt.delta_t - 1.0) * (frames[n + 1].t - frames[n].t);
            st += wt[n];
        }
        std::vector<double> wx(nx, 0.0);
        double sx = 0.0;
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const Vec2 c = x.center(ix);
            double w = 1.0;
            for (int d = 0; d < x.dim; ++d) {
                const double L = x.ax[d].length();
                double r = c[d] - xp[d];
                r -= L * std::round(r / L);
                w *= bump(r / opt.delta_x);
            }
            wx[ix] = w;
            sx += w;
        }
        if (st <= 0.0 || sx <= 0.0) numerical_error("mollifier support contains no grid points");
        for (std::size_t j = 0; j < tests.size(); ++j) {
            double v = 0.0;
            for (std::size_t n = 0; n < steps; ++n) {
                if (wt[n] == 0.0) continue;
                double row = 0.0;
                for (std::size_t ix = 0; ix < nx; ++ix)
                    if (wx[ix] != 0.0) row += wx[ix] * q[j][n][ix];
                v += wt[n] * row;
            }
            v /= st * sx;
            PairingProbe pr{tp, xp, tests[j].name, tests[j].admissible, v};
            if (tests[j].admissible) rep.worst_admissible = std::max(rep.worst_admissible, v);
            rep.probes.push_back(pr);
        }
    }
    rep.pass = rep.worst_admissible <= rep.tolerance;
    return rep;
}

double contraction_weight(const Vec2& x, const Vec2& center, int dim)
{
    double r2 = sqr(x[0] - center[0]);
    if (dim > 1) r2 += sqr(x[1] - center[1]);
    const double r = std::sqrt(r2);
    return r < 1.0 ? std::exp(-0.5 * (1.0 + r2)) : std::exp(-r);
}

AveragingGap averaging_gap(const TwoScaleField& u0, const FluxModel& flux, const ConstraintSpace& space,
                           const SolverConfig& cfg)
{
    const LimitSolution sol = solve_limit_separate(u0, flux, space, cfg, 1e300);
    const std::size_t nx = u0.x.size(), ny = u0.y.size();
    YGrid one;
    one.dim = u0.y.dim;
    one.n = {1, 1};
    TwoScaleField avg0{u0.x, one, std::vector<double>(nx, 0.0), 0.0};
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double s = 0.0;
        for (std::size_t iy = 0; iy < ny; ++iy) s += u0.at(ix, iy);
        avg0.v[ix] = s / static_cast<double>(ny);
    }
    Vec2 mean{0.0, 0.0};
    for (const auto& a : sol.a_tilde) {
        mean[0] += a[0] / static_cast<double>(ny);
        mean[1] += a[1] / static_cast<double>(ny);
    }
    SolverConfig c = cfg;
    if (c.M <= 0.0) c.M = sup_norm(u0.v);
    const TwoScaleTrajectory bar = solve_parametric(avg0, std::vector<Vec2>{mean}, sol.g, c);
    const TwoScaleField& last = sol.traj.frames.back();
    const TwoScaleField& lb = bar.frames.back();
    AveragingGap out;
    out.dx = u0.x.min_h();
    out.mean_speed_x = mean[0];
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double s = 0.0;
        for (std::size_t iy = 0; iy < ny; ++iy) s += last.at(ix, iy);
        out.gap += std::abs(s / static_cast<double>(ny) - lb.v[ix]) * u0.x.cell_volume();
    }
    return out;
}

} // namespace homlab
