#include "homlab/fv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace homlab {

Scheme scheme_from_name(const std::string& name)
{
    if (name == "engquist_osher") return Scheme::engquist_osher;
    if (name == "godunov_exact_1d") return Scheme::godunov_exact_1d;
    if (name == "upwind_linear") return Scheme::upwind_linear;
    schema_error("unknown scheme '" + name + "'");
}

Splitting splitting_from_name(const std::string& name)
{
    if (name == "unsplit") return Splitting::unsplit;
    if (name == "strang") return Splitting::strang;
    schema_error("unknown splitting '" + name + "'");
}

void SolverConfig::validate() const
{
    if (!(cfl > 0.0 && cfl <= 0.5)) schema_error("cfl must lie in (0, 1/2]");
    if (!(t_end > 0.0)) schema_error("t_end must be positive");
    for (double t : output_times)
        if (!(t > 0.0 && t <= t_end)) schema_error("output times must lie in (0, t_end]");
}

namespace {

// 5-point Gauss-Legendre on [-1, 1]
constexpr double kGLx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
constexpr double kGLw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                            0.2369268850561891};

std::size_t neighbor(const XGrid& x, std::size_t i, int d, int shift)
{
    if (x.dim == 1) {
        const int n = x.ax[0].n;
        return static_cast<std::size_t>(((static_cast<int>(i) + shift) % n + n) % n);
    }
    const int n1 = x.ax[1].n;
    int i0 = static_cast<int>(i) / n1;
    int i1 = static_cast<int>(i) % n1;
    if (d == 0)
        i0 = ((i0 + shift) % x.ax[0].n + x.ax[0].n) % x.ax[0].n;
    else
        i1 = ((i1 + shift) % n1 + n1) % n1;
    return x.index(i0, i1);
}

double godunov_core(const Profile& g, double alpha, double ul, double ur)
{
    const auto gmin = [&](double a, double b) {
        if (g.kind == ProfileKind::linear) return a;
        if (a <= 0.0 && b >= 0.0) return 0.0;
        return std::min(g.g(a), g.g(b));
    };
    const auto gmax = [&](double a, double b) {
        if (g.kind == ProfileKind::linear) return b;
        return std::max(g.g(a), g.g(b));
    };
    if (alpha >= 0.0) return ul <= ur ? alpha * gmin(ul, ur) : alpha * gmax(ur, ul);
    return ul <= ur ? alpha * gmax(ul, ur) : alpha * gmin(ur, ul);
}

} // namespace

double numerical_flux(Scheme scheme, const Profile& g, double alpha, double beta, double ul, double ur)
{
    switch (scheme) {
    case Scheme::engquist_osher:
        if (alpha >= 0.0) return alpha * (g.g(0.0) + g.pos_integral(ul) + g.neg_integral(ur)) + beta;
        return alpha * (g.g(0.0) + g.neg_integral(ul) + g.pos_integral(ur)) + beta;
    case Scheme::godunov_exact_1d:
        return godunov_core(g, alpha, ul, ur) + beta;
    case Scheme::upwind_linear:
        return alpha * g.g(alpha >= 0.0 ? ul : ur) + beta;
    }
    return 0.0;
}

FaceField face_coefficients(const FluxModel& flux, const XGrid& x, double eps)
{
    if (flux.dim != x.dim) schema_error("flux dimension does not match the x grid");
    FaceField f;
    f.grid = x;
    const std::size_t n = x.size();
    for (int d = 0; d < x.dim; ++d) {
        f.alpha[d].assign(n, 0.0);
        f.beta[d].assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 c = x.center(i);
        for (int d = 0; d < x.dim; ++d) {
            Vec2 p = c;
            p[d] += 0.5 * x.ax[d].h();
            if (x.dim == 1) {
                const Vec2 y{p[0] / eps, 0.0};
                f.alpha[d][i] = flux.alpha(y)[d];
                f.beta[d][i] = flux.beta(y)[d];
                continue;
            }
            const int t = 1 - d;
            const double half = 0.5 * x.ax[t].h();
            double sa = 0.0, sb = 0.0;
            for (int q = 0; q < 5; ++q) {
                Vec2 pq = p;
                pq[t] = c[t] + half * kGLx[q];
                const Vec2 y{pq[0] / eps, pq[1] / eps};
                sa += kGLw[q] * flux.alpha(y)[d];
                sb += kGLw[q] * flux.beta(y)[d];
            }
            f.alpha[d][i] = 0.5 * sa;
            f.beta[d][i] = 0.5 * sb;
        }
    }
    return f;
}

FaceField uniform_faces(const XGrid& x, const Vec2& alpha, const Vec2& beta)
{
    FaceField f;
    f.grid = x;
    f.uniform = true;
    f.u_alpha = alpha;
    f.u_beta = beta;
    if (x.dim == 1) {
        f.u_alpha[1] = 0.0;
        f.u_beta[1] = 0.0;
    }
    return f;
}

double EntropyResidual::min_over_run() const
{
    double m = std::numeric_limits<double>::infinity();
    for (double v : min_production) m = std::min(m, v);
    return m;
}

ConservativeStepper::ConservativeStepper(FaceField faces, Profile g, const SolverConfig& cfg, double M)
    : faces_(std::move(faces)), g_(g), cfg_(cfg), M_(M)
{
    if (cfg_.scheme == Scheme::upwind_linear && g_.kind != ProfileKind::linear)
        schema_error("upwind_linear requires a linear profile");
    const XGrid& x = faces_.grid;
    double amax = 0.0;
    for (int d = 0; d < x.dim; ++d) {
        if (faces_.uniform) {
            amax = std::max(amax, std::abs(faces_.u_alpha[d]));
        } else {
            for (double a : faces_.alpha[d]) amax = std::max(amax, std::abs(a));
        }
    }
    speed_ = amax * g_.max_slope(M_);
    dt_ = speed_ > 0.0 ? cfg_.cfl * x.min_h() / speed_ : cfg_.t_end;
    if (monotonicity_number(dt_) > 1.0 + 1e-12) numerical_error("CFL violation: scheme not monotone at the chosen time step");
}

double ConservativeStepper::monotonicity_number(double dt) const
{
    const XGrid& x = faces_.grid;
    const double slope = g_.max_slope(M_);
    double worst = 0.0;
    const std::size_t n = faces_.uniform ? 1 : x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double pos = 0.0, neg = 0.0;
        for (int d = 0; d < x.dim; ++d) {
            const double ar = faces_.a(d, i);
            const double al = faces_.a(d, faces_.uniform ? i : neighbor(x, i, d, -1));
            pos += (std::max(ar, 0.0) + std::max(-al, 0.0)) / x.ax[d].h();
            neg += (std::max(-ar, 0.0) + std::max(al, 0.0)) / x.ax[d].h();
        }
        worst = std::max(worst, std::max(pos, neg));
    }
    return dt * slope * worst;
}

void ConservativeStepper::sweep(const std::vector<double>& u, std::vector<double>& out, double dt, int dir_mask,
                                const std::vector<double>* kvals, std::vector<double>* production) const
{
    const XGrid& x = faces_.grid;
    const std::size_t n = x.size();
    std::array<std::vector<double>, 2> F;
    for (int d = 0; d < x.dim; ++d) {
        if (!(dir_mask & (1 << d))) continue;
        F[d].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = neighbor(x, i, d, 1);
            F[d][i] = numerical_flux(cfg_.scheme, g_, faces_.a(d, i), faces_.b(d, i), u[i], u[r]);
        }
    }
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = u[i];
        for (int d = 0; d < x.dim; ++d) {
            if (!(dir_mask & (1 << d))) continue;
            const std::size_t l = neighbor(x, i, d, -1);
            v -= dt / x.ax[d].h() * (F[d][i] - F[d][l]);
        }
        out[i] = v;
    }
    if (!kvals || !production) return;
    // Cell entropy inequality of a monotone scheme with entropy flux
    // Q(a, b) = F(a v k, b v k) - F(a ^ k, b ^ k) and the stationary defect of the constant k.
    const std::size_t nk = kvals->size();
    for (std::size_t kk = 0; kk < nk; ++kk) {
        const double k = (*kvals)[kk];
        std::array<std::vector<double>, 2> Q, S;
        for (int d = 0; d < x.dim; ++d) {
            if (!(dir_mask & (1 << d))) continue;
            Q[d].resize(n);
            S[d].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = neighbor(x, i, d, 1);
                const double a = faces_.a(d, i), b = faces_.b(d, i);
                Q[d][i] = numerical_flux(cfg_.scheme, g_, a, b, std::max(u[i], k), std::max(u[r], k)) -
                          numerical_flux(cfg_.scheme, g_, a, b, std::min(u[i], k), std::min(u[r], k));
                S[d][i] = numerical_flux(cfg_.scheme, g_, a, b, k, k);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double dq = 0.0, ds = 0.0;
            for (int d = 0; d < x.dim; ++d) {
                if (!(dir_mask & (1 << d))) continue;
                const std::size_t l = neighbor(x, i, d, -1);
                const double lam = dt / x.ax[d].h();
                dq += lam * (Q[d][i] - Q[d][l]);
                ds += lam * (S[d][i] - S[d][l]);
            }
            (*production)[kk * n + i] += std::abs(u[i] - k) - dq - std::abs(out[i] - k + ds);
        }
    }
}

void ConservativeStepper::step(std::vector<double>& u, double dt, EntropyResidual* entropy) const
{
    const XGrid& x = faces_.grid;
    const std::size_t n = x.size();
    std::vector<double> production;
    const std::vector<double>* kv = nullptr;
    if (entropy) {
        production.assign(entropy->k.size() * n, 0.0);
        kv = &entropy->k;
    }
    std::vector<double> out;
    if (x.dim == 1 || cfg_.splitting == Splitting::unsplit) {
        sweep(u, out, dt, x.dim == 1 ? 1 : 3, kv, entropy ? &production : nullptr);
        u.swap(out);
    } else {
        sweep(u, out, 0.5 * dt, 1, kv, entropy ? &production : nullptr);
        sweep(out, u, dt, 2, kv, entropy ? &production : nullptr);
        sweep(u, out, 0.5 * dt, 1, kv, entropy ? &production : nullptr);
        u.swap(out);
    }
    for (double v : u)
        if (!std::isfinite(v)) numerical_error("non-finite value produced by the finite-volume step");
    if (!entropy) return;
    if (entropy->accumulated.size() != entropy->k.size())
        entropy->accumulated.assign(entropy->k.size(), std::vector<double>(n, 0.0));
    double mn = std::numeric_limits<double>::infinity(), mass = 0.0;
    const double vol = x.cell_volume();
    for (std::size_t kk = 0; kk < entropy->k.size(); ++kk) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = production[kk * n + i];
            mn = std::min(mn, e);
            mass += e * vol;
            entropy->accumulated[kk][i] += e * vol;
        }
    }
    entropy->min_production.push_back(mn);
    entropy->mass.push_back(mass);
}

std::vector<double> output_schedule(const SolverConfig& cfg)
{
    std::vector<double> s = cfg.output_times;
    s.push_back(cfg.t_end);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end(), [](double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, b); }),
            s.end());
    return s;
}

void plan_steps(double dt, const std::vector<double>& schedule, std::vector<double>& sizes, std::vector<char>& hits)
{
    double t = 0.0;
    for (double target : schedule) {
        while (t < target) {
            double h = std::min(dt, target - t);
            if (target - t - h < 1e-9 * dt) h = target - t;
            const bool hit = h == target - t;
            sizes.push_back(h);
            hits.push_back(hit ? 1 : 0);
            t = hit ? target : t + h;
        }
    }
}

namespace {

double data_bound(const SolverConfig& cfg, const std::vector<double>& u)
{
    return cfg.M > 0.0 ? cfg.M : sup_norm(u);
}

} // namespace

double total_mass(const std::vector<double>& u, double cell_volume)
{
    double s = 0.0;
    for (double v : u) s += v;
    return s * cell_volume;
}

MacroField step_direct(const MacroField& u, const FluxModel& flux, double eps, const SolverConfig& cfg)
{
    cfg.validate();
    ConservativeStepper st(face_coefficients(flux, u.x, eps), flux.g, cfg, data_bound(cfg, u.v));
    MacroField out = u;
    st.step(out.v, st.dt());
    out.t += st.dt();
    return out;
}

Trajectory solve_direct(const MacroField& u0, const FluxModel& flux, double eps, const SolverConfig& cfg,
                        const StepHook& hook)
{
    cfg.validate();
    for (int d = 0; d < u0.x.dim; ++d) {
        const double periods = u0.x.ax[d].length() / eps;
        if (std::abs(periods - std::round(periods)) > 1e-9)
            schema_error("the periodic box must contain a whole number of eps-cells");
    }
    const double M = data_bound(cfg, u0.v);
    ConservativeStepper st(face_coefficients(flux, u0.x, eps), flux.g, cfg, M);
    Trajectory tr;
    tr.dt = st.dt();
    if (cfg.track_entropy) {
        tr.entropy.k = cfg.kruzkov.empty() ? std::vector<double>{-M, -0.5 * M, 0.0, 0.5 * M, M} : cfg.kruzkov;
    }
    std::vector<double> sizes;
    std::vector<char> hits;
    plan_steps(st.dt(), output_schedule(cfg), sizes, hits);

    std::vector<double> u = u0.v;
    const double vol = u0.x.cell_volume();
    const double mass0 = total_mass(u, vol);
    tr.frames.push_back(MacroField{u0.x, u, 0.0});
    double t = 0.0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        st.step(u, sizes[s], cfg.track_entropy ? &tr.entropy : nullptr);
        t += sizes[s];
        ++tr.steps;
        tr.mass_drift = std::max(tr.mass_drift, std::abs(total_mass(u, vol) - mass0));
        if (hook) hook(tr.steps, t, u);
        if (cfg.record_every_step || hits[s]) tr.frames.push_back(MacroField{u0.x, u, t});
    }
    return tr;
}

TwoScaleTrajectory solve_parametric(const TwoScaleField& u0, const std::vector<Vec2>& row_speeds, const Profile& g,
                                    const SolverConfig& cfg)
{
    cfg.validate();
    const std::size_t ny = u0.y.size();
    const std::size_t nx = u0.x.size();
    if (row_speeds.size() != ny) schema_error("one speed per cell row is required");
    const double M = data_bound(cfg, u0.v);
    double amax = 0.0;
    for (const auto& s : row_speeds)
        for (int d = 0; d < u0.x.dim; ++d) amax = std::max(amax, std::abs(s[d]));
    const double speed = amax * g.max_slope(M);
    const double dt = speed > 0.0 ? cfg.cfl * u0.x.min_h() / speed : cfg.t_end;

    std::vector<double> sizes;
    std::vector<char> hits;
    plan_steps(dt, output_schedule(cfg), sizes, hits);
    std::vector<double> times{0.0};
    {
        double t = 0.0;
        for (std::size_t s = 0; s < sizes.size(); ++s) {
            t += sizes[s];
            if (cfg.record_every_step || hits[s]) times.push_back(t);
        }
    }
    TwoScaleTrajectory tr;
    tr.dt = dt;
    tr.steps = static_cast<int>(sizes.size());
    tr.frames.resize(times.size(), TwoScaleField{u0.x, u0.y, std::vector<double>(nx * ny), 0.0});
    for (std::size_t f = 0; f < times.size(); ++f) tr.frames[f].t = times[f];

    parallel_for(ny, cfg.threads, [&](std::size_t iy) {
        ConservativeStepper st(uniform_faces(u0.x, row_speeds[iy]), g, cfg, M);
        if (st.monotonicity_number(dt) > 1.0 + 1e-12) numerical_error("CFL violation in parametric solve");
        std::vector<double> u(nx);
        for (std::size_t ix = 0; ix < nx; ++ix) u[ix] = u0.at(ix, iy);
        std::size_t frame = 0;
        for (std::size_t ix = 0; ix < nx; ++ix) tr.frames[frame].at(ix, iy) = u[ix];
        for (std::size_t s = 0; s < sizes.size(); ++s) {
            st.step(u, sizes[s]);
            if (cfg.record_every_step || hits[s]) {
                ++frame;
                for (std::size_t ix = 0; ix < nx; ++ix) tr.frames[frame].at(ix, iy) = u[ix];
            }
        }
    });
    return tr;
}

TwoScaleTrajectory solve_parametric(const TwoScaleField& u0, const std::function<Vec2(const Vec2&)>& speed,
                                    const Profile& g, const SolverConfig& cfg)
{
    std::vector<Vec2> rows(u0.y.size());
    for (std::size_t iy = 0; iy < rows.size(); ++iy) rows[iy] = speed(u0.y.center(iy));
    return solve_parametric(u0, rows, g, cfg);
}

} // namespace homlab
