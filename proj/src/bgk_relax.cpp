#include "homlab/bgk_relax.hpp"

#include "homlab/field_io.hpp"
#include "homlab/fv_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace homlab {

void BgkConfig::validate() const
{
    if (!(lambda >= 0.0)) schema_error("lambda must be nonnegative");
    if (!(t_end > 0.0)) schema_error("t_end must be positive");
    if (!(cfl > 0.0 && cfl <= 0.5)) schema_error("cfl must lie in (0, 0.5]");
    if (!(fp_tol > 0.0)) schema_error("fp_tol must be positive");
    if (ml_samples < 0) schema_error("ml_samples must be nonnegative");
    for (double t : output_times)
        if (!(t > 0.0 && t < t_end)) schema_error("output times must lie in (0, t_end)");
}

int relaxation_iteration_cap(double mu, double tol)
{
    if (mu <= 0.0) return 2;
    const double q = mu / (1.0 + mu);
    return static_cast<int>(std::ceil(std::log(tol) / std::log(q))) + 2;
}

BgkModel::BgkModel(const FluxModel& flux, const XGrid& x, KineticProjector projector, double cfl)
    : x_(x), proj_(std::move(projector)), cfl_(cfl)
{
    if (!flux.tags.divergence_free) schema_error("the relaxation model requires a divergence-free flux");
    if (!(cfl > 0.0 && cfl <= 0.5)) schema_error("cfl must lie in (0, 0.5]");
    const YGrid& y = proj_.space().y;
    const XiGrid& xi = proj_.space().xi;
    if (x.dim != flux.dim) schema_error("x grid dimension does not match the flux");
    speeds_.resize(y.size() * static_cast<std::size_t>(xi.n()));
    double top = 0.0;
    for (std::size_t iy = 0; iy < y.size(); ++iy) {
        const Vec2 a = flux.alpha(y.center(iy));
        for (int k = 0; k < xi.n(); ++k) {
            const double s = flux.g.dg(xi.center(k));
            Vec2 v{a[0] * s, x.dim > 1 ? a[1] * s : 0.0};
            speeds_[iy * static_cast<std::size_t>(xi.n()) + static_cast<std::size_t>(k)] = v;
            top = std::max(top, std::abs(v[0]) / x.ax[0].h() + (x.dim > 1 ? std::abs(v[1]) / x.ax[1].h() : 0.0));
        }
    }
    dt_ = top > 0.0 ? 2.0 * cfl / top : 1e300;
}

void BgkModel::transport(const KineticField& in, KineticField& out, double dt, int threads) const
{
    const std::size_t slab = in.slab();
    // monotonicity of the unsplit upwind update
    double worst = 0.0;
    for (const Vec2& v : speeds_)
        worst = std::max(worst, dt * (std::abs(v[0]) / x_.ax[0].h() + (x_.dim > 1 ? std::abs(v[1]) / x_.ax[1].h() : 0.0)));
    if (worst > 1.0 + 1e-12) numerical_error("CFL violation in kinetic transport (number " + std::to_string(worst) + ")");
    out.x = in.x;
    out.y = in.y;
    out.xi = in.xi;
    out.t = in.t;
    out.v.resize(in.v.size());
    const int n0 = x_.ax[0].n, n1 = x_.dim > 1 ? x_.ax[1].n : 1;
    const double r0 = dt / x_.ax[0].h(), r1 = x_.dim > 1 ? dt / x_.ax[1].h() : 0.0;
    parallel_for(x_.size(), threads, [&](std::size_t ix) {
        const int i0 = static_cast<int>(ix) / n1, i1 = static_cast<int>(ix) % n1;
        const double* c = in.slab_ptr(ix);
        const double* w0 = in.slab_ptr(x_.index((i0 + n0 - 1) % n0, i1));
        const double* e0 = in.slab_ptr(x_.index((i0 + 1) % n0, i1));
        const double* w1 = in.slab_ptr(x_.index(i0, (i1 + n1 - 1) % n1));
        const double* e1 = in.slab_ptr(x_.index(i0, (i1 + 1) % n1));
        double* o = out.slab_ptr(ix);
        for (std::size_t j = 0; j < slab; ++j) {
            const double a0 = speeds_[j][0], a1 = speeds_[j][1];
            double d = 0.0;
            d += a0 > 0.0 ? r0 * a0 * (c[j] - w0[j]) : r0 * a0 * (e0[j] - c[j]);
            if (n1 > 1 && a1 != 0.0) d += a1 > 0.0 ? r1 * a1 * (c[j] - w1[j]) : r1 * a1 * (e1[j] - c[j]);
            o[j] = c[j] - d;
        }
    });
}

int BgkModel::relax(const double* fstar, double* out, double mu, double fp_tol, int fp_max) const
{
    const std::size_t n = proj_.space().y.size() * static_cast<std::size_t>(proj_.space().xi.n());
    if (mu <= 0.0) {
        std::copy(fstar, fstar + n, out);
        return 0;
    }
    const int cap = fp_max > 0 ? fp_max : relaxation_iteration_cap(mu, fp_tol);
    const double w = proj_.space().y.cell_volume() * proj_.space().xi.h();
    std::vector<double> cur(fstar, fstar + n), pf(n), next(n);
    for (int it = 1; it <= cap; ++it) {
        proj_.apply(cur.data(), pf.data());
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = (fstar[i] + mu * pf[i]) / (1.0 + mu);
            change += sqr(next[i] - cur[i]);
        }
        cur.swap(next);
        if (std::sqrt(change * w) <= fp_tol) {
            std::copy(cur.begin(), cur.end(), out);
            return it;
        }
    }
    numerical_error("relaxation fixed point did not converge in " + std::to_string(cap) + " iterations");
}

int BgkModel::step(BgkState& s, double dt, double fp_tol, int fp_max, int threads) const
{
    KineticField tmp;
    transport(s.f, tmp, dt, threads);
    const double mu = s.lambda * dt;
    std::vector<int> its(x_.size(), 0);
    parallel_for(x_.size(), threads, [&](std::size_t ix) {
        its[ix] = relax(tmp.slab_ptr(ix), s.f.slab_ptr(ix), mu, fp_tol, fp_max);
    });
    s.t += dt;
    s.f.t = s.t;
    return *std::max_element(its.begin(), its.end());
}

double BgkModel::transport_rate(const KineticField& f) const
{
    KineticField out;
    const double h = 0.5 * std::min(dt_, 1.0);
    transport(f, out, h);
    double s = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i) s += std::abs(out.v[i] - f.v[i]);
    return s / h * f.x.cell_volume() * f.y.cell_volume() * f.xi.h();
}

double kinetic_l2_sq(const KineticField& f)
{
    double s = 0.0;
    for (double v : f.v) s += v * v;
    return s * f.x.cell_volume() * f.y.cell_volume() * f.xi.h();
}

double kinetic_l1_distance(const KineticField& a, const KineticField& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += std::abs(a.v[i] - b.v[i]);
    return s * a.x.cell_volume() * a.y.cell_volume() * a.xi.h();
}

namespace {

struct InvariantProbe {
    std::vector<std::vector<double>> samples;
};

std::vector<std::vector<double>> sample_members(const KineticProjector& proj, int count, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    const std::size_t n = proj.space().y.size() * static_cast<std::size_t>(proj.space().xi.n());
    std::vector<std::vector<double>> out;
    for (int c = 0; c < count; ++c) {
        std::vector<double> r(n);
        for (double& v : r) v = U(rng);
        out.push_back(proj.apply(r));
    }
    return out;
}

void check_state(const BgkState& s, const BgkModel& model, const BgkConfig& cfg,
                 const std::vector<std::vector<double>>& members, BgkStepLog& log)
{
    const KineticField& f = s.f;
    const XiGrid& xi = f.xi;
    const int nk = xi.n(), z = xi.zero_interface(), lo = xi.window_lo(), hi = xi.window_hi();
    const std::size_t slab = f.slab();
    const std::size_t nx = f.x.size();
    std::vector<double> sign(nx, 0.0), support(nx, 0.0), ml(nx, -1e300), barrier(nx, 0.0);
    const double wslab = f.y.cell_volume() * xi.h();
    parallel_for(nx, cfg.threads, [&](std::size_t ix) {
        const double* p = f.slab_ptr(ix);
        for (std::size_t j = 0; j < slab; ++j) {
            const int k = static_cast<int>(j % static_cast<std::size_t>(nk));
            const double v = p[j];
            const double sv = k >= z ? v : -v;
            sign[ix] = std::max({sign[ix], -sv, sv - 1.0});
            if (k < lo || k >= hi) support[ix] = std::max(support[ix], std::abs(v));
        }
        if (!members.empty() && s.lambda > 0.0) {
            std::vector<double> pf(slab);
            model.projector().apply(p, pf.data());
            for (const auto& g : members) {
                double pair = 0.0;
                for (std::size_t j = 0; j < slab; ++j) pair += s.lambda * (pf[j] - p[j]) * (pf[j] - g[j]);
                ml[ix] = std::max(ml[ix], pair * wslab);
            }
        }
        if (!cfg.lower.empty()) {
            for (std::size_t iy = 0; iy < f.y.size(); ++iy) {
                const double u = moment(p + iy * static_cast<std::size_t>(nk), xi);
                barrier[ix] = std::max({barrier[ix], cfg.lower[iy] - u, u - cfg.upper[iy]});
            }
        }
    });
    log.sign_violation = *std::max_element(sign.begin(), sign.end());
    log.support_violation = *std::max_element(support.begin(), support.end());
    log.ml_pairing = members.empty() || s.lambda <= 0.0 ? 0.0 : *std::max_element(ml.begin(), ml.end());
    log.barrier_violation = *std::max_element(barrier.begin(), barrier.end());
}

} // namespace

BgkRun run_bgk(const TwoScaleField& u0, const FluxModel& flux, const KineticProjector& projector,
               const BgkConfig& cfg, const BgkHook& hook)
{
    cfg.validate();
    if (!(u0.y.dim == projector.space().y.dim && u0.y.size() == projector.space().y.size()))
        schema_error("initial data Y grid does not match the projector");
    if (!cfg.lower.empty() && (cfg.lower.size() != u0.y.size() || cfg.upper.size() != u0.y.size()))
        schema_error("barrier vectors must have one entry per Y cell");
    const XiGrid& xi = projector.space().xi;
    if (sup_norm(u0.v) > xi.M * (1.0 + 1e-12)) schema_error("initial data exceed the support bound M");
    BgkModel model(flux, u0.x, projector, cfg.cfl);

    BgkRun run;
    BgkState s{chi_field(u0, xi), cfg.lambda, 0.0};
    const KineticField f0 = s.f;
    run.initial_l2_sq = kinetic_l2_sq(f0);
    run.u0_l1 = l1_norm(u0.v, u0.x.cell_volume() * u0.y.cell_volume());
    run.transport_rate = model.transport_rate(f0);
    run.moments.push_back(moment(s.f));
    run.times.push_back(0.0);
    const auto members = cfg.check_invariants ? sample_members(projector, cfg.ml_samples, cfg.seed)
                                              : std::vector<std::vector<double>>{};

    SolverConfig sched;
    sched.t_end = cfg.t_end;
    sched.output_times = cfg.output_times;
    std::vector<double> sizes;
    std::vector<char> hits;
    const std::vector<double> schedule = output_schedule(sched);
    plan_steps(model.stable_dt(), schedule, sizes, hits);
    std::size_t next_target = 0;

    double prev_l2 = run.initial_l2_sq;
    for (std::size_t n = 0; n < sizes.size(); ++n) {
        BgkStepLog log;
        log.step = static_cast<int>(n) + 1;
        log.dt = sizes[n];
        log.fp_iterations = model.step(s, sizes[n], cfg.fp_tol, cfg.fp_max, cfg.threads);
        if (hits[n]) s.t = s.f.t = schedule[next_target++];
        log.t = s.t;
        log.l2_sq = kinetic_l2_sq(s.f);
        log.l2_increase = log.l2_sq - prev_l2;
        prev_l2 = log.l2_sq;
        log.l1_from_initial = kinetic_l1_distance(s.f, f0);
        if (cfg.check_invariants) {
            check_state(s, model, cfg, members, log);
            const int cap = cfg.fp_max > 0 ? cfg.fp_max : relaxation_iteration_cap(cfg.lambda * sizes[n], cfg.fp_tol);
            log.ok = log.sign_violation <= cfg.inv_tol && log.support_violation <= cfg.inv_tol &&
                     log.l2_increase <= cfg.inv_tol && log.l2_sq <= run.u0_l1 + cfg.inv_tol &&
                     log.ml_pairing <= cfg.inv_tol && log.barrier_violation <= cfg.inv_tol &&
                     log.fp_iterations <= cap;
        }
        run.log.push_back(log);
        if (hook) hook(s);
        if (hits[n]) {
            run.moments.push_back(moment(s.f));
            run.times.push_back(s.t);
        }
        if (!log.ok) {
            ++run.violations;
            if (cfg.abort_on_violation) {
                run.final = s.f;
                std::ostringstream msg;
                msg << "relaxation invariant violated at step " << log.step << " (t = " << log.t
                    << "): sign " << log.sign_violation << ", support " << log.support_violation << ", L2 increase "
                    << log.l2_increase << ", pairing " << log.ml_pairing << ", barrier " << log.barrier_violation;
                invariant_error(msg.str());
            }
        }
    }
    run.final = std::move(s.f);
    return run;
}

std::vector<HydroRow> hydrodynamic_study(const TwoScaleField& u0, const FluxModel& flux,
                                         const KineticProjector& projector, const std::vector<double>& lambdas,
                                         const BgkConfig& cfg, const ReferenceFrames& reference)
{
    if (lambdas.empty()) schema_error("hydrodynamic study needs at least one lambda");
    std::vector<HydroRow> rows;
    const XiGrid& xi = projector.space().xi;
    for (double lambda : lambdas) {
        const auto start = std::chrono::steady_clock::now();
        BgkConfig c = cfg;
        c.lambda = lambda;
        std::vector<double> times, errs;
        std::vector<double> schedule;
        {
            SolverConfig sc;
            sc.t_end = cfg.t_end;
            sc.output_times = cfg.output_times;
            schedule = output_schedule(sc);
        }
        auto error_at = [&](const KineticField& f, double t) {
            const TwoScaleField ref = reference(t);
            if (ref.v.size() != f.x.size() * f.y.size()) schema_error("reference frame has the wrong size");
            const std::size_t nk = static_cast<std::size_t>(xi.n());
            std::vector<double> profile(nk);
            double s = 0.0;
            for (std::size_t c2 = 0; c2 < ref.v.size(); ++c2) {
                chi_profile_into(ref.v[c2], xi, profile.data());
                const double* p = f.v.data() + c2 * nk;
                for (std::size_t k = 0; k < nk; ++k) s += sqr(p[k] - profile[k]);
            }
            return s * f.x.cell_volume() * f.y.cell_volume() * xi.h();
        };
        times.push_back(0.0);
        errs.push_back(error_at(chi_field(u0, xi), 0.0));
        std::size_t next = 0;
        c.check_invariants = false;
        run_bgk(u0, flux, projector, c, [&](const BgkState& s) {
            if (next < schedule.size() && std::abs(s.t - schedule[next]) <= 1e-12 * std::max(1.0, s.t)) {
                times.push_back(s.t);
                errs.push_back(error_at(s.f, s.t));
                ++next;
            }
        });
        HydroRow row;
        row.lambda = lambda;
        double integral = 0.0;
        for (std::size_t j = 1; j < times.size(); ++j) integral += 0.5 * (times[j] - times[j - 1]) * (errs[j] + errs[j - 1]);
        row.error = std::sqrt(integral);
        row.final_error = std::sqrt(errs.back());
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(row);
    }
    return rows;
}

EnvelopeReport continuity_envelope(const std::vector<BgkRun>& runs)
{
    EnvelopeReport rep;
    if (runs.empty()) return rep;
    for (const auto& r : runs) rep.rate_bound = std::max(rep.rate_bound, 2.0 * r.transport_rate);
    for (const auto& r : runs)
        for (const auto& l : r.log) {
            auto it = std::find_if(rep.times.begin(), rep.times.end(),
                                   [&](double t) { return std::abs(t - l.t) <= 1e-12; });
            if (it == rep.times.end()) {
                rep.times.push_back(l.t);
                rep.envelope.push_back(l.l1_from_initial);
            } else {
                auto& e = rep.envelope[static_cast<std::size_t>(it - rep.times.begin())];
                e = std::max(e, l.l1_from_initial);
            }
        }
    rep.pass = true;
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
        const double allowed = rep.rate_bound * rep.times[j] + 1e-12;
        rep.worst_ratio = std::max(rep.worst_ratio, rep.envelope[j] / allowed);
        if (rep.envelope[j] > allowed) rep.pass = false;
    }
    return rep;
}

std::string bgk_log_csv(const std::vector<BgkStepLog>& log)
{
    CsvWriter w({"step", "t", "dt", "fp_iterations", "l2_sq", "l2_increase", "sign_violation", "support_violation",
                 "ml_pairing", "barrier_violation", "l1_from_initial", "ok"});
    for (const auto& l : log)
        w.row(std::vector<double>{static_cast<double>(l.step), l.t, l.dt, static_cast<double>(l.fp_iterations), l.l2_sq,
                                  l.l2_increase, l.sign_violation, l.support_violation, l.ml_pairing,
                                  l.barrier_violation, l.l1_from_initial, l.ok ? 1.0 : 0.0});
    return w.str();
}

} // namespace homlab
