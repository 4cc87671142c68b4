#include "homlab/bgk_relax.hpp"
#include "homlab/cell_problem.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace homlab;

namespace {

FluxModel shear()
{
    FluxParams p;
    p.num["mean"] = 1.0;
    p.num["amp"] = 0.5;
    return builtin_flux("shear", p);
}

YGrid square(int n0, int n1)
{
    YGrid y;
    y.dim = 2;
    y.n = {n0, n1};
    return y;
}

// well-prepared shear data: x modulation of a row profile
TwoScaleField shear_data(const XGrid& x, const YGrid& y)
{
    return sample_two_scale(
        [](const Vec2& xs, const Vec2& ys) {
            return 0.4 + 0.3 * std::sin(two_pi * xs[0]) * std::cos(two_pi * xs[1]) + 0.2 * std::cos(two_pi * ys[1]);
        },
        x, y);
}

KineticProjector shear_projector(const YGrid& y, int xi_cells)
{
    return KineticProjector(build_space(SpaceKind::exact_rows, shear(), y, XiGrid::from_support(1.0, xi_cells)));
}

} // namespace

TEST_CASE("iteration cap follows the contraction factor")
{
    CHECK(relaxation_iteration_cap(1.0, 1e-10) == static_cast<int>(std::ceil(std::log(1e-10) / std::log(0.5))) + 2);
    CHECK(relaxation_iteration_cap(0.0, 1e-10) >= 1);
}

TEST_CASE("x-constant prepared data are stationary")
{
    const XGrid x = XGrid::box(2, 4, 0.0, 1.0);
    const YGrid y = square(4, 8);
    const KineticProjector proj = shear_projector(y, 16);
    const TwoScaleField u0 =
        sample_two_scale([](const Vec2&, const Vec2& ys) { return 0.3 + 0.25 * std::cos(two_pi * ys[1]); }, x, y);
    const BgkModel model(shear(), x, proj);
    BgkState s{chi_field(u0, proj.space().xi), 10.0, 0.0};
    const KineticField f0 = s.f;
    for (int step = 0; step < 5; ++step) {
        const KineticField before = s.f;
        model.step(s, model.stable_dt());
        CHECK(kinetic_l1_distance(before, s.f) <= 1e-10);
    }
    CHECK(kinetic_l1_distance(f0, s.f) <= 1e-10);
}

TEST_CASE("pure transport conserves every channel")
{
    const XGrid x = XGrid::box(2, 8, 0.0, 1.0);
    const YGrid y = square(1, 8);
    const KineticProjector proj = shear_projector(y, 12);
    const BgkModel model(shear(), x, proj);
    const KineticField f = chi_field(shear_data(x, y), proj.space().xi);
    KineticField g = f;
    model.transport(f, g, model.stable_dt());
    const std::size_t slab = f.slab();
    for (std::size_t c = 0; c < slab; ++c) {
        double before = 0.0, after = 0.0;
        for (std::size_t ix = 0; ix < x.size(); ++ix) {
            before += f.v[ix * slab + c];
            after += g.v[ix * slab + c];
        }
        CHECK(std::abs(before - after) <= 1e-13);
    }
}

TEST_CASE("relaxation step obeys the one-iteration bound")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    const YGrid y = square(8, 8);
    const KineticProjector proj(build_space(SpaceKind::nullspace, flux, y, xi));
    const BgkModel model(flux, XGrid::box(2, 2, 0.0, 1.0), proj);
    const std::size_t n = y.size() * static_cast<std::size_t>(xi.n());
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double mu : {0.1, 1.0, 10.0}) {
        std::vector<double> fstar(n), out(n);
        for (double& v : fstar) v = unif(rng);
        const int iters = model.relax(fstar.data(), out.data(), mu);
        CHECK(iters <= relaxation_iteration_cap(mu, 1e-10));
        const auto pf = proj.apply(fstar);
        std::vector<double> d1(n), d2(n);
        for (std::size_t i = 0; i < n; ++i) {
            d1[i] = out[i] - fstar[i];
            d2[i] = pf[i] - fstar[i];
        }
        CHECK(slab_norm(proj.space(), d1) <= mu / (1.0 + mu) * slab_norm(proj.space(), d2) + 1e-9);
    }
}

TEST_CASE("invariant suite holds on a small shear run")
{
    const XGrid x = XGrid::box(2, 16, 0.0, 1.0);
    const YGrid y = square(1, 8);
    const KineticProjector proj = shear_projector(y, 16);
    const TwoScaleField u0 = shear_data(x, y);
    BgkConfig cfg;
    cfg.lambda = 10.0;
    cfg.t_end = 0.5;
    cfg.inv_tol = 1e-9;
    const BgkRun run = run_bgk(u0, shear(), proj, cfg);
    CHECK(run.violations == 0);
    // partial chi cells lose at most dxi / 4 per point
    const double dxi = proj.space().xi.h();
    CHECK(run.initial_l2_sq <= run.u0_l1 + 1e-14);
    CHECK(run.initial_l2_sq >= run.u0_l1 - 0.25 * dxi);
    double prev = run.initial_l2_sq;
    for (const auto& row : run.log) {
        CHECK(row.ok);
        CHECK(row.sign_violation <= 1e-9);
        CHECK(row.support_violation <= 1e-9);
        CHECK(row.ml_pairing <= 1e-9);
        CHECK(row.l2_sq <= prev + 1e-9);
        CHECK(row.fp_iterations <= relaxation_iteration_cap(cfg.lambda * row.dt, cfg.fp_tol));
        prev = row.l2_sq;
    }
    const std::string csv = bgk_log_csv(run.log);
    CHECK(csv.rfind("step,", 0) == 0);
}

TEST_CASE("initial L2 norm equals the L1 norm of grid-aligned data")
{
    const XGrid x = XGrid::box(2, 8, 0.0, 1.0);
    const YGrid y = square(1, 4);
    const KineticProjector proj = shear_projector(y, 16);
    const double dxi = proj.space().xi.h();
    const TwoScaleField u0 = sample_two_scale(
        [dxi](const Vec2& xs, const Vec2& ys) { return dxi * std::round(4.0 * std::sin(two_pi * (xs[0] + ys[1]))); }, x, y);
    BgkConfig cfg;
    cfg.t_end = 0.01;
    cfg.ml_samples = 1;
    const BgkRun run = run_bgk(u0, shear(), proj, cfg);
    CHECK(run.initial_l2_sq == doctest::Approx(run.u0_l1).epsilon(1e-14));
}

TEST_CASE("continuity at t = 0 has a lambda-independent envelope")
{
    const XGrid x = XGrid::box(2, 8, 0.0, 1.0);
    const YGrid y = square(1, 8);
    const KineticProjector proj = shear_projector(y, 12);
    const TwoScaleField u0 = shear_data(x, y);
    std::vector<BgkRun> runs;
    for (double lambda : {10.0, 100.0, 1000.0}) {
        BgkConfig cfg;
        cfg.lambda = lambda;
        cfg.t_end = 0.2;
        cfg.ml_samples = 2;
        runs.push_back(run_bgk(u0, shear(), proj, cfg));
    }
    const EnvelopeReport env = continuity_envelope(runs);
    CHECK(env.pass);
    CHECK(env.worst_ratio <= 1.0);
}

TEST_CASE("relaxation pulls the kinetic field toward the constraint set")
{
    // Hamiltonian cell, y-independent data: the limit solution is stationary
    const FluxModel flux = builtin_flux("hamiltonian");
    // data vary along x1 only, so one cell suffices along x2
    XGrid x = XGrid::box(2, 64, 0.0, 1.0);
    x.ax[1].n = 1;
    const YGrid y = square(8, 8);
    const KineticProjector proj(build_space(SpaceKind::nullspace, flux, y, XiGrid::from_support(1.0, 12)));
    const TwoScaleField u0 =
        sample_two_scale([](const Vec2& xs, const Vec2&) { return 0.5 + 0.3 * std::sin(two_pi * xs[0]); }, x, y);
    BgkConfig cfg;
    cfg.t_end = 0.1;
    cfg.check_invariants = false;
    const auto rows = hydrodynamic_study(u0, flux, proj, {0.0, 10.0, 100.0, 1000.0}, cfg,
                                         [&](double t) {
                                             TwoScaleField r = u0;
                                             r.t = t;
                                             return r;
                                         });
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].error < rows[0].error);
        CHECK(rows[i].error <= rows[i - 1].error * (1.0 + 1e-12));
    }
}
