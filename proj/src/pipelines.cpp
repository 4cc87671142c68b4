#include "homlab/pipelines.hpp"

#include "homlab/diagnostics.hpp"
#include "homlab/field_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace homlab {

using nlohmann::json;
namespace fs = std::filesystem;

Check check_le(const std::string& name, double value, double bound, const std::string& note)
{
    return Check{name, value, bound, "<=", std::isfinite(value) && value <= bound, note};
}

Check check_ge(const std::string& name, double value, double bound, const std::string& note)
{
    return Check{name, value, bound, ">=", std::isfinite(value) && value >= bound, note};
}

Check check_lt(const std::string& name, double value, double bound, const std::string& note)
{
    return Check{name, value, bound, "<", std::isfinite(value) && value < bound, note};
}

bool PipelineResult::pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* PipelineResult::find(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class Output {
public:
    Output(const std::string& dir, PipelineResult& res) : dir_(dir), res_(res) { fs::create_directories(dir_); }

    void text(const std::string& name, const std::string& body)
    {
        std::ofstream out(fs::path(dir_) / name, std::ios::binary);
        if (!out) numerical_error("cannot write '" + (fs::path(dir_) / name).string() + "'");
        out << body;
        res_.artifacts.push_back(name);
    }
    void field(const std::string& name, const FieldBlob& blob)
    {
        write_field((fs::path(dir_) / name).string(), blob);
        res_.artifacts.push_back(name);
    }

private:
    std::string dir_;
    PipelineResult& res_;
};

json grid_json(const XGrid& x)
{
    json j;
    j["dim"] = x.dim;
    j["cells"] = x.dim > 1 ? json::array({x.ax[0].n, x.ax[1].n}) : json::array({x.ax[0].n});
    j["lo"] = x.ax[0].lo;
    j["hi"] = x.ax[0].hi;
    return j;
}

json grid_json(const YGrid& y) { return y.dim > 1 ? json::array({y.n[0], y.n[1]}) : json::array({y.n[0]}); }

json grid_json(const XiGrid& xi) { return json{{"cells", xi.n()}, {"L", xi.L()}, {"M", xi.M}}; }

SolverConfig solver_of(const ExperimentConfig& cfg)
{
    SolverConfig s = cfg.solver;
    s.threads = cfg.threads;
    return s;
}

PreparedData prepare(const FluxModel& flux, const DataSpec& d, const XGrid& x, const YGrid& y)
{
    CellParams params = d.cell;
    params.p = d.modulation.mean;
    const ModulationSpec m = d.modulation;
    return prepare_initial_data(flux, [m](const Vec2& p) { return m(p); }, d.family_kind(), params, d.lower(),
                                d.upper(), x, y);
}

Vec2 wrap(const XGrid& x, Vec2 p)
{
    for (int d = 0; d < x.dim; ++d) {
        const double L = x.ax[d].length();
        p[d] = x.ax[d].lo + std::fmod(std::fmod(p[d] - x.ax[d].lo, L) + L, L);
    }
    return p;
}

// u(t, x, y) = u0(x - a~(y) t, y): the limit solution for linear separate fluxes.
TwoScaleField exact_transport(const TwoScaleFn& u0, const XGrid& x, const YGrid& y, const std::vector<Vec2>& speed,
                              double slope, double t)
{
    TwoScaleField f{x, y, std::vector<double>(x.size() * y.size()), t};
    parallel_for(x.size(), 0, [&](std::size_t ix) {
        const Vec2 c = x.center(ix);
        for (std::size_t iy = 0; iy < y.size(); ++iy) {
            const Vec2 foot = wrap(x, Vec2{c[0] - speed[iy][0] * slope * t, c[1] - speed[iy][1] * slope * t});
            f.at(ix, iy) = u0(foot, y.center(iy));
        }
    });
    return f;
}

bool linear_separate(const FluxModel& flux) { return flux.tags.separate && flux.g.kind == ProfileKind::linear; }

std::vector<double> frame_times(const SolverConfig& s)
{
    std::vector<double> t{0.0};
    for (double v : output_schedule(s)) t.push_back(v);
    return t;
}

std::vector<TwoScaleField> reference_frames(const FluxModel& flux, const PreparedData& d,
                                            const ConstraintSpace& space, const SolverConfig& s,
                                            const std::string& kind, double prep_tol)
{
    std::vector<TwoScaleField> out;
    if (kind == "exact_transport") {
        if (!linear_separate(flux)) schema_error("reference exact_transport requires a linear separate flux");
        const auto speed = project_vector_field(flux, space);
        const double slope = flux.g.dg(0.0);
        for (double t : frame_times(s)) out.push_back(exact_transport(d.u0, d.field.x, d.field.y, speed, slope, t));
    } else {
        out = solve_limit_separate(d.field, flux, space, s, prep_tol).traj.frames;
    }
    return out;
}

} // namespace

PipelineResult run_direct_convergence(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "direct_convergence";
    Output out(out_dir, res);
    const auto& o = cfg.convergence;
    const FluxModel flux = cfg.make_flux();
    const SolverConfig s = solver_of(cfg);

    auto t0 = Clock::now();
    const XGrid xr = cfg.make_x(o.reference_x_cells);
    const YGrid yr = cfg.make_y(o.reference_y_cells);
    const PreparedData d = prepare(flux, cfg.data, xr, yr);
    const ConstraintSpace space = build_space(cfg.space, flux, yr, XiGrid::from_support(d.M, cfg.xi_cells), cfg.space_opt);
    const auto ref = reference_frames(flux, d, space, s, o.reference, 1e-8);
    std::vector<std::vector<TwoScaleField>> moll(o.delta.size());
    for (std::size_t j = 0; j < o.delta.size(); ++j)
        for (const auto& f : ref) moll[j].push_back(mollify(f, MollifierSpec{o.delta[j]}));
    res.runtimes["reference"] = since(t0);

    ConvergenceReport rep;
    rep.eps = o.eps;
    rep.delta = o.delta;
    rep.y_cells = static_cast<int>(yr.size());
    rep.t_end = s.t_end;
    double barrier = -1e300, u0_l1 = 0.0, finest_seconds = 0.0, finest_eps = 1e300;
    json per_eps = json::array();
    for (double eps : o.eps) {
        const double len = xr.ax[0].length();
        const int n = static_cast<int>(std::lround(o.cells_per_period * len / eps));
        const XGrid x = cfg.make_x({n, n});
        const MacroField u0 = compose_oscillating(d.u0, x, eps);
        auto t1 = Clock::now();
        const Trajectory tr = solve_direct(u0, flux, eps, s);
        const double secs = since(t1);
        const Window K = Window::central_half(x);
        std::vector<double> row;
        for (std::size_t j = 0; j < o.delta.size(); ++j)
            row.push_back(distance_to_mollified(tr.frames, moll[j], eps, K, cfg.threads));
        rep.D.push_back(row);
        rep.seconds.push_back(secs);
        rep.x_cells.push_back(n);
        const double b = barrier_check(tr.frames, d.lower, d.upper, eps);
        barrier = std::max(barrier, b);
        // oscillating test function cos(2 pi y_last) against the final frame
        const int last = flux.dim - 1;
        rep.pairing_gap.push_back(two_scale_pairing(
            tr.frames.back(), ref.back(), [](const Vec2&) { return 1.0; },
            [last](const Vec2& y) { return std::cos(two_pi * y[last]); }, eps));
        if (eps < finest_eps) {
            finest_eps = eps;
            finest_seconds = secs;
            u0_l1 = l1_on_window(tr.frames.front(), K);
        }
        per_eps.push_back(json{{"eps", eps},
                               {"x_cells", n},
                               {"steps", tr.steps},
                               {"dt", tr.dt},
                               {"mass_drift", tr.mass_drift},
                               {"barrier_excess", b}});
        std::ostringstream name;
        name << "direct_eps_" << n << ".hlf";
        out.field(name.str(), to_blob(tr.frames.back()));
        res.runtimes["direct_n" + std::to_string(n)] = secs;
    }
    rep.u0_l1_window = u0_l1;
    out.text("convergence.csv", rep.csv());
    out.text("convergence.json", rep.json());
    out.field("reference_final.hlf", to_blob(ref.back()));

    // eps in decreasing order along the rows
    std::vector<std::size_t> order(o.eps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return o.eps[a] > o.eps[b]; });
    const std::size_t js = static_cast<std::size_t>(
        std::find(o.delta.begin(), o.delta.end(), o.delta_star) - o.delta.begin());
    double worst_ratio = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
        worst_ratio = std::max(worst_ratio, rep.D[order[k + 1]][js] / rep.D[order[k]][js]);
    const double finest_D = rep.D[order.back()][js];

    res.checks.push_back(check_ge("report_valid", rep.valid() ? 1.0 : 0.0, 1.0));
    res.checks.push_back(check_lt("D_strict_decrease_ratio", worst_ratio, 1.0,
                                  "largest D(eps_next, delta*) / D(eps, delta*) over decreasing eps"));
    res.checks.push_back(check_le("D_finest_over_u0_l1", finest_D, o.bound_factor * u0_l1,
                                  "D(eps_min, delta*) against bound_factor * |u0|_L1(K)"));
    res.checks.push_back(check_le("finest_runtime_seconds", finest_seconds, o.runtime_limit));
    res.checks.push_back(check_le("barrier_excess", barrier, o.barrier_tol));

    res.summary["reference"] = {{"kind", o.reference}, {"x", grid_json(xr)}, {"y", grid_json(yr)}};
    res.summary["runs"] = per_eps;
    res.summary["D"] = rep.D;
    res.summary["eps"] = rep.eps;
    res.summary["delta"] = rep.delta;
    res.summary["delta_star"] = o.delta_star;
    res.summary["u0_l1_window"] = u0_l1;
    res.summary["pairing_gap"] = rep.pairing_gap;
    return res;
}

namespace {

struct BgkSetup {
    FluxModel flux;
    XGrid x;
    YGrid y;
    PreparedData data;
    XiGrid xi;
    ConstraintSpace space;
};

BgkSetup bgk_setup(const ExperimentConfig& cfg)
{
    BgkSetup b{cfg.make_flux(), cfg.make_x(cfg.x_cells), cfg.make_y(cfg.y_cells), {}, {}, {}};
    b.data = prepare(b.flux, cfg.data, b.x, b.y);
    b.xi = cfg.make_xi(b.data.M);
    b.space = build_space(cfg.space, b.flux, b.y, b.xi, cfg.space_opt);
    return b;
}

BgkConfig bgk_run_config(const ExperimentConfig& cfg, const BgkSetup& b)
{
    BgkConfig r = cfg.bgk.run;
    r.seed = cfg.seed;
    r.threads = cfg.threads;
    r.abort_on_violation = false;
    r.lower = b.data.barriers.u1.v;
    r.upper = b.data.barriers.u2.v;
    return r;
}

} // namespace

PipelineResult run_bgk_invariants(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "bgk_invariants";
    Output out(out_dir, res);
    auto t0 = Clock::now();
    const BgkSetup b = bgk_setup(cfg);
    const KineticProjector proj(b.space);
    const BgkConfig r = bgk_run_config(cfg, b);
    res.runtimes["setup"] = since(t0);

    auto t1 = Clock::now();
    const BgkRun run = run_bgk(b.data.field, b.flux, proj, r);
    const double secs = since(t1);
    res.runtimes["bgk"] = secs;
    out.text("bgk_log.csv", bgk_log_csv(run.log));
    out.field("bgk_moment_final.hlf", to_blob(run.moments.back()));

    double sign = 0.0, support = 0.0, l2 = -1e300, ml = -1e300, barrier = -1e300;
    for (const auto& l : run.log) {
        sign = std::max(sign, l.sign_violation);
        support = std::max(support, l.support_violation);
        l2 = std::max(l2, l.l2_increase);
        ml = std::max(ml, l.ml_pairing);
        barrier = std::max(barrier, l.barrier_violation);
    }
    const double tol = r.inv_tol;
    res.checks.push_back(check_le("violating_steps", run.violations, 0.0));
    res.checks.push_back(check_le("sign_violation", sign, tol));
    res.checks.push_back(check_le("support_violation", support, tol));
    res.checks.push_back(check_le("l2_increase", l2, tol));
    res.checks.push_back(check_le("ml_pairing", ml, tol));
    res.checks.push_back(check_le("barrier_violation", barrier, tol));
    res.checks.push_back(check_le("runtime_seconds", secs, cfg.bgk.runtime_limit));

    res.summary["x"] = grid_json(b.x);
    res.summary["y"] = grid_json(b.y);
    res.summary["xi"] = grid_json(b.xi);
    res.summary["lambda"] = r.lambda;
    res.summary["steps"] = run.log.size();
    res.summary["space"] = space_kind_name(cfg.space);
    res.summary["trivial_space"] = proj.trivial_space();
    if (run.violations > 0)
        invariant_error(std::to_string(run.violations) + " relaxation steps violate an invariant (see bgk_log.csv)");
    return res;
}

PipelineResult run_hydrodynamic_limit(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "hydrodynamic_limit";
    Output out(out_dir, res);
    auto t0 = Clock::now();
    const BgkSetup b = bgk_setup(cfg);
    const KineticProjector proj(b.space);
    BgkConfig r = bgk_run_config(cfg, b);

    SolverConfig s = solver_of(cfg);
    s.t_end = r.t_end;
    s.output_times = r.output_times;
    const auto ref = reference_frames(b.flux, b.data, b.space, s,
                                      linear_separate(b.flux) ? "exact_transport" : "limit_solver", 1e-8);
    res.runtimes["reference"] = since(t0);
    const ReferenceFrames lookup = [&](double t) {
        const TwoScaleField* best = &ref.front();
        for (const auto& f : ref)
            if (std::abs(f.t - t) < std::abs(best->t - t)) best = &f;
        if (std::abs(best->t - t) > 1e-9 * std::max(1.0, t)) schema_error("no reference frame at the requested time");
        return *best;
    };

    std::vector<double> lambdas = cfg.bgk.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    const auto rows = hydrodynamic_study(b.data.field, b.flux, proj, lambdas, r, lookup);
    CsvWriter w({"lambda", "error", "final_error"});
    for (const auto& row : rows) {
        w.row(std::vector<double>{row.lambda, row.error, row.final_error});
        res.runtimes["lambda_" + format_number(row.lambda)] = row.seconds;
    }
    out.text("hydrodynamic.csv", w.str());

    // round-off slack: relative 1e-12
    double worst = -1e300;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        worst = std::max(worst, (rows[i + 1].error - rows[i].error) / rows[i].error);
    res.checks.push_back(check_le("relative_error_increase_over_lambda", rows.size() > 1 ? worst : 0.0, 1e-12,
                                  "largest (error(lambda_next) - error(lambda)) / error(lambda), lambdas ascending"));
    res.checks.push_back(check_le("largest_over_smallest_lambda_error", rows.back().error / rows.front().error,
                                  cfg.bgk.ratio));

    json tbl = json::array();
    for (const auto& row : rows) tbl.push_back({{"lambda", row.lambda}, {"error", row.error}, {"final_error", row.final_error}});
    res.summary["rows"] = tbl;
    res.summary["x"] = grid_json(b.x);
    res.summary["y"] = grid_json(b.y);
    res.summary["xi"] = grid_json(b.xi);
    res.summary["trivial_space"] = proj.trivial_space();
    return res;
}

PipelineResult run_cell_relaxation(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "cell_relaxation";
    Output out(out_dir, res);
    const auto& o = cfg.cell;
    const FluxModel flux = cfg.make_flux();
    const CellFamily family = cell_family_from_name(o.family);
    CellParams params = cfg.data.cell;
    params.p = cfg.data.modulation.mean;

    // family residual under dy halving
    auto t0 = Clock::now();
    CsvWriter refine({"cells", "dy", "residual", "weak_residual", "kinetic_residual", "order"});
    std::vector<double> resid;
    double min_order = 1e300, worst_scaled = 0.0;
    for (std::size_t i = 0; i < o.refinement.size(); ++i) {
        const int n = o.refinement[i];
        const YGrid y = cfg.make_y({n, n});
        const CellSolution sol = stationary_family(flux, family, params, y);
        resid.push_back(sol.residual);
        double order = std::numeric_limits<double>::quiet_NaN();
        if (i > 0) {
            order = std::log(resid[i - 1] / resid[i]) / std::log(static_cast<double>(n) / o.refinement[i - 1]);
            min_order = std::min(min_order, order);
        }
        worst_scaled = std::max(worst_scaled, sol.residual / y.h(0));
        refine.row(std::vector<double>{double(n), y.h(0), sol.residual, sol.weak_residual, sol.kinetic_residual, order});
    }
    out.text("cell_refinement.csv", refine.str());
    res.runtimes["family_refinement"] = since(t0);
    if (o.refinement.size() > 1) res.checks.push_back(check_ge("family_residual_order", min_order, o.min_order));

    // hetero closed-form branch, sampled at the upwind face
    const FluxModel het = builtin_flux("hetero_1d");
    YGrid yh;
    yh.dim = 1;
    yh.n = {o.hetero_cells, 1};
    CellParams hp;
    hp.p = o.hetero_q;
    hp.sign = 1.0;
    hp.sampling = "upwind_face";
    const CellSolution hs = stationary_family(het, CellFamily::hetero_1d_branch, hp, yh);
    const auto F = interface_fluxes(het, yh, hs.v);
    const double spread = *std::max_element(F.begin(), F.end()) - *std::min_element(F.begin(), F.end());
    res.checks.push_back(check_le("hetero_flux_spread", spread, o.hetero_tol));
    out.field("hetero_branch.hlf", to_blob(hs.v, yh));

    // pseudo-time relaxation from perturbed members
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    SolverConfig s = solver_of(cfg);
    CsvWriter hist({"case", "step", "residual"});
    auto relax_case = [&](const std::string& label, const FluxModel& fm, const YGrid& y, const CellSolution& exact) {
        std::vector<double> v = exact.v;
        for (double& e : v) e *= 1.0 + o.perturbation * U(rng);
        auto t1 = Clock::now();
        const CellSolution r = relax_to_cell(fm, y, v, o.pseudo_time, s, o.relax);
        res.runtimes["relax_" + label] = since(t1);
        for (std::size_t k = 0; k < r.history.size(); ++k)
            hist.row(std::vector<std::string>{label, std::to_string(k), format_number(r.history[k])});
        res.checks.push_back(check_le("relax_" + label + "_residual", r.residual, o.relax.tol));
        res.checks.push_back(check_ge("relax_" + label + "_monotone_tail", r.monotone_tail ? 1.0 : 0.0, 1.0));
        res.summary["relax_" + label] = {{"residual", r.residual}, {"steps", r.steps}, {"pseudo_time", r.pseudo_time}};
        out.field("relaxed_" + label + ".hlf", to_blob(r.v, y));
    };
    const YGrid yr = cfg.make_y({o.relax_cells, o.relax_cells});
    relax_case(o.family, flux, yr, stationary_family(flux, family, params, yr));
    relax_case("hetero_1d", het, yh, hs);
    out.text("relax_history.csv", hist.str());

    res.summary["family"] = o.family;
    res.summary["refinement"] = o.refinement;
    res.summary["residuals"] = resid;
    res.summary["max_residual_over_dy"] = worst_scaled;
    res.summary["hetero_flux_spread"] = spread;
    return res;
}

PipelineResult run_contraction_suite(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "contraction_suite";
    Output out(out_dir, res);
    const auto& o = cfg.contraction;
    const FluxModel flux = cfg.make_flux();

    // direct scheme: per-step L1 distance
    auto t0 = Clock::now();
    const XGrid x = cfg.make_x(cfg.x_cells);
    const YGrid y1 = cfg.make_y({1, 1});
    const PreparedData a = prepare(flux, cfg.data, x, y1);
    const PreparedData b = prepare(flux, cfg.second, x, y1);
    SolverConfig s = solver_of(cfg);
    s.record_every_step = true;
    s.M = std::max(a.M, b.M);
    const Trajectory ta = solve_direct(compose_oscillating(a.u0, x, o.eps), flux, o.eps, s);
    const Trajectory tb = solve_direct(compose_oscillating(b.u0, x, o.eps), flux, o.eps, s);
    CsvWriter w({"step", "t", "l1_distance"});
    double worst = -1e300;
    double prev = 0.0;
    for (std::size_t k = 0; k < ta.frames.size(); ++k) {
        double dsum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) dsum += std::abs(ta.frames[k].v[i] - tb.frames[k].v[i]);
        dsum *= x.cell_volume();
        if (k > 0) worst = std::max(worst, (dsum - prev) / std::max(prev, 1e-300));
        prev = dsum;
        w.row(std::vector<double>{double(k), ta.frames[k].t, dsum});
    }
    out.text("direct_contraction.csv", w.str());
    res.runtimes["direct"] = since(t0);
    res.checks.push_back(check_le("direct_l1_relative_increase", worst, o.step_tol));
    const double barrier =
        std::max(barrier_check(ta.frames, a.lower, a.upper, o.eps), barrier_check(tb.frames, b.lower, b.upper, o.eps));
    res.checks.push_back(check_le("direct_barrier_excess", barrier, cfg.convergence.barrier_tol));

    // limit problem with the weight and the Gronwall constant
    auto t1 = Clock::now();
    const XGrid xl = cfg.make_x(o.limit_x_cells);
    const YGrid yl = cfg.make_y(o.limit_y_cells);
    const PreparedData la = prepare(flux, cfg.data, xl, yl);
    const PreparedData lb = prepare(flux, cfg.second, xl, yl);
    const double M = std::max(la.M, lb.M);
    const ConstraintSpace space = build_space(cfg.space, flux, yl, XiGrid::from_support(M, cfg.xi_cells), cfg.space_opt);
    SolverConfig sl = solver_of(cfg);
    sl.t_end = o.limit_t_end;
    sl.output_times.clear();
    for (int k = 1; k < 10; ++k) sl.output_times.push_back(o.limit_t_end * k / 10.0);
    sl.M = M;
    const LimitSolution ua = solve_limit_separate(la.field, flux, space, sl, 1e-8);
    const LimitSolution ub = solve_limit_separate(lb.field, flux, space, sl, 1e-8);
    double amax = 0.0;
    for (const auto& v : ua.a_tilde) amax = std::max({amax, std::abs(v[0]), std::abs(v[1])});
    const double C = amax * flux.g.max_slope(M);
    const Vec2 center{0.5 * (xl.ax[0].lo + xl.ax[0].hi), 0.5 * (xl.ax[1].lo + xl.ax[1].hi)};
    const int dim = xl.dim;
    const auto margins = contraction_check(ua.traj.frames, ub.traj.frames, C,
                                           [center, dim](const Vec2& p) { return contraction_weight(p, center, dim); });
    CsvWriter mw({"t", "initial", "current", "margin"});
    double min_margin = 1e300;
    for (const auto& m : margins) {
        mw.row(std::vector<double>{m.t, m.initial, m.current, m.margin});
        min_margin = std::min(min_margin, m.margin);
    }
    out.text("limit_margins.csv", mw.str());
    res.runtimes["limit"] = since(t1);
    res.checks.push_back(check_ge("limit_min_margin", min_margin, -o.margin_factor * xl.min_h()));

    res.summary["x"] = grid_json(x);
    res.summary["eps"] = o.eps;
    res.summary["limit_x"] = grid_json(xl);
    res.summary["limit_y"] = grid_json(yl);
    res.summary["gronwall_constant"] = C;
    return res;
}

PipelineResult run_multiplier_sign(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "multiplier_sign";
    Output out(out_dir, res);
    const FluxModel flux = cfg.make_flux();
    auto t0 = Clock::now();
    const XGrid x = cfg.make_x(cfg.x_cells);
    const YGrid y = cfg.make_y(cfg.y_cells);
    const PreparedData d = prepare(flux, cfg.data, x, y);
    const XiGrid xi = cfg.make_xi(d.M);
    const ConstraintSpace space = build_space(cfg.space, flux, y, xi, cfg.space_opt);
    SolverConfig s = solver_of(cfg);
    s.record_every_step = true;
    const LimitSolution sol = solve_limit_separate(d.field, flux, space, s, 1e-8);
    res.runtimes["limit"] = since(t0);

    auto t1 = Clock::now();
    MultiplierOptions mo = cfg.multiplier;
    mo.seed = cfg.seed;
    const MultiplierReport rep = check_multiplier_sign(sol, flux, xi, mo);
    res.runtimes["pairings"] = since(t1);
    CsvWriter w({"t", "x1", "x2", "test", "admissible", "pairing"});
    double control = -1e300;
    for (const auto& p : rep.probes) {
        w.row(std::vector<std::string>{format_number(p.t), format_number(p.x[0]), format_number(p.x[1]), p.test,
                                       p.admissible ? "1" : "0", format_number(p.pairing)});
        if (!p.admissible) control = std::max(control, p.pairing);
    }
    out.text("multiplier_probes.csv", w.str());
    res.checks.push_back(check_le("worst_admissible_pairing", rep.worst_admissible, rep.tolerance));
    res.checks.push_back(check_le("conservation_defect", rep.conservation_defect, rep.tolerance));
    res.checks.push_back(check_ge("negative_control_pairing", control, 1e-10,
                                  "a decreasing test function must show a positive pairing"));
    res.summary["x"] = grid_json(x);
    res.summary["y"] = grid_json(y);
    res.summary["xi"] = grid_json(xi);
    res.summary["steps"] = sol.traj.steps;
    res.summary["tolerance"] = rep.tolerance;
    return res;
}

PipelineResult run_k0_invariance(const ExperimentConfig& cfg, const std::string& out_dir)
{
    PipelineResult res;
    res.pipeline = "k0_invariance";
    Output out(out_dir, res);
    const auto& o = cfg.k0;
    const FluxModel flux = cfg.make_flux();
    CsvWriter w({"cells", "dx", "dy", "t", "flux_max", "flux_mean", "chi_max"});
    std::vector<double> sup;
    double worst_scaled = 0.0, min_order = 1e300;
    bool flagged = true;
    double control_min = 1e300;
    for (std::size_t i = 0; i < o.refinement.size(); ++i) {
        const int n = o.refinement[i];
        auto t0 = Clock::now();
        const XGrid x = cfg.make_x({n, n});
        const YGrid y = cfg.make_y({n, n});
        const PreparedData d = prepare(flux, cfg.data, x, y);
        const ConstraintSpace space =
            build_space(cfg.space, flux, y, XiGrid::from_support(d.M, cfg.xi_cells), cfg.space_opt);
        SolverConfig s = solver_of(cfg);
        s.t_end = o.t_end;
        s.output_times.clear();
        for (int k = 1; k < o.frames; ++k) s.output_times.push_back(o.t_end * k / o.frames);
        const double h = x.min_h() + y.h(0);
        const LimitSolution sol = solve_limit_separate(d.field, flux, space, s, o.constant * h);
        const auto k0 = check_K0_invariance(sol.traj, flux, cfg.threads);
        double m = 0.0;
        for (const auto& r : k0) {
            w.row(std::vector<double>{double(n), x.min_h(), y.h(0), r.t, r.flux_max, r.flux_mean, r.chi_max});
            m = std::max(m, r.flux_max);
        }
        sup.push_back(m);
        worst_scaled = std::max(worst_scaled, m / h);
        if (i > 0)
            min_order = std::min(min_order, std::log(sup[i - 1] / sup[i]) /
                                                std::log(static_cast<double>(n) / o.refinement[i - 1]));

        // ill-prepared control: oscillation across the streamlines
        const ModulationSpec mod = cfg.data.modulation;
        const double amp = o.control_amp;
        const TwoScaleField ill = sample_two_scale(
            [mod, amp](const Vec2& xp, const Vec2& yp) { return mod(xp) + amp * std::cos(two_pi * yp[0]); }, x, y);
        const double r0 = k0_residual(ill, flux, cfg.threads).flux_max;
        control_min = std::min(control_min, r0);
        bool threw = false;
        try {
            (void)solve_limit_separate(ill, flux, space, s, o.constant * h);
        } catch (const Error& e) {
            threw = e.kind() == ErrorKind::schema;
        }
        flagged = flagged && threw;
        res.runtimes["level_" + std::to_string(n)] = since(t0);
    }
    out.text("k0_residual.csv", w.str());
    res.checks.push_back(check_le("residual_over_h", worst_scaled, o.constant, "sup_t residual / (dx + dy)"));
    res.checks.push_back(check_ge("residual_order", min_order, o.min_order));
    res.checks.push_back(check_ge("control_residual", control_min, o.control_floor));
    res.checks.push_back(check_ge("control_flagged", flagged ? 1.0 : 0.0, 1.0));
    res.summary["refinement"] = o.refinement;
    res.summary["sup_residual"] = sup;
    res.summary["space"] = space_kind_name(cfg.space);
    return res;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir)
{
    if (cfg.threads > 0) set_default_threads(cfg.threads);
    const auto t0 = Clock::now();
    PipelineResult r;
    if (cfg.pipeline == "direct_convergence")
        r = run_direct_convergence(cfg, out_dir);
    else if (cfg.pipeline == "bgk_invariants")
        r = run_bgk_invariants(cfg, out_dir);
    else if (cfg.pipeline == "hydrodynamic_limit")
        r = run_hydrodynamic_limit(cfg, out_dir);
    else if (cfg.pipeline == "cell_relaxation")
        r = run_cell_relaxation(cfg, out_dir);
    else if (cfg.pipeline == "contraction_suite")
        r = run_contraction_suite(cfg, out_dir);
    else if (cfg.pipeline == "multiplier_sign")
        r = run_multiplier_sign(cfg, out_dir);
    else if (cfg.pipeline == "k0_invariance")
        r = run_k0_invariance(cfg, out_dir);
    else
        schema_error("unknown pipeline '" + cfg.pipeline + "'");
    r.runtimes["total"] = since(t0);
    return r;
}

json manifest_json(const ExperimentConfig* cfg, const PipelineResult* result, const RunStatus& status)
{
    json m;
    m["schema_version"] = kSchemaVersion;
    m["status"] = status.status;
    m["exit_code"] = status.exit_code;
    if (!status.message.empty()) m["message"] = status.message;
    m["seconds"] = status.seconds;
    if (cfg) {
        std::ostringstream h;
        h << std::hex << std::setw(16) << std::setfill('0') << cfg->hash();
        m["config_hash"] = h.str();
        m["config"] = to_json(*cfg);
        m["pipeline"] = cfg->pipeline;
        m["seed"] = cfg->seed;
        m["threads"] = cfg->threads;
    }
    if (result) {
        json checks = json::array();
        for (const auto& c : result->checks) {
            json e{{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"relation", c.relation}, {"pass", c.pass}};
            if (!c.note.empty()) e["note"] = c.note;
            checks.push_back(e);
        }
        m["checks"] = checks;
        m["pass"] = result->pass();
        m["summary"] = result->summary;
        m["runtimes"] = result->runtimes;
        m["artifacts"] = result->artifacts;
    } else {
        m["pass"] = false;
    }
    return m;
}

void write_manifest(const std::string& out_dir, const json& manifest)
{
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) numerical_error("cannot write manifest in '" + out_dir + "'");
    out << manifest.dump(2) << "\n";
}

json catalog_json()
{
    json j;
    json fluxes = json::array();
    for (const auto& e : flux_catalog()) {
        json params = json::array();
        for (const auto& [k, v] : e.params) params.push_back({{"name", k}, {"default", v}});
        fluxes.push_back({{"name", e.name}, {"description", e.description}, {"params", params}});
    }
    j["fluxes"] = fluxes;
    j["families"] = {"constant", "hamiltonian", "hetero_1d_branch", "row_profile"};
    j["pipelines"] = pipeline_names();
    j["spaces"] = {"exact_rows", "ergodic", "nullspace"};
    j["schemes"] = {"engquist_osher", "godunov_exact_1d", "upwind_linear"};
    return j;
}

std::string catalog_text()
{
    std::ostringstream s;
    s << "fluxes:\n";
    for (const auto& e : flux_catalog()) {
        s << "  " << e.name << "  " << e.description << "\n";
        for (const auto& [k, v] : e.params) s << "      " << k << " = " << v << "\n";
    }
    const json c = catalog_json();
    for (const char* key : {"families", "pipelines", "spaces", "schemes"}) {
        s << key << ":\n";
        for (const auto& v : c[key]) s << "  " << v.get<std::string>() << "\n";
    }
    return s.str();
}

} // namespace homlab
