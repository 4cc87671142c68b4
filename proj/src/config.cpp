#include "homlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace homlab {

using nlohmann::json;

const std::vector<std::string>& pipeline_names()
{
    static const std::vector<std::string> names = {"direct_convergence", "bgk_invariants",   "hydrodynamic_limit",
                                                   "cell_relaxation",    "contraction_suite", "multiplier_sign",
                                                   "k0_invariance"};
    return names;
}

double ModulationSpec::operator()(const Vec2& x) const
{
    if (kind == "constant") return mean;
    if (kind == "sin") return mean + amp * std::sin(two_pi * k1 * x[0]);
    return mean + amp * std::sin(two_pi * k1 * x[0]) * std::cos(two_pi * k2 * x[1]);
}

namespace {

std::string scheme_name(Scheme s)
{
    switch (s) {
    case Scheme::engquist_osher: return "engquist_osher";
    case Scheme::godunov_exact_1d: return "godunov_exact_1d";
    case Scheme::upwind_linear: return "upwind_linear";
    }
    return "engquist_osher";
}

std::string splitting_name(Splitting s) { return s == Splitting::strang ? "strang" : "unsplit"; }

// Reads keys out of one JSON object and rejects keys nobody asked for.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) schema_error("'" + where() + "' must be an object");
    }

    template <class T>
    void field(const char* key, T& out)
    {
        used_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        try {
            read(v, out);
        } catch (const json::exception&) {
            schema_error("'" + where(key) + "' has the wrong type");
        }
    }

    template <class F>
    void section(const char* key, F&& body)
    {
        used_.insert(key);
        static const json empty = json::object();
        Reader sub(j_.contains(key) ? j_.at(key) : empty, where(key));
        body(sub);
        sub.finish();
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) schema_error("unknown key '" + where(it.key()) + "'");
    }

    const json& raw() const { return j_; }
    std::string where(const std::string& key = "") const
    {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    template <class T>
    static void read(const json& v, T& out)
    {
        out = v.get<T>();
    }
    static void read(const json& v, double& out)
    {
        if (v.is_null()) {
            out = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        if (!v.is_number()) throw json::type_error::create(302, "number expected", &v);
        out = v.get<double>();
    }
    static void read(const json& v, int& out)
    {
        if (!v.is_number_integer()) throw json::type_error::create(302, "integer expected", &v);
        out = v.get<int>();
    }
    static void read(const json& v, unsigned& out)
    {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw json::type_error::create(302, "unsigned integer expected", &v);
        out = v.get<unsigned>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

class Writer {
public:
    explicit Writer(json& j) : j_(j) { j_ = json::object(); }

    template <class T>
    void field(const char* key, T& v)
    {
        if constexpr (std::is_same_v<T, double>) {
            if (std::isnan(v)) {
                j_[key] = nullptr;
                return;
            }
        }
        j_[key] = v;
    }

    template <class F>
    void section(const char* key, F&& body)
    {
        Writer sub(j_[key]);
        body(sub);
    }

private:
    json& j_;
};

// Enum and map fields go through their string forms.
template <class IO, class E, class ToName, class FromName>
void enum_field(IO& io, const char* key, E& value, ToName to_name, FromName from_name)
{
    std::string s = to_name(value);
    io.field(key, s);
    if constexpr (std::is_same_v<IO, Reader>) value = from_name(s);
}

template <class IO>
void visit_data(IO& io, DataSpec& d)
{
    io.field("family", d.family);
    io.field("p_min", d.p_min);
    io.field("p_max", d.p_max);
    io.field("gain", d.cell.gain);
    io.field("curvature", d.cell.curvature);
    io.field("sign", d.cell.sign);
    io.field("sampling", d.cell.sampling);
    io.field("row_amp", d.cell.row_amp);
    io.section("modulation", [&](auto& m) {
        m.field("kind", d.modulation.kind);
        m.field("mean", d.modulation.mean);
        m.field("amp", d.modulation.amp);
        m.field("k1", d.modulation.k1);
        m.field("k2", d.modulation.k2);
    });
}

template <class IO>
void visit(IO& io, ExperimentConfig& c)
{
    io.field("schema_version", c.schema_version);
    io.field("pipeline", c.pipeline);
    io.field("name", c.name);
    io.field("seed", c.seed);
    io.field("threads", c.threads);

    io.section("flux", [&](auto& s) {
        s.field("name", c.flux);
        if constexpr (std::is_same_v<IO, Reader>) {
            s.section("params", [&](Reader& p) {
                for (auto it = p.raw().begin(); it != p.raw().end(); ++it) {
                    std::string key = it.key();
                    if (it.value().is_number()) {
                        double v = 0.0;
                        p.field(key.c_str(), v);
                        c.flux_params.num[key] = v;
                    } else {
                        std::string v;
                        p.field(key.c_str(), v);
                        c.flux_params.str[key] = v;
                    }
                }
            });
        } else {
            s.section("params", [&](Writer& p) {
                for (auto& [k, v] : c.flux_params.num) p.field(k.c_str(), v);
                for (auto& [k, v] : c.flux_params.str) p.field(k.c_str(), v);
            });
        }
    });

    io.section("grid", [&](auto& s) {
        s.field("x_cells", c.x_cells);
        s.field("box_lo", c.box_lo);
        s.field("box_hi", c.box_hi);
        s.field("y_cells", c.y_cells);
        s.field("xi_cells", c.xi_cells);
        s.field("xi_L", c.xi_L);
        s.field("xi_M", c.xi_M);
    });

    io.section("space", [&](auto& s) {
        enum_field(s, "kind", c.space, space_kind_name, space_kind_from_name);
        s.field("horizon_crossings", c.space_opt.horizon_crossings);
        s.field("step_fraction", c.space_opt.step_fraction);
        s.field("doubling_check", c.space_opt.doubling_check);
        s.field("flow_step_fraction", c.space_opt.flow_step_fraction);
        s.field("flow_probes", c.space_opt.flow_probes);
        s.field("volume_tol", c.space_opt.volume_tol);
        s.field("svd_tol", c.space_opt.svd_tol);
    });

    io.section("solver", [&](auto& s) {
        enum_field(s, "scheme", c.solver.scheme, scheme_name, scheme_from_name);
        enum_field(s, "splitting", c.solver.splitting, splitting_name, splitting_from_name);
        s.field("cfl", c.solver.cfl);
        s.field("t_end", c.solver.t_end);
        s.field("output_times", c.solver.output_times);
    });

    io.section("initial_data", [&](auto& s) { visit_data(s, c.data); });
    io.section("second_data", [&](auto& s) { visit_data(s, c.second); });

    io.section("direct_convergence", [&](auto& s) {
        auto& o = c.convergence;
        s.field("eps", o.eps);
        s.field("delta", o.delta);
        s.field("delta_star", o.delta_star);
        s.field("cells_per_period", o.cells_per_period);
        s.field("reference", o.reference);
        s.field("reference_x_cells", o.reference_x_cells);
        s.field("reference_y_cells", o.reference_y_cells);
        s.field("bound_factor", o.bound_factor);
        s.field("runtime_limit", o.runtime_limit);
        s.field("barrier_tol", o.barrier_tol);
    });

    io.section("bgk", [&](auto& s) {
        auto& o = c.bgk;
        s.field("lambda", o.run.lambda);
        s.field("lambdas", o.lambdas);
        s.field("ratio", o.ratio);
        s.field("runtime_limit", o.runtime_limit);
        s.field("t_end", o.run.t_end);
        s.field("cfl", o.run.cfl);
        s.field("output_times", o.run.output_times);
        s.field("fp_tol", o.run.fp_tol);
        s.field("fp_max", o.run.fp_max);
        s.field("inv_tol", o.run.inv_tol);
        s.field("ml_samples", o.run.ml_samples);
    });

    io.section("cell_relaxation", [&](auto& s) {
        auto& o = c.cell;
        s.field("family", o.family);
        s.field("refinement", o.refinement);
        s.field("min_order", o.min_order);
        s.field("hetero_cells", o.hetero_cells);
        s.field("hetero_q", o.hetero_q);
        s.field("hetero_tol", o.hetero_tol);
        s.field("perturbation", o.perturbation);
        s.field("relax_cells", o.relax_cells);
        s.field("pseudo_time", o.pseudo_time);
        s.field("relax_tol", o.relax.tol);
    });

    io.section("contraction", [&](auto& s) {
        auto& o = c.contraction;
        s.field("step_tol", o.step_tol);
        s.field("margin_factor", o.margin_factor);
        s.field("limit_t_end", o.limit_t_end);
        s.field("limit_x_cells", o.limit_x_cells);
        s.field("limit_y_cells", o.limit_y_cells);
        s.field("eps", o.eps);
    });

    io.section("multiplier", [&](auto& s) {
        auto& o = c.multiplier;
        s.field("probes", o.probes);
        s.field("tests", o.tests);
        s.field("delta_t", o.delta_t);
        s.field("delta_x", o.delta_x);
        s.field("tol_floor", o.tol_floor);
        s.field("tol_factor", o.tol_factor);
    });

    io.section("k0", [&](auto& s) {
        auto& o = c.k0;
        s.field("refinement", o.refinement);
        s.field("t_end", o.t_end);
        s.field("frames", o.frames);
        s.field("min_order", o.min_order);
        s.field("constant", o.constant);
        s.field("control_floor", o.control_floor);
        s.field("control_amp", o.control_amp);
    });
}

void require(bool ok, const std::string& msg)
{
    if (!ok) schema_error(msg);
}

void check_cells(const std::array<int, 2>& n, const std::string& key)
{
    require(n[0] >= 1 && n[1] >= 1, key + " entries must be positive");
}

void validate_data(const DataSpec& d, const std::string& key)
{
    (void)cell_family_from_name(d.family);
    const auto& m = d.modulation;
    require(m.kind == "constant" || m.kind == "sin" || m.kind == "sin_cos",
            key + ".modulation.kind must be constant, sin or sin_cos");
    require(m.k1 >= 1 && m.k2 >= 1, key + ".modulation wavenumbers must be positive integers");
    require(d.lower() <= m.min() + 1e-12 && d.upper() >= m.max() - 1e-12,
            key + ": barrier range [p_min, p_max] must contain the modulation range");
}

void validate(const ExperimentConfig& c)
{
    require(c.schema_version == kSchemaVersion,
            "schema_version must be " + std::to_string(kSchemaVersion) + " (got " + std::to_string(c.schema_version) + ")");
    const auto& names = pipeline_names();
    require(std::find(names.begin(), names.end(), c.pipeline) != names.end(),
            "pipeline '" + c.pipeline + "' is not one of the known pipelines");
    require(c.threads >= 0, "threads must be nonnegative");
    check_cells(c.x_cells, "grid.x_cells");
    check_cells(c.y_cells, "grid.y_cells");
    require(c.box_hi > c.box_lo, "grid.box_hi must exceed grid.box_lo");
    require(c.xi_cells >= 10 && c.xi_cells % 2 == 0, "grid.xi_cells must be even and larger than 8");
    require(c.xi_M >= 0.0 && c.xi_L >= 0.0, "grid.xi_L and grid.xi_M must be nonnegative");
    if (c.xi_L > 0.0 || c.xi_M > 0.0) {
        require(c.xi_M > 0.0, "grid.xi_M is required when grid.xi_L is given");
        if (c.xi_L > 0.0) require(c.xi_L > c.xi_M, "xi window half-width L must exceed the support bound M (L > M)");
    }
    c.solver.validate();
    validate_data(c.data, "initial_data");
    validate_data(c.second, "second_data");
    (void)c.make_flux();

    const auto& o = c.convergence;
    require(!o.eps.empty() && !o.delta.empty(), "direct_convergence.eps and .delta must be nonempty");
    for (double e : o.eps) require(e > 0.0 && e <= 1.0, "direct_convergence.eps entries must lie in (0, 1]");
    for (double d : o.delta) require(d > 0.0, "direct_convergence.delta entries must be positive");
    require(std::find(o.delta.begin(), o.delta.end(), o.delta_star) != o.delta.end(),
            "direct_convergence.delta_star must be one of direct_convergence.delta");
    require(o.cells_per_period >= 4, "direct_convergence.cells_per_period must be at least 4");
    require(o.reference == "exact_transport" || o.reference == "limit_solver",
            "direct_convergence.reference must be exact_transport or limit_solver");
    check_cells(o.reference_x_cells, "direct_convergence.reference_x_cells");
    check_cells(o.reference_y_cells, "direct_convergence.reference_y_cells");

    require(!c.bgk.lambdas.empty(), "bgk.lambdas must be nonempty");
    for (double l : c.bgk.lambdas) require(l >= 0.0, "bgk.lambdas entries must be nonnegative");
    c.bgk.run.validate();

    require(!c.cell.refinement.empty(), "cell_relaxation.refinement must be nonempty");
    for (int n : c.cell.refinement) require(n >= 2, "cell_relaxation.refinement entries must be at least 2");
    require(c.cell.hetero_cells >= 2 && c.cell.relax_cells >= 2, "cell grids need at least 2 cells");
    require(c.cell.perturbation >= 0.0, "cell_relaxation.perturbation must be nonnegative");
    require(c.cell.pseudo_time > 0.0, "cell_relaxation.pseudo_time must be positive");

    check_cells(c.contraction.limit_x_cells, "contraction.limit_x_cells");
    check_cells(c.contraction.limit_y_cells, "contraction.limit_y_cells");
    require(c.contraction.limit_t_end > 0.0, "contraction.limit_t_end must be positive");
    require(c.contraction.eps > 0.0, "contraction.eps must be positive");

    require(c.multiplier.probes >= 1 && c.multiplier.tests >= 1, "multiplier.probes and .tests must be positive");
    require(c.multiplier.delta_t > 0.0 && c.multiplier.delta_x > 0.0, "multiplier mollifier widths must be positive");

    require(c.k0.refinement.size() >= 2, "k0.refinement needs at least two levels");
    require(c.k0.t_end > 0.0 && c.k0.frames >= 1, "k0.t_end and k0.frames must be positive");
}

} // namespace

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json(*this).dump()); }

FluxModel ExperimentConfig::make_flux() const { return builtin_flux(flux, flux_params); }

XGrid ExperimentConfig::make_x(std::array<int, 2> cells) const
{
    XGrid x = XGrid::box(make_flux().dim, cells[0], box_lo, box_hi);
    if (x.dim > 1) x.ax[1].n = cells[1];
    return x;
}

YGrid ExperimentConfig::make_y(std::array<int, 2> cells) const
{
    YGrid y;
    y.dim = make_flux().dim;
    y.n = {cells[0], y.dim > 1 ? cells[1] : 1};
    return y;
}

XiGrid ExperimentConfig::make_xi(double data_M) const
{
    const double M = xi_M > 0.0 ? xi_M : data_M;
    if (xi_L > 0.0) return XiGrid::make(xi_L, xi_cells, M);
    return XiGrid::from_support(M, xi_cells);
}

ExperimentConfig parse_config(const json& j)
{
    ExperimentConfig c;
    Reader r(j, "");
    visit(r, c);
    r.finish();
    validate(c);
    c.raw = j;
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) schema_error("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        schema_error("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c)
{
    json j;
    ExperimentConfig copy = c;
    Writer w(j);
    visit(w, copy);
    return j;
}

} // namespace homlab
