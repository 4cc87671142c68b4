#include "homlab/flux_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace homlab {

double Profile::g(double xi) const
{
    return kind == ProfileKind::linear ? xi : 0.5 * xi * xi;
}

double Profile::dg(double xi) const
{
    return kind == ProfileKind::linear ? 1.0 : xi;
}

double Profile::d2g(double) const
{
    return kind == ProfileKind::linear ? 0.0 : 1.0;
}

double Profile::pos_integral(double u) const
{
    if (kind == ProfileKind::linear) return u;
    return u > 0.0 ? 0.5 * u * u : 0.0;
}

double Profile::neg_integral(double u) const
{
    if (kind == ProfileKind::linear) return 0.0;
    return u < 0.0 ? 0.5 * u * u : 0.0;
}

double Profile::max_slope(double bound) const
{
    return kind == ProfileKind::linear ? 1.0 : std::abs(bound);
}

std::string Profile::name() const
{
    return kind == ProfileKind::linear ? "linear" : "burgers";
}

Profile profile_from_name(const std::string& name)
{
    if (name == "linear" || name == "identity") return {ProfileKind::linear};
    if (name == "burgers") return {ProfileKind::burgers};
    schema_error("unknown profile '" + name + "' (expected linear or burgers)");
}

double FluxParams::get(const std::string& key, double fallback) const
{
    auto it = num.find(key);
    return it == num.end() ? fallback : it->second;
}

std::string FluxParams::get(const std::string& key, const std::string& fallback) const
{
    auto it = str.find(key);
    return it == str.end() ? fallback : it->second;
}

double FluxModel::speed_bound(double xi_bound) const
{
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s = std::max(s, alpha_sup[i]);
    return s * g.max_slope(xi_bound);
}

SeparateFlux separate_part(const FluxModel& model)
{
    if (!model.tags.separate) schema_error("flux '" + model.name + "' is not of separate form");
    return SeparateFlux{model.dim, model.alpha, model.g};
}

namespace {

int wavenumber(const FluxParams& p, const std::string& key)
{
    const double k = p.get(key, 1.0);
    if (k < 1.0 || std::floor(k) != k)
        schema_error("parameter '" + key + "' must be a positive integer so the flux stays Y-periodic");
    return static_cast<int>(k);
}

void finish(FluxModel& m)
{
    const int n = m.dim;
    const VecField alpha = m.alpha;
    const VecField beta = m.beta;
    const ScalarField div_alpha = m.div_alpha;
    const ScalarField div_beta = m.div_beta;
    const Profile g = m.g;
    m.eval_A = [=](const Vec2& y, double xi) {
        const Vec2 al = alpha(y);
        const Vec2 be = beta(y);
        Vec2 out{0.0, 0.0};
        for (int i = 0; i < n; ++i) out[i] = al[i] * g.g(xi) + be[i];
        return out;
    };
    m.eval_a = [=](const Vec2& y, double xi) {
        const Vec2 al = alpha(y);
        Vec3 out{0.0, 0.0, 0.0};
        for (int i = 0; i < n; ++i) out[i] = al[i] * g.dg(xi);
        out[n] = -(div_alpha(y) * g.g(xi) + div_beta(y));
        return out;
    };
}

VecField zero_field() { return [](const Vec2&) { return Vec2{0.0, 0.0}; }; }
ScalarField zero_scalar() { return [](const Vec2&) { return 0.0; }; }

// a0 = (mean + amp sin(2 pi k y2), 0)
void set_shear_field(FluxModel& m, const FluxParams& p)
{
    const double mean = p.get("mean", 1.0);
    const double amp = p.get("amp", 0.5);
    const int k = wavenumber(p, "wavenumber");
    m.dim = 2;
    m.alpha = [=](const Vec2& y) { return Vec2{mean + amp * std::sin(two_pi * k * y[1]), 0.0}; };
    m.div_alpha = zero_scalar();
    m.alpha_sup = {std::abs(mean) + std::abs(amp), 0.0};
    m.alpha_lip = std::abs(amp) * two_pi * k;
    m.tags.rows = true;
    m.smoothness = (std::abs(mean) + std::abs(amp)) * std::pow(two_pi * k, 3) * 4.0;
}

// a0 = (-d2 phi, d1 phi), phi = amp sin(2 pi k1 y1) sin(2 pi k2 y2)
void set_hamiltonian_field(FluxModel& m, const FluxParams& p)
{
    const double amp = p.get("amp", 1.0);
    const int k1 = wavenumber(p, "k1");
    const int k2 = wavenumber(p, "k2");
    m.dim = 2;
    m.alpha = [=](const Vec2& y) {
        const double s1 = std::sin(two_pi * k1 * y[0]), c1 = std::cos(two_pi * k1 * y[0]);
        const double s2 = std::sin(two_pi * k2 * y[1]), c2 = std::cos(two_pi * k2 * y[1]);
        return Vec2{-amp * two_pi * k2 * s1 * c2, amp * two_pi * k1 * c1 * s2};
    };
    m.div_alpha = zero_scalar();
    m.stream = [=](const Vec2& y) { return amp * std::sin(two_pi * k1 * y[0]) * std::sin(two_pi * k2 * y[1]); };
    m.stream_mean = 0.0;
    m.stream_mean_sq = 0.25 * amp * amp;
    m.alpha_sup = {std::abs(amp) * two_pi * k2, std::abs(amp) * two_pi * k1};
    m.alpha_lip = std::abs(amp) * two_pi * two_pi * k1 * k2 * 2.0;
    const double kmax = std::max(k1, k2);
    m.smoothness = std::abs(amp) * std::pow(two_pi * kmax, 4) * 4.0;
}

void set_constant_field(FluxModel& m, const FluxParams& p, int dim)
{
    const double c1 = p.get("c1", 1.0);
    const double c2 = dim == 2 ? p.get("c2", 1.0) : 0.0;
    m.dim = dim;
    m.alpha = [=](const Vec2&) { return Vec2{c1, c2}; };
    m.div_alpha = zero_scalar();
    m.alpha_sup = {std::abs(c1), std::abs(c2)};
    m.alpha_lip = 0.0;
    m.smoothness = 1.0;
}

int dim_param(const FluxParams& p, int fallback)
{
    const double d = p.get("dim", static_cast<double>(fallback));
    if (d != 1.0 && d != 2.0) schema_error("parameter 'dim' must be 1 or 2");
    return static_cast<int>(d);
}

} // namespace

const std::vector<CatalogEntry>& flux_catalog()
{
    static const std::vector<CatalogEntry> entries = {
        {"shear", "A = (a1(y2) xi, 0), a1 = mean + amp sin(2 pi k y2); N = 2",
         {{"mean", "1.0"}, {"amp", "0.5"}, {"wavenumber", "1"}}},
        {"hamiltonian", "A = a0(y) g(xi), a0 = (-d2 phi, d1 phi), phi = amp sin(2 pi k1 y1) sin(2 pi k2 y2); N = 2",
         {{"amp", "1.0"}, {"k1", "1"}, {"k2", "1"}, {"profile", "linear"}}},
        {"separate_burgers", "A = a0(y) xi^2/2 with a0 from field = shear | hamiltonian | constant",
         {{"field", "shear"}, {"mean", "1.0"}, {"amp", "0.5"}, {"wavenumber", "1"}, {"dim", "2"}}},
        {"hetero_1d", "A = b(y) + xi^2/2, b = amp cos(2 pi k y); N = 1, not divergence-free",
         {{"amp", "1.0"}, {"wavenumber", "1"}}},
        {"homogeneous_burgers", "A = c xi^2/2 with c = 1 (N = 1) or (c1, c2) (N = 2)",
         {{"dim", "1"}, {"c1", "1.0"}, {"c2", "1.0"}}},
    };
    return entries;
}

FluxModel builtin_flux(const std::string& name, const FluxParams& p)
{
    FluxModel m;
    m.name = name;
    m.beta = zero_field();
    m.div_beta = zero_scalar();
    if (name == "shear") {
        set_shear_field(m, p);
        m.g = {ProfileKind::linear};
        m.tags.divergence_free = true;
        m.tags.separate = true;
    } else if (name == "hamiltonian") {
        set_hamiltonian_field(m, p);
        m.g = profile_from_name(p.get("profile", std::string("linear")));
        m.tags.divergence_free = true;
        m.tags.separate = true;
    } else if (name == "separate_burgers") {
        const std::string field = p.get("field", std::string("shear"));
        if (field == "shear")
            set_shear_field(m, p);
        else if (field == "hamiltonian")
            set_hamiltonian_field(m, p);
        else if (field == "constant")
            set_constant_field(m, p, dim_param(p, 2));
        else
            schema_error("unknown separate_burgers field '" + field + "'");
        m.g = {ProfileKind::burgers};
        m.tags.divergence_free = true;
        m.tags.separate = true;
    } else if (name == "hetero_1d") {
        const double amp = p.get("amp", 1.0);
        const int k = wavenumber(p, "wavenumber");
        m.dim = 1;
        m.alpha = [](const Vec2&) { return Vec2{1.0, 0.0}; };
        m.div_alpha = zero_scalar();
        m.beta = [=](const Vec2& y) { return Vec2{amp * std::cos(two_pi * k * y[0]), 0.0}; };
        m.div_beta = [=](const Vec2& y) { return -amp * two_pi * k * std::sin(two_pi * k * y[0]); };
        m.g = {ProfileKind::burgers};
        m.alpha_sup = {1.0, 0.0};
        m.beta_sup = {std::abs(amp), 0.0};
        m.smoothness = std::abs(amp) * std::pow(two_pi * k, 3) * 2.0 + 1.0;
    } else if (name == "homogeneous_burgers") {
        set_constant_field(m, p, dim_param(p, 1));
        m.g = {ProfileKind::burgers};
        m.tags.divergence_free = true;
        m.tags.separate = true;
    } else {
        schema_error("unknown flux '" + name + "'");
    }
    finish(m);
    return m;
}

std::vector<std::array<double, 3>> halton_points(int count, int dims, unsigned seed)
{
    static const int bases[3] = {2, 3, 5};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double shift[3] = {unif(rng), unif(rng), unif(rng)};
    std::vector<std::array<double, 3>> pts(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        for (int d = 0; d < 3; ++d) {
            if (d >= dims) {
                pts[i][d] = 0.0;
                continue;
            }
            double f = 1.0, r = 0.0;
            for (int n = i + 1; n > 0; n /= bases[d]) {
                f /= bases[d];
                r += f * (n % bases[d]);
            }
            pts[i][d] = std::fmod(r + shift[d], 1.0);
        }
    }
    return pts;
}

std::vector<std::pair<std::string, double>> ValidationReport::entries() const
{
    return {{"periodicity", periodicity},
            {"a_consistency", a_consistency},
            {"source_consistency", source_consistency},
            {"kinetic_divergence", kinetic_divergence},
            {"divergence_free_tag", divergence_free_tag},
            {"separate_factor", separate_factor},
            {"separate_divergence", separate_divergence}};
}

ValidationReport validate_flux(const FluxModel& m, int probes, double h, double xi_window, unsigned seed)
{
    ValidationReport r;
    r.h = h;
    const int n = m.dim;
    double a_scale = 1.0;
    for (int i = 0; i < n; ++i) a_scale += m.alpha_sup[i] * std::abs(m.g.g(xi_window)) + m.beta_sup[i];
    r.threshold = m.smoothness * h * h + 1e-14 * a_scale / h;

    const auto pts = halton_points(std::max(probes, 1), n + 1, seed);
    for (const auto& q : pts) {
        Vec2 y{q[0] * m.period[0], n > 1 ? q[1] * m.period[1] : 0.0};
        const double xi = (2.0 * q[n] - 1.0) * xi_window;
        const Vec2 A = m.eval_A(y, xi);
        const Vec3 a = m.eval_a(y, xi);

        for (int i = 0; i < n; ++i) {
            Vec2 ys = y;
            ys[i] += m.period[i];
            const Vec2 As = m.eval_A(ys, xi);
            for (int c = 0; c < n; ++c) r.periodicity = std::max(r.periodicity, std::abs(As[c] - A[c]));
        }

        double fd_divA = 0.0;
        double fd_div_a = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dA = (m.eval_A(y, xi + h)[i] - m.eval_A(y, xi - h)[i]) / (2.0 * h);
            r.a_consistency = std::max(r.a_consistency, std::abs(a[i] - dA));
            Vec2 yp = y, ym = y;
            yp[i] += h;
            ym[i] -= h;
            fd_divA += (m.eval_A(yp, xi)[i] - m.eval_A(ym, xi)[i]) / (2.0 * h);
            fd_div_a += (m.eval_a(yp, xi)[i] - m.eval_a(ym, xi)[i]) / (2.0 * h);
        }
        fd_div_a += (m.eval_a(y, xi + h)[n] - m.eval_a(y, xi - h)[n]) / (2.0 * h);
        r.source_consistency = std::max(r.source_consistency, std::abs(a[n] + fd_divA));
        r.kinetic_divergence = std::max(r.kinetic_divergence, std::abs(fd_div_a));
        if (m.tags.divergence_free) r.divergence_free_tag = std::max(r.divergence_free_tag, std::abs(a[n]));

        if (m.tags.separate) {
            const Vec2 a0 = m.alpha(y);
            double div0 = 0.0;
            for (int i = 0; i < n; ++i) {
                r.separate_factor = std::max(r.separate_factor, std::abs(A[i] - a0[i] * m.g.g(xi)));
                Vec2 yp = y, ym = y;
                yp[i] += h;
                ym[i] -= h;
                div0 += (m.alpha(yp)[i] - m.alpha(ym)[i]) / (2.0 * h);
            }
            r.separate_divergence = std::max(r.separate_divergence, std::abs(div0));
        }
    }
    r.pass = true;
    for (const auto& [key, value] : r.entries()) {
        if (!(value <= r.threshold)) r.pass = false;
    }
    return r;
}

} // namespace homlab
