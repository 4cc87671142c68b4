#include "homlab/projections.hpp"

#include "homlab/fv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace homlab {

SpaceKind space_kind_from_name(const std::string& name)
{
    if (name == "exact_rows") return SpaceKind::exact_rows;
    if (name == "ergodic") return SpaceKind::ergodic;
    if (name == "nullspace") return SpaceKind::nullspace;
    schema_error("unknown constraint space '" + name + "' (exact_rows | ergodic | nullspace)");
}

std::string space_kind_name(SpaceKind k)
{
    switch (k) {
    case SpaceKind::exact_rows: return "exact_rows";
    case SpaceKind::ergodic: return "ergodic";
    case SpaceKind::nullspace: return "nullspace";
    }
    return "?";
}

Partition Partition::from_labels(const std::vector<int>& raw)
{
    Partition p;
    p.label.assign(raw.size(), -1);
    const int top = raw.empty() ? 0 : *std::max_element(raw.begin(), raw.end());
    std::vector<int> seen(static_cast<std::size_t>(top) + 1, -1);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const int r = raw[i];
        if (seen[r] < 0) {
            seen[r] = static_cast<int>(p.classes.size());
            p.classes.emplace_back();
        }
        p.label[i] = seen[r];
        p.classes[seen[r]].push_back(static_cast<int>(i));
    }
    return p;
}

bool Partition::same_as(const Partition& other) const { return label == other.label; }

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i)
    {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

XGrid torus_of(const YGrid& y)
{
    XGrid x;
    x.dim = y.dim;
    x.ax[0] = Axis{y.n[0], 0.0, 1.0};
    x.ax[1] = y.dim > 1 ? Axis{y.n[1], 0.0, 1.0} : Axis{1, 0.0, 1.0};
    return x;
}

double field_sup(const FluxModel& flux) { return std::max(flux.alpha_sup[0], flux.alpha_sup[1]); }

std::size_t cell_of(const YGrid& y, const Vec2& p)
{
    auto wrap = [](double v, int n) {
        double t = v - std::floor(v);
        int i = static_cast<int>(t * n);
        return std::clamp(i, 0, n - 1);
    };
    if (y.dim == 1) return static_cast<std::size_t>(wrap(p[0], y.n[0]));
    return y.index(wrap(p[0], y.n[0]), wrap(p[1], y.n[1]));
}

Vec2 rk4(const FluxModel& flux, const Vec2& p, double h)
{
    auto f = [&](const Vec2& q) { return flux.alpha(q); };
    const Vec2 k1 = f(p);
    const Vec2 k2 = f({p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]});
    const Vec2 k3 = f({p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]});
    const Vec2 k4 = f({p[0] + h * k3[0], p[1] + h * k3[1]});
    return {p[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

} // namespace

Eigen::MatrixXd transport_matrix(const FluxModel& flux, const YGrid& y, double sign)
{
    const XGrid x = torus_of(y);
    const FaceField faces = face_coefficients(flux, x, 1.0);
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int d = 0; d < y.dim; ++d) {
        if (y.n[d] == 1) continue;
        const double inv_h = 1.0 / y.h(d);
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::size_t r;
            if (y.dim == 1) {
                r = (i + 1) % y.size();
            } else {
                int i0 = static_cast<int>(i) / y.n[1], i1 = static_cast<int>(i) % y.n[1];
                if (d == 0)
                    i0 = (i0 + 1) % y.n[0];
                else
                    i1 = (i1 + 1) % y.n[1];
                r = y.index(i0, i1);
            }
            const double w = sign * faces.a(d, i);
            const auto I = static_cast<Eigen::Index>(i), R = static_cast<Eigen::Index>(r);
            L(I, I) += std::max(w, 0.0) * inv_h;
            L(I, R) += std::min(w, 0.0) * inv_h;
            L(R, I) -= std::max(w, 0.0) * inv_h;
            L(R, R) -= std::min(w, 0.0) * inv_h;
        }
    }
    return L;
}

Partition characteristic_partition(const FluxModel& flux, const YGrid& y, double horizon, double step)
{
    const std::size_t n = y.size();
    UnionFind uf(n);
    const int steps = static_cast<int>(std::ceil(horizon / step));
    const double h = horizon / steps;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 p = y.center(i);
        for (int s = 0; s < steps; ++s) {
            p = rk4(flux, p, h);
            uf.unite(static_cast<int>(i), static_cast<int>(cell_of(y, p)));
        }
    }
    std::vector<int> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = uf.find(static_cast<int>(i));
    return Partition::from_labels(raw);
}

double flow_volume_defect(const FluxModel& flux, double horizon, double step, int probes, unsigned seed)
{
    const double fd = 1e-6;
    auto grad = [&](const Vec2& p) {
        std::array<std::array<double, 2>, 2> G{};
        for (int j = 0; j < 2; ++j) {
            Vec2 a = p, b = p;
            a[j] += fd;
            b[j] -= fd;
            const Vec2 fa = flux.alpha(a), fb = flux.alpha(b);
            for (int i = 0; i < 2; ++i) G[i][j] = (fa[i] - fb[i]) / (2 * fd);
        }
        if (flux.dim == 1) G[0][1] = G[1][0] = G[1][1] = 0.0;
        return G;
    };
    // state: X (2), J (4, row major)
    using State = std::array<double, 6>;
    auto rhs = [&](const State& s) {
        const Vec2 p{s[0], s[1]};
        const Vec2 v = flux.alpha(p);
        const auto G = grad(p);
        State d{};
        d[0] = v[0];
        d[1] = flux.dim > 1 ? v[1] : 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) d[2 + 2 * i + j] = G[i][0] * s[2 + j] + G[i][1] * s[4 + j];
        return d;
    };
    const int steps = std::max(1, static_cast<int>(std::ceil(horizon / step)));
    const double h = horizon / steps;
    const auto pts = halton_points(probes, 2, seed);
    double worst = 0.0;
    for (const auto& q : pts) {
        State s{q[0], flux.dim > 1 ? q[1] : 0.0, 1.0, 0.0, 0.0, 1.0};
        for (int t = 0; t < steps; ++t) {
            const State k1 = rhs(s);
            State tmp;
            for (int c = 0; c < 6; ++c) tmp[c] = s[c] + 0.5 * h * k1[c];
            const State k2 = rhs(tmp);
            for (int c = 0; c < 6; ++c) tmp[c] = s[c] + 0.5 * h * k2[c];
            const State k3 = rhs(tmp);
            for (int c = 0; c < 6; ++c) tmp[c] = s[c] + h * k3[c];
            const State k4 = rhs(tmp);
            for (int c = 0; c < 6; ++c) s[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
        }
        worst = std::max(worst, std::abs(s[2] * s[5] - s[3] * s[4] - 1.0));
    }
    return worst;
}

ConstraintSpace build_space(SpaceKind kind, const FluxModel& flux, const YGrid& y, const XiGrid& xi,
                            const SpaceOptions& opt)
{
    if (!flux.tags.divergence_free) schema_error("constraint spaces require a divergence-free flux");
    if (flux.dim != y.dim) schema_error("flux dimension does not match the cell grid");
    ConstraintSpace s;
    s.kind = kind;
    s.y = y;
    s.xi = xi;
    s.slice_class.resize(static_cast<std::size_t>(xi.n()));
    std::array<bool, 3> used{false, false, false};
    for (int k = 0; k < xi.n(); ++k) {
        const double slope = flux.g.dg(xi.center(k));
        const int c = slope > 0.0 ? 2 : (slope < 0.0 ? 0 : 1);
        s.slice_class[k] = c;
        used[c] = true;
    }
    const std::size_t n = y.size();

    if (kind == SpaceKind::exact_rows) {
        if (!flux.tags.rows) schema_error("exact_rows requires a shear-type flux");
        // rows are labelled by the y2 index; cells of a resting row stay alone
        std::vector<int> raw(n);
        for (std::size_t i = 0; i < n; ++i) {
            const bool moving = std::abs(flux.alpha(y.center(i))[0]) > 0.0;
            raw[i] = moving ? static_cast<int>(i % static_cast<std::size_t>(y.n[1])) : static_cast<int>(n + i);
        }
        const Partition p = Partition::from_labels(raw);
        for (int c : {0, 2})
            if (used[c]) {
                s.partition[c] = p;
                s.identity[c] = p.classes.size() == n;
            }
    } else if (kind == SpaceKind::ergodic) {
        const double sup = field_sup(flux);
        if (sup > 0.0) {
            const double dy = std::min(y.h(0), y.dim > 1 ? y.h(1) : 1.0);
            const double T = opt.horizon_crossings / sup;
            const double step = opt.step_fraction * dy / sup;
            s.horizon = T;
            s.volume_defect = flow_volume_defect(flux, T, opt.flow_step_fraction * dy / sup, opt.flow_probes);
            if (s.volume_defect > opt.volume_tol)
                numerical_error("characteristic flow is not volume preserving: defect " + std::to_string(s.volume_defect));
            Partition p = characteristic_partition(flux, y, T, step);
            if (opt.doubling_check) {
                const Partition p2 = characteristic_partition(flux, y, 2.0 * T, step);
                for (std::size_t i = 0; i < n; ++i)
                    if (p.classes[p.label[i]].size() != p2.classes[p2.label[i]].size()) ++s.doubling_mismatch;
                if (s.doubling_mismatch > 0)
                    numerical_error("ergodic horizon too short: " + std::to_string(s.doubling_mismatch) +
                                    " cells change class when the horizon doubles");
            }
            for (int c : {0, 2})
                if (used[c]) {
                    s.partition[c] = p;
                    s.identity[c] = p.classes.size() == n;
                }
        }
    } else {
        for (int c : {0, 2}) {
            if (!used[c]) continue;
            const Eigen::MatrixXd L = transport_matrix(flux, y, c == 2 ? 1.0 : -1.0);
            Eigen::BDCSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            const double cut = opt.svd_tol * std::max(sv.size() ? sv(0) : 0.0, 1e-300);
            int rank = 0;
            for (Eigen::Index i = 0; i < sv.size(); ++i)
                if (sv(i) > cut) ++rank;
            const auto kernel = static_cast<Eigen::Index>(n) - rank;
            if (kernel == static_cast<Eigen::Index>(n) || sv.size() == 0 || sv(0) == 0.0) continue;
            s.basis[c] = svd.matrixV().rightCols(kernel);
            s.identity[c] = false;
        }
    }
    return s;
}

int ConstraintSpace::dimension(int c) const
{
    if (identity[c]) return static_cast<int>(y.size());
    if (kind == SpaceKind::nullspace) return static_cast<int>(basis[c].cols());
    return static_cast<int>(partition[c].classes.size());
}

void ConstraintSpace::project_slice(int c, const double* in, double* out, std::size_t stride) const
{
    const std::size_t n = y.size();
    if (identity[c]) {
        for (std::size_t i = 0; i < n; ++i) out[i * stride] = in[i * stride];
        return;
    }
    if (kind == SpaceKind::nullspace) {
        const Eigen::MatrixXd& Q = basis[c];
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = in[i * stride];
        const Eigen::VectorXd w = Q * (Q.transpose() * v);
        for (std::size_t i = 0; i < n; ++i) out[i * stride] = w(static_cast<Eigen::Index>(i));
        return;
    }
    for (const auto& cls : partition[c].classes) {
        double sum = 0.0;
        for (int i : cls) sum += in[static_cast<std::size_t>(i) * stride];
        const double avg = sum / static_cast<double>(cls.size());
        for (int i : cls) out[static_cast<std::size_t>(i) * stride] = avg;
    }
}

std::vector<std::vector<double>> ConstraintSpace::spanning_set(int c) const
{
    const std::size_t n = y.size();
    std::vector<std::vector<double>> out;
    if (identity[c]) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> e(n, 0.0);
            e[i] = 1.0;
            out.push_back(std::move(e));
        }
    } else if (kind == SpaceKind::nullspace) {
        for (Eigen::Index j = 0; j < basis[c].cols(); ++j) {
            std::vector<double> e(n);
            for (std::size_t i = 0; i < n; ++i) e[i] = basis[c](static_cast<Eigen::Index>(i), j);
            out.push_back(std::move(e));
        }
    } else {
        for (const auto& cls : partition[c].classes) {
            std::vector<double> e(n, 0.0);
            for (int i : cls) e[static_cast<std::size_t>(i)] = 1.0;
            out.push_back(std::move(e));
        }
    }
    return out;
}

void project_K(const ConstraintSpace& space, const double* in, double* out)
{
    const auto nx = static_cast<std::size_t>(space.xi.n());
    for (std::size_t k = 0; k < nx; ++k) space.project_slice(space.slice_class[k], in + k, out + k, nx);
}

std::vector<double> project_K(const ConstraintSpace& space, const std::vector<double>& f)
{
    if (f.size() != space.y.size() * static_cast<std::size_t>(space.xi.n()))
        schema_error("slab size does not match the constraint space");
    std::vector<double> out(f.size());
    project_K(space, f.data(), out.data());
    return out;
}

double slab_dot(const ConstraintSpace& space, const double* a, const double* b)
{
    const std::size_t n = space.y.size() * static_cast<std::size_t>(space.xi.n());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s * space.y.cell_volume() * space.xi.h();
}

double slab_norm(const ConstraintSpace& space, const std::vector<double>& f)
{
    return std::sqrt(slab_dot(space, f.data(), f.data()));
}

double K_residual(const ConstraintSpace& space, const std::vector<double>& f)
{
    std::vector<double> p = project_K(space, f);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= f[i];
    return slab_norm(space, p);
}

double ChiCone::violation(const double* phi) const
{
    const int n = xi.n();
    double worst = 0.0;
    for (int k = 0; k < n; ++k)
        if (k < lo() || k >= hi()) worst = std::max(worst, std::abs(phi[k]));
    for (int k = 0; k + 1 < n; ++k) {
        const double jump = k + 1 == zero() ? 1.0 : 0.0;
        worst = std::max(worst, phi[k + 1] - phi[k] - jump);
    }
    return worst;
}

void antitonic_regression(double* v, int n)
{
    std::vector<double> sum;
    std::vector<int> count;
    sum.reserve(static_cast<std::size_t>(n));
    count.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        sum.push_back(v[i]);
        count.push_back(1);
        while (sum.size() > 1) {
            const std::size_t b = sum.size() - 1;
            if (sum[b - 1] / count[b - 1] >= sum[b] / count[b]) break;
            sum[b - 1] += sum[b];
            count[b - 1] += count[b];
            sum.pop_back();
            count.pop_back();
        }
    }
    int i = 0;
    for (std::size_t b = 0; b < sum.size(); ++b) {
        const double avg = sum[b] / count[b];
        for (int c = 0; c < count[b]; ++c) v[i++] = avg;
    }
}

void project_chi_cone(const ChiCone& cone, const double* in, double* out)
{
    const int n = cone.xi.n();
    const int lo = cone.lo(), hi = cone.hi(), z = cone.zero();
    for (int k = 0; k < n; ++k) {
        if (!std::isfinite(in[k])) numerical_error("non-finite value in cone projection");
        if (k < lo || k >= hi) out[k] = 0.0;
    }
    // shift out the unit jump: members become nonincreasing, 0 left of the window, -1 right of it
    for (int k = lo; k < hi; ++k) out[k] = in[k] - (k >= z ? 1.0 : 0.0);
    antitonic_regression(out + lo, hi - lo);
    const double upper = lo > 0 ? 0.0 : std::numeric_limits<double>::infinity();
    const double lower = hi < n ? -1.0 : -std::numeric_limits<double>::infinity();
    for (int k = lo; k < hi; ++k) out[k] = std::clamp(out[k], lower, upper) + (k >= z ? 1.0 : 0.0);
}

std::vector<double> project_chi_cone(const ChiCone& cone, const std::vector<double>& phi)
{
    if (phi.size() != static_cast<std::size_t>(cone.xi.n())) schema_error("profile length does not match the xi grid");
    std::vector<double> out(phi.size());
    project_chi_cone(cone, phi.data(), out.data());
    return out;
}

KineticProjector::KineticProjector(ConstraintSpace space, double tol, int max_iter)
    : space_(std::move(space)), cone_{space_.xi}, tol_(tol), max_iter_(max_iter)
{
    if (!(tol > 0.0) || max_iter < 1) schema_error("dykstra_tol must be positive and max_iter at least 1");
    trivial_ = true;
    for (int c : space_.slice_class)
        if (!space_.identity[c]) trivial_ = false;
}

void KineticProjector::apply(const double* in, double* out, KKStats* stats) const
{
    const std::size_t ny = space_.y.size();
    const auto nx = static_cast<std::size_t>(space_.xi.n());
    auto cone_all = [&](const double* a, double* b) {
        for (std::size_t i = 0; i < ny; ++i) project_chi_cone(cone_, a + i * nx, b + i * nx);
    };
    if (trivial_) {
        cone_all(in, out);
        if (stats) *stats = KKStats{};
        return;
    }
    const std::size_t n = ny * nx;
    std::vector<double> x(in, in + n), p(n, 0.0), q(n, 0.0), yk(n), tmp(n), xn(n);
    const double w = space_.y.cell_volume() * space_.xi.h();
    int it = 0;
    double change = 0.0, gap = 0.0;
    for (; it < max_iter_; ++it) {
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + p[i];
        project_K(space_, tmp.data(), yk.data());
        for (std::size_t i = 0; i < n; ++i) p[i] = tmp[i] - yk[i];
        for (std::size_t i = 0; i < n; ++i) tmp[i] = yk[i] + q[i];
        cone_all(tmp.data(), xn.data());
        double c2 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = tmp[i] - xn[i];
            c2 += sqr(xn[i] - x[i]);
            g2 += sqr(xn[i] - yk[i]);
        }
        x.swap(xn);
        change = std::sqrt(c2 * w);
        gap = std::sqrt(g2 * w);
        if (change <= tol_ && gap <= tol_) {
            ++it;
            break;
        }
    }
    if (change > tol_ || gap > tol_)
        numerical_error("Dykstra projection did not converge in " + std::to_string(max_iter_) +
                        " iterations (gap " + std::to_string(std::max(change, gap)) + ")");
    std::copy(x.begin(), x.end(), out);
    if (stats) *stats = KKStats{it, change, gap};
}

std::vector<double> KineticProjector::apply(const std::vector<double>& f, KKStats* stats) const
{
    if (f.size() != space_.y.size() * static_cast<std::size_t>(space_.xi.n()))
        schema_error("slab size does not match the projector");
    std::vector<double> out(f.size());
    apply(f.data(), out.data(), stats);
    return out;
}

std::vector<Vec2> project_vector_field(const FluxModel& flux, const ConstraintSpace& space)
{
    const std::size_t n = space.y.size();
    std::vector<double> comp[2] = {std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = flux.alpha(space.y.center(i));
        comp[0][i] = a[0];
        comp[1][i] = a[1];
    }
    std::vector<Vec2> out(n);
    for (int d = 0; d < 2; ++d) {
        std::vector<double> r(n);
        space.project_slice(2, comp[d].data(), r.data());
        for (std::size_t i = 0; i < n; ++i) out[i][d] = r[i];
    }
    return out;
}

} // namespace homlab
