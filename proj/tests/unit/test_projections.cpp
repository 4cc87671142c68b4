#include "homlab/projections.hpp"
#include "homlab/cell_problem.hpp"

#include "oracles/qp_oracle.hpp"

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

std::vector<double> random_slab(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> unif(-scale, scale);
    std::vector<double> f(n);
    for (double& v : f) v = unif(rng);
    return f;
}

oracle::ConeQp cone_qp(const ChiCone& cone)
{
    oracle::ConeQp qp;
    qp.n = cone.xi.n();
    qp.lo = cone.lo();
    qp.hi = cone.hi();
    for (int k = 0; k + 1 < qp.n; ++k) qp.jump.push_back(k + 1 == cone.zero() ? 1.0 : 0.0);
    return qp;
}

struct SpaceCase {
    std::string label;
    ConstraintSpace space;
};

std::vector<SpaceCase> all_spaces()
{
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    std::vector<SpaceCase> out;
    out.push_back({"exact_rows/shear", build_space(SpaceKind::exact_rows, shear(), square(8, 8), xi)});
    out.push_back({"nullspace/shear", build_space(SpaceKind::nullspace, shear(), square(8, 8), xi)});
    out.push_back({"ergodic/shear", build_space(SpaceKind::ergodic, shear(), square(8, 8), xi)});
    out.push_back({"nullspace/hamiltonian", build_space(SpaceKind::nullspace, builtin_flux("hamiltonian"), square(16, 16), xi)});
    out.push_back({"ergodic/hamiltonian", build_space(SpaceKind::ergodic, builtin_flux("hamiltonian"), square(16, 16), xi)});
    return out;
}

} // namespace

TEST_CASE("cone projection agrees with the brute-force QP oracle")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> half(1, 10);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 * half(rng);
        const XiGrid xi = XiGrid::make(1.0, n, frac(rng));
        const ChiCone cone{xi};
        const auto x = random_slab(static_cast<std::size_t>(n), rng, 1.5);
        const auto got = project_chi_cone(cone, x);
        const auto want = oracle::project_cone_brute_force(cone_qp(cone), x);
        for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
        CHECK(cone.violation(got.data()) <= 1e-10);
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("QP oracle on hand-solvable instances")
{
    oracle::ConeQp qp{2, 0, 2, {1.0}};
    auto p = oracle::project_cone_brute_force(qp, {0.0, 3.0});
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(2.0));
    // outside cells pinned to zero
    qp = {4, 1, 3, {0.0, 1.0, 0.0}};
    p = oracle::project_cone_brute_force(qp, {5.0, -1.0, 0.5, 7.0});
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(-0.75));
    CHECK(p[2] == doctest::Approx(0.25));
    CHECK(p[3] == 0.0);
}

TEST_CASE("chi profiles are fixed by the cone projection")
{
    const XiGrid xi = XiGrid::from_support(1.0, 20);
    const ChiCone cone{xi};
    for (double u : {-1.0, -0.45, 0.0, 0.5, 0.83}) {
        const auto f = chi_profile(u, xi);
        const auto p = project_chi_cone(cone, f);
        for (int k = 0; k < xi.n(); ++k) CHECK(std::abs(p[k] - f[k]) <= 1e-12);
    }
}

TEST_CASE("cone projection of a constant respects the jump budget")
{
    const XiGrid xi = XiGrid::from_support(1.0, 20);
    const ChiCone cone{xi};
    std::vector<double> ones(static_cast<std::size_t>(xi.n()), 0.0);
    for (int k = cone.lo(); k < cone.hi(); ++k) ones[k] = 1.0;
    const auto p = project_chi_cone(cone, ones);
    CHECK(p[cone.zero()] - p[cone.zero() - 1] <= 1.0 + 1e-12);
    double rise = 0.0;
    for (int k = 0; k + 1 < xi.n(); ++k) rise += std::max(0.0, p[k + 1] - p[k]);
    CHECK(rise <= 1.0 + 1e-12);
    CHECK(cone.violation(p.data()) <= 1e-12);
}

TEST_CASE("antitonic regression returns a nonincreasing least squares fit")
{
    std::vector<double> v{1.0, 3.0, 2.0, 0.0, 0.5};
    antitonic_regression(v.data(), static_cast<int>(v.size()));
    CHECK(v[0] == doctest::Approx(2.0));
    CHECK(v[1] == doctest::Approx(2.0));
    CHECK(v[2] == doctest::Approx(2.0));
    CHECK(v[3] == doctest::Approx(0.25));
    CHECK(v[4] == doctest::Approx(0.25));
}

TEST_CASE("K projections are idempotent and orthogonal")
{
    std::mt19937_64 rng(31);
    for (const auto& sc : all_spaces()) {
        CAPTURE(sc.label);
        const ConstraintSpace& s = sc.space;
        const std::size_t n = s.y.size() * static_cast<std::size_t>(s.xi.n());
        for (int trial = 0; trial < 5; ++trial) {
            const auto f = random_slab(n, rng);
            const auto pf = project_K(s, f);
            const auto ppf = project_K(s, pf);
            std::vector<double> d(n), r(n);
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = ppf[i] - pf[i];
                r[i] = f[i] - pf[i];
            }
            CHECK(slab_norm(s, d) <= 1e-10);
            CHECK(K_residual(s, pf) <= 1e-10);

            const std::size_t ny = s.y.size();
            const auto nxi = static_cast<std::size_t>(s.xi.n());
            for (int c : {0, 2}) {
                for (const auto& g : s.spanning_set(c)) {
                    for (std::size_t k = 0; k < nxi; ++k) {
                        if (s.slice_class[k] != c) continue;
                        double dot = 0.0;
                        for (std::size_t iy = 0; iy < ny; ++iy) dot += r[iy * nxi + k] * g[iy];
                        CHECK(std::abs(dot * s.y.cell_volume()) <= 1e-8);
                    }
                }
            }
        }
    }
}

TEST_CASE("shear projection averages along the transport direction")
{
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    const YGrid y = square(16, 16);
    const ConstraintSpace rows = build_space(SpaceKind::exact_rows, shear(), y, xi);
    const ConstraintSpace null = build_space(SpaceKind::nullspace, shear(), y, xi);
    std::vector<double> f(y.size()), want(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const Vec2 c = y.center(i);
        f[i] = std::sin(two_pi * c[0]) + std::cos(two_pi * c[1]);
        want[i] = std::cos(two_pi * c[1]);
    }
    std::vector<double> a(y.size()), b(y.size());
    rows.project_slice(2, f.data(), a.data());
    null.project_slice(2, f.data(), b.data());
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(std::abs(a[i] - want[i]) <= 1e-12);
        CHECK(std::abs(a[i] - b[i]) <= 1e-8);
    }
    // row-constant fields are fixed
    std::vector<double> again(y.size());
    rows.project_slice(2, want.data(), again.data());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(again[i] - want[i]) <= 1e-12);
}

TEST_CASE("ergodic and nullspace realizations agree on the shear flux")
{
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    const YGrid y = square(8, 8);
    const ConstraintSpace erg = build_space(SpaceKind::ergodic, shear(), y, xi);
    const ConstraintSpace null = build_space(SpaceKind::nullspace, shear(), y, xi);
    std::mt19937_64 rng(4);
    const auto f = random_slab(y.size() * static_cast<std::size_t>(xi.n()), rng);
    const auto a = project_K(erg, f);
    const auto b = project_K(null, f);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-8);
    CHECK(erg.volume_defect <= 1e-6);
    CHECK(erg.doubling_mismatch == 0);
}

TEST_CASE("projected advection field")
{
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    SUBCASE("shear field is already in K0")
    {
        const FluxModel flux = shear();
        const ConstraintSpace s = build_space(SpaceKind::exact_rows, flux, square(8, 8), xi);
        const auto a = project_vector_field(flux, s);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const Vec2 want = flux.alpha(s.y.center(i));
            CHECK(std::abs(a[i][0] - want[0]) <= 1e-12);
            CHECK(std::abs(a[i][1] - want[1]) <= 1e-12);
        }
    }
    SUBCASE("hamiltonian field keeps its zero mean")
    {
        const FluxModel flux = builtin_flux("hamiltonian");
        const ConstraintSpace s = build_space(SpaceKind::nullspace, flux, square(16, 16), xi);
        const auto a = project_vector_field(flux, s);
        Vec2 mean{0.0, 0.0}, raw{0.0, 0.0};
        for (std::size_t i = 0; i < a.size(); ++i) {
            const Vec2 a0 = flux.alpha(s.y.center(i));
            for (int d = 0; d < 2; ++d) {
                mean[d] += a[i][d] / a.size();
                raw[d] += a0[d] / a.size();
            }
        }
        CHECK(std::abs(mean[0] - raw[0]) <= 1e-12);
        CHECK(std::abs(mean[1] - raw[1]) <= 1e-12);
    }
    SUBCASE("constant field is unchanged")
    {
        FluxParams p;
        p.str["field"] = "constant";
        p.num["c1"] = 0.7;
        p.num["c2"] = -0.2;
        const FluxModel flux = builtin_flux("separate_burgers", p);
        const ConstraintSpace s = build_space(SpaceKind::nullspace, flux, square(8, 8), xi);
        for (const Vec2& a : project_vector_field(flux, s)) {
            CHECK(a[0] == doctest::Approx(flux.alpha({0.0, 0.0})[0]).epsilon(1e-12));
            CHECK(a[1] == doctest::Approx(flux.alpha({0.0, 0.0})[1]).epsilon(1e-12));
        }
    }
}

TEST_CASE("kinetic projector: members are fixed, shear commutes with the cone")
{
    const FluxModel flux = shear();
    const XiGrid xi = XiGrid::from_support(1.0, 16);
    const YGrid y = square(8, 8);
    const KineticProjector proj(build_space(SpaceKind::exact_rows, flux, y, xi), 1e-11);
    const std::size_t nxi = static_cast<std::size_t>(xi.n());

    CellParams params;
    params.p = 0.2;
    const CellSolution v = stationary_family(flux, CellFamily::row_profile, params, y);
    std::vector<double> f(y.size() * nxi);
    for (std::size_t i = 0; i < y.size(); ++i) chi_profile_into(v.v[i], xi, f.data() + i * nxi);
    KKStats st;
    const auto pf = proj.apply(f, &st);
    double diff = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) diff = std::max(diff, std::abs(pf[i] - f[i]));
    CHECK(diff <= 1e-10);

    // row-constant but outside the cone: the answer is the columnwise cone projection
    std::mt19937_64 rng(8);
    std::vector<double> g(y.size() * nxi);
    const auto row = random_slab(static_cast<std::size_t>(y.n[1]) * nxi, rng);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t k = 0; k < nxi; ++k) g[i * nxi + k] = row[(i % y.n[1]) * nxi + k];
    const auto pg = proj.apply(g);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto col = project_chi_cone(proj.cone(), std::vector<double>(g.begin() + i * nxi, g.begin() + (i + 1) * nxi));
        for (std::size_t k = 0; k < nxi; ++k) CHECK(std::abs(pg[i * nxi + k] - col[k]) <= 1e-8);
    }
}

TEST_CASE("kinetic projector output lies in the intersection and is nonexpansive")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    const XiGrid xi = XiGrid::from_support(1.0, 12);
    const KineticProjector proj(build_space(SpaceKind::nullspace, flux, square(8, 8), xi), 1e-11);
    const ConstraintSpace& s = proj.space();
    const std::size_t n = s.y.size() * static_cast<std::size_t>(xi.n());
    std::mt19937_64 rng(77);
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto f = random_slab(n, rng, 1.2);
        const auto g = random_slab(n, rng, 1.2);
        const auto pf = proj.apply(f);
        const auto pg = proj.apply(g);
        std::vector<double> dp(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            dp[i] = pf[i] - pg[i];
            d[i] = f[i] - g[i];
        }
        worst_ratio = std::max(worst_ratio, slab_norm(s, dp) / slab_norm(s, d));
        if (trial < 10) {
            CHECK(K_residual(s, pf) <= 1e-9);
            for (std::size_t iy = 0; iy < s.y.size(); ++iy)
                CHECK(proj.cone().violation(pf.data() + iy * static_cast<std::size_t>(xi.n())) <= 1e-9);
        }
    }
    CHECK(worst_ratio <= 1.0 + 1e-9);
}
