#include "homlab/cell_problem.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace homlab;

namespace {

YGrid square(int n)
{
    YGrid y;
    y.dim = 2;
    y.n = {n, n};
    return y;
}

YGrid line(int n)
{
    YGrid y;
    y.dim = 1;
    y.n = {n, 1};
    return y;
}

FluxModel hetero(double amp)
{
    FluxParams p;
    p.num["amp"] = amp;
    return builtin_flux("hetero_1d", p);
}

} // namespace

TEST_CASE("constant family is an exact cell solution")
{
    CellParams params;
    const CellSolution s = stationary_family(builtin_flux("hamiltonian"), CellFamily::constant, [&] {
        params.p = 0.4;
        return params;
    }(), square(16));
    CHECK(s.residual <= 1e-12);
    for (double v : s.v) CHECK(v == 0.4);
}

TEST_CASE("hamiltonian family residual decays at first order")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    CellParams params;
    std::vector<double> res;
    for (int n : {16, 32, 64}) {
        const CellSolution s = stationary_family(flux, CellFamily::hamiltonian, params, square(n));
        CHECK(std::abs(s.mean) <= 1e-12);
        // v = phi - <phi>
        for (std::size_t i = 0; i < s.v.size(); ++i)
            CHECK(s.v[i] == doctest::Approx(flux.stream(s.y.center(i)) - flux.stream_mean).epsilon(1e-12));
        // second derivatives of the unit-amplitude stream function are (2 pi)^2
        CHECK(s.residual <= 2.0 * two_pi * two_pi / n);
        res.push_back(s.residual);
    }
    CHECK(std::log2(res[0] / res[1]) >= 0.8);
    CHECK(std::log2(res[1] / res[2]) >= 0.8);
}

TEST_CASE("hetero branch: closed form and constant interface flux")
{
    const FluxModel flux = hetero(0.5);
    CellParams params;
    params.p = 1.0;
    params.sampling = "center";
    const CellSolution center = stationary_family(flux, CellFamily::hetero_1d_branch, params, line(64));
    for (std::size_t i = 0; i < center.v.size(); ++i)
        CHECK(center.v[i] ==
              doctest::Approx(std::sqrt(2.0 - std::cos(two_pi * center.y.center(i)[0]))).epsilon(1e-14));

    params.sampling = "upwind_face";
    const CellSolution face = stationary_family(flux, CellFamily::hetero_1d_branch, params, line(64));
    const auto fl = interface_fluxes(flux, face.y, face.v);
    double spread = 0.0;
    for (double f : fl) spread = std::max(spread, std::abs(f - fl.front()));
    CHECK(spread <= 1e-10);
    CHECK(fl.front() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(face.residual <= 1e-10);
}

TEST_CASE("hetero branch requires a level above max b")
{
    CellParams params;
    params.p = 0.4;
    CHECK_THROWS_AS(stationary_family(hetero(0.5), CellFamily::hetero_1d_branch, params, line(16)), Error);
    CHECK_THROWS_AS(stationary_family(hetero(0.5), CellFamily::constant, params, line(16)), Error);
    CHECK_THROWS_AS(stationary_family(builtin_flux("hetero_1d"), CellFamily::hamiltonian, params, line(16)), Error);
}

TEST_CASE("weak residual against smooth test functions")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    CellParams params;
    const CellSolution s = stationary_family(flux, CellFamily::hamiltonian, params, square(32));
    CHECK(weak_residual(flux, s.y, s.v, 100) <= 1e-2);
    params.p = 0.4;
    const CellSolution c = stationary_family(flux, CellFamily::constant, params, square(32));
    CHECK(weak_residual(flux, c.y, c.v, 100) <= 1e-12);
}

TEST_CASE("families are monotone in their parameter")
{
    const FluxModel ham = builtin_flux("hamiltonian");
    const FluxModel het = hetero(0.5);
    CellParams params;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Vec2 y{unif(rng), unif(rng)};
        const double p = unif(rng), dp = 0.5 * unif(rng);
        CHECK(family_value(ham, CellFamily::hamiltonian, params, p, y) <=
              family_value(ham, CellFamily::hamiltonian, params, p + dp, y));
        CHECK(family_value(het, CellFamily::hetero_1d_branch, params, 0.6 + p, y) <=
              family_value(het, CellFamily::hetero_1d_branch, params, 0.6 + p + dp, y));
    }
}

TEST_CASE("kinetic residual vanishes on discrete stationary states")
{
    FluxParams p;
    p.num["mean"] = 1.0;
    p.num["amp"] = 0.5;
    const FluxModel shear = builtin_flux("shear", p);
    CellParams params;
    params.p = 0.3;
    const CellSolution s = stationary_family(shear, CellFamily::row_profile, params, square(16));
    CHECK(s.residual <= 1e-12);
    CHECK(s.kinetic_residual <= 1e-12);
    // a field varying along the transport direction is not stationary
    std::vector<double> bad(s.v.size());
    for (std::size_t i = 0; i < bad.size(); ++i) bad[i] = std::sin(two_pi * s.y.center(i)[0]);
    CHECK(cell_residual(shear, s.y, bad) > 0.1);
}

TEST_CASE("relaxation from a stationary member does not increase the residual")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    CellParams params;
    const CellSolution s = stationary_family(flux, CellFamily::hamiltonian, params, square(16));
    SolverConfig cfg;
    const CellSolution r = relax_to_cell(flux, s.y, s.v, 5.0, cfg);
    for (double h : r.history) CHECK(h <= s.residual * (1.0 + 1e-9));
}

TEST_CASE("relaxation from perturbed hamiltonian data reaches a stationary state")
{
    const FluxModel flux = builtin_flux("hamiltonian");
    CellParams params;
    const CellSolution s = stationary_family(flux, CellFamily::hamiltonian, params, square(32));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> v = s.v;
    for (double& e : v) e *= 1.0 + 0.1 * unif(rng);
    SolverConfig cfg;
    const CellSolution r = relax_to_cell(flux, s.y, v, 200.0, cfg);
    CHECK(r.residual <= 1e-4);
    CHECK(r.converged);
}

TEST_CASE("hetero relaxation makes the interface flux constant")
{
    const FluxModel flux = hetero(0.5);
    const YGrid y = line(64);
    std::vector<double> v(y.size(), std::sqrt(2.0));
    SolverConfig cfg;
    const CellSolution r = relax_to_cell(flux, y, v, 200.0, cfg);
    const auto fl = interface_fluxes(flux, y, r.v);
    double spread = 0.0;
    for (double f : fl) spread = std::max(spread, std::abs(f - fl.front()));
    CHECK(spread <= 1e-3);
}

TEST_CASE("prepared data sit between their barriers")
{
    SUBCASE("constants on a divergence-free flux")
    {
        const XGrid x = XGrid::box(2, 16, 0.0, 1.0);
        CellParams params;
        const auto profile = [](const Vec2& xs) { return 0.5 + 0.3 * std::sin(two_pi * xs[0]); };
        const PreparedData d =
            prepare_initial_data(builtin_flux("hamiltonian"), profile, CellFamily::constant, params, 0.2, 0.8, x, square(8));
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < d.field.y.size(); ++j) CHECK(d.field.at(i, j) == profile(x.center(i)));
        for (double v : d.barriers.u1.v) CHECK(v == 0.2);
        for (double v : d.barriers.u2.v) CHECK(v == 0.8);
    }
    SUBCASE("row profiles on the shear flux")
    {
        FluxParams p;
        p.num["mean"] = 1.0;
        p.num["amp"] = 0.5;
        const FluxModel shear = builtin_flux("shear", p);
        const XGrid x = XGrid::box(2, 16, 0.0, 1.0);
        CellParams params;
        const auto profile = [](const Vec2& xs) { return 0.5 + 0.3 * std::cos(two_pi * xs[1]); };
        const PreparedData d = prepare_initial_data(shear, profile, CellFamily::row_profile, params, 0.2, 0.8, x, square(8));
        const std::size_t ny = d.field.y.size();
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::vector<double> slice(d.field.v.begin() + static_cast<long>(i * ny),
                                      d.field.v.begin() + static_cast<long>((i + 1) * ny));
            CHECK(cell_residual(shear, d.field.y, slice) <= 1e-12);
            for (std::size_t j = 0; j < ny; ++j) {
                const Vec2 yc = d.field.y.center(j);
                CHECK(d.field.at(i, j) >= d.lower(yc) - 1e-14);
                CHECK(d.field.at(i, j) <= d.upper(yc) + 1e-14);
            }
        }
    }
    SUBCASE("hetero branches modulated in level")
    {
        const FluxModel flux = hetero(0.5);
        const XGrid x = XGrid::box(1, 16, 0.0, 1.0);
        CellParams params;
        const auto profile = [](const Vec2& xs) { return 1.0 + 0.3 * std::sin(two_pi * xs[0]); };
        const PreparedData d =
            prepare_initial_data(flux, profile, CellFamily::hetero_1d_branch, params, 0.7, 1.3, x, line(16));
        for (std::size_t j = 0; j < d.field.y.size(); ++j)
            CHECK(d.barriers.u1.v[j] <= d.barriers.u2.v[j]);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < d.field.y.size(); ++j) {
                CHECK(d.field.at(i, j) >= d.barriers.u1.v[j] - 1e-14);
                CHECK(d.field.at(i, j) <= d.barriers.u2.v[j] + 1e-14);
            }
    }
    SUBCASE("modulation outside the range is rejected")
    {
        CellParams params;
        CHECK_THROWS_AS(prepare_initial_data(builtin_flux("hamiltonian"), [](const Vec2&) { return 0.9; },
                                             CellFamily::constant, params, 0.2, 0.8, XGrid::box(2, 4, 0.0, 1.0), square(4)),
                        Error);
    }
}
