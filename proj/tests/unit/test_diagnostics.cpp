#include "homlab/diagnostics.hpp"
#include "homlab/field_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

using namespace homlab;

namespace {

FluxModel shear()
{
    FluxParams p;
    p.num["mean"] = 1.0;
    p.num["amp"] = 0.5;
    return builtin_flux("shear", p);
}

double a1(double y2) { return 1.0 + 0.5 * std::sin(two_pi * y2); }

double shear_u0(const Vec2& x, const Vec2& y)
{
    return 0.5 + 0.3 * std::sin(two_pi * x[0]) * std::cos(two_pi * x[1]) + 0.25 * std::cos(two_pi * y[1]);
}

double shear_exact(double t, const Vec2& x, const Vec2& y) { return shear_u0({x[0] - a1(y[1]) * t, x[1]}, y); }

YGrid rows(int n)
{
    YGrid y;
    y.dim = 2;
    y.n = {1, n};
    return y;
}

TwoScaleField exact_frame(double t, const XGrid& x, const YGrid& y)
{
    TwoScaleField f = sample_two_scale([t](const Vec2& xs, const Vec2& ys) { return shear_exact(t, xs, ys); }, x, y);
    f.t = t;
    return f;
}

MacroField exact_direct(double t, const XGrid& x, double eps)
{
    MacroField m = compose_oscillating([t](const Vec2& xs, const Vec2& ys) { return shear_exact(t, xs, ys); }, x, eps);
    m.t = t;
    return m;
}

} // namespace

TEST_CASE("mollifier weights are a discrete probability kernel")
{
    for (double delta : {0.25, 0.125, 0.0625}) {
        const MollifierSpec m{delta};
        for (double h : {1.0 / 64, 1.0 / 256}) {
            const auto w = m.weights(h);
            CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
            for (double v : w) CHECK(v >= 0.0);
            CHECK(static_cast<double>(w.size() / 2) * h <= delta + 1e-12);
        }
        CHECK(MollifierSpec::base(0.0) <= 1.0);
        CHECK(MollifierSpec::base(1.0) == 0.0);
    }
}

TEST_CASE("synthetic direct field: D is the pure mollification error")
{
    const XGrid xr = XGrid::box(2, 128, 0.0, 1.0);
    const YGrid y = rows(64);
    const std::vector<TwoScaleField> ref{exact_frame(0.0, xr, y), exact_frame(0.25, xr, y)};
    const Window K = Window::central_half(xr);
    double prev = 0.0;
    for (double delta : {1.0 / 32, 1.0 / 16, 1.0 / 8}) {
        const double eps = 0.125;
        const XGrid x = XGrid::box(2, 256, 0.0, 1.0);
        const std::vector<MacroField> direct{exact_direct(0.0, x, eps), exact_direct(0.25, x, eps)};
        const double D = strong_convergence_metric(direct, ref, MollifierSpec{delta}, eps, K);
        // Lipschitz constant of the data in x is 0.3 * 2 pi * sqrt(2)
        CHECK(D <= delta * 0.3 * two_pi * std::sqrt(2.0) * 0.25);
        CHECK(D > prev);
        prev = D;
    }
}

TEST_CASE("two-scale pairing of a pure oscillation")
{
    const YGrid y = rows(64);
    for (double eps : {0.25, 0.125, 0.0625}) {
        CAPTURE(eps);
        const XGrid x = XGrid::box(2, static_cast<int>(32 / eps), 0.0, 1.0);
        const auto w = [](const Vec2&, const Vec2& ys) { return std::cos(two_pi * ys[1]); };
        const MacroField u = compose_oscillating(w, x, eps);
        const TwoScaleField ref = sample_two_scale(w, XGrid::box(2, 8, 0.0, 1.0), y);
        const auto one = [](const Vec2&) { return 1.0; };
        const auto same = [](const Vec2& ys) { return std::cos(two_pi * ys[1]); };
        const auto orth = [](const Vec2& ys) { return std::sin(two_pi * ys[1]); };
        // <cos^2> |box| = 1/2
        CHECK(two_scale_pairing(u, ref, one, same, eps) <= eps);
        CHECK(two_scale_pairing(u, ref, one, orth, eps) <= eps);
        CHECK(two_scale_pairing(u, ref, one, [](const Vec2&) { return 1.0; }, eps) <= eps);
    }
}

TEST_CASE("two-scale pairing gap of direct shear runs decays in eps")
{
    const YGrid y = rows(64);
    const double t = 0.25;
    const auto psi_x = [](const Vec2& x) { return std::sin(two_pi * x[0]) * std::cos(two_pi * x[1]); };
    const auto psi_y = [](const Vec2& ys) { return 1.0 + std::cos(two_pi * ys[1]); };
    std::vector<double> gaps;
    for (double eps : {0.25, 0.125, 0.0625}) {
        const XGrid x = XGrid::box(2, static_cast<int>(32 / eps), 0.0, 1.0);
        SolverConfig cfg;
        cfg.t_end = t;
        const Trajectory tr = solve_direct(compose_oscillating(shear_u0, x, eps), shear(), eps, cfg);
        gaps.push_back(two_scale_pairing(tr.frames.back(), exact_frame(t, XGrid::box(2, 128, 0.0, 1.0), y), psi_x, psi_y, eps));
    }
    CHECK(std::log2(gaps[0] / gaps[1]) >= 0.8);
    CHECK(std::log2(gaps[1] / gaps[2]) >= 0.8);
}

TEST_CASE("contraction margins")
{
    const XGrid x = XGrid::box(2, 16, 0.0, 1.0);
    const YGrid y = rows(4);
    const std::vector<TwoScaleField> a{exact_frame(0.0, x, y), exact_frame(0.5, x, y)};
    const auto w = [](const Vec2&) { return 1.0; };
    for (const auto& m : contraction_check(a, a, 1.0, w)) CHECK(m.margin == 0.0);

    std::vector<TwoScaleField> b = a;
    for (auto& f : b)
        for (double& v : f.v) v += 0.1;
    const auto m = contraction_check(a, b, 0.0, w);
    CHECK(m.front().initial == doctest::Approx(0.1));
    CHECK(m.back().margin == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("barrier check reports the excess")
{
    const XGrid x = XGrid::box(1, 16, 0.0, 1.0);
    MacroField f{x, std::vector<double>(x.size(), 0.5), 0.0};
    const auto lo = [](const Vec2&) { return 0.2; };
    const auto hi = [](const Vec2&) { return 0.8; };
    CHECK(barrier_check({f}, lo, hi, 0.25) <= 0.0);
    f.v[3] = 0.9;
    CHECK(barrier_check({f}, lo, hi, 0.25) == doctest::Approx(0.1));
}

TEST_CASE("convergence report schema")
{
    ConvergenceReport r;
    r.eps = {0.25, 0.125};
    r.delta = {0.25};
    r.D = {{1e-3}, {5e-4}};
    r.x_cells = {128, 256};
    r.y_cells = 64;
    r.t_end = 0.5;
    r.u0_l1_window = 0.125;
    CHECK(r.valid());
    const std::string csv = r.csv();
    CHECK(csv.substr(0, csv.find('\n')) == "eps,delta,D,x_cells,y_cells,t_end,u0_l1_window");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    const auto j = nlohmann::json::parse(r.json());
    CHECK(j["D"].size() == 2);
    r.D[1][0] = -1.0;
    CHECK_FALSE(r.valid());
}

TEST_CASE("field binary round trip")
{
    const XGrid x = XGrid::box(2, 4, 0.0, 2.0);
    const YGrid y = rows(8);
    TwoScaleField f = exact_frame(0.3, x, y);
    f.t = 0.3;
    const auto path = std::filesystem::temp_directory_path() / "homlab_roundtrip.hlf";
    write_field(path.string(), to_blob(f));
    const FieldBlob b = read_field(path.string());
    std::filesystem::remove(path);
    REQUIRE(b.data.size() == f.v.size());
    for (std::size_t i = 0; i < f.v.size(); ++i) CHECK(b.data[i] == f.v[i]);
    CHECK(b.time == 0.3);
    CHECK(b.hi[0] == 2.0);

    {
        std::vector<double> cell(y.size());
        for (std::size_t i = 0; i < cell.size(); ++i) cell[i] = 0.1 * i;
        const auto back = cell_values_from_blob(to_blob(cell, y), y);
        CHECK(back == cell);
    }
}

TEST_CASE("corrupt field files are rejected")
{
    const auto path = std::filesystem::temp_directory_path() / "homlab_corrupt.hlf";
    {
        std::FILE* fp = std::fopen(path.string().c_str(), "wb");
        std::fputs("NOPE", fp);
        std::fclose(fp);
    }
    CHECK_THROWS_AS(read_field(path.string()), Error);
    std::filesystem::remove(path);
}

TEST_CASE("csv writer formats numbers reproducibly")
{
    CsvWriter w({"a", "b"});
    w.row(std::vector<double>{0.1, 1e-20});
    w.row(std::vector<std::string>{"x", "y"});
    CHECK(w.rows() == 2);
    const std::string s = w.str();
    CHECK(s.rfind("a,b\n", 0) == 0);
    CHECK(std::stod(format_number(0.1)) == 0.1);
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}
