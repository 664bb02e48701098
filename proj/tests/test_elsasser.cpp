#include "mhdlab/elsasser.hpp"
#include "mhdlab/spectral.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mhdlab;
using namespace mhdlab::testing;

namespace {

Grid grid16() { return Grid::cube(16, 2.0 * kPi, 2, 0.05); }

} // namespace

TEST(Elsasser, ZeroMagneticField) {
    const Grid g = grid16();
    const auto U = random_solenoidal(g, 3, 1), F = random_modes(g, 3, 3, 2);
    const FieldSnapshot Z(g, 3);
    const auto e = to_elsasser(U, Z, F, Z);
    EXPECT_EQ(max_diff(e.u, U), 0.0);
    EXPECT_EQ(max_diff(e.b, U), 0.0);
    EXPECT_EQ(max_diff(e.f, F), 0.0);
    EXPECT_EQ(max_diff(e.g, F), 0.0);
}

TEST(Elsasser, ZeroDifferenceInverse) {
    // mirror: b = u and g = f give B = 0, G = 0
    const Grid g = grid16();
    const auto u = random_solenoidal(g, 3, 3), f = random_modes(g, 3, 3, 4);
    const auto p = from_elsasser(u, u, f, f);
    EXPECT_EQ(max_abs(p.B), 0.0);
    EXPECT_EQ(max_abs(p.G), 0.0);
    EXPECT_EQ(max_diff(p.U, u), 0.0);
    EXPECT_EQ(max_diff(p.F, f), 0.0);
}

TEST(Elsasser, RoundTrips) {
    const Grid g = grid16();
    const auto U = random_modes(g, 3, 3, 5), B = random_modes(g, 3, 3, 6);
    const auto F = random_modes(g, 3, 3, 7), G = random_modes(g, 3, 3, 8);
    const auto e = to_elsasser(U, B, F, G);
    const auto p = from_elsasser(e.u, e.b, e.f, e.g);
    EXPECT_LE(max_diff(p.U, U), 1e-15 * 8);
    EXPECT_LE(max_diff(p.B, B), 1e-15 * 8);
    EXPECT_LE(max_diff(p.F, F), 1e-15 * 8);
    EXPECT_LE(max_diff(p.G, G), 1e-15 * 8);
    const auto e2 = to_elsasser(p.U, p.B, p.F, p.G);
    EXPECT_LE(max_diff(e2.u, e.u), 1e-14);
    EXPECT_LE(max_diff(e2.g, e.g), 1e-14);
}

TEST(Elsasser, DivergenceFreeInDivergenceFreeOut) {
    const Grid g = grid16();
    const auto U = random_solenoidal(g, 4, 9), B = random_solenoidal(g, 4, 10);
    const FieldSnapshot Z(g, 3);
    const auto e = to_elsasser(U, B, Z, Z);
    EXPECT_LE(max_divergence(e.u), 1e-8);
    EXPECT_LE(max_divergence(e.b), 1e-8);
    const auto p = from_elsasser(e.u, e.b, Z, Z);
    EXPECT_LE(max_divergence(p.U), 1e-8);
    EXPECT_LE(max_divergence(p.B), 1e-8);
}

TEST(Elsasser, GridMismatch) {
    const FieldSnapshot a(grid16(), 3), b(Grid::cube(8, 2.0 * kPi, 2, 0.05), 3);
    EXPECT_THROW(to_elsasser(a, b, a, a), ValidationError);
    EXPECT_THROW(from_elsasser(a, a, a, b), ValidationError);
}

TEST(Pressure, ZeroSource) {
    const Grid g = grid16();
    const auto u = random_solenoidal(g, 3, 11);
    EXPECT_EQ(max_abs(solve_pressure(u, FieldSnapshot(g, 3))), 0.0);
    EXPECT_EQ(max_abs(solve_pressure(FieldSnapshot(g, 3), u)), 0.0);
}

TEST(Pressure, AbcResidual) {
    const Grid g = Grid::cube(32, 2.0 * kPi, 2, 0.1);
    const double A = 1.3;
    const auto u = sample(g, 3, [&](double, const Eigen::Vector3d& x) {
        return Eigen::Vector3d(A * std::sin(x[2]), A * std::sin(x[0]), A * std::sin(x[1]));
    });
    const auto P = solve_pressure(u, u);
    EXPECT_LE(pressure_residual(u, u, P), 1e-8);
    for (int n = 0; n < g.nt; ++n) EXPECT_NEAR(P.mean(n, 0), 0.0, 1e-14);
}

TEST(Pressure, TaylorGreenClosedForm) {
    // for u = b the pressure equation is the incompressible one; the Taylor-Green vortex has
    // p = A^2/4 (cos 2x + cos 2y)
    const Grid g = Grid::cube(32, 2.0 * kPi, 3, 0.1);
    const double A = 0.8;
    const auto u = sample(g, 3, [&](double t, const Eigen::Vector3d& x) {
        const double a = A * std::exp(-2.0 * t);
        return Eigen::Vector3d(a * std::sin(x[0]) * std::cos(x[1]), -a * std::cos(x[0]) * std::sin(x[1]), 0.0);
    });
    const auto want = sample(g, 1, [&](double t, const Eigen::Vector3d& x) {
        return 0.25 * A * A * std::exp(-4.0 * t) * (std::cos(2.0 * x[0]) + std::cos(2.0 * x[1]));
    });
    EXPECT_LE(max_diff(solve_pressure(u, u), want), 1e-12);
}

TEST(Pressure, RejectsCompressibleInput) {
    const Grid g = grid16();
    const auto u = sample(g, 3, [](double, const Eigen::Vector3d& x) { return Eigen::Vector3d(std::sin(x[0]), 0, 0); });
    EXPECT_THROW(solve_pressure(u, u), ValidationError);
}

TEST(Pressure, Bilinear) {
    const Grid g = grid16();
    const auto u = random_solenoidal(g, 3, 12), b = random_solenoidal(g, 3, 13);
    const auto P = solve_pressure(u, b);
    auto u3 = u;
    u3.values() *= 3.0;
    auto b2 = b;
    b2.values() *= -2.0;
    const double s = std::max(1.0, max_abs(P));
    auto P3 = P;
    P3.values() *= 3.0;
    EXPECT_LE(max_diff(solve_pressure(u3, b), P3), 1e-12 * 3 * s);
    auto P2 = P;
    P2.values() *= -2.0;
    EXPECT_LE(max_diff(solve_pressure(u, b2), P2), 1e-12 * 2 * s);
}

TEST(Pressure, SpectralConvergence) {
    // 2D stream function exp(cos x / 2 + sin y / 2): not band-limited, but analytic
    auto field = [](const Grid& g) {
        return sample(g, 3, [](double, const Eigen::Vector3d& x) {
            const double e = std::exp(0.5 * std::cos(x[0]) + 0.5 * std::sin(x[1]));
            return Eigen::Vector3d(0.5 * std::cos(x[1]) * e, 0.5 * std::sin(x[0]) * e, 0.0);
        });
    };
    const Grid gr = Grid::cube(64, 2.0 * kPi, 1, 0.1);
    const auto ref = solve_pressure(field(gr), field(gr));
    double err[2];
    const int ns[2] = {16, 32};
    for (int r = 0; r < 2; ++r) {
        const Grid g = Grid::cube(ns[r], 2.0 * kPi, 1, 0.1);
        const auto P = solve_pressure(field(g), field(g));
        const int s = 64 / ns[r];
        double e = 0.0;
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) e = std::max(e, std::abs(P.at(0, 0, k, j, i) - ref.at(0, 0, s * k, s * j, s * i)));
        err[r] = e;
    }
    RecordProperty("err16", std::to_string(err[0]));
    RecordProperty("err32", std::to_string(err[1]));
    EXPECT_LT(err[1], std::max(1e-3 * err[0], 1e-12));
}
