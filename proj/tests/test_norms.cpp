#include "mhdlab/norms.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

using namespace mhdlab;
using namespace mhdlab::testing;

namespace {

Grid morrey_grid() { return Grid::cube(16, 1.0, 33, 0.01); }

// Independent scan: explicit cell enumeration per cylinder.
double brute_morrey(const FieldSnapshot& X, double p, double q, const std::vector<double>& radii, int stride) {
    const Grid& g = X.grid();
    double best = 0.0;
    for (double r : radii)
        for (int t = 0; t < g.nt; t += stride)
            for (int k = 0; k < g.nz; k += stride)
                for (int j = 0; j < g.ny; j += stride)
                    for (int i = 0; i < g.nx; i += stride) {
                        const ParabolicCylinder Q{g.time(t), g.position(i, j, k), r};
                        if (!cylinder_inside(g, Q)) continue;
                        double s = 0.0;
                        for (int n = 0; n < g.nt; ++n) {
                            if (!(std::abs(g.time(n) - Q.t0) < r * r)) continue;
                            for (int kk = 0; kk < g.nz; ++kk)
                                for (int jj = 0; jj < g.ny; ++jj)
                                    for (int ii = 0; ii < g.nx; ++ii) {
                                        if (!((g.position(ii, jj, kk) - Q.x0).norm() < r)) continue;
                                        double m2 = 0.0;
                                        for (int c = 0; c < X.components(); ++c)
                                            m2 += X.at(n, c, kk, jj, ii) * X.at(n, c, kk, jj, ii);
                                        s += std::pow(m2, 0.5 * p);
                                    }
                        }
                        s *= g.dt * g.cell_volume();
                        best = std::max(best, std::pow(std::pow(r, -5.0 * (1.0 - p / q)) * s, 1.0 / p));
                    }
    return best;
}

MorreyParams params(double p, double q, std::vector<double> radii, int stride = 2) {
    MorreyParams m;
    m.p = p;
    m.q = q;
    m.scan_radii = std::move(radii);
    m.center_stride = stride;
    return m;
}

} // namespace

TEST(Morrey, ValidationAndEmptyScan) {
    EXPECT_THROW(params(3, 2, {0.2}).validate(), ValidationError);
    EXPECT_THROW(params(1, 2, {0.2}).validate(), ValidationError);
    EXPECT_THROW(params(2, 3, {0.1, 0.2}).validate(), ValidationError);
    EXPECT_THROW(params(2, 3, {}).validate(), ValidationError);
    const Grid g = morrey_grid();
    EXPECT_THROW(morrey_norm(FieldSnapshot(g, 1), params(2, 3, {0.45})), DomainError);
}

TEST(Morrey, ZeroField) {
    const Grid g = morrey_grid();
    EXPECT_EQ(morrey_norm(FieldSnapshot(g, 3), params(3, 6, {0.3, 0.15})).value, 0.0);
}

TEST(Morrey, DiagonalExponentsAreLebesgue) {
    // with p = q the scan maximum is the largest L^p norm over the scanned cylinders
    const Grid g = morrey_grid();
    const std::vector<double> radii{0.3, 0.2, 0.13};
    for (int s = 0; s < 5; ++s) {
        const FieldSnapshot X = random_modes(g, 3, 2, 100 + s);
        for (double p : {2.0, 3.0}) {
            const MorreyResult m = morrey_norm(X, params(p, p, radii));
            const double direct = lebesgue_cylinder_norm(X, m.argmax, p, p);
            EXPECT_NEAR(m.value, direct, 1e-10 * direct);
            const double oracle = brute_morrey(X, p, p, radii, 2);
            EXPECT_NEAR(m.value, oracle, 0.01 * oracle);
        }
    }
}

TEST(Morrey, IndicatorFineRadiiOracle) {
    // indicator of a small cylinder: r^{-4} |Q_r cap Q_s| peaks near r = s
    const Grid g = morrey_grid();
    const ParabolicCylinder S{g.time(16), g.position(8, 8, 8), 0.16};
    FieldSnapshot X(g, 1);
    for (int n = 0; n < g.nt; ++n)
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    if (std::abs(g.time(n) - S.t0) < S.r * S.r && (g.position(i, j, k) - S.x0).norm() < S.r)
                        X.at(n, 0, k, j, i) = 1.0;
    // fine list: every rung of the coarse ladder plus a 10x denser set
    const std::vector<double> ladder = MorreyParams::geometric_radii(g, 0.3, 1.25);
    std::vector<double> fine = ladder;
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
        for (int s = 1; s < 10; ++s) fine.push_back(ladder[i] + s * (ladder[i + 1] - ladder[i]) / 10.0);
    std::sort(fine.begin(), fine.end(), std::greater<>());
    const double oracle = brute_morrey(X, 2.0, 10.0, fine, 1);
    EXPECT_NEAR(morrey_norm(X, params(2.0, 10.0, fine, 1)).value, oracle, 1e-9 * oracle);
    // the coarse ladder is a lower bound with a modest gap
    const double coarse = morrey_norm(X, params(2.0, 10.0, ladder, 1)).value;
    RecordProperty("coarse_over_fine", std::to_string(coarse / oracle));
    EXPECT_LE(coarse, oracle * (1 + 1e-12));
    EXPECT_GE(coarse, 0.85 * oracle);
}

TEST(Morrey, HomogeneityAndSubadditivity) {
    const Grid g = morrey_grid();
    const MorreyParams mp = params(3, 6, {0.3, 0.15});
    for (int s = 0; s < 3; ++s) {
        const FieldSnapshot X = random_modes(g, 3, 2, 200 + s), Y = random_modes(g, 3, 2, 300 + s);
        const double mx = morrey_norm(X, mp).value;
        for (double c : {-2.5, 0.3}) {
            FieldSnapshot cX = X;
            cX.values() *= c;
            EXPECT_NEAR(morrey_norm(cX, mp).value, std::abs(c) * mx, 1e-12 * std::abs(c) * mx);
        }
        const double sum = morrey_norm(combine(1.0, X, 1.0, Y), mp).value;
        EXPECT_LE(sum, mx + morrey_norm(Y, mp).value + 1e-12);
    }
}

TEST(Morrey, LocalComparisonWithLebesgue) {
    // ||1_Q X||_{M^{3,q}} <= C ||X||_{L^q(Q)}, C = (|Q_r| / r^5)^{(1 - 3/q)/3} by Hölder
    const Grid g = morrey_grid();
    const double q = 6.0;
    const ParabolicCylinder Q{g.time(16), g.position(8, 8, 8), 0.3};
    const double C = std::pow(8.0 * kPi / 3.0, (1.0 - 3.0 / q) / 3.0);
    for (int s = 0; s < 3; ++s) {
        const FieldSnapshot X = random_modes(g, 3, 3, 400 + s);
        const double m = morrey_norm(X, params(3, q, {0.3, 0.2, 0.13}), Q).value;
        const double l = lebesgue_cylinder_norm(X, Q, q, q);
        EXPECT_LE(m, 1.1 * C * l);
        EXPECT_GT(m, 0.0);
    }
}

TEST(Holder, ConstantIsZero) {
    const Grid g = Grid::cube(8, 1.0, 8, 0.02);
    FieldSnapshot X(g, 1);
    X.values().setConstant(3.0);
    EXPECT_EQ(holder_seminorm(X, {}).value, 0.0);
    HolderParams bad;
    bad.alpha = 1.0;
    EXPECT_THROW(holder_seminorm(X, bad), ValidationError);
}

TEST(Holder, AllPairsOracle) {
    const Grid g = Grid::cube(8, 1.0, 8, 0.02);
    const FieldSnapshot X = sample(g, 1, [](double, const Eigen::Vector3d& x) { return x[0]; });
    HolderParams hp;
    hp.alpha = 0.7;
    hp.pair_budget = 10000000;
    const HolderResult r = holder_seminorm(X, hp);
    ASSERT_TRUE(r.exhaustive);
    double oracle = 0.0;
    for (int t1 = 0; t1 < g.nt; ++t1)
        for (int t2 = 0; t2 < g.nt; ++t2)
            for (int i1 = 0; i1 < g.nx; ++i1)
                for (int i2 = 0; i2 < g.nx; ++i2)
                    for (int dj = 0; dj < g.ny; ++dj)
                        for (int dk = 0; dk < g.nz; ++dk) {
                            const double dx = (i1 - i2) * g.h(0), dy = dj * g.h(1), dz = dk * g.h(2);
                            const double d = std::sqrt(std::abs(t1 - t2) * g.dt) + std::sqrt(dx * dx + dy * dy + dz * dz);
                            if (d > 0) oracle = std::max(oracle, std::abs(dx) / std::pow(d, hp.alpha));
                        }
    EXPECT_NEAR(r.value, oracle, 1e-12);
    // the sampled mode never exceeds the exhaustive value and sees the near pairs
    hp.pair_budget = 20000;
    const HolderResult s = holder_seminorm(X, hp);
    EXPECT_FALSE(s.exhaustive);
    EXPECT_LE(s.value, r.value + 1e-15);
    EXPECT_GE(s.value, std::pow(g.h(0), 1.0 - hp.alpha));
}

TEST(Holder, ParabolicScaling) {
    // X_lambda(t, x) = F(t / lambda^2, x / lambda) sampled on the scaled grid
    auto F = [](double t, const Eigen::Vector3d& x) { return std::sin(3 * x[0] + x[1]) * std::cos(2 * t) + x[2] * x[2]; };
    const double lambda = 0.5, alpha = 0.4;
    const Grid g1 = Grid::cube(8, 1.0, 8, 0.02);
    const Grid g2 = Grid::cube(8, lambda, 8, 0.02 * lambda * lambda);
    const auto X1 = sample(g1, 1, F);
    const auto X2 = sample(g2, 1, [&](double t, const Eigen::Vector3d& x) { return F(t / (lambda * lambda), x / lambda); });
    HolderParams hp;
    hp.alpha = alpha;
    hp.pair_budget = 10000000;
    const double a = holder_seminorm(X1, hp).value, b = holder_seminorm(X2, hp).value;
    EXPECT_NEAR(b / a, std::pow(lambda, -alpha), 0.02 * std::pow(lambda, -alpha));
    FieldSnapshot cX = X1;
    cX.values() *= -4.0;
    EXPECT_NEAR(holder_seminorm(cX, hp).value, 4.0 * a, 1e-12 * a);
}

TEST(Lebesgue, UnitFieldMeasuresTheCylinder) {
    const Grid g = Grid::cube(32, 1.0, 41, 0.005);
    const ParabolicCylinder Q{g.time(20), g.position(16, 16, 16), 0.3};
    FieldSnapshot X(g, 1);
    X.values().setOnes();
    const double measure = 2.0 * Q.r * Q.r * 4.0 / 3.0 * kPi * std::pow(Q.r, 3);
    EXPECT_NEAR(lebesgue_cylinder_norm(X, Q, 2, 2), std::sqrt(measure), 0.03 * std::sqrt(measure));
    EXPECT_NEAR(lebesgue_cylinder_norm(X, Q, kInfExponent, kInfExponent), 1.0, 0.0);
}

TEST(Lebesgue, SymbolicOracle) {
    // X = e^{-t} |x - x0|^2: sup_t ||X||_{L^2(B_r)} = e^{-(t0 - r^2)} sqrt(4 pi r^7 / 7)
    const Grid g = Grid::cube(48, 1.0, 81, 0.0025);
    const ParabolicCylinder Q{g.time(40), g.position(24, 24, 24), 0.3};
    const auto X = sample(g, 1, [&](double t, const Eigen::Vector3d& x) { return std::exp(-t) * (x - Q.x0).squaredNorm(); });
    const double want = std::exp(-(Q.t0 - Q.r * Q.r)) * std::sqrt(4.0 * kPi * std::pow(Q.r, 7) / 7.0);
    EXPECT_NEAR(lebesgue_cylinder_norm(X, Q, kInfExponent, 2.0), want, 0.01 * want);
}

TEST(Lebesgue, MonotoneInTheCylinder) {
    const Grid g = Grid::cube(16, 1.0, 33, 0.01);
    const FieldSnapshot X = random_modes(g, 3, 2, 9);
    double prev = 0.0;
    for (double r : {0.13, 0.2, 0.3}) {
        const double v = lebesgue_cylinder_norm(X, {g.time(16), g.position(8, 8, 8), r}, 1.5, 1.5);
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_THROW(lebesgue_cylinder_norm(X, {g.time(16), g.position(2, 8, 8), 0.3}, 2, 2), DomainError);
}
