#include "mhdlab/elsasser.hpp"
#include "mhdlab/regularity.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mhdlab;
using namespace mhdlab::testing;
using Eigen::Vector3d;

namespace {

// u = curl(0, 0, W(R) psi(R)) with psi = log(R^2 + d^2) / 2 and W a radial window that is 1 on
// R < a and 0 beyond b. Inside the plateau |grad u|^2 averaged over spheres is
// (2/3) psi''^2 + (4/3) (psi'/R)^2.
struct Concentration {
    Vector3d x0;
    double d, a, b, amp;

    static double smooth_step(double s) { // 0 for s <= 0, 1 for s >= 1
        auto f = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
        return f(s) / (f(s) + f(1.0 - s));
    }
    double W(double R) const { return 1.0 - smooth_step((R - a) / (b - a)); }
    double dW(double R) const {
        const double e = 1e-6;
        return (W(R + e) - W(R - e)) / (2 * e);
    }
    Vector3d u(const Vector3d& x) const {
        const Vector3d y = x - x0;
        const double R = y.norm();
        if (R >= b) return Vector3d::Zero();
        const double psi = 0.5 * std::log(R * R + d * d), dpsi = R / (R * R + d * d);
        const double g = R > 0 ? (W(R) * dpsi + dW(R) * psi) / R : 0.0; // d/dR (W psi) / R
        return amp * Vector3d(g * y[1], -g * y[0], 0.0);
    }
    // continuum int over B_r of |grad u|^2, r < a
    double ball_energy(double r, int M) const {
        double s = 0.0;
        for (int i = 0; i < M; ++i) {
            const double R = (i + 0.5) * r / M;
            const double A = (d * d - R * R) / std::pow(R * R + d * d, 2), B = 1.0 / (R * R + d * d);
            s += 4 * kPi * R * R * (2.0 / 3.0 * A * A + 4.0 / 3.0 * B * B);
        }
        return amp * amp * s * r / M;
    }
};

Grid conc_grid() { return Grid::cube(32, 2.0 * kPi, 19, 0.08); }

CriterionParams conc_params(const Grid& g) {
    CriterionParams p;
    const double h = g.h(0);
    p.radii = {4 * h, 3 * h, 2 * h};
    p.window = 3;
    p.epsilon_star = 0.01;
    return p;
}

FieldSnapshot field_of(const Grid& g, const std::vector<Concentration>& cs) {
    return sample(g, 3, [&](double, const Vector3d& x) {
        Vector3d v = Vector3d::Zero();
        for (const Concentration& c : cs) v += c.u(x);
        return v;
    });
}

// slices |t_n - t| < r^2 times dt
double time_measure(const Grid& g, double t, double r) {
    double m = 0.0;
    for (int n = 0; n < g.nt; ++n)
        if (std::abs(g.time(n) - t) < r * r) m += g.dt;
    return m;
}

double fit_slope(const std::vector<double>& r, const std::vector<double>& G) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        mx += std::log(r[i]) / r.size();
        my += std::log(G[i]) / r.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        sxy += (std::log(r[i]) - mx) * (std::log(G[i]) - my);
        sxx += (std::log(r[i]) - mx) * (std::log(r[i]) - mx);
    }
    return sxy / sxx;
}

} // namespace

TEST(Criterion, ZeroFieldIsRegular) {
    const Grid g = conc_grid();
    const FieldSnapshot Z(g, 3);
    const auto v = gradient_density_scan(Z, Z, {{g.time(9), g.position(16, 16, 16)}}, conc_params(g));
    ASSERT_EQ(v.size(), 1u);
    for (double G : v[0].G) EXPECT_EQ(G, 0.0);
    EXPECT_EQ(v[0].verdict, Verdict::regular_candidate);
}

TEST(Criterion, SmoothFieldDecaysLikeR4) {
    const Grid g = Grid::cube(32, 1.0, 65, 0.002);
    const CriterionParams p = CriterionParams::defaults(g);
    ASSERT_EQ(p.radii.size(), 3u);
    const FieldSnapshot u = random_solenoidal(g, 3, 81), b = random_solenoidal(g, 3, 82);
    const auto v = gradient_density_scan(u, b, {{g.time(32), g.position(16, 16, 16)}}, p);
    RecordProperty("slope", std::to_string(v[0].slope));
    EXPECT_GE(v[0].slope, 3.5);
    for (double G : v[0].G) EXPECT_GE(G, 0.0);
}

TEST(Criterion, ScalingAndElsasserInvariance) {
    const Grid g = conc_grid();
    const FieldSnapshot u = random_solenoidal(g, 3, 83), b = random_solenoidal(g, 3, 84);
    const std::vector<SpaceTimePoint> pts{{g.time(9), g.position(16, 16, 16)}, {g.time(9), g.position(10, 20, 14)}};
    const CriterionParams p = conc_params(g);
    const auto base = gradient_density_scan(u, b, pts, p);
    FieldSnapshot lu = u, lb = b;
    lu.values() *= 3.0;
    lb.values() *= 3.0;
    const auto scaled = gradient_density_scan(lu, lb, pts, p);
    // (U, B) = ((u+b)/2, (u-b)/2): |grad u|^2 + |grad b|^2 = 2 (|grad U|^2 + |grad B|^2)
    const FieldSnapshot Z(g, 3);
    const auto ph = from_elsasser(u, b, Z, Z);
    const auto phys = gradient_density_scan(ph.U, ph.B, pts, p);
    const auto swapped = gradient_density_scan(b, u, pts, p);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t r = 0; r < p.radii.size(); ++r) {
            const double G = base[i].G[r];
            EXPECT_NEAR(scaled[i].G[r], 9.0 * G, 1e-12 * 9.0 * G);
            EXPECT_NEAR(2.0 * phys[i].G[r], G, 1e-12 * G);
            EXPECT_EQ(swapped[i].G[r], G);
        }
}

TEST(Criterion, ConcentrationMatchesFineQuadrature) {
    const Grid g = conc_grid();
    const double h = g.h(0);
    const Concentration c{g.position(16, 16, 16), 3 * h, 5 * h, 9 * h, 0.5};
    const FieldSnapshot u = field_of(g, {c}), Z(g, 3);
    const CriterionParams p = conc_params(g);
    const SpaceTimePoint pt{g.time(9), c.x0};
    const auto v = gradient_density_scan(u, Z, {pt}, p);
    std::vector<double> oracle;
    for (double r : p.radii) oracle.push_back(time_measure(g, pt.t, r) * c.ball_energy(r, 4000) / r);
    double sur = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        RecordProperty("G_over_oracle_" + std::to_string(i), std::to_string(v[0].G[i] / oracle[i]));
        EXPECT_NEAR(v[0].G[i], oracle[i], 0.15 * oracle[i]);
        sur = std::max(sur, oracle[i]);
    }
    EXPECT_GT(sur, 10 * p.epsilon_star);
    EXPECT_EQ(v[0].verdict, classify(sur, fit_slope(p.radii, oracle), p));
    // the same point reads as regular once eps* exceeds every G
    CriterionParams hi = p;
    hi.epsilon_star = 2.0 * sur;
    EXPECT_EQ(gradient_density_scan(u, Z, {pt}, hi)[0].verdict, Verdict::regular_candidate);
}

TEST(Criterion, RejectsPointsNearTheBoundary) {
    const Grid g = conc_grid();
    const FieldSnapshot Z(g, 3);
    EXPECT_THROW(gradient_density_scan(Z, Z, {{g.time(9), g.position(1, 16, 16)}}, conc_params(g)), DomainError);
    CriterionParams bad = conc_params(g);
    bad.radii = {3 * g.h(0), g.h(0)};
    EXPECT_THROW(bad.validate(g), ValidationError);
}

TEST(Criterion, VerdictMonotoneInThreshold) {
    const std::vector<double> stars{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    for (double sur : {0.0, 5e-4, 0.05, 3.0})
        for (double slope : {std::nan(""), 0.2, 1.0, 2.5, 4.0}) {
            bool seen_regular = false;
            for (double e : stars) {
                CriterionParams p;
                p.epsilon_star = e;
                const Verdict v = classify(sur, slope, p);
                if (seen_regular) EXPECT_NE(v, Verdict::irregular_candidate);
                seen_regular = seen_regular || v == Verdict::regular_candidate;
            }
        }
}

TEST(BoxCount, CoverCounts) {
    std::vector<SpaceTimePoint> pts;
    for (int i = 0; i < 5; ++i) pts.push_back({0.01 * i, Vector3d(0.05 * i, 0, 0)});
    EXPECT_EQ(parabolic_cover_count(pts, 0.25), 1u);
    EXPECT_EQ(parabolic_cover_count({}, 1.0), 0u);
    for (int i = 0; i < 5; ++i) pts.push_back({0.01 * i, Vector3d(2.0 + 0.05 * i, 0, 0)});
    EXPECT_EQ(parabolic_cover_count(pts, 0.25), 2u);
    EXPECT_EQ(parabolic_cover_count(pts, 1.5), 2u);
    EXPECT_EQ(parabolic_cover_count(pts, 2.5), 1u);
    // parabolic time scaling: same place, times 0.5 apart need s >= sqrt(0.5)
    const std::vector<SpaceTimePoint> tp{{0.0, Vector3d::Zero()}, {0.5, Vector3d::Zero()}};
    EXPECT_EQ(parabolic_cover_count(tp, 0.7), 2u);
    EXPECT_EQ(parabolic_cover_count(tp, 0.71), 1u);
}

TEST(BoxCount, SmoothFieldHasNoCandidates) {
    const Grid g = conc_grid();
    const FieldSnapshot u = random_solenoidal(g, 2, 85);
    FieldSnapshot small = u;
    small.values() *= 1e-3;
    const SingularSetReport r = singular_set_boxcount(small, small, conc_params(g), 2, 1);
    EXPECT_GT(r.points_scanned, 0u);
    EXPECT_TRUE(r.candidates.empty());
    for (const BoxCount& c : r.counts) EXPECT_EQ(c.count, 0u);
}

TEST(BoxCount, SeparatedConcentrations) {
    // space-time concentrations: curl(0, 0, exp(-|x - c|^2 / 2 s^2)) on the middle slice only, so
    // the time measure is the same for every radius and G ~ 1/r once the ball holds the core
    const Grid g = conc_grid();
    const double h = g.h(0), s = h;
    const int tc = 9;
    auto spikes = [&](const std::vector<Vector3d>& cs) {
        FieldSnapshot u(g, 3);
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    for (const Vector3d& c : cs) {
                        const Vector3d y = g.position(i, j, k) - c;
                        const double e = std::exp(-y.squaredNorm() / (2 * s * s)) / (s * s);
                        u.at(tc, 0, k, j, i) += -y[1] * e;
                        u.at(tc, 1, k, j, i) += y[0] * e;
                    }
        return u;
    };
    const Vector3d c1 = g.position(6, 16, 16), c2 = g.position(26, 16, 16);
    const FieldSnapshot Z(g, 3);
    const CriterionParams p = conc_params(g);

    const SingularSetReport one = singular_set_boxcount(spikes({c1}), Z, p, 1, 1);
    ASSERT_FALSE(one.candidates.empty());
    for (const SpaceTimePoint& q : one.candidates) EXPECT_LE((q.x - c1).norm(), 4 * h);
    for (const BoxCount& c : one.counts)
        if (c.scale >= 8 * h) EXPECT_EQ(c.count, 1u) << c.scale;

    const SingularSetReport two = singular_set_boxcount(spikes({c1, c2}), Z, p, 1, 1);
    const double sep = (c2 - c1).norm();
    bool saw_two = false;
    for (const BoxCount& c : two.counts) {
        if (c.scale >= 8 * h && c.scale < sep - 8 * h) {
            EXPECT_EQ(c.count, 2u) << c.scale;
            saw_two = true;
        }
        if (c.scale > sep + 8 * h) EXPECT_EQ(c.count, 1u) << c.scale;
    }
    EXPECT_TRUE(saw_two);
}

TEST(Serrin, ExponentValidation) {
    EXPECT_NO_THROW((SerrinExponents{3, 6, 3, 6}.validate()));
    EXPECT_THROW((SerrinExponents{2, 4, 2, 4}.validate()), ValidationError);
    EXPECT_THROW((SerrinExponents{3, 6, 4, 6}.validate()), ValidationError);
    EXPECT_THROW((SerrinExponents{3, 6, 3, 7}.validate()), ValidationError);
    EXPECT_THROW((SerrinExponents{2, 6, 2, 6}.validate()), ValidationError);
    EXPECT_THROW((SerrinExponents{7, 6, 3, 6}.validate()), ValidationError);
}

TEST(Serrin, BoundedFieldsSatisfyTheHypothesis) {
    const Grid g = Grid::cube(16, 1.0, 33, 0.01);
    const FieldSnapshot U = random_solenoidal(g, 2, 86), B = random_solenoidal(g, 2, 87);
    const ParabolicCylinder region{g.time(16), g.position(8, 8, 8), 0.3};
    for (const SerrinExponents& e : {SerrinExponents{3, 6, 3, 6}, SerrinExponents{4, 8, 3, 6}}) {
        const SerrinReport r = serrin_hypothesis_check(U, B, region, e);
        EXPECT_TRUE(r.ordering_ok);
        EXPECT_TRUE(r.hypothesis_satisfied);
        EXPECT_TRUE(std::isfinite(r.U_morrey.value) && r.U_morrey.value > 0);
        EXPECT_TRUE(std::isfinite(r.B_morrey.value) && r.B_morrey.value > 0);
        EXPECT_NEAR(r.U_conclusion, lebesgue_cylinder_norm(U, r.shrunk, e.q0, e.q0), 1e-12);
        EXPECT_NEAR(r.B_conclusion, lebesgue_cylinder_norm(B, r.shrunk, e.q1, e.q1), 1e-12);
        EXPECT_LE(r.shrunk.r, region.r);
    }
    EXPECT_THROW(serrin_hypothesis_check(U, B, region, {2, 4, 2, 4}), ValidationError);
}
