#pragma once

#include "mhdlab/grid.hpp"
#include "mhdlab/norms.hpp"

#include <string>
#include <vector>

namespace mhdlab {

enum class Verdict { regular_candidate, irregular_candidate, inconclusive };
std::string to_string(Verdict v);

struct CriterionParams {
    double epsilon_star = 0.01;
    std::vector<double> radii; // strictly decreasing, smallest >= 2 cells
    int window = 3;            // number of smallest rungs the surrogate looks at
    // Above eps*, a point is irregular when G does not decay faster than r^this as r -> 0.
    double irregular_slope = 1.0;

    void validate(const Grid& g) const;
    // Radii 8h, 4h, 2h when cylinders of radius 8h centered on the middle slice fit in the sampled
    // time range; otherwise the ratio shrinks until they do (a single rung 2h if it must).
    static CriterionParams defaults(const Grid& g);
};

struct SpaceTimePoint {
    double t = 0.0;
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
};

struct PointVerdict {
    SpaceTimePoint point;
    std::vector<double> radii, G;
    double surrogate = 0.0; // max of G over the window
    double slope = 0.0;     // log-log least squares over the window; NaN if some G <= 0
    Verdict verdict = Verdict::inconclusive;
};

// |grad u|^2 + |grad b|^2 with spectral gradients.
FieldSnapshot gradient_density(const FieldSnapshot& u, const FieldSnapshot& b);

// G(r) = (1/r) * midpoint sum of |grad u|^2 + |grad b|^2 over Q_r(point).
std::vector<PointVerdict> gradient_density_scan(const FieldSnapshot& u, const FieldSnapshot& b,
                                                const std::vector<SpaceTimePoint>& points,
                                                const CriterionParams& params);

// Verdict rule shared by both scans.
Verdict classify(double surrogate, double slope, const CriterionParams& params);

struct BoxCount {
    double scale = 0.0;
    std::size_t count = 0;
};

struct SingularSetReport {
    std::vector<SpaceTimePoint> candidates;
    std::size_t points_scanned = 0;
    std::vector<BoxCount> counts; // dyadic scales 2h, 4h, ...
    double slope = 0.0;           // -d log N / d log s over scales with N > 0; NaN if undefined
};

// Scans every grid point (at the given strides) whose largest cylinder fits, flags the
// irregular candidates and covers them greedily by parabolic balls
// {|x - y| <= s, |t - t'| <= s^2} centered at candidates.
SingularSetReport singular_set_boxcount(const FieldSnapshot& u, const FieldSnapshot& b,
                                        const CriterionParams& params, int space_stride = 2,
                                        int time_stride = 1);

// Greedy cover count used above, exposed for tests.
std::size_t parabolic_cover_count(const std::vector<SpaceTimePoint>& pts, double s);

struct SerrinExponents {
    double p0 = 3.0, q0 = 6.0, p1 = 3.0, q1 = 6.0;
    // 2 < p <= q, 5 < q < inf for both pairs, p1 <= p0, q1 <= q0.
    void validate() const;
};

struct SerrinReport {
    SerrinExponents exponents;
    bool ordering_ok = false;
    ParabolicCylinder region, shrunk;
    MorreyResult U_morrey, B_morrey;
    bool hypothesis_satisfied = false; // both localized Morrey norms finite
    double U_conclusion = 0.0;         // ||U||_{L^q0} on the shrunk cylinder
    double B_conclusion = 0.0;         // ||B||_{L^q1} on the shrunk cylinder
};

// Morrey norms of 1_region U and 1_region B, scanned over radii from region.r down by 2.
SerrinReport serrin_hypothesis_check(const FieldSnapshot& U, const FieldSnapshot& B, const ParabolicCylinder& region,
                                     const SerrinExponents& exps, int center_stride = 2, double shrink = 0.5);

} // namespace mhdlab
