#pragma once

#include "mhdlab/grid.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace mhdlab {

struct MorreyParams {
    double p = 3.0, q = 6.0;
    std::vector<double> scan_radii; // strictly decreasing
    int center_stride = 1;

    void validate() const;
    // Geometric ladder from r_max down by `ratio` while r >= 2 cells.
    static std::vector<double> geometric_radii(const Grid& g, double r_max, double ratio = 2.0);
    // Largest r whose cylinder Q_r fits in the sampled time range (centered on the middle time).
    static double max_time_radius(const Grid& g);
};

struct MorreyResult {
    double value = 0.0;
    ParabolicCylinder argmax;
    std::size_t cylinders_scanned = 0;
};

// sup over scanned cylinders Q_r of (r^{-5(1-p/q)} int_{Q_r} |X|^p)^{1/p}; |X| is the Euclidean
// norm across components. Centers are grid points at the given stride whose cylinder sits inside
// the sampled domain. With `mask`, X is replaced by 1_mask X.
MorreyResult morrey_norm(const FieldSnapshot& X, const MorreyParams& params,
                         const std::optional<ParabolicCylinder>& mask = std::nullopt);

// For a non-negative scalar A: per slice and grid center x, the sum of A over the cells of
// B(x, r) (periodic FFT convolution, so it matches ball_points for balls inside the box).
// Layout (t, z, y, x); roundoff negatives are clamped to zero.
std::vector<double> ball_sums(const FieldSnapshot& A, double r);

struct HolderParams {
    double alpha = 0.5;
    std::size_t pair_budget = 2000000;
    std::uint64_t seed = 12345;

    void validate() const;
};

struct GridPoint {
    int t = 0, k = 0, j = 0, i = 0;
};

struct HolderResult {
    double value = 0.0;
    GridPoint a, b;
    std::size_t pairs = 0;
    bool exhaustive = false;
    int near_stride = 1;
};

// sup |X(t,x) - X(s,y)| / (|t-s|^{1/2} + |x-y|)^alpha. Exhaustive when all pairs fit in the
// budget; otherwise all pairs within parabolic distance 4 cells (base points strided to fit half
// the budget) plus a seeded stratified long-range sample.
HolderResult holder_seminorm(const FieldSnapshot& X, const HolderParams& params);

constexpr double kInfExponent = std::numeric_limits<double>::infinity();

// Mixed L^pt_t L^px_x norm over the cells of Q (midpoint rule); exponents may be infinite.
// With window_only, only the spatial ball must lie inside the domain.
double lebesgue_cylinder_norm(const FieldSnapshot& X, const ParabolicCylinder& Q, double pt, double px,
                              bool window_only = false);

} // namespace mhdlab
