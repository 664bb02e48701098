#pragma once

#include "mhdlab/grid.hpp"
#include "mhdlab/spectral.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>

namespace mhdlab::testing {

constexpr double kPi = 3.14159265358979323846;

inline std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

// Samples f(t, x) (double or Eigen::Vector3d) at every grid point.
template <class F>
FieldSnapshot sample(const Grid& g, int comps, F f) {
    FieldSnapshot out(g, comps);
    for (int n = 0; n < g.nt; ++n)
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const auto v = f(g.time(n), g.position(i, j, k));
                    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) {
                        out.at(n, 0, k, j, i) = v;
                    } else {
                        for (int c = 0; c < comps; ++c) out.at(n, c, k, j, i) = v[c];
                    }
                }
    return out;
}

// Sum of a few random Fourier modes with |m_axis| <= kmax per component; time dependence is a
// random smooth factor per mode so slices differ.
inline FieldSnapshot random_modes(const Grid& g, int comps, int kmax, std::uint64_t seed, int modes = 6) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> m(-kmax, kmax);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    struct Mode {
        Eigen::Vector3d k;
        double amp, phase, rate;
        int comp;
    };
    std::vector<Mode> ms;
    for (int c = 0; c < comps; ++c)
        for (int q = 0; q < modes; ++q) {
            Eigen::Vector3d k;
            for (int a = 0; a < 3; ++a) k[a] = 2.0 * kPi * m(rng) / g.box_length[a];
            ms.push_back({k, u(rng), kPi * u(rng), u(rng), c});
        }
    FieldSnapshot out(g, comps);
    for (int n = 0; n < g.nt; ++n) {
        const double t = g.time(n);
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const Eigen::Vector3d x = g.position(i, j, k);
                    for (const Mode& md : ms)
                        out.at(n, md.comp, k, j, i) += md.amp * std::cos(md.k.dot(x) + md.phase + md.rate * t);
                }
    }
    return out;
}

inline FieldSnapshot random_solenoidal(const Grid& g, int kmax, std::uint64_t seed, int modes = 6) {
    return leray_project(random_modes(g, 3, kmax, seed, modes));
}

inline double max_diff(const FieldSnapshot& a, const FieldSnapshot& b) {
    return (a.values() - b.values()).abs().maxCoeff();
}

inline FieldSnapshot combine(double a, const FieldSnapshot& X, double b, const FieldSnapshot& Y) {
    FieldSnapshot out = X;
    out.values() = a * X.values() + b * Y.values();
    return out;
}

// Largest |X| (Euclidean over components) on the cells of Q that fall in the sampled window.
inline double max_on(const FieldSnapshot& X, const ParabolicCylinder& Q) {
    const CylinderCells c = restrict_cylinder_window(X.grid(), Q);
    double m = 0.0;
    for (int t : c.slices)
        for (std::size_t p : c.points) {
            double s = 0.0;
            for (int k = 0; k < X.components(); ++k) s += X.slice(t, k)[p] * X.slice(t, k)[p];
            m = std::max(m, std::sqrt(s));
        }
    return m;
}

} // namespace mhdlab::testing
