#pragma once

#include "mhdlab/grid.hpp"

#include <array>
#include <string>
#include <vector>

namespace mhdlab {

enum class CutoffProfile { quintic, smooth };

CutoffProfile parse_cutoff_profile(const std::string& name);
std::string to_string(CutoffProfile p);
// 0 for s <= 0, 1 for s >= 1, monotone in between.
double ramp(CutoffProfile p, double s);
// Number of continuous derivatives (-1 means C-infinity).
int smoothness_order(CutoffProfile p);

struct CutoffRadii {
    double rho0 = 0.0, rho3 = 0.0, rho2 = 0.0, rho1 = 0.0, rho = 0.0;

    // rho0 < rho3 < rho2 < rho1 < rho as fractions of rho (defaults 0.5, 0.6, 0.7, 0.8).
    static CutoffRadii from_fractions(double rho, double f0 = 0.5, double f3 = 0.6, double f2 = 0.7,
                                      double f1 = 0.8);
    void validate() const;
};

// psi = 1 on Q_rho1, supported in Q_rho; phi = 1 on Q_rho3, supported in Q_rho2. Both are a
// time profile in |t - t0| times a space profile in |x - x0|. The space profiles are sampled
// once; the time profiles are evaluated analytically at whatever slice times are requested.
struct CutoffLadder {
    double t0 = 0.0;
    Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
    CutoffRadii radii;
    CutoffProfile profile = CutoffProfile::smooth;
    FieldSnapshot psi_space; // one slice
    FieldSnapshot phi_space; // one slice

    double psi_time(double t) const;
    double phi_time(double t) const;
    double psi_value(double t, const Eigen::Vector3d& x) const;
    double phi_value(double t, const Eigen::Vector3d& x) const;

    // Full space-time samples on the given grid (spatial part must match psi_space).
    FieldSnapshot psi(const Grid& g) const;
    FieldSnapshot phi(const Grid& g) const;

    ParabolicCylinder cylinder(double r) const { return {t0, x0, r}; }
};

// Validates ordering and that B(x0, rho) sits inside the box with a one-cell margin. The time
// extent of Q_rho is not required to be sampled: slices outside the window simply never occur.
CutoffLadder build_cutoff(const Grid& g, double t0, const Eigen::Vector3d& x0, const CutoffRadii& radii,
                          CutoffProfile profile);

// Degenerate ladder with psi = phi = 1 everywhere.
CutoffLadder global_cutoff(const Grid& g);

// v = -(1/Lap) curl(psi curl X); rejects X with |div X| above div_tol.
FieldSnapshot harmonic_correction(const FieldSnapshot& X, const CutoffLadder& ladder, double div_tol = 1e-6);

struct Correctors {
    FieldSnapshot beta, gamma;
};
Correctors correctors(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                      const FieldSnapshot& h);

struct CompanionPressures {
    FieldSnapshot q1, q2, r1, r2;
    FieldSnapshot q() const;
    FieldSnapshot r() const;
};

CompanionPressures companion_pressures(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                                       const FieldSnapshot& h, const FieldSnapshot& beta,
                                       const FieldSnapshot& gamma, const CutoffLadder& ladder);

struct CompanionForces {
    FieldSnapshot k0, k1, k2, k3, l0, l1, l2, l3;
    // Near/far split of grad (1/Lap) div(psi A) with the second cut-off phi.
    FieldSnapshot k3_near, k3_far, l3_near, l3_far;
    FieldSnapshot k() const;
    FieldSnapshot l() const;
};

CompanionForces companion_forces(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                                 const FieldSnapshot& h, const FieldSnapshot& beta, const FieldSnapshot& gamma,
                                 const FieldSnapshot& f, const FieldSnapshot& g, const CutoffLadder& ladder);

struct CompanionSystem {
    FieldSnapshot v, h, beta, gamma;
    CompanionPressures pressures;
    CompanionForces forces;
};

CompanionSystem companion_system(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                                 const FieldSnapshot& g, const CutoffLadder& ladder);

// Totals of the companion system at one slice, computed without storing the parts.
struct CompanionSlice {
    std::array<std::vector<double>, 3> v, h, k, l;
    std::vector<double> q, r;
};
CompanionSlice companion_at(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                            const FieldSnapshot& g, const CutoffLadder& ladder, int t, bool with_sources = true);

// Residuals of dt v - Lap v + (h.grad)v + grad q - k and the h-equation on interior slices
// (central time differences; output has nt - 2 slices starting at the second input slice).
struct CompanionResidual {
    FieldSnapshot rv, rh;
};
CompanionResidual companion_residual(const CompanionSystem& s);

} // namespace mhdlab
