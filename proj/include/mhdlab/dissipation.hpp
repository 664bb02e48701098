#pragma once

#include "mhdlab/grid.hpp"
#include "mhdlab/localization.hpp"
#include "mhdlab/mollifier.hpp"

#include <limits>
#include <vector>

namespace mhdlab {

// chi(t,x) = b(|x - xc| / radius) b(|t - tc| / half_width) with b(s) = (1 - s^2)^3 on |s| < 1.
struct TestFunction {
    double tc = 0.0;
    Eigen::Vector3d xc = Eigen::Vector3d::Zero();
    double radius = 0.0;
    double half_width = 0.0;

    double space(const Eigen::Vector3d& x) const;
    double time(double t) const;
};

double test_bump(double s);

struct TestBank {
    std::vector<TestFunction> items;

    // Centered bump of radius 0.75 r and half-width 0.5 r^2 on Q = Q_r(t0, x0), its six spatial
    // translates by r/4 and two time translates by r^2/4; all supports stay inside Q.
    static TestBank lattice(const ParabolicCylinder& Q);
    void validate() const;
};

// Sum over slices 1..nt-2 and all cells of F chi dt h^3.
double pair(const FieldSnapshot& F, const TestFunction& chi);

// The four quantities of the commutator lemma, evaluated per slice with spectral convolutions:
// every y-integral against grad theta_eps reduces to a derivative of an eps-mollified product.
struct NRSTFields {
    FieldSnapshot N, R, S, T;
};
NRSTFields nrst(const FieldSnapshot& X, const FieldSnapshot& Y, const FieldSnapshot& Z, double eps,
                BumpProfile profile = BumpProfile::exponential);

// int grad theta_eps(y) . (X(x-y) - X(x)) dy, which equals div(X_eps).
FieldSnapshot increment_flux(const FieldSnapshot& X, double eps, BumpProfile profile = BumpProfile::exponential);

struct MuEta {
    FieldSnapshot mu, eta;
};
// mu = N(u,b,b) + N(b,u,u), eta = N(v,h,h) + N(h,v,v).
MuEta mu_eta(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v, const FieldSnapshot& h,
             double eps, BumpProfile profile = BumpProfile::exponential);

// Pairings of the regularized energy identity over an (alpha, eps) ladder. Indexing:
// pressure/residual at [(a * n_eps + e) * n_tests + j], mu/eta at [e * n_tests + j].
struct DefectTable {
    std::vector<double> alphas, epsilons;
    std::size_t n_tests = 0;
    std::vector<double> pressure; // <div(P_ae (u_ae + b_ae)), chi>
    std::vector<double> residual; // identity residual paired with chi
    std::vector<double> mu, eta;  // eta empty without a companion cut-off

    double P(std::size_t a, std::size_t e, std::size_t j) const {
        return pressure[(a * epsilons.size() + e) * n_tests + j];
    }
    double Res(std::size_t a, std::size_t e, std::size_t j) const {
        return residual[(a * epsilons.size() + e) * n_tests + j];
    }
};

struct Extrapolation {
    double value = 0.0;
    double error = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Richardson tableau on values ordered coarse to fine with a fixed step ratio; assumed orders
// p, p+2, ... The error is the last extrapolation increment; `converged` means successive raw
// differences shrink.
Extrapolation richardson(const std::vector<double>& coarse_to_fine, double ratio, double order = 2.0);

struct BalanceOptions {
    // Relative discrete MHD residual allowed before the data is rejected.
    double residual_tol = 1e-2;
    bool waive_residual_check = false;
    // When set, the companion fields are rebuilt per slice and eta_eps is paired too.
    const CutoffLadder* companion = nullptr;
};

struct BalanceScan {
    DefectTable table;
    // per test function
    std::vector<double> dE2, dE4;    // <dt(|u|^2+|b|^2), chi>, 2nd and 4th order in time
    std::vector<double> lapE;        // <Lap(|u|^2+|b|^2), chi>
    std::vector<double> grad2;       // <|grad u|^2 + |grad b|^2, chi>
    std::vector<double> cubic;       // <div(|u|^2 b + |b|^2 u), chi>
    std::vector<double> work;        // <f.u + g.b, chi>
    std::vector<double> pflux;       // <div(P(u+b)), chi> without mollification
    std::vector<double> resid_scale; // 2 <|u||r_u| + |b||r_b|, chi>
    std::vector<double> companion_balance; // right side of the (v,h) local balance, if companion
    double relative_residual = 0.0;
};

BalanceScan balance_scan(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                         const FieldSnapshot& f, const FieldSnapshot& g, const MollifierLadder& ladder,
                         const TestBank& bank, const BalanceOptions& opt = {});

DefectTable energy_balance_defect(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                                  const FieldSnapshot& f, const FieldSnapshot& g, const MollifierLadder& ladder,
                                  const TestBank& bank, const BalanceOptions& opt = {});

struct PressureLimit {
    std::vector<double> value, error;        // per test function
    std::vector<double> alpha_limit;         // [e * n_tests + j]
    std::vector<double> alpha_error;         // [e * n_tests + j]
    std::vector<double> joint, joint_diff;   // diagonal-path diagnostic
    std::vector<bool> converged;
};

PressureLimit pressure_defect_limit(const DefectTable& table, double alpha_ratio, double epsilon_ratio);
PressureLimit pressure_defect_limit(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                                    const MollifierLadder& ladder, const TestBank& bank);

struct LambdaOptions {
    // NaN: 10 x the residual-induced pairing scale of the data itself.
    double tol_sign = std::numeric_limits<double>::quiet_NaN();
    double residual_tol = 1e-2;
    bool waive_residual_check = false;
};

struct LambdaReport {
    BalanceScan scan;
    PressureLimit pressure;
    std::vector<double> direct, direct_error;   // route (i)
    std::vector<double> via_eta, via_eta_error; // route (ii)
    std::vector<bool> routes_agree;
    std::vector<double> smooth_reference;       // same assembly with the unmollified pressure flux
    double tol_sign = 0.0;
    bool dissipative = false;
    double min_value = 0.0;
    double min_margin = 0.0; // min_value + tol_sign
};

LambdaReport lambda_assemble(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                             const FieldSnapshot& f, const FieldSnapshot& g, const CutoffLadder& cutoff,
                             const MollifierLadder& ladder, const TestBank& bank, const LambdaOptions& opt = {});

} // namespace mhdlab
