#pragma once

#include "mhdlab/grid.hpp"
#include "mhdlab/spectral.hpp"

#include <string>
#include <vector>

namespace mhdlab {

enum class BumpProfile { exponential, polynomial };

BumpProfile parse_bump_profile(const std::string& name);
std::string to_string(BumpProfile p);
// Unnormalized radial bump on [0, 1): exp(-1/(1-s^2)) or (1-s^2)^4.
double bump(BumpProfile p, double s);

struct MollifierLadder {
    BumpProfile theta = BumpProfile::exponential;
    BumpProfile phi = BumpProfile::exponential;
    std::vector<double> alphas;   // time widths, decreasing
    std::vector<double> epsilons; // space widths, decreasing

    // Strictly decreasing geometric ladders with every alpha >= 2 dt and epsilon >= 2 h.
    void validate(const Grid& g) const;
    double alpha_ratio() const;
    double epsilon_ratio() const;
};

// Time weights w_n, n = -m..m, summing to one: the continuum convolution with theta_alpha of the
// piecewise quintic interpolant through the samples. Moments up to order 5 are exact.
std::vector<double> time_weights(BumpProfile p, double alpha, double dt);

// Fourier transform of the radial bump phi(|x|) at |k| = kappa, normalized to 1 at kappa = 0.
double kernel_symbol(BumpProfile p, double kappa);

// Multiplier of the continuum convolution with phi_eps acting on the trigonometric interpolant:
// kernel_symbol(eps |k|) per spectral entry (true wavenumbers, Nyquist included).
std::vector<double> space_kernel_symbol(const SpectralWorkspace& ws, BumpProfile p, double eps);

// Space-time convolution with theta_alpha(t) phi_eps(x). alpha = 0 or eps = 0 skips that factor.
// The output keeps only slices whose full time window is sampled (nt - 2m slices).
FieldSnapshot mollify(const FieldSnapshot& X, double alpha, double eps, BumpProfile theta = BumpProfile::exponential,
                      BumpProfile phi = BumpProfile::exponential);

} // namespace mhdlab
