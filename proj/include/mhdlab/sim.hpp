#pragma once

#include "mhdlab/elsasser.hpp"
#include "mhdlab/grid.hpp"
#include "mhdlab/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mhdlab {

// Exact tuples (u, b, P, f, g) on the sampled grid. P solves the pressure equation; f and g
// are defined so that dt u = Lap u - (b.grad)u - grad P + f holds (and symmetrically for b)
// with the analytic time derivative and exact spatial operators on the band-limited samples.
//   taylor-green : u = b = A e^{-2t} (sin x cos y, -cos x sin y, 0), f = g = 0 analytically
//   abc-drift    : u = A e^{-t} ABC(x), b = A e^{-t} ABC(x - c t) with c = (0.3, 0.2, 0.1)
//   product-modes: u = A cos t (sin y sin 2z, sin x sin z, sin 2x sin y),
//                  b = A sin(t + 1/2) (cos 2y cos z, cos z cos x, cos x cos 2y)
// Coordinates are scaled by 2 pi / L on a box of side L.
ElsasserState manufactured_solution(const std::string& name, const Grid& g, double amplitude = 1.0);
const std::vector<std::string>& manufactured_names();

struct MhdResidual {
    double max_u = 0.0, max_b = 0.0; // max |residual| over interior slices
    double scale = 0.0;              // max of the individual term magnitudes
    double relative() const { return scale > 0.0 ? std::max(max_u, max_b) / scale : 0.0; }
};

// Discrete residual of both Elsasser equations with a central time difference of the given
// order (2 or 4) and pointwise products.
MhdResidual mhd_residual(const ElsasserState& s, int time_order = 4);

struct SimConfig {
    Grid grid;                      // recorded grid: nt output slices spaced by dt
    int substeps = 1;               // integrator steps per recorded interval
    std::string initial = "taylor-green"; // taylor-green | abc | random
    double amplitude = 1.0;
    int random_kmax = 3;
    bool aligned = false;           // start with b = u
    std::string forcing = "none";   // none | abc (steady, divergence-free, f = g)
    double forcing_amplitude = 0.0;
    double cfl = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
    double step_dt() const { return grid.dt / substeps; }
};

class CflError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Pseudo-spectral Elsasser solver: RK4 with an integrating factor for the Laplacian, 2/3
// dealiased cross-advection and Leray projection of every stage.
class Simulation {
public:
    explicit Simulation(const SimConfig& cfg);

    const SimConfig& config() const { return cfg_; }
    double time() const { return time_; }

    // Throws CflError (state untouched) when dt max(|u|, |b|) / h exceeds cfl.
    void step(double dt);
    void set_state(const FieldSnapshot& u, const FieldSnapshot& b, int slice = 0);

    // Real-space samples of the current Elsasser state (and forcing), one slice each.
    FieldSnapshot u() const;
    FieldSnapshot b() const;
    FieldSnapshot f() const;
    FieldSnapshot g() const;

    double energy() const;          // 1/2 int |u|^2 + |b|^2
    double dissipation() const;     // int |grad u|^2 + |grad b|^2
    double work() const;            // int f.u + g.b
    double max_speed() const;
    double cfl_number(double dt) const;

private:
    void rhs(const SpecArray (&u)[3], const SpecArray (&b)[3], SpecArray (&du)[3], SpecArray (&db)[3]) const;
    FieldSnapshot to_field(const SpecArray (&x)[3], const char* name) const;

    SimConfig cfg_;
    Grid space_;
    const SpectralWorkspace* ws_ = nullptr;
    SpecArray u_[3], b_[3], f_[3], g_[3];
    double time_ = 0.0;
};

// Runs the simulation over cfg.grid.nt recorded slices (substeps integrator steps between
// records) and returns (u, b, P, f, g) with P from solve_pressure per slice.
ElsasserState record(Simulation& sim, int stride);
ElsasserState simulate(const SimConfig& cfg);

} // namespace mhdlab
