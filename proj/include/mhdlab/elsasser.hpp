#pragma once

#include "mhdlab/grid.hpp"

namespace mhdlab {

struct ElsasserFields {
    FieldSnapshot u, b, f, g;
};

struct PhysicalFields {
    FieldSnapshot U, B, F, G;
};

struct ElsasserState {
    FieldSnapshot u, b, P, f, g;
};

// u = U+B, b = U-B, f = F+G, g = F-G.
ElsasserFields to_elsasser(const FieldSnapshot& U, const FieldSnapshot& B, const FieldSnapshot& F,
                           const FieldSnapshot& G);
// U = (u+b)/2, B = (u-b)/2, F = (f+g)/2, G = (f-g)/2.
PhysicalFields from_elsasser(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                             const FieldSnapshot& g);

// Largest |div X| over all slices.
double max_divergence(const FieldSnapshot& X);

// P = -(1/Lap) sum_ij d_i d_j (u_i b_j), products dealiased, zero mean per slice.
// Rejects inputs whose divergence exceeds div_tol.
FieldSnapshot solve_pressure(const FieldSnapshot& u, const FieldSnapshot& b, double div_tol = 1e-6);

// max |Lap P + sum_ij d_i d_j (u_i b_j)| with the same dealiased products.
double pressure_residual(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P);

} // namespace mhdlab
