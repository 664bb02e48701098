#pragma once

#include "mhdlab/grid.hpp"

#include <complex>
#include <vector>

namespace mhdlab {

using cplx = std::complex<double>;
using SpecArray = std::vector<cplx>;

// r2c transform plans plus wavenumber tables for one spatial grid. Spectral index
// s = (k*ny + j)*(nx/2+1) + i. Derivative wavenumbers have the Nyquist entry zeroed, and the
// Laplacian symbol is built from the same vectors so div(grad) == laplacian exactly.
class SpectralWorkspace {
public:
    explicit SpectralWorkspace(const Grid& g);
    ~SpectralWorkspace();
    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    const Grid& grid() const { return grid_; }
    std::size_t real_size() const { return grid_.slice_size(); }
    std::size_t spec_size() const { return spec_size_; }
    int nxh() const { return grid_.nx / 2 + 1; }

    void forward(const double* in, cplx* out) const;
    // Normalized inverse; the input is left untouched.
    void inverse(const cplx* in, double* out) const;

    SpecArray forward(const double* in) const;

    const std::vector<double>& k(int axis) const { return k_[axis]; }
    const std::vector<double>& k2() const { return k2_; }
    bool keep(std::size_t s) const { return mask_[s] != 0; }
    // Multiplicity of a half-spectrum entry in the full spectrum (1 or 2).
    double weight(std::size_t s) const { return weight_[s]; }
    // Integer mode numbers per axis, for tests.
    std::array<int, 3> mode(std::size_t s) const;

    void dealias(SpecArray& a) const;

private:
    Grid grid_;
    std::size_t spec_size_ = 0;
    void* plan_fwd_ = nullptr;
    void* plan_inv_ = nullptr;
    std::array<std::vector<double>, 3> k_;
    std::vector<double> k2_;
    std::vector<unsigned char> mask_;
    std::vector<double> weight_;
};

// Shared, lazily built workspace for a spatial grid (plans are created under a lock).
const SpectralWorkspace& workspace_for(const Grid& g);

// Slice-level spectral helpers.
namespace spec {
void derivative(const SpectralWorkspace& ws, const cplx* f, int axis, cplx* out);
void laplacian(const SpectralWorkspace& ws, const cplx* f, cplx* out);
void inverse_laplacian(const SpectralWorkspace& ws, const cplx* f, cplx* out);
void curl(const SpectralWorkspace& ws, const SpecArray (&x)[3], SpecArray (&out)[3]);
void divergence(const SpectralWorkspace& ws, const SpecArray (&x)[3], SpecArray& out);
void leray(const SpectralWorkspace& ws, SpecArray (&x)[3]);

// Physical-space helpers for one slice of a 3-vector field.
void gradient_phys(const SpectralWorkspace& ws, const double* f, double* gx, double* gy, double* gz);
// out_c = sum_j a_j d_j b_c, products dealiased when requested.
void advect_phys(const SpectralWorkspace& ws, const double* const a[3], const double* const b[3],
                 double* const out[3], bool dealias);
} // namespace spec

// Field-level operators, evaluated per time slice.
FieldSnapshot gradient(const FieldSnapshot& f);
FieldSnapshot partial(const FieldSnapshot& f, int axis);
FieldSnapshot curl(const FieldSnapshot& X);
FieldSnapshot divergence(const FieldSnapshot& X);
FieldSnapshot laplacian(const FieldSnapshot& X);
FieldSnapshot inverse_laplacian(const FieldSnapshot& X);
FieldSnapshot leray_project(const FieldSnapshot& X);
FieldSnapshot dealias(const FieldSnapshot& X);

// (a.grad) b with the product dealiased.
FieldSnapshot advect(const FieldSnapshot& a, const FieldSnapshot& b);
// Pointwise products.
FieldSnapshot dot(const FieldSnapshot& a, const FieldSnapshot& b);
FieldSnapshot scale_by(const FieldSnapshot& s, const FieldSnapshot& X);
// Sum over i,j of |d_j X_i|^2 (or |d_j X|^2 for scalars).
FieldSnapshot gradient_energy(const FieldSnapshot& X);

// Second-order central difference in time on interior slices (nt - 2 output slices).
FieldSnapshot time_derivative(const FieldSnapshot& X);
// Fourth-order central difference (nt - 4 output slices).
FieldSnapshot time_derivative4(const FieldSnapshot& X);

double max_abs(const FieldSnapshot& X);
// Physical and spectral sums of squares of one slice component, each times the cell volume.
double l2_squared_physical(const FieldSnapshot& X, int t, int c);
double l2_squared_spectral(const FieldSnapshot& X, int t, int c);

} // namespace mhdlab
