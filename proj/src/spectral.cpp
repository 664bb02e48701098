#include "mhdlab/spectral.hpp"
#include "mhdlab/parallel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace mhdlab {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

int threads() { return omp_get_max_threads(); }

SpectralWorkspace::SpectralWorkspace(const Grid& g) : grid_(g) {
    grid_.validate();
    const int nx = g.nx, ny = g.ny, nz = g.nz, nh = nxh();
    spec_size_ = std::size_t(nz) * ny * nh;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        double* r = fftw_alloc_real(real_size());
        fftw_complex* c = fftw_alloc_complex(spec_size_);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plan_fwd_ = fftw_plan_dft_r2c_3d(nz, ny, nx, r, c, flags);
        plan_inv_ = fftw_plan_dft_c2r_3d(nz, ny, nx, c, r, flags);
        fftw_free(r);
        fftw_free(c);
    }

    auto wave = [](int m, int n, double L) {
        if (2 * m == n) return 0.0;
        const int s = (m <= n / 2) ? m : m - n;
        return 2.0 * M_PI * s / L;
    };
    auto keep1 = [](int m, int n) {
        const int s = (m <= n / 2) ? m : m - n;
        return 3 * std::abs(s) <= n;
    };
    for (auto& v : k_) v.resize(spec_size_);
    k2_.resize(spec_size_);
    mask_.resize(spec_size_);
    weight_.resize(spec_size_);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nh; ++i) {
                const std::size_t s = (std::size_t(k) * ny + j) * nh + i;
                k_[0][s] = wave(i, nx, g.box_length[0]);
                k_[1][s] = wave(j, ny, g.box_length[1]);
                k_[2][s] = wave(k, nz, g.box_length[2]);
                k2_[s] = k_[0][s] * k_[0][s] + k_[1][s] * k_[1][s] + k_[2][s] * k_[2][s];
                mask_[s] = (keep1(i, nx) && keep1(j, ny) && keep1(k, nz)) ? 1 : 0;
                weight_[s] = (i == 0 || 2 * i == nx) ? 1.0 : 2.0;
            }
        }
    }
}

SpectralWorkspace::~SpectralWorkspace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

void SpectralWorkspace::forward(const double* in, cplx* out) const {
    // r2c plans never overwrite their input
    fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

SpecArray SpectralWorkspace::forward(const double* in) const {
    SpecArray out(spec_size_);
    forward(in, out.data());
    return out;
}

void SpectralWorkspace::inverse(const cplx* in, double* out) const {
    SpecArray tmp(in, in + spec_size_);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_), reinterpret_cast<fftw_complex*>(tmp.data()), out);
    const double norm = 1.0 / double(real_size());
    for (std::size_t p = 0; p < real_size(); ++p) out[p] *= norm;
}

std::array<int, 3> SpectralWorkspace::mode(std::size_t s) const {
    const int nh = nxh();
    const int i = int(s % nh);
    const int j = int((s / nh) % grid_.ny);
    const int k = int(s / (std::size_t(nh) * grid_.ny));
    auto sgn = [](int m, int n) { return (m <= n / 2) ? m : m - n; };
    return {i, sgn(j, grid_.ny), sgn(k, grid_.nz)};
}

void SpectralWorkspace::dealias(SpecArray& a) const {
    for (std::size_t s = 0; s < spec_size_; ++s)
        if (!mask_[s]) a[s] = 0.0;
}

const SpectralWorkspace& workspace_for(const Grid& g) {
    using Key = std::tuple<int, int, int, double, double, double>;
    static std::map<Key, std::unique_ptr<SpectralWorkspace>> cache;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    Key key{g.nx, g.ny, g.nz, g.box_length[0], g.box_length[1], g.box_length[2]};
    auto it = cache.find(key);
    if (it == cache.end()) {
        Grid space = g;
        space.nt = 1;
        space.dt = 1.0;
        space.t_start = 0.0;
        it = cache.emplace(key, std::make_unique<SpectralWorkspace>(space)).first;
    }
    return *it->second;
}

namespace spec {

void derivative(const SpectralWorkspace& ws, const cplx* f, int axis, cplx* out) {
    const auto& k = ws.k(axis);
    for (std::size_t s = 0; s < ws.spec_size(); ++s) out[s] = cplx(-k[s] * f[s].imag(), k[s] * f[s].real());
}

void laplacian(const SpectralWorkspace& ws, const cplx* f, cplx* out) {
    const auto& k2 = ws.k2();
    for (std::size_t s = 0; s < ws.spec_size(); ++s) out[s] = -k2[s] * f[s];
}

void inverse_laplacian(const SpectralWorkspace& ws, const cplx* f, cplx* out) {
    const auto& k2 = ws.k2();
    for (std::size_t s = 0; s < ws.spec_size(); ++s) out[s] = (k2[s] > 0.0) ? f[s] / (-k2[s]) : cplx(0.0);
}

void curl(const SpectralWorkspace& ws, const SpecArray (&x)[3], SpecArray (&out)[3]) {
    const auto &kx = ws.k(0), &ky = ws.k(1), &kz = ws.k(2);
    const cplx I(0.0, 1.0);
    for (auto& o : out) o.resize(ws.spec_size());
    for (std::size_t s = 0; s < ws.spec_size(); ++s) {
        const cplx a = x[0][s], b = x[1][s], c = x[2][s];
        out[0][s] = I * (ky[s] * c - kz[s] * b);
        out[1][s] = I * (kz[s] * a - kx[s] * c);
        out[2][s] = I * (kx[s] * b - ky[s] * a);
    }
}

void divergence(const SpectralWorkspace& ws, const SpecArray (&x)[3], SpecArray& out) {
    const auto &kx = ws.k(0), &ky = ws.k(1), &kz = ws.k(2);
    const cplx I(0.0, 1.0);
    out.resize(ws.spec_size());
    for (std::size_t s = 0; s < ws.spec_size(); ++s)
        out[s] = I * (kx[s] * x[0][s] + ky[s] * x[1][s] + kz[s] * x[2][s]);
}

void leray(const SpectralWorkspace& ws, SpecArray (&x)[3]) {
    const auto &kx = ws.k(0), &ky = ws.k(1), &kz = ws.k(2);
    const auto& k2 = ws.k2();
    for (std::size_t s = 0; s < ws.spec_size(); ++s) {
        if (k2[s] == 0.0) continue;
        const cplx kd = (kx[s] * x[0][s] + ky[s] * x[1][s] + kz[s] * x[2][s]) / k2[s];
        x[0][s] -= kx[s] * kd;
        x[1][s] -= ky[s] * kd;
        x[2][s] -= kz[s] * kd;
    }
}

void gradient_phys(const SpectralWorkspace& ws, const double* f, double* gx, double* gy, double* gz) {
    SpecArray fh = ws.forward(f), d(ws.spec_size());
    double* out[3] = {gx, gy, gz};
    for (int a = 0; a < 3; ++a) {
        derivative(ws, fh.data(), a, d.data());
        ws.inverse(d.data(), out[a]);
    }
}

void advect_phys(const SpectralWorkspace& ws, const double* const a[3], const double* const b[3],
                 double* const out[3], bool dealias) {
    const std::size_t n = ws.real_size();
    std::vector<double> g(n);
    SpecArray d(ws.spec_size());
    for (int c = 0; c < 3; ++c) {
        SpecArray bh = ws.forward(b[c]);
        std::fill(out[c], out[c] + n, 0.0);
        for (int j = 0; j < 3; ++j) {
            derivative(ws, bh.data(), j, d.data());
            ws.inverse(d.data(), g.data());
            for (std::size_t p = 0; p < n; ++p) out[c][p] += a[j][p] * g[p];
        }
        if (dealias) {
            SpecArray oh = ws.forward(out[c]);
            ws.dealias(oh);
            ws.inverse(oh.data(), out[c]);
        }
    }
}

} // namespace spec

namespace {

// Applies a spectral map from `in_comps` input components to `out_comps` outputs per slice.
template <class F>
FieldSnapshot map_spectral(const FieldSnapshot& X, int out_comps, const char* name, F&& op) {
    X.require_finite();
    const Grid& g = X.grid();
    const SpectralWorkspace& ws = workspace_for(g);
    FieldSnapshot out(g, out_comps, name);
    const int in_comps = X.components();
    for_each_index(g.nt, [&](int t) {
        std::vector<SpecArray> in(in_comps);
        for (int c = 0; c < in_comps; ++c) in[c] = ws.forward(X.slice(t, c));
        std::vector<SpecArray> res(out_comps, SpecArray(ws.spec_size()));
        op(ws, in, res);
        for (int c = 0; c < out_comps; ++c) ws.inverse(res[c].data(), out.slice(t, c));
    });
    return out;
}

template <class F>
FieldSnapshot map_pointwise(const FieldSnapshot& a, int out_comps, const char* name, F&& op) {
    FieldSnapshot out(a.grid(), out_comps, name);
    const std::size_t n = a.grid().slice_size();
    for_each_index(a.nt(), [&](int t) {
        for (std::size_t p = 0; p < n; ++p) op(t, p, out);
    });
    (void)n;
    return out;
}

} // namespace

FieldSnapshot gradient(const FieldSnapshot& f) {
    f.require_components(1, "gradient");
    return map_spectral(f, 3, "grad", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        for (int a = 0; a < 3; ++a) spec::derivative(ws, in[0].data(), a, out[a].data());
    });
}

FieldSnapshot partial(const FieldSnapshot& f, int axis) {
    return map_spectral(f, f.components(), "partial", [axis](const SpectralWorkspace& ws, auto& in, auto& out) {
        for (std::size_t c = 0; c < in.size(); ++c) spec::derivative(ws, in[c].data(), axis, out[c].data());
    });
}

FieldSnapshot curl(const FieldSnapshot& X) {
    X.require_components(3, "curl");
    return map_spectral(X, 3, "curl", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        SpecArray x[3] = {in[0], in[1], in[2]}, o[3];
        spec::curl(ws, x, o);
        for (int c = 0; c < 3; ++c) out[c] = std::move(o[c]);
    });
}

FieldSnapshot divergence(const FieldSnapshot& X) {
    X.require_components(3, "divergence");
    return map_spectral(X, 1, "div", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        SpecArray x[3] = {in[0], in[1], in[2]};
        spec::divergence(ws, x, out[0]);
    });
}

FieldSnapshot laplacian(const FieldSnapshot& X) {
    return map_spectral(X, X.components(), "lap", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        for (std::size_t c = 0; c < in.size(); ++c) spec::laplacian(ws, in[c].data(), out[c].data());
    });
}

FieldSnapshot inverse_laplacian(const FieldSnapshot& X) {
    return map_spectral(X, X.components(), "invlap", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        for (std::size_t c = 0; c < in.size(); ++c) spec::inverse_laplacian(ws, in[c].data(), out[c].data());
    });
}

FieldSnapshot leray_project(const FieldSnapshot& X) {
    X.require_components(3, "leray_project");
    return map_spectral(X, 3, "leray", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        SpecArray x[3] = {in[0], in[1], in[2]};
        spec::leray(ws, x);
        for (int c = 0; c < 3; ++c) out[c] = std::move(x[c]);
    });
}

FieldSnapshot dealias(const FieldSnapshot& X) {
    return map_spectral(X, X.components(), "dealiased", [](const SpectralWorkspace& ws, auto& in, auto& out) {
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = in[c];
            ws.dealias(out[c]);
        }
    });
}

FieldSnapshot advect(const FieldSnapshot& a, const FieldSnapshot& b) {
    a.require_components(3, "advect");
    b.require_components(3, "advect");
    require_same_grid(a, b, "advect");
    const SpectralWorkspace& ws = workspace_for(a.grid());
    FieldSnapshot out(a.grid(), 3, "advect");
    for_each_index(a.nt(), [&](int t) {
        const double* ap[3] = {a.slice(t, 0), a.slice(t, 1), a.slice(t, 2)};
        const double* bp[3] = {b.slice(t, 0), b.slice(t, 1), b.slice(t, 2)};
        double* op[3] = {out.slice(t, 0), out.slice(t, 1), out.slice(t, 2)};
        spec::advect_phys(ws, ap, bp, op, true);
    });
    return out;
}

FieldSnapshot dot(const FieldSnapshot& a, const FieldSnapshot& b) {
    require_same_grid(a, b, "dot");
    if (a.components() != b.components()) throw ValidationError("dot: component mismatch");
    const int nc = a.components();
    return map_pointwise(a, 1, "dot", [&](int t, std::size_t p, FieldSnapshot& out) {
        double s = 0.0;
        for (int c = 0; c < nc; ++c) s += a.slice(t, c)[p] * b.slice(t, c)[p];
        out.slice(t, 0)[p] = s;
    });
}

FieldSnapshot scale_by(const FieldSnapshot& s, const FieldSnapshot& X) {
    s.require_components(1, "scale_by");
    if (!s.grid().same_space(X.grid())) throw ValidationError("scale_by: grid mismatch");
    const bool static_s = s.nt() == 1;
    if (!static_s && s.nt() != X.nt()) throw ValidationError("scale_by: time mismatch");
    const int nc = X.components();
    return map_pointwise(X, nc, "scaled", [&](int t, std::size_t p, FieldSnapshot& out) {
        const double w = s.slice(static_s ? 0 : t, 0)[p];
        for (int c = 0; c < nc; ++c) out.slice(t, c)[p] = w * X.slice(t, c)[p];
    });
}

FieldSnapshot gradient_energy(const FieldSnapshot& X) {
    X.require_finite();
    const SpectralWorkspace& ws = workspace_for(X.grid());
    FieldSnapshot out(X.grid(), 1, "grad_energy");
    const std::size_t n = ws.real_size();
    for_each_index(X.nt(), [&](int t) {
        std::vector<double> g(n);
        SpecArray d(ws.spec_size());
        double* o = out.slice(t, 0);
        for (int c = 0; c < X.components(); ++c) {
            SpecArray xh = ws.forward(X.slice(t, c));
            for (int j = 0; j < 3; ++j) {
                spec::derivative(ws, xh.data(), j, d.data());
                ws.inverse(d.data(), g.data());
                for (std::size_t p = 0; p < n; ++p) o[p] += g[p] * g[p];
            }
        }
    });
    return out;
}

FieldSnapshot time_derivative(const FieldSnapshot& X) {
    const Grid& g = X.grid();
    if (g.nt < 3) throw ValidationError("time_derivative needs at least 3 slices");
    Grid go = g;
    go.nt = g.nt - 2;
    go.t_start = g.time(1);
    FieldSnapshot out(go, X.components(), "dt");
    const double inv = 1.0 / (2.0 * g.dt);
    for (int t = 0; t < go.nt; ++t)
        for (int c = 0; c < X.components(); ++c)
            out.component(t, c) = (X.component(t + 2, c) - X.component(t, c)) * inv;
    return out;
}

FieldSnapshot time_derivative4(const FieldSnapshot& X) {
    const Grid& g = X.grid();
    if (g.nt < 5) throw ValidationError("time_derivative4 needs at least 5 slices");
    Grid go = g;
    go.nt = g.nt - 4;
    go.t_start = g.time(2);
    FieldSnapshot out(go, X.components(), "dt4");
    const double inv = 1.0 / (12.0 * g.dt);
    for (int t = 0; t < go.nt; ++t)
        for (int c = 0; c < X.components(); ++c)
            out.component(t, c) = (X.component(t, c) - 8.0 * X.component(t + 1, c) + 8.0 * X.component(t + 3, c) -
                                   X.component(t + 4, c)) * inv;
    return out;
}

double max_abs(const FieldSnapshot& X) {
    return X.values().size() ? X.values().abs().maxCoeff() : 0.0;
}

double l2_squared_physical(const FieldSnapshot& X, int t, int c) {
    return X.component(t, c).square().sum() * X.grid().cell_volume();
}

double l2_squared_spectral(const FieldSnapshot& X, int t, int c) {
    const SpectralWorkspace& ws = workspace_for(X.grid());
    SpecArray f = ws.forward(X.slice(t, c));
    double s = 0.0;
    for (std::size_t i = 0; i < ws.spec_size(); ++i) s += ws.weight(i) * std::norm(f[i]);
    return s / double(ws.real_size()) * X.grid().cell_volume();
}

} // namespace mhdlab
