#include "mhdlab/elsasser.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/spectral.hpp"

#include <cmath>
#include <sstream>

namespace mhdlab {

namespace {

void check_four(const FieldSnapshot& a, const FieldSnapshot& b, const FieldSnapshot& c, const FieldSnapshot& d,
                const char* op) {
    require_same_grid(a, b, op);
    require_same_grid(a, c, op);
    require_same_grid(a, d, op);
    for (const FieldSnapshot* x : {&a, &b, &c, &d}) x->require_components(3, op);
}

FieldSnapshot combine(const FieldSnapshot& a, const FieldSnapshot& b, double sa, double sb, const char* name) {
    FieldSnapshot out(a.grid(), a.components(), name);
    out.values() = sa * a.values() + sb * b.values();
    return out;
}

// Spectrum of sum_ij d_i d_j (u_i b_j) for one slice.
SpecArray double_divergence(const SpectralWorkspace& ws, const FieldSnapshot& u, const FieldSnapshot& b, int t) {
    const std::size_t n = ws.real_size();
    std::vector<double> w(n);
    SpecArray src(ws.spec_size(), cplx(0.0));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double* ui = u.slice(t, i);
            const double* bj = b.slice(t, j);
            for (std::size_t p = 0; p < n; ++p) w[p] = ui[p] * bj[p];
            SpecArray wh = ws.forward(w.data());
            ws.dealias(wh);
            const auto &ki = ws.k(i), &kj = ws.k(j);
            for (std::size_t s = 0; s < ws.spec_size(); ++s) src[s] -= ki[s] * kj[s] * wh[s];
        }
    }
    return src;
}

} // namespace

ElsasserFields to_elsasser(const FieldSnapshot& U, const FieldSnapshot& B, const FieldSnapshot& F,
                           const FieldSnapshot& G) {
    check_four(U, B, F, G, "to_elsasser");
    return {combine(U, B, 1.0, 1.0, "u"), combine(U, B, 1.0, -1.0, "b"), combine(F, G, 1.0, 1.0, "f"),
            combine(F, G, 1.0, -1.0, "g")};
}

PhysicalFields from_elsasser(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                             const FieldSnapshot& g) {
    check_four(u, b, f, g, "from_elsasser");
    return {combine(u, b, 0.5, 0.5, "U"), combine(u, b, 0.5, -0.5, "B"), combine(f, g, 0.5, 0.5, "F"),
            combine(f, g, 0.5, -0.5, "G")};
}

double max_divergence(const FieldSnapshot& X) {
    return max_abs(divergence(X));
}

FieldSnapshot solve_pressure(const FieldSnapshot& u, const FieldSnapshot& b, double div_tol) {
    require_same_grid(u, b, "solve_pressure");
    u.require_components(3, "solve_pressure");
    b.require_components(3, "solve_pressure");
    u.require_finite();
    b.require_finite();
    for (const FieldSnapshot* x : {&u, &b}) {
        const double d = max_divergence(*x);
        if (d > div_tol) {
            std::ostringstream os;
            os << "solve_pressure: input not divergence-free (max |div| = " << d << ")";
            throw ValidationError(os.str());
        }
    }
    const SpectralWorkspace& ws = workspace_for(u.grid());
    FieldSnapshot P(u.grid(), 1, "P");
    for_each_index(u.nt(), [&](int t) {
        SpecArray src = double_divergence(ws, u, b, t);
        SpecArray ph(ws.spec_size());
        spec::inverse_laplacian(ws, src.data(), ph.data());
        for (auto& z : ph) z = -z;
        ws.inverse(ph.data(), P.slice(t, 0));
    });
    return P;
}

double pressure_residual(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P) {
    require_same_grid(u, b, "pressure_residual");
    require_same_grid(u, P, "pressure_residual");
    const SpectralWorkspace& ws = workspace_for(u.grid());
    std::vector<double> res(u.nt(), 0.0);
    for_each_index(u.nt(), [&](int t) {
        SpecArray src = double_divergence(ws, u, b, t);
        SpecArray ph = ws.forward(P.slice(t, 0)), lap(ws.spec_size());
        spec::laplacian(ws, ph.data(), lap.data());
        for (std::size_t s = 0; s < ws.spec_size(); ++s) lap[s] += src[s];
        std::vector<double> r(ws.real_size());
        ws.inverse(lap.data(), r.data());
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        res[t] = m;
    });
    double m = 0.0;
    for (double v : res) m = std::max(m, v);
    return m;
}

} // namespace mhdlab
