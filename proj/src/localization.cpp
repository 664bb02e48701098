#include "mhdlab/localization.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/spectral.hpp"

#include "mhdlab/elsasser.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace mhdlab {

CutoffProfile parse_cutoff_profile(const std::string& name) {
    if (name == "quintic") return CutoffProfile::quintic;
    if (name == "smooth") return CutoffProfile::smooth;
    throw ValidationError("unknown cutoff profile '" + name + "' (expected quintic or smooth)");
}

std::string to_string(CutoffProfile p) {
    return p == CutoffProfile::quintic ? "quintic" : "smooth";
}

double ramp(CutoffProfile p, double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    if (p == CutoffProfile::quintic) return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

int smoothness_order(CutoffProfile p) { return p == CutoffProfile::quintic ? 2 : -1; }

CutoffRadii CutoffRadii::from_fractions(double rho, double f0, double f3, double f2, double f1) {
    CutoffRadii r{f0 * rho, f3 * rho, f2 * rho, f1 * rho, rho};
    r.validate();
    return r;
}

void CutoffRadii::validate() const {
    const double v[5] = {rho0, rho3, rho2, rho1, rho};
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError("cutoff radii must be finite");
    if (!(0.0 < rho0 && rho0 < rho3 && rho3 < rho2 && rho2 < rho1 && rho1 < rho)) {
        std::ostringstream os;
        os << "cutoff radii must satisfy 0 < rho0 < rho3 < rho2 < rho1 < rho, got " << rho0 << ", " << rho3 << ", "
           << rho2 << ", " << rho1 << ", " << rho;
        throw ValidationError(os.str());
    }
}

namespace {

// 1 on [0, inner], 0 beyond outer.
double plateau(CutoffProfile p, double d, double inner, double outer) {
    return 1.0 - ramp(p, (d - inner) / (outer - inner));
}

FieldSnapshot sample_space(const Grid& g, const Eigen::Vector3d& x0, double inner, double outer, CutoffProfile p,
                           const char* name) {
    Grid s = g;
    s.nt = 1;
    s.t_start = 0.0;
    FieldSnapshot out(s, 1, name);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.at(0, 0, k, j, i) = plateau(p, (g.position(i, j, k) - x0).norm(), inner, outer);
    return out;
}

FieldSnapshot expand(const FieldSnapshot& space, const Grid& g, const std::function<double(double)>& tf,
                     const char* name) {
    if (!space.grid().same_space(g)) throw ValidationError("cutoff: spatial grid mismatch");
    FieldSnapshot out(g, 1, name);
    for (int t = 0; t < g.nt; ++t) out.component(t, 0) = tf(g.time(t)) * space.component(0, 0);
    return out;
}

} // namespace

double CutoffLadder::psi_time(double t) const {
    if (std::isinf(radii.rho)) return 1.0;
    return plateau(profile, std::abs(t - t0), radii.rho1 * radii.rho1, radii.rho * radii.rho);
}

double CutoffLadder::phi_time(double t) const {
    if (std::isinf(radii.rho)) return 1.0;
    return plateau(profile, std::abs(t - t0), radii.rho3 * radii.rho3, radii.rho2 * radii.rho2);
}

double CutoffLadder::psi_value(double t, const Eigen::Vector3d& x) const {
    if (std::isinf(radii.rho)) return 1.0;
    return psi_time(t) * plateau(profile, (x - x0).norm(), radii.rho1, radii.rho);
}

double CutoffLadder::phi_value(double t, const Eigen::Vector3d& x) const {
    if (std::isinf(radii.rho)) return 1.0;
    return phi_time(t) * plateau(profile, (x - x0).norm(), radii.rho3, radii.rho2);
}

FieldSnapshot CutoffLadder::psi(const Grid& g) const {
    return expand(psi_space, g, [this](double t) { return psi_time(t); }, "psi");
}

FieldSnapshot CutoffLadder::phi(const Grid& g) const {
    return expand(phi_space, g, [this](double t) { return phi_time(t); }, "phi");
}

CutoffLadder build_cutoff(const Grid& g, double t0, const Eigen::Vector3d& x0, const CutoffRadii& radii,
                          CutoffProfile profile) {
    g.validate();
    radii.validate();
    if (!std::isfinite(t0) || !x0.allFinite()) throw ValidationError("cutoff center must be finite");
    // throws DomainError naming the face if B(x0, rho) leaves the box
    Grid probe = g;
    probe.nt = 1;
    probe.t_start = t0;
    restrict_cylinder_window(probe, {t0, x0, radii.rho});

    CutoffLadder L;
    L.t0 = t0;
    L.x0 = x0;
    L.radii = radii;
    L.profile = profile;
    L.psi_space = sample_space(g, x0, radii.rho1, radii.rho, profile, "psi");
    L.phi_space = sample_space(g, x0, radii.rho3, radii.rho2, profile, "phi");
    return L;
}

CutoffLadder global_cutoff(const Grid& g) {
    CutoffLadder L;
    const double inf = std::numeric_limits<double>::infinity();
    L.radii = {inf, inf, inf, inf, inf};
    Grid s = g;
    s.nt = 1;
    s.t_start = 0.0;
    L.psi_space = FieldSnapshot(s, 1, "psi");
    L.psi_space.values().setOnes();
    L.phi_space = L.psi_space;
    L.phi_space.set_name("phi");
    return L;
}

namespace {

using V = std::vector<double>;
using V3 = std::array<V, 3>;

// One-slice spectral toolkit in physical space.
struct Kit {
    const SpectralWorkspace& ws;
    std::size_t n;

    explicit Kit(const SpectralWorkspace& w) : ws(w), n(w.real_size()) {}

    V3 zeros3() const { return {V(n, 0.0), V(n, 0.0), V(n, 0.0)}; }

    V3 load(const FieldSnapshot& X, int t) const {
        V3 out;
        for (int c = 0; c < 3; ++c) out[c].assign(X.slice(t, c), X.slice(t, c) + n);
        return out;
    }

    V3 curl(const V3& x) const {
        SpecArray xh[3], o[3];
        for (int c = 0; c < 3; ++c) xh[c] = ws.forward(x[c].data());
        spec::curl(ws, xh, o);
        V3 out = zeros3();
        for (int c = 0; c < 3; ++c) ws.inverse(o[c].data(), out[c].data());
        return out;
    }

    // -(1/Lap) curl x
    V3 neg_invlap_curl(const V3& x) const {
        SpecArray xh[3], o[3];
        for (int c = 0; c < 3; ++c) xh[c] = ws.forward(x[c].data());
        spec::curl(ws, xh, o);
        V3 out = zeros3();
        for (int c = 0; c < 3; ++c) {
            spec::inverse_laplacian(ws, o[c].data(), o[c].data());
            for (auto& z : o[c]) z = -z;
            ws.inverse(o[c].data(), out[c].data());
        }
        return out;
    }

    // (1/Lap) div x
    V invlap_div(const V3& x) const {
        SpecArray xh[3], d;
        for (int c = 0; c < 3; ++c) xh[c] = ws.forward(x[c].data());
        spec::divergence(ws, xh, d);
        spec::inverse_laplacian(ws, d.data(), d.data());
        V out(n);
        ws.inverse(d.data(), out.data());
        return out;
    }

    V3 grad(const V& f) const {
        V3 out = zeros3();
        spec::gradient_phys(ws, f.data(), out[0].data(), out[1].data(), out[2].data());
        return out;
    }

    V partial(const V& f, int axis) const {
        SpecArray fh = ws.forward(f.data());
        spec::derivative(ws, fh.data(), axis, fh.data());
        V out(n);
        ws.inverse(fh.data(), out.data());
        return out;
    }

    V3 partial(const V3& x, int axis) const {
        return {partial(x[0], axis), partial(x[1], axis), partial(x[2], axis)};
    }

    V lap(const V& f) const {
        SpecArray fh = ws.forward(f.data());
        spec::laplacian(ws, fh.data(), fh.data());
        V out(n);
        ws.inverse(fh.data(), out.data());
        return out;
    }

    V3 lap(const V3& x) const { return {lap(x[0]), lap(x[1]), lap(x[2])}; }

    V3 advect(const V3& a, const V3& b) const {
        V3 out = zeros3();
        const double* ap[3] = {a[0].data(), a[1].data(), a[2].data()};
        const double* bp[3] = {b[0].data(), b[1].data(), b[2].data()};
        double* op[3] = {out[0].data(), out[1].data(), out[2].data()};
        spec::advect_phys(ws, ap, bp, op, true);
        return out;
    }

    V3 mul(const V& s, const V3& x) const {
        V3 out = zeros3();
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < n; ++p) out[c][p] = s[p] * x[c][p];
        return out;
    }

    V3 cross(const V3& a, const V3& b) const {
        V3 out = zeros3();
        for (std::size_t p = 0; p < n; ++p) {
            out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
            out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
            out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
        }
        return out;
    }
};

void add_to(V3& acc, const V3& x, double w = 1.0) {
    for (int c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < acc[c].size(); ++p) acc[c][p] += w * x[c][p];
}

V3 diff(const V3& a, const V3& b) {
    V3 out = a;
    add_to(out, b, -1.0);
    return out;
}

void store(FieldSnapshot& X, int t, const V3& x) {
    for (int c = 0; c < 3; ++c) std::copy(x[c].begin(), x[c].end(), X.slice(t, c));
}

void store(FieldSnapshot& X, int t, const V& x) { std::copy(x.begin(), x.end(), X.slice(t, 0)); }

V scaled_space(const FieldSnapshot& space, double s) {
    const double* p = space.slice(0, 0);
    V out(p, p + space.grid().slice_size());
    for (auto& x : out) x *= s;
    return out;
}

void check_inputs(const FieldSnapshot& ref, const CutoffLadder& L, std::initializer_list<const FieldSnapshot*> fs,
                  const char* op) {
    ref.require_components(3, op);
    ref.require_finite();
    if (!L.psi_space.grid().same_space(ref.grid())) throw ValidationError(std::string(op) + ": cutoff grid mismatch");
    for (const FieldSnapshot* f : fs) {
        f->require_components(3, op);
        require_same_grid(ref, *f, op);
        f->require_finite();
    }
}

} // namespace

FieldSnapshot harmonic_correction(const FieldSnapshot& X, const CutoffLadder& ladder, double div_tol) {
    check_inputs(X, ladder, {}, "harmonic_correction");
    const double dmax = max_divergence(X);
    if (dmax > div_tol) {
        std::ostringstream os;
        os << "harmonic_correction: input divergence " << dmax << " exceeds tolerance " << div_tol;
        throw ValidationError(os.str());
    }
    const Kit kit(workspace_for(X.grid()));
    FieldSnapshot out(X.grid(), 3, X.name().empty() ? "v" : X.name() + "_corr");
    for_each_index(X.nt(), [&](int t) {
        const V psi = scaled_space(ladder.psi_space, ladder.psi_time(X.grid().time(t)));
        store(out, t, kit.neg_invlap_curl(kit.mul(psi, kit.curl(kit.load(X, t)))));
    });
    return out;
}

Correctors correctors(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                      const FieldSnapshot& h) {
    require_same_grid(u, v, "correctors");
    require_same_grid(b, h, "correctors");
    require_same_grid(u, b, "correctors");
    Correctors c{FieldSnapshot(u.grid(), 3, "beta"), FieldSnapshot(b.grid(), 3, "gamma")};
    c.beta.values() = u.values() - v.values();
    c.gamma.values() = b.values() - h.values();
    return c;
}

namespace {

FieldSnapshot sum_fields(std::initializer_list<const FieldSnapshot*> fs, const char* name) {
    const FieldSnapshot& first = **fs.begin();
    FieldSnapshot out(first.grid(), first.components(), name);
    for (const FieldSnapshot* f : fs) out.values() += f->values();
    return out;
}

} // namespace

FieldSnapshot CompanionPressures::q() const { return sum_fields({&q1, &q2}, "q"); }
FieldSnapshot CompanionPressures::r() const { return sum_fields({&r1, &r2}, "r"); }
FieldSnapshot CompanionForces::k() const { return sum_fields({&k0, &k1, &k2, &k3}, "k"); }
FieldSnapshot CompanionForces::l() const { return sum_fields({&l0, &l1, &l2, &l3}, "l"); }

namespace {

// A = (h.grad)beta + (gamma.grad)v + (gamma.grad)beta; the b-side uses the mirrored pairs.
V3 cross_terms(const Kit& kit, const V3& h, const V3& beta, const V3& gamma, const V3& v) {
    V3 a = kit.advect(h, beta);
    add_to(a, kit.advect(gamma, v));
    add_to(a, kit.advect(gamma, beta));
    return a;
}

} // namespace

CompanionPressures companion_pressures(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                                       const FieldSnapshot& h, const FieldSnapshot& beta,
                                       const FieldSnapshot& gamma, const CutoffLadder& ladder) {
    check_inputs(u, ladder, {&b, &v, &h, &beta, &gamma}, "companion_pressures");
    const Grid& g = u.grid();
    const Kit kit(workspace_for(g));
    CompanionPressures P{FieldSnapshot(g, 1, "q1"), FieldSnapshot(g, 1, "q2"), FieldSnapshot(g, 1, "r1"),
                         FieldSnapshot(g, 1, "r2")};
    for_each_index(g.nt, [&](int t) {
        const V psi = scaled_space(ladder.psi_space, ladder.psi_time(g.time(t)));
        const V3 ut = kit.load(u, t), bt = kit.load(b, t), vt = kit.load(v, t), ht = kit.load(h, t);
        const V3 be = kit.load(beta, t), ga = kit.load(gamma, t);
        V q1 = kit.invlap_div(kit.mul(psi, kit.advect(bt, ut)));
        V r1 = kit.invlap_div(kit.mul(psi, kit.advect(ut, bt)));
        for (auto& x : q1) x = -x;
        for (auto& x : r1) x = -x;
        store(P.q1, t, q1);
        store(P.r1, t, r1);
        store(P.q2, t, kit.invlap_div(kit.mul(psi, cross_terms(kit, ht, be, ga, vt))));
        store(P.r2, t, kit.invlap_div(kit.mul(psi, cross_terms(kit, vt, ga, be, ht))));
    });
    return P;
}

namespace {

// The two commutator forces, in the forms that define them:
//   k1 = I1 - Lap v   with I1 = -(1/Lap) curl(psi Lap curl X), Lap v = -curl(psi curl X)
//   k2 = I2 + grad q1 + psi N   with I2 = (1/Lap) curl(psi curl N), q1 = -(1/Lap) div(psi N)
// In the continuum these equal the expanded expressions in derivatives of psi; on the torus k2
// also carries the zero mode mean(psi N) dropped by (1/Lap) curl curl.
V3 first_force(const Kit& kit, const V& psi, const V3& X) {
    const V3 w = kit.curl(X);
    V3 k = kit.neg_invlap_curl(kit.mul(psi, kit.lap(w)));
    add_to(k, kit.curl(kit.mul(psi, w)));
    return k;
}

V3 second_force(const Kit& kit, const V& psi, const V3& N) {
    const V3 pN = kit.mul(psi, N);
    V3 k = kit.neg_invlap_curl(kit.mul(psi, kit.curl(N)));
    for (int c = 0; c < 3; ++c)
        for (auto& x : k[c]) x = -x;
    add_to(k, kit.grad(kit.invlap_div(pN)), -1.0);
    add_to(k, pN);
    return k;
}

} // namespace

CompanionForces companion_forces(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v,
                                 const FieldSnapshot& h, const FieldSnapshot& beta, const FieldSnapshot& gamma,
                                 const FieldSnapshot& f, const FieldSnapshot& g, const CutoffLadder& ladder) {
    check_inputs(u, ladder, {&b, &v, &h, &beta, &gamma, &f, &g}, "companion_forces");
    const Grid& gr = u.grid();
    const Kit kit(workspace_for(gr));
    auto mk = [&](const char* name) { return FieldSnapshot(gr, 3, name); };
    CompanionForces F{mk("k0"), mk("k1"), mk("k2"), mk("k3"), mk("l0"), mk("l1"), mk("l2"), mk("l3"),
                      mk("k3_near"), mk("k3_far"), mk("l3_near"), mk("l3_far")};
    for_each_index(gr.nt, [&](int t) {
        const double tau = ladder.psi_time(gr.time(t));
        const V psi = scaled_space(ladder.psi_space, tau);
        const V phi = scaled_space(ladder.phi_space, ladder.phi_time(gr.time(t)));
        const V3 ut = kit.load(u, t), bt = kit.load(b, t), vt = kit.load(v, t), ht = kit.load(h, t);
        const V3 be = kit.load(beta, t), ga = kit.load(gamma, t);

        store(F.k0, t, kit.neg_invlap_curl(kit.mul(psi, kit.curl(kit.load(f, t)))));
        store(F.l0, t, kit.neg_invlap_curl(kit.mul(psi, kit.curl(kit.load(g, t)))));
        store(F.k1, t, first_force(kit, psi, ut));
        store(F.l1, t, first_force(kit, psi, bt));
        store(F.k2, t, second_force(kit, psi, kit.advect(bt, ut)));
        store(F.l2, t, second_force(kit, psi, kit.advect(ut, bt)));

        auto third = [&](const V3& A, FieldSnapshot& full, FieldSnapshot& nearf, FieldSnapshot& farf) {
            const V3 pA = kit.mul(psi, A);
            V3 phA = kit.mul(phi, pA);
            V3 rest = diff(pA, phA);
            const V3 gn = kit.grad(kit.invlap_div(phA));
            const V3 gf = kit.grad(kit.invlap_div(rest));
            V3 k = gn;
            add_to(k, gf);
            add_to(k, pA, -1.0);
            store(full, t, k);
            store(nearf, t, gn);
            store(farf, t, gf);
        };
        third(cross_terms(kit, ht, be, ga, vt), F.k3, F.k3_near, F.k3_far);
        third(cross_terms(kit, vt, ga, be, ht), F.l3, F.l3_near, F.l3_far);
    });
    return F;
}

CompanionSlice companion_at(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                            const FieldSnapshot& g, const CutoffLadder& ladder, int t, bool with_sources) {
    check_inputs(u, ladder, {&b}, "companion_at");
    if (with_sources) check_inputs(u, ladder, {&f, &g}, "companion_at");
    const Grid& gr = u.grid();
    const Kit kit(workspace_for(gr));
    const double tau = ladder.psi_time(gr.time(t));
    CompanionSlice out;
    const V3 ut = kit.load(u, t), bt = kit.load(b, t);
    const V psi = scaled_space(ladder.psi_space, tau);
    out.v = kit.neg_invlap_curl(kit.mul(psi, kit.curl(ut)));
    out.h = kit.neg_invlap_curl(kit.mul(psi, kit.curl(bt)));
    if (!with_sources) return out;
    const V3 be = diff(ut, out.v), ga = diff(bt, out.h);
    const V3 Nu = kit.advect(bt, ut), Nb = kit.advect(ut, bt);
    const V3 A = cross_terms(kit, out.h, be, ga, out.v);
    const V3 B = cross_terms(kit, out.v, ga, be, out.h);
    const V3 pA = kit.mul(psi, A), pB = kit.mul(psi, B);
    const V dA = kit.invlap_div(pA), dB = kit.invlap_div(pB);

    out.q = kit.invlap_div(kit.mul(psi, Nu));
    out.r = kit.invlap_div(kit.mul(psi, Nb));
    for (std::size_t p = 0; p < kit.n; ++p) {
        out.q[p] = dA[p] - out.q[p];
        out.r[p] = dB[p] - out.r[p];
    }
    auto force = [&](const V3& src, const V3& X, const V3& N, const V& dP, const V3& pP) {
        V3 k = kit.neg_invlap_curl(kit.mul(psi, kit.curl(src)));
        add_to(k, first_force(kit, psi, X));
        add_to(k, second_force(kit, psi, N));
        add_to(k, kit.grad(dP));
        add_to(k, pP, -1.0);
        return k;
    };
    out.k = force(kit.load(f, t), ut, Nu, dA, pA);
    out.l = force(kit.load(g, t), bt, Nb, dB, pB);
    return out;
}

CompanionSystem companion_system(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& f,
                                 const FieldSnapshot& g, const CutoffLadder& ladder) {
    CompanionSystem s;
    s.v = harmonic_correction(u, ladder);
    s.v.set_name("v");
    s.h = harmonic_correction(b, ladder);
    s.h.set_name("h");
    Correctors c = correctors(u, b, s.v, s.h);
    s.beta = std::move(c.beta);
    s.gamma = std::move(c.gamma);
    s.pressures = companion_pressures(u, b, s.v, s.h, s.beta, s.gamma, ladder);
    s.forces = companion_forces(u, b, s.v, s.h, s.beta, s.gamma, f, g, ladder);
    return s;
}

CompanionResidual companion_residual(const CompanionSystem& s) {
    const FieldSnapshot dv = time_derivative(s.v);
    const FieldSnapshot dh = time_derivative(s.h);
    const Grid& g = s.v.grid();
    const Grid& go = dv.grid();
    const Kit kit(workspace_for(g));
    const FieldSnapshot q = s.pressures.q(), r = s.pressures.r();
    const FieldSnapshot k = s.forces.k(), l = s.forces.l();
    CompanionResidual R{FieldSnapshot(go, 3, "residual_v"), FieldSnapshot(go, 3, "residual_h")};
    for_each_index(go.nt, [&](int t) {
        const int n = t + 1;
        const V3 vt = kit.load(s.v, n), ht = kit.load(s.h, n);
        auto eq = [&](const FieldSnapshot& dX, const V3& X, const V3& Y, const FieldSnapshot& p,
                      const FieldSnapshot& src, FieldSnapshot& out) {
            V3 res = kit.load(dX, t);
            add_to(res, kit.lap(X), -1.0);
            add_to(res, kit.advect(Y, X));
            V pn(p.slice(n, 0), p.slice(n, 0) + kit.n);
            add_to(res, kit.grad(pn));
            add_to(res, kit.load(src, n), -1.0);
            store(out, t, res);
        };
        eq(dv, vt, ht, q, k, R.rv);
        eq(dh, ht, vt, r, l, R.rh);
    });
    return R;
}

} // namespace mhdlab
