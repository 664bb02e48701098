#include "mhdlab/dissipation.hpp"
#include "mhdlab/elsasser.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace mhdlab {

double test_bump(double s) {
    const double a = std::abs(s);
    if (a >= 1.0) return 0.0;
    const double w = 1.0 - a * a;
    return w * w * w;
}

double TestFunction::space(const Eigen::Vector3d& x) const { return test_bump((x - xc).norm() / radius); }
double TestFunction::time(double t) const { return test_bump((t - tc) / half_width); }

TestBank TestBank::lattice(const ParabolicCylinder& Q) {
    if (!(Q.r > 0.0)) throw ValidationError("test bank cylinder radius must be positive");
    const double R = 0.75 * Q.r, H = 0.5 * Q.r * Q.r;
    const double dx = 0.25 * Q.r, dt = 0.25 * Q.r * Q.r;
    TestBank bank;
    bank.items.push_back({Q.t0, Q.x0, R, H});
    for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
            Eigen::Vector3d x = Q.x0;
            x[a] += s * dx;
            bank.items.push_back({Q.t0, x, R, H});
        }
    for (int s : {-1, 1}) bank.items.push_back({Q.t0 + s * dt, Q.x0, R, H});
    return bank;
}

void TestBank::validate() const {
    if (items.empty()) throw ValidationError("test bank is empty");
    for (const auto& c : items)
        if (!(c.radius > 0.0 && c.half_width > 0.0)) throw ValidationError("test function widths must be positive");
}

double pair(const FieldSnapshot& F, const TestFunction& chi) {
    F.require_components(1, "pair");
    const Grid& g = F.grid();
    double s = 0.0;
    for (int t = 1; t + 1 < g.nt; ++t) {
        const double T = chi.time(g.time(t));
        if (T == 0.0) continue;
        double st = 0.0;
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) st += F.at(t, 0, k, j, i) * chi.space(g.position(i, j, k));
        s += st * T;
    }
    return s * g.dt * g.cell_volume();
}

namespace {

using V = std::vector<double>;
using V3 = std::array<V, 3>;
using Jac = std::array<V3, 3>; // J[c][j] = d_j Y_c

// Slice operations with plain pointwise products (no dealiasing), so that convolution identities
// hold exactly on the periodic grid.
struct Ops {
    const SpectralWorkspace& ws;
    std::size_t n;

    explicit Ops(const SpectralWorkspace& w) : ws(w), n(w.real_size()) {}

    V zeros() const { return V(n, 0.0); }
    V3 zeros3() const { return {zeros(), zeros(), zeros()}; }

    V load(const FieldSnapshot& X, int t, int c) const { return V(X.slice(t, c), X.slice(t, c) + n); }
    V3 load3(const FieldSnapshot& X, int t) const { return {load(X, t, 0), load(X, t, 1), load(X, t, 2)}; }

    V conv(const V& f, const V& sym) const {
        SpecArray fh = ws.forward(f.data());
        for (std::size_t s = 0; s < fh.size(); ++s) fh[s] *= sym[s];
        V out(n);
        ws.inverse(fh.data(), out.data());
        return out;
    }
    V3 conv(const V3& x, const V& sym) const { return {conv(x[0], sym), conv(x[1], sym), conv(x[2], sym)}; }

    V lap(const V& f) const {
        SpecArray fh = ws.forward(f.data());
        spec::laplacian(ws, fh.data(), fh.data());
        V out(n);
        ws.inverse(fh.data(), out.data());
        return out;
    }
    V3 lap(const V3& x) const { return {lap(x[0]), lap(x[1]), lap(x[2])}; }

    V3 grad(const V& f) const {
        V3 out = zeros3();
        spec::gradient_phys(ws, f.data(), out[0].data(), out[1].data(), out[2].data());
        return out;
    }

    Jac jac(const V3& Y) const { return {grad(Y[0]), grad(Y[1]), grad(Y[2])}; }

    // div(sym * W), or div W when sym is empty
    V div(const V3& W, const V* sym = nullptr) const {
        SpecArray acc(ws.spec_size(), cplx(0.0)), d(ws.spec_size());
        for (int j = 0; j < 3; ++j) {
            SpecArray wh = ws.forward(W[j].data());
            spec::derivative(ws, wh.data(), j, d.data());
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += d[s];
        }
        if (sym)
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] *= (*sym)[s];
        V out(n);
        ws.inverse(acc.data(), out.data());
        return out;
    }

    V3 adv(const V3& X, const Jac& J) const {
        V3 out = zeros3();
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < n; ++p)
                out[c][p] = X[0][p] * J[c][0][p] + X[1][p] * J[c][1][p] + X[2][p] * J[c][2][p];
        return out;
    }

    double grad_energy(const Jac& J, std::size_t p) const {
        double s = 0.0;
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 3; ++j) s += J[c][j][p] * J[c][j][p];
        return s;
    }
};

double dot3(const V3& a, const V3& b, std::size_t p) { return a[0][p] * b[0][p] + a[1][p] * b[1][p] + a[2][p] * b[2][p]; }

V3 scale3(const V& s, const V3& x) {
    V3 out = x;
    for (int c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < s.size(); ++p) out[c][p] *= s[p];
    return out;
}

void check_triple(const FieldSnapshot& X, const FieldSnapshot& Y, const FieldSnapshot& Z, const char* op) {
    for (const FieldSnapshot* f : {&X, &Y, &Z}) {
        f->require_components(3, op);
        f->require_finite();
    }
    require_same_grid(X, Y, op);
    require_same_grid(X, Z, op);
}

void check_eps(const Grid& g, double eps) {
    const double hmax = std::max({g.h(0), g.h(1), g.h(2)});
    if (!(eps >= 2.0 * hmax * (1.0 - 1e-12))) throw ValidationError("epsilon must be at least 2 h");
}

struct NRSTSlice {
    V N, R, S, T;
};

NRSTSlice nrst_slice(const Ops& o, const V3& X, const V3& Y, const V3& Z, const V& sym) {
    const std::size_t n = o.n;
    const V3 Xe = o.conv(X, sym), Ye = o.conv(Y, sym), Ze = o.conv(Z, sym);
    const V divXe = o.div(Xe);
    const Jac JY = o.jac(Y), JZ = o.jac(Z), JYe = o.jac(Ye), JZe = o.jac(Ze);
    const V3 XgY = o.conv(o.adv(X, JY), sym), XgZ = o.conv(o.adv(X, JZ), sym);
    const V3 XgYe = o.adv(X, JYe), XgZe = o.adv(X, JZe);
    V YZ(n);
    for (std::size_t p = 0; p < n; ++p) YZ[p] = dot3(Y, Z, p);
    const V divYZX = o.div(scale3(YZ, X));
    const V divYZXe = o.div(scale3(YZ, X), &sym);
    const V3 gYZe = o.grad(o.conv(YZ, sym));
    std::array<V, 3> DY, DZ; // div (X Y_c)_eps
    for (int c = 0; c < 3; ++c) {
        DY[c] = o.div(scale3(Y[c], X), &sym);
        DZ[c] = o.div(scale3(Z[c], X), &sym);
    }
    NRSTSlice r{V(n), V(n), V(n), V(n)};
    for (std::size_t p = 0; p < n; ++p) {
        r.N[p] = dot3(Ye, XgZ, p) + dot3(Ze, XgY, p) - divYZX[p];
        double R = divYZXe[p] - dot3(X, gYZe, p) + dot3(Y, XgYe, p) + dot3(Z, XgZe, p) + YZ[p] * divXe[p];
        double S = 0.0, T = 0.0;
        for (int c = 0; c < 3; ++c) {
            R -= Y[c][p] * DY[c][p] + Z[c][p] * DZ[c][p];
            S += (Ze[c][p] - Y[c][p]) * (DY[c][p] - XgYe[c][p] - Y[c][p] * divXe[p]);
            T += (Ye[c][p] - Z[c][p]) * (DZ[c][p] - XgZe[c][p] - Z[c][p] * divXe[p]);
        }
        r.R[p] = R;
        r.S[p] = S;
        r.T[p] = T;
    }
    return r;
}

// 2 A_eps . ((B.grad)A)_eps + 2 B_eps . ((A.grad)B)_eps, i.e. mu or eta without the divergence term
V eta_core(const Ops& o, const V3& A, const V3& B, const V& sym) {
    const V3 Ae = o.conv(A, sym), Be = o.conv(B, sym);
    const V3 NA = o.conv(o.adv(B, o.jac(A)), sym), NB = o.conv(o.adv(A, o.jac(B)), sym);
    V out(o.n);
    for (std::size_t p = 0; p < o.n; ++p) out[p] = 2.0 * dot3(Ae, NA, p) + 2.0 * dot3(Be, NB, p);
    return out;
}

// |A|^2 B + |B|^2 A
V3 cubic_flux(const V3& A, const V3& B) {
    V3 out = B;
    const std::size_t n = A[0].size();
    for (std::size_t p = 0; p < n; ++p) {
        const double a2 = dot3(A, A, p), b2 = dot3(B, B, p);
        for (int c = 0; c < 3; ++c) out[c][p] = a2 * B[c][p] + b2 * A[c][p];
    }
    return out;
}

} // namespace

NRSTFields nrst(const FieldSnapshot& X, const FieldSnapshot& Y, const FieldSnapshot& Z, double eps,
                BumpProfile profile) {
    check_triple(X, Y, Z, "nrst");
    check_eps(X.grid(), eps);
    const Grid& g = X.grid();
    const Ops o(workspace_for(g));
    const V sym = space_kernel_symbol(o.ws, profile, eps);
    NRSTFields F{FieldSnapshot(g, 1, "N"), FieldSnapshot(g, 1, "R"), FieldSnapshot(g, 1, "S"),
                 FieldSnapshot(g, 1, "T")};
    for_each_index(g.nt, [&](int t) {
        const NRSTSlice s = nrst_slice(o, o.load3(X, t), o.load3(Y, t), o.load3(Z, t), sym);
        std::copy(s.N.begin(), s.N.end(), F.N.slice(t, 0));
        std::copy(s.R.begin(), s.R.end(), F.R.slice(t, 0));
        std::copy(s.S.begin(), s.S.end(), F.S.slice(t, 0));
        std::copy(s.T.begin(), s.T.end(), F.T.slice(t, 0));
    });
    return F;
}

FieldSnapshot increment_flux(const FieldSnapshot& X, double eps, BumpProfile profile) {
    X.require_components(3, "increment_flux");
    check_eps(X.grid(), eps);
    const Ops o(workspace_for(X.grid()));
    const V sym = space_kernel_symbol(o.ws, profile, eps);
    FieldSnapshot out(X.grid(), 1, "increment_flux");
    for_each_index(X.nt(), [&](int t) {
        const V d = o.div(o.load3(X, t), &sym);
        std::copy(d.begin(), d.end(), out.slice(t, 0));
    });
    return out;
}

MuEta mu_eta(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& v, const FieldSnapshot& h,
             double eps, BumpProfile profile) {
    check_triple(u, b, v, "mu_eta");
    check_triple(u, b, h, "mu_eta");
    check_eps(u.grid(), eps);
    const Grid& g = u.grid();
    const Ops o(workspace_for(g));
    const V sym = space_kernel_symbol(o.ws, profile, eps);
    MuEta r{FieldSnapshot(g, 1, "mu"), FieldSnapshot(g, 1, "eta")};
    for_each_index(g.nt, [&](int t) {
        auto one = [&](const V3& A, const V3& B, FieldSnapshot& out) {
            V core = eta_core(o, A, B, sym);
            const V d = o.div(cubic_flux(A, B));
            for (std::size_t p = 0; p < o.n; ++p) core[p] -= d[p];
            std::copy(core.begin(), core.end(), out.slice(t, 0));
        };
        one(o.load3(u, t), o.load3(b, t), r.mu);
        one(o.load3(v, t), o.load3(h, t), r.eta);
    });
    return r;
}

Extrapolation richardson(const std::vector<double>& x, double ratio, double order) {
    Extrapolation e;
    if (x.empty()) throw ValidationError("richardson: no values");
    for (double v : x)
        if (!std::isfinite(v)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(), false};
    if (x.size() == 1 || !(ratio > 1.0)) {
        e.value = x.back();
        return e;
    }
    const std::size_t n = x.size();
    std::vector<std::vector<double>> R(n);
    for (std::size_t i = 0; i < n; ++i) {
        R[i].push_back(x[i]);
        for (std::size_t j = 1; j <= i; ++j) {
            const double f = std::pow(ratio, order + 2.0 * double(j - 1)) - 1.0;
            R[i].push_back(R[i][j - 1] + (R[i][j - 1] - R[i - 1][j - 1]) / f);
        }
    }
    e.value = R[n - 1][n - 1];
    e.error = std::abs(R[n - 1][n - 1] - R[n - 1][n - 2]);
    e.converged = true;
    if (n >= 3)
        e.converged = std::abs(x[n - 1] - x[n - 2]) <= std::abs(x[n - 2] - x[n - 3]);
    return e;
}

namespace {

struct Profile {
    V S, lapS;
    V3 gradS;
};

struct PreparedBank {
    std::vector<Profile> prof;
    std::vector<int> which;            // profile index per test
    std::vector<std::vector<double>> T; // [test][slice]
    int o0 = 0, o1 = -1;
    bool in_O(int n) const { return n >= o0 && n <= o1; }
};

PreparedBank prepare_bank(const Ops& o, const Grid& g, const TestBank& bank) {
    bank.validate();
    PreparedBank pb;
    std::vector<std::pair<Eigen::Vector3d, double>> keys;
    for (const TestFunction& c : bank.items) {
        int idx = -1;
        for (std::size_t k = 0; k < keys.size(); ++k)
            if (keys[k].first == c.xc && keys[k].second == c.radius) idx = int(k);
        if (idx < 0) {
            idx = int(keys.size());
            keys.emplace_back(c.xc, c.radius);
            Profile p;
            p.S.resize(o.n);
            for (int k = 0; k < g.nz; ++k)
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i)
                        p.S[(std::size_t(k) * g.ny + j) * g.nx + i] = c.space(g.position(i, j, k));
            p.lapS = o.lap(p.S);
            p.gradS = o.grad(p.S);
            pb.prof.push_back(std::move(p));
        }
        pb.which.push_back(idx);
        std::vector<double> T(g.nt);
        for (int n = 0; n < g.nt; ++n) T[n] = c.time(g.time(n));
        pb.T.push_back(std::move(T));
    }
    pb.o0 = g.nt;
    pb.o1 = -1;
    for (const auto& T : pb.T)
        for (int n = 0; n < g.nt; ++n)
            if (T[n] != 0.0) {
                pb.o0 = std::min(pb.o0, n);
                pb.o1 = std::max(pb.o1, n);
            }
    if (pb.o1 < 0) throw DomainError("test bank has no support on the sampled time slices");
    if (pb.o0 < 1 || pb.o1 > g.nt - 2)
        throw DomainError("test bank support reaches the boundary time slices");
    return pb;
}

// Per-slice, per-profile pairing storage.
struct SliceTable {
    int first = 0;
    std::size_t nprof = 0;
    std::vector<double> v;
    SliceTable() = default;
    SliceTable(int first_, int last, std::size_t nprof_)
        : first(first_), nprof(nprof_), v(std::size_t(last - first_ + 1) * nprof_, 0.0) {}
    double& at(int n, std::size_t k) { return v[std::size_t(n - first) * nprof + k]; }
    double at(int n, std::size_t k) const { return v[std::size_t(n - first) * nprof + k]; }
};

struct Pairer {
    const PreparedBank& pb;
    double vol;
    double scalar(const V& F, std::size_t k) const {
        const V& S = pb.prof[k].S;
        double s = 0.0;
        for (std::size_t p = 0; p < F.size(); ++p) s += F[p] * S[p];
        return s * vol;
    }
    double lap(const V& F, std::size_t k) const {
        const V& S = pb.prof[k].lapS;
        double s = 0.0;
        for (std::size_t p = 0; p < F.size(); ++p) s += F[p] * S[p];
        return s * vol;
    }
    // <div F, S> = -<F, grad S>
    double div(const V3& F, std::size_t k) const {
        const V3& G = pb.prof[k].gradS;
        double s = 0.0;
        for (std::size_t p = 0; p < F[0].size(); ++p) s += dot3(F, G, p);
        return -s * vol;
    }
};

// sum_n a(n, k_j) T_j(n) dt over the pairing slices, optionally applying a time difference.
enum class TimeOp { none, d2, d4 };

std::vector<double> time_sum(const PreparedBank& pb, const SliceTable& a, double dt, TimeOp op) {
    std::vector<double> out(pb.T.size(), 0.0);
    for (std::size_t j = 0; j < pb.T.size(); ++j) {
        const std::size_t k = std::size_t(pb.which[j]);
        double s = 0.0;
        for (int n = pb.o0; n <= pb.o1; ++n) {
            const double T = pb.T[j][n];
            if (T == 0.0) continue;
            double val = 0.0;
            switch (op) {
            case TimeOp::none: val = a.at(n, k); break;
            case TimeOp::d2: val = (a.at(n + 1, k) - a.at(n - 1, k)) / (2.0 * dt); break;
            case TimeOp::d4:
                val = (a.at(n - 2, k) - 8.0 * a.at(n - 1, k) + 8.0 * a.at(n + 1, k) - a.at(n + 2, k)) / (12.0 * dt);
                break;
            }
            s += val * T;
        }
        out[j] = s * dt;
    }
    return out;
}

void check_balance_inputs(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                          const FieldSnapshot& f, const FieldSnapshot& g) {
    for (const FieldSnapshot* x : {&u, &b, &f, &g}) {
        x->require_components(3, "energy balance");
        x->require_finite();
        require_same_grid(u, *x, "energy balance");
    }
    P.require_components(1, "energy balance");
    P.require_finite();
    require_same_grid(u, P, "energy balance");
}

// Spatially mollified fields for one input slice.
struct Bundle {
    V3 u, b, Wu, Wb;
    V P;
};

} // namespace

BalanceScan balance_scan(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                         const FieldSnapshot& f, const FieldSnapshot& g, const MollifierLadder& ladder,
                         const TestBank& bank, const BalanceOptions& opt) {
    check_balance_inputs(u, b, P, f, g);
    const Grid& gr = u.grid();
    ladder.validate(gr);
    const Ops o(workspace_for(gr));
    const PreparedBank pb = prepare_bank(o, gr, bank);
    const std::size_t np = pb.prof.size(), nj = bank.items.size();
    const Pairer pr{pb, gr.cell_volume()};
    const double dt = gr.dt;
    const int e0 = pb.o0 - 2, e1 = pb.o1 + 2;
    if (e0 < 0 || e1 > gr.nt - 1)
        throw DomainError("energy balance needs two sampled slices beyond the test bank support");

    BalanceScan out;
    // unmollified pieces
    SliceTable eT(e0, e1, np), lapT(pb.o0, pb.o1, np), gT(pb.o0, pb.o1, np), cT(pb.o0, pb.o1, np),
        wT(pb.o0, pb.o1, np), pT(pb.o0, pb.o1, np), rT(pb.o0, pb.o1, np);
    double res_max = 0.0, scale_max = 0.0;
    for (int n = e0; n <= e1; ++n) {
        const V3 un = o.load3(u, n), bn = o.load3(b, n);
        V E(o.n);
        for (std::size_t p = 0; p < o.n; ++p) E[p] = dot3(un, un, p) + dot3(bn, bn, p);
        for (std::size_t k = 0; k < np; ++k) eT.at(n, k) = pr.scalar(E, k);
        if (!pb.in_O(n)) continue;
        const Jac Ju = o.jac(un), Jb = o.jac(bn);
        const V3 fn = o.load3(f, n), gn = o.load3(g, n);
        const V Pn = o.load(P, n, 0);
        V G(o.n), W(o.n);
        for (std::size_t p = 0; p < o.n; ++p) {
            G[p] = o.grad_energy(Ju, p) + o.grad_energy(Jb, p);
            W[p] = dot3(fn, un, p) + dot3(gn, bn, p);
        }
        V3 Pf = o.zeros3();
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < o.n; ++p) Pf[c][p] = Pn[p] * (un[c][p] + bn[c][p]);
        const V3 C = cubic_flux(un, bn);
        // discrete MHD residual with central time differences
        const V3 Nu = o.adv(bn, Ju), Nb = o.adv(un, Jb), Lu = o.lap(un), Lb = o.lap(bn), gP = o.grad(Pn);
        const V3 up = o.load3(u, n + 1), um = o.load3(u, n - 1), bp = o.load3(b, n + 1), bm = o.load3(b, n - 1);
        V R(o.n);
        for (std::size_t p = 0; p < o.n; ++p) {
            double ru2 = 0.0, rb2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double ru = (up[c][p] - um[c][p]) / (2.0 * dt) - Lu[c][p] + Nu[c][p] + gP[c][p] - fn[c][p];
                const double rb = (bp[c][p] - bm[c][p]) / (2.0 * dt) - Lb[c][p] + Nb[c][p] + gP[c][p] - gn[c][p];
                ru2 += ru * ru;
                rb2 += rb * rb;
                res_max = std::max({res_max, std::abs(ru), std::abs(rb)});
                scale_max = std::max({scale_max, std::abs(Lu[c][p]) + std::abs(Nu[c][p]) + std::abs(gP[c][p]) +
                                                     std::abs(fn[c][p]),
                                      std::abs(Lb[c][p]) + std::abs(Nb[c][p]) + std::abs(gP[c][p]) +
                                          std::abs(gn[c][p])});
            }
            R[p] = 2.0 * (std::sqrt(dot3(un, un, p) * ru2) + std::sqrt(dot3(bn, bn, p) * rb2));
        }
        for (std::size_t k = 0; k < np; ++k) {
            lapT.at(n, k) = pr.lap(E, k);
            gT.at(n, k) = pr.scalar(G, k);
            cT.at(n, k) = pr.div(C, k);
            wT.at(n, k) = pr.scalar(W, k);
            pT.at(n, k) = pr.div(Pf, k);
            rT.at(n, k) = pr.scalar(R, k);
        }
    }
    out.relative_residual = scale_max > 0.0 ? res_max / scale_max : 0.0;
    if (!opt.waive_residual_check && out.relative_residual > opt.residual_tol) {
        std::ostringstream os;
        os << "energy balance: relative MHD residual " << out.relative_residual << " exceeds " << opt.residual_tol
           << " (waive the check to proceed)";
        throw ValidationError(os.str());
    }
    out.dE2 = time_sum(pb, eT, dt, TimeOp::d2);
    out.dE4 = time_sum(pb, eT, dt, TimeOp::d4);
    out.lapE = time_sum(pb, lapT, dt, TimeOp::none);
    out.grad2 = time_sum(pb, gT, dt, TimeOp::none);
    out.cubic = time_sum(pb, cT, dt, TimeOp::none);
    out.work = time_sum(pb, wT, dt, TimeOp::none);
    out.pflux = time_sum(pb, pT, dt, TimeOp::none);
    out.resid_scale = time_sum(pb, rT, dt, TimeOp::none);

    // mollified ladder
    DefectTable& tab = out.table;
    tab.alphas = ladder.alphas;
    tab.epsilons = ladder.epsilons;
    tab.n_tests = nj;
    const std::size_t na = ladder.alphas.size(), ne = ladder.epsilons.size();
    tab.pressure.assign(na * ne * nj, 0.0);
    tab.residual.assign(na * ne * nj, 0.0);
    tab.mu.assign(ne * nj, 0.0);
    std::vector<std::vector<double>> tw(na);
    int mmax = 0;
    for (std::size_t a = 0; a < na; ++a) {
        tw[a] = time_weights(ladder.theta, ladder.alphas[a], dt);
        mmax = std::max(mmax, int(tw[a].size() / 2));
    }
    const int m0 = pb.o0 - 1, m1 = pb.o1 + 1;
    if (m0 - mmax < 0 || m1 + mmax > gr.nt - 1)
        throw DomainError("time mollifier window around the test bank support exits the sampled slices");
    std::vector<V> syms(ne);
    for (std::size_t e = 0; e < ne; ++e) syms[e] = space_kernel_symbol(o.ws, ladder.phi, ladder.epsilons[e]);

    for (std::size_t e = 0; e < ne; ++e) {
        const V& sym = syms[e];
        std::map<int, Bundle> ring;
        SliceTable muT(pb.o0, pb.o1, np);
        auto load = [&](int s) {
            if (ring.count(s)) return;
            Bundle B;
            const V3 us = o.load3(u, s), bs = o.load3(b, s), fs = o.load3(f, s), gs = o.load3(g, s);
            const V3 Nu = o.adv(bs, o.jac(us)), Nb = o.adv(us, o.jac(bs));
            const V3 Lu = o.lap(us), Lb = o.lap(bs);
            V3 Wu = o.zeros3(), Wb = o.zeros3();
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < o.n; ++p) {
                    Wu[c][p] = Lu[c][p] - Nu[c][p] + fs[c][p];
                    Wb[c][p] = Lb[c][p] - Nb[c][p] + gs[c][p];
                }
            B.u = o.conv(us, sym);
            B.b = o.conv(bs, sym);
            B.Wu = o.conv(Wu, sym);
            B.Wb = o.conv(Wb, sym);
            B.P = o.conv(o.load(P, s, 0), sym);
            if (pb.in_O(s)) {
                const V3 Nue = o.conv(Nu, sym), Nbe = o.conv(Nb, sym);
                V M(o.n);
                for (std::size_t p = 0; p < o.n; ++p) M[p] = 2.0 * dot3(B.u, Nue, p) + 2.0 * dot3(B.b, Nbe, p);
                for (std::size_t k = 0; k < np; ++k) muT.at(s, k) = pr.scalar(M, k) - cT.at(s, k);
            }
            ring.emplace(s, std::move(B));
        };
        std::vector<SliceTable> eA(na, SliceTable(m0, m1, np)), sA(na, SliceTable(pb.o0, pb.o1, np)),
            dA(na, SliceTable(pb.o0, pb.o1, np));
        for (int n = m0; n <= m1; ++n) {
            for (int s = n - mmax; s <= n + mmax; ++s) load(s);
            while (!ring.empty() && ring.begin()->first < n - mmax) ring.erase(ring.begin());
            for (std::size_t a = 0; a < na; ++a) {
                const std::vector<double>& w = tw[a];
                const int m = int(w.size() / 2);
                Bundle M{o.zeros3(), o.zeros3(), o.zeros3(), o.zeros3(), o.zeros()};
                const bool inO = pb.in_O(n);
                for (int j = 0; j <= 2 * m; ++j) {
                    const Bundle& src = ring.at(n - m + j);
                    const double wj = w[j];
                    for (int c = 0; c < 3; ++c)
                        for (std::size_t p = 0; p < o.n; ++p) {
                            M.u[c][p] += wj * src.u[c][p];
                            M.b[c][p] += wj * src.b[c][p];
                            if (inO) {
                                M.Wu[c][p] += wj * src.Wu[c][p];
                                M.Wb[c][p] += wj * src.Wb[c][p];
                            }
                        }
                    if (inO)
                        for (std::size_t p = 0; p < o.n; ++p) M.P[p] += wj * src.P[p];
                }
                V E(o.n);
                for (std::size_t p = 0; p < o.n; ++p) E[p] = dot3(M.u, M.u, p) + dot3(M.b, M.b, p);
                for (std::size_t k = 0; k < np; ++k) eA[a].at(n, k) = pr.scalar(E, k);
                if (!inO) continue;
                V S1(o.n);
                V3 F = o.zeros3();
                for (std::size_t p = 0; p < o.n; ++p) {
                    S1[p] = 2.0 * (dot3(M.u, M.Wu, p) + dot3(M.b, M.Wb, p));
                    for (int c = 0; c < 3; ++c) F[c][p] = M.P[p] * (M.u[c][p] + M.b[c][p]);
                }
                for (std::size_t k = 0; k < np; ++k) {
                    sA[a].at(n, k) = pr.scalar(S1, k);
                    dA[a].at(n, k) = pr.div(F, k);
                }
            }
        }
        const std::vector<double> mu = time_sum(pb, muT, dt, TimeOp::none);
        for (std::size_t j = 0; j < nj; ++j) tab.mu[e * nj + j] = mu[j];
        for (std::size_t a = 0; a < na; ++a) {
            const auto dE = time_sum(pb, eA[a], dt, TimeOp::d2);
            const auto S1 = time_sum(pb, sA[a], dt, TimeOp::none);
            const auto D = time_sum(pb, dA[a], dt, TimeOp::none);
            for (std::size_t j = 0; j < nj; ++j) {
                tab.pressure[(a * ne + e) * nj + j] = D[j];
                tab.residual[(a * ne + e) * nj + j] = dE[j] - S1[j] + 2.0 * D[j];
            }
        }
    }

    if (opt.companion) {
        const CutoffLadder& L = *opt.companion;
        tab.eta.assign(ne * nj, 0.0);
        SliceTable evT(pb.o0 - 1, pb.o1 + 1, np), bal(pb.o0, pb.o1, np);
        std::vector<SliceTable> etaT(ne, SliceTable(pb.o0, pb.o1, np));
        for (int n = pb.o0 - 1; n <= pb.o1 + 1; ++n) {
            const bool inO = pb.in_O(n);
            const CompanionSlice cs = companion_at(u, b, f, g, L, n, inO);
            V Ev(o.n);
            for (std::size_t p = 0; p < o.n; ++p) Ev[p] = dot3(cs.v, cs.v, p) + dot3(cs.h, cs.h, p);
            for (std::size_t k = 0; k < np; ++k) evT.at(n, k) = pr.scalar(Ev, k);
            if (!inO) continue;
            const Jac Jv = o.jac(cs.v), Jh = o.jac(cs.h);
            const V3 C = cubic_flux(cs.v, cs.h);
            V G(o.n), W(o.n);
            V3 Q = o.zeros3();
            for (std::size_t p = 0; p < o.n; ++p) {
                G[p] = o.grad_energy(Jv, p) + o.grad_energy(Jh, p);
                W[p] = dot3(cs.v, cs.k, p) + dot3(cs.h, cs.l, p);
                for (int c = 0; c < 3; ++c) Q[c][p] = cs.q[p] * cs.v[c][p] + cs.r[p] * cs.h[c][p];
            }
            std::vector<double> cdiv(np);
            for (std::size_t k = 0; k < np; ++k) {
                cdiv[k] = pr.div(C, k);
                bal.at(n, k) = pr.lap(Ev, k) - 2.0 * pr.scalar(G, k) - cdiv[k] - 2.0 * pr.div(Q, k) + 2.0 * pr.scalar(W, k);
            }
            for (std::size_t e = 0; e < ne; ++e) {
                const V core = eta_core(o, cs.v, cs.h, syms[e]);
                for (std::size_t k = 0; k < np; ++k) etaT[e].at(n, k) = pr.scalar(core, k) - cdiv[k];
            }
        }
        const auto dEv = time_sum(pb, evT, dt, TimeOp::d2);
        const auto rest = time_sum(pb, bal, dt, TimeOp::none);
        out.companion_balance.resize(nj);
        for (std::size_t j = 0; j < nj; ++j) out.companion_balance[j] = rest[j] - dEv[j];
        for (std::size_t e = 0; e < ne; ++e) {
            const auto eta = time_sum(pb, etaT[e], dt, TimeOp::none);
            for (std::size_t j = 0; j < nj; ++j) tab.eta[e * nj + j] = eta[j];
        }
    }
    return out;
}

DefectTable energy_balance_defect(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                                  const FieldSnapshot& f, const FieldSnapshot& g, const MollifierLadder& ladder,
                                  const TestBank& bank, const BalanceOptions& opt) {
    return balance_scan(u, b, P, f, g, ladder, bank, opt).table;
}

PressureLimit pressure_defect_limit(const DefectTable& t, double alpha_ratio, double epsilon_ratio) {
    const std::size_t na = t.alphas.size(), ne = t.epsilons.size(), nj = t.n_tests;
    PressureLimit L;
    L.value.resize(nj);
    L.error.resize(nj);
    L.converged.resize(nj);
    L.alpha_limit.resize(ne * nj);
    L.alpha_error.resize(ne * nj);
    const std::size_t nd = std::min(na, ne);
    L.joint.resize(nj);
    L.joint_diff.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        std::vector<double> eps_vals(ne);
        double worst_alpha = 0.0;
        bool conv = true;
        for (std::size_t e = 0; e < ne; ++e) {
            std::vector<double> xs(na);
            for (std::size_t a = 0; a < na; ++a) xs[a] = t.P(a, e, j);
            const Extrapolation ea = richardson(xs, alpha_ratio);
            L.alpha_limit[e * nj + j] = ea.value;
            L.alpha_error[e * nj + j] = ea.error;
            eps_vals[e] = ea.value;
            worst_alpha = std::max(worst_alpha, ea.error);
            conv = conv && ea.converged;
        }
        const Extrapolation ee = richardson(eps_vals, epsilon_ratio);
        L.value[j] = ee.value;
        L.error[j] = ee.error + worst_alpha;
        L.converged[j] = conv && ee.converged;
        std::vector<double> diag(nd);
        for (std::size_t i = 0; i < nd; ++i) diag[i] = t.P(na - nd + i, ne - nd + i, j);
        L.joint[j] = richardson(diag, epsilon_ratio).value;
        L.joint_diff[j] = L.joint[j] - L.value[j];
    }
    return L;
}

PressureLimit pressure_defect_limit(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                                    const MollifierLadder& ladder, const TestBank& bank) {
    FieldSnapshot zero(u.grid(), 3, "zero");
    BalanceOptions opt;
    opt.waive_residual_check = true;
    const DefectTable t = energy_balance_defect(u, b, P, zero, zero, ladder, bank, opt);
    return pressure_defect_limit(t, ladder.alpha_ratio(), ladder.epsilon_ratio());
}

LambdaReport lambda_assemble(const FieldSnapshot& u, const FieldSnapshot& b, const FieldSnapshot& P,
                             const FieldSnapshot& f, const FieldSnapshot& g, const CutoffLadder& cutoff,
                             const MollifierLadder& ladder, const TestBank& bank, const LambdaOptions& opt) {
    BalanceOptions bo;
    bo.residual_tol = opt.residual_tol;
    bo.waive_residual_check = opt.waive_residual_check;
    bo.companion = &cutoff;
    LambdaReport R;
    R.scan = balance_scan(u, b, P, f, g, ladder, bank, bo);
    const BalanceScan& s = R.scan;
    R.pressure = pressure_defect_limit(s.table, ladder.alpha_ratio(), ladder.epsilon_ratio());
    const std::size_t nj = s.table.n_tests, ne = s.table.epsilons.size();
    R.direct.resize(nj);
    R.direct_error.resize(nj);
    R.via_eta.resize(nj);
    R.via_eta_error.resize(nj);
    R.routes_agree.resize(nj);
    R.smooth_reference.resize(nj);
    double scale = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
        const double base = -s.dE4[j] + s.lapE[j] - 2.0 * s.grad2[j] - s.cubic[j] + 2.0 * s.work[j];
        R.direct[j] = base - 2.0 * R.pressure.value[j];
        R.direct_error[j] = 2.0 * R.pressure.error[j] + std::abs(s.dE2[j] - s.dE4[j]);
        R.smooth_reference[j] = base - 2.0 * s.pflux[j];
        std::vector<double> eta(ne);
        for (std::size_t e = 0; e < ne; ++e) eta[e] = s.table.eta[e * nj + j];
        const Extrapolation ex = richardson(eta, ladder.epsilon_ratio());
        R.via_eta[j] = ex.value;
        R.via_eta_error[j] = ex.error;
        R.routes_agree[j] = std::abs(R.direct[j] - R.via_eta[j]) <= R.direct_error[j] + R.via_eta_error[j];
        scale = std::max(scale, s.resid_scale[j]);
    }
    R.tol_sign = std::isnan(opt.tol_sign) ? 10.0 * scale : opt.tol_sign;
    R.min_value = *std::min_element(R.direct.begin(), R.direct.end());
    R.min_margin = R.min_value + R.tol_sign;
    R.dissipative = R.min_margin >= 0.0;
    return R;
}

} // namespace mhdlab
