#include "mhdlab/sim.hpp"
#include "mhdlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace mhdlab {

namespace {

using Vec = Eigen::Vector3d;
using Pattern = std::function<Vec(const Vec&)>;
using TimeFactor = std::function<double(double)>;

struct Component {
    Pattern S;
    TimeFactor a, da;
    Vec drift = Vec::Zero();
};

Vec abc(const Vec& x) {
    return {std::sin(x[2]) + std::cos(x[1]), std::sin(x[0]) + std::cos(x[2]), std::sin(x[1]) + std::cos(x[0])};
}

Vec taylor_green(const Vec& x) {
    return {std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]), 0.0};
}

struct Dataset {
    Component u, b;
};

Dataset dataset(const std::string& name, double A) {
    if (name == "taylor-green") {
        Component c{taylor_green, [A](double t) { return A * std::exp(-2.0 * t); },
                    [A](double t) { return -2.0 * A * std::exp(-2.0 * t); }};
        return {c, c};
    }
    if (name == "abc-drift") {
        Component u{abc, [A](double t) { return A * std::exp(-t); }, [A](double t) { return -A * std::exp(-t); }};
        Component b = u;
        b.drift = Vec(0.3, 0.2, 0.1);
        return {u, b};
    }
    if (name == "product-modes") {
        Component u{[](const Vec& x) {
                        return Vec(std::sin(x[1]) * std::sin(2 * x[2]), std::sin(x[0]) * std::sin(x[2]),
                                   std::sin(2 * x[0]) * std::sin(x[1]));
                    },
                    [A](double t) { return A * std::cos(t); }, [A](double t) { return -A * std::sin(t); }};
        Component b{[](const Vec& x) {
                        return Vec(std::cos(2 * x[1]) * std::cos(x[2]), std::cos(x[2]) * std::cos(x[0]),
                                   std::cos(x[0]) * std::cos(2 * x[1]));
                    },
                    [A](double t) { return A * std::sin(t + 0.5); }, [A](double t) { return A * std::cos(t + 0.5); }};
        return {u, b};
    }
    throw ValidationError("unknown manufactured solution '" + name + "' (expected taylor-green, abc-drift or product-modes)");
}

Vec wave_coords(const Grid& g, const Vec& x) {
    return {x[0] * 2.0 * M_PI / g.box_length[0], x[1] * 2.0 * M_PI / g.box_length[1],
            x[2] * 2.0 * M_PI / g.box_length[2]};
}

// Samples a(t) S(x - c t) into out, returns S(x - c t) without the factor in shape.
void sample(const Grid& g, const Component& c, double t, double* const shape[3]) {
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const Vec v = c.S(wave_coords(g, g.position(i, j, k) - c.drift * t));
                const std::size_t p = (std::size_t(k) * g.ny + j) * g.nx + i;
                for (int a = 0; a < 3; ++a) shape[a][p] = v[a];
            }
}

// dt X = a' S - a (c.grad) S, with the spatial derivative taken spectrally.
void time_derivative_of(const SpectralWorkspace& ws, const Component& c, double t, double* const shape[3],
                        double* const out[3]) {
    const std::size_t n = ws.real_size();
    const double a = c.a(t), da = c.da(t);
    std::vector<double> gx(n), gy(n), gz(n);
    for (int k = 0; k < 3; ++k) {
        for (std::size_t p = 0; p < n; ++p) out[k][p] = da * shape[k][p];
        if (c.drift.squaredNorm() == 0.0) continue;
        spec::gradient_phys(ws, shape[k], gx.data(), gy.data(), gz.data());
        for (std::size_t p = 0; p < n; ++p)
            out[k][p] -= a * (c.drift[0] * gx[p] + c.drift[1] * gy[p] + c.drift[2] * gz[p]);
    }
}

void laplacian_phys(const SpectralWorkspace& ws, const double* f, double* out) {
    SpecArray fh = ws.forward(f);
    spec::laplacian(ws, fh.data(), fh.data());
    ws.inverse(fh.data(), out);
}

} // namespace

const std::vector<std::string>& manufactured_names() {
    static const std::vector<std::string> names{"taylor-green", "abc-drift", "product-modes"};
    return names;
}

ElsasserState manufactured_solution(const std::string& name, const Grid& g, double amplitude) {
    g.validate();
    const Dataset d = dataset(name, amplitude);
    const SpectralWorkspace& ws = workspace_for(g);
    const std::size_t n = g.slice_size();
    ElsasserState s{FieldSnapshot(g, 3, "u"), FieldSnapshot(g, 3, "b"), FieldSnapshot(), FieldSnapshot(g, 3, "f"),
                    FieldSnapshot(g, 3, "g")};
    // f and g temporarily hold dt u and dt b
    for_each_index(g.nt, [&](int t) {
        const double time = g.time(t);
        std::vector<double> buf(3 * n);
        auto fill = [&](const Component& c, FieldSnapshot& X, FieldSnapshot& D) {
            double* shape[3] = {buf.data(), buf.data() + n, buf.data() + 2 * n};
            sample(g, c, time, shape);
            double* dt[3] = {D.slice(t, 0), D.slice(t, 1), D.slice(t, 2)};
            time_derivative_of(ws, c, time, shape, dt);
            const double a = c.a(time);
            for (int k = 0; k < 3; ++k)
                for (std::size_t p = 0; p < n; ++p) X.slice(t, k)[p] = a * shape[k][p];
        };
        fill(d.u, s.u, s.f);
        fill(d.b, s.b, s.g);
    });
    s.P = solve_pressure(s.u, s.b);
    s.P.set_name("P");
    for_each_index(g.nt, [&](int t) {
        std::vector<double> lap(n), gp[3] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
        std::vector<double> adv[3] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
        spec::gradient_phys(ws, s.P.slice(t, 0), gp[0].data(), gp[1].data(), gp[2].data());
        auto force = [&](const FieldSnapshot& X, const FieldSnapshot& Y, FieldSnapshot& F) {
            const double* xp[3] = {X.slice(t, 0), X.slice(t, 1), X.slice(t, 2)};
            const double* yp[3] = {Y.slice(t, 0), Y.slice(t, 1), Y.slice(t, 2)};
            double* ap[3] = {adv[0].data(), adv[1].data(), adv[2].data()};
            spec::advect_phys(ws, yp, xp, ap, false);
            for (int k = 0; k < 3; ++k) {
                laplacian_phys(ws, X.slice(t, k), lap.data());
                double* f = F.slice(t, k);
                for (std::size_t p = 0; p < n; ++p) f[p] += -lap[p] + adv[k][p] + gp[k][p];
            }
        };
        force(s.u, s.b, s.f);
        force(s.b, s.u, s.g);
    });
    return s;
}

MhdResidual mhd_residual(const ElsasserState& s, int time_order) {
    if (time_order != 2 && time_order != 4) throw ValidationError("residual time order must be 2 or 4");
    for (const FieldSnapshot* x : {&s.u, &s.b, &s.f, &s.g}) {
        x->require_components(3, "mhd_residual");
        require_same_grid(s.u, *x, "mhd_residual");
    }
    s.P.require_components(1, "mhd_residual");
    require_same_grid(s.u, s.P, "mhd_residual");
    const Grid& g = s.u.grid();
    const int m = time_order / 2;
    if (g.nt < 2 * m + 1) throw DomainError("mhd_residual: too few time slices for the stencil");
    const SpectralWorkspace& ws = workspace_for(g);
    const std::size_t n = g.slice_size();
    const int count = g.nt - 2 * m;
    std::vector<MhdResidual> per(count);
    for_each_index(count, [&](int idx) {
        const int t = idx + m;
        std::vector<double> lap(n), gp[3], adv[3];
        for (int k = 0; k < 3; ++k) {
            gp[k].resize(n);
            adv[k].resize(n);
        }
        spec::gradient_phys(ws, s.P.slice(t, 0), gp[0].data(), gp[1].data(), gp[2].data());
        MhdResidual& r = per[idx];
        auto one = [&](const FieldSnapshot& X, const FieldSnapshot& Y, const FieldSnapshot& F, double& mx) {
            const double* xp[3] = {X.slice(t, 0), X.slice(t, 1), X.slice(t, 2)};
            const double* yp[3] = {Y.slice(t, 0), Y.slice(t, 1), Y.slice(t, 2)};
            double* ap[3] = {adv[0].data(), adv[1].data(), adv[2].data()};
            spec::advect_phys(ws, yp, xp, ap, false);
            for (int k = 0; k < 3; ++k) {
                laplacian_phys(ws, X.slice(t, k), lap.data());
                const double* f = F.slice(t, k);
                for (std::size_t p = 0; p < n; ++p) {
                    double dt;
                    if (m == 1)
                        dt = (X.slice(t + 1, k)[p] - X.slice(t - 1, k)[p]) / (2.0 * g.dt);
                    else
                        dt = (X.slice(t - 2, k)[p] - 8.0 * X.slice(t - 1, k)[p] + 8.0 * X.slice(t + 1, k)[p] -
                              X.slice(t + 2, k)[p]) /
                             (12.0 * g.dt);
                    const double res = dt - lap[p] + adv[k][p] + gp[k][p] - f[p];
                    mx = std::max(mx, std::abs(res));
                    r.scale = std::max({r.scale, std::abs(dt), std::abs(lap[p]), std::abs(adv[k][p]),
                                        std::abs(gp[k][p]), std::abs(f[p])});
                }
            }
        };
        one(s.u, s.b, s.f, r.max_u);
        one(s.b, s.u, s.g, r.max_b);
    });
    MhdResidual out;
    for (const MhdResidual& r : per) {
        out.max_u = std::max(out.max_u, r.max_u);
        out.max_b = std::max(out.max_b, r.max_b);
        out.scale = std::max(out.scale, r.scale);
    }
    return out;
}

void SimConfig::validate() const {
    grid.validate();
    if (substeps < 1) throw ValidationError("substeps must be at least 1");
    if (!(cfl > 0.0 && cfl < 1.0)) throw ValidationError("cfl must lie in ]0,1[");
    if (initial != "taylor-green" && initial != "abc" && initial != "random")
        throw ValidationError("unknown initial condition '" + initial + "' (expected taylor-green, abc or random)");
    if (forcing != "none" && forcing != "abc")
        throw ValidationError("unknown forcing '" + forcing + "' (expected none or abc)");
    if (random_kmax < 1) throw ValidationError("random_kmax must be positive");
}

namespace {

void project(const SpectralWorkspace& ws, SpecArray (&x)[3]) {
    for (auto& c : x) ws.dealias(c);
    spec::leray(ws, x);
}

void from_pattern(const SpectralWorkspace& ws, const Pattern& S, double A, SpecArray (&out)[3]) {
    const Grid& g = ws.grid();
    const std::size_t n = g.slice_size();
    std::vector<double> buf(3 * n);
    double* shape[3] = {buf.data(), buf.data() + n, buf.data() + 2 * n};
    sample(g, {S, nullptr, nullptr}, 0.0, shape);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t p = 0; p < n; ++p) shape[c][p] *= A;
        out[c] = ws.forward(shape[c]);
    }
    project(ws, out);
}

void random_field(const SpectralWorkspace& ws, int kmax, double A, std::mt19937_64& rng, SpecArray (&out)[3]) {
    const std::size_t n = ws.real_size();
    std::normal_distribution<double> nd;
    std::vector<double> x(n);
    for (int c = 0; c < 3; ++c) {
        for (double& v : x) v = nd(rng);
        out[c] = ws.forward(x.data());
        for (std::size_t s = 0; s < out[c].size(); ++s) {
            const auto m = ws.mode(s);
            if (m[0] * m[0] + m[1] * m[1] + m[2] * m[2] > kmax * kmax || (m[0] == 0 && m[1] == 0 && m[2] == 0))
                out[c][s] = 0.0;
        }
    }
    project(ws, out);
    double mx = 0.0;
    for (int c = 0; c < 3; ++c) {
        ws.inverse(out[c].data(), x.data());
        for (double v : x) mx = std::max(mx, std::abs(v));
    }
    if (mx > 0.0)
        for (auto& c : out)
            for (auto& v : c) v *= A / mx;
}

} // namespace

Simulation::Simulation(const SimConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    space_ = cfg_.grid;
    space_.nt = 1;
    space_.t_start = cfg_.grid.t_start;
    ws_ = &workspace_for(space_);
    time_ = cfg_.grid.t_start;
    const std::size_t ns = ws_->spec_size();
    std::mt19937_64 rng(cfg_.seed);
    if (cfg_.initial == "taylor-green")
        from_pattern(*ws_, taylor_green, cfg_.amplitude, u_);
    else if (cfg_.initial == "abc")
        from_pattern(*ws_, abc, cfg_.amplitude, u_);
    else
        random_field(*ws_, cfg_.random_kmax, cfg_.amplitude, rng, u_);
    if (cfg_.aligned) {
        for (int c = 0; c < 3; ++c) b_[c] = u_[c];
    } else if (cfg_.initial == "random") {
        random_field(*ws_, cfg_.random_kmax, cfg_.amplitude, rng, b_);
    } else {
        // rotated copy at half amplitude so that u and b differ
        const Pattern shifted = cfg_.initial == "abc" ? Pattern([](const Vec& x) { return abc(Vec(x[1], x[2], x[0])); })
                                                      : Pattern([](const Vec& x) {
                                                            const Vec v = taylor_green(Vec(x[0], x[2], x[1]));
                                                            return Vec(v[0], v[2], v[1]);
                                                        });
        from_pattern(*ws_, shifted, 0.5 * cfg_.amplitude, b_);
    }
    for (int c = 0; c < 3; ++c) {
        f_[c].assign(ns, cplx(0.0));
        g_[c].assign(ns, cplx(0.0));
    }
    if (cfg_.forcing == "abc") {
        from_pattern(*ws_, abc, cfg_.forcing_amplitude, f_);
        for (int c = 0; c < 3; ++c) g_[c] = f_[c];
    }
}

void Simulation::set_state(const FieldSnapshot& u, const FieldSnapshot& b, int slice) {
    if (!u.grid().same_space(space_) || !b.grid().same_space(space_))
        throw ValidationError("set_state: grid mismatch");
    u.require_components(3, "set_state");
    b.require_components(3, "set_state");
    for (int c = 0; c < 3; ++c) {
        u_[c] = ws_->forward(u.slice(slice, c));
        b_[c] = ws_->forward(b.slice(slice, c));
    }
    project(*ws_, u_);
    project(*ws_, b_);
}

void Simulation::rhs(const SpecArray (&u)[3], const SpecArray (&b)[3], SpecArray (&du)[3], SpecArray (&db)[3]) const {
    const std::size_t n = ws_->real_size();
    std::vector<double> buf(12 * n);
    double* up[3] = {buf.data(), buf.data() + n, buf.data() + 2 * n};
    double* bp[3] = {buf.data() + 3 * n, buf.data() + 4 * n, buf.data() + 5 * n};
    double* nu[3] = {buf.data() + 6 * n, buf.data() + 7 * n, buf.data() + 8 * n};
    double* nb[3] = {buf.data() + 9 * n, buf.data() + 10 * n, buf.data() + 11 * n};
    for (int c = 0; c < 3; ++c) {
        ws_->inverse(u[c].data(), up[c]);
        ws_->inverse(b[c].data(), bp[c]);
    }
    const double* cu[3] = {up[0], up[1], up[2]};
    const double* cb[3] = {bp[0], bp[1], bp[2]};
    spec::advect_phys(*ws_, cb, cu, nu, true);
    spec::advect_phys(*ws_, cu, cb, nb, true);
    for (int c = 0; c < 3; ++c) {
        du[c] = ws_->forward(nu[c]);
        db[c] = ws_->forward(nb[c]);
        for (std::size_t s = 0; s < du[c].size(); ++s) {
            du[c][s] = f_[c][s] - du[c][s];
            db[c][s] = g_[c][s] - db[c][s];
        }
    }
    project(*ws_, du);
    project(*ws_, db);
}

double Simulation::max_speed() const {
    const std::size_t n = ws_->real_size();
    std::vector<double> x[3] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    double mx = 0.0;
    for (const SpecArray* F : {u_, b_}) {
        for (int c = 0; c < 3; ++c) ws_->inverse(F[c].data(), x[c].data());
        for (std::size_t p = 0; p < n; ++p)
            mx = std::max(mx, std::sqrt(x[0][p] * x[0][p] + x[1][p] * x[1][p] + x[2][p] * x[2][p]));
    }
    return mx;
}

double Simulation::cfl_number(double dt) const {
    const double hmin = std::min({space_.h(0), space_.h(1), space_.h(2)});
    return dt * max_speed() / hmin;
}

void Simulation::step(double dt) {
    if (!(dt > 0.0)) throw ValidationError("step: dt must be positive");
    const double c = cfl_number(dt);
    if (c > cfg_.cfl) {
        throw CflError("step rejected: CFL number " + std::to_string(c) + " exceeds " + std::to_string(cfg_.cfl) +
                       " at t = " + std::to_string(time_));
    }
    const std::size_t ns = ws_->spec_size();
    const auto& k2 = ws_->k2();
    std::vector<double> E(ns), E2(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        E[s] = std::exp(-k2[s] * dt);
        E2[s] = std::exp(-0.5 * k2[s] * dt);
    }
    SpecArray k1u[3], k1b[3], k2u[3], k2b[3], k3u[3], k3b[3], k4u[3], k4b[3], tu[3], tb[3];
    rhs(u_, b_, k1u, k1b);
    for (int c = 0; c < 3; ++c) {
        tu[c].resize(ns);
        tb[c].resize(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            tu[c][s] = E2[s] * (u_[c][s] + 0.5 * dt * k1u[c][s]);
            tb[c][s] = E2[s] * (b_[c][s] + 0.5 * dt * k1b[c][s]);
        }
    }
    rhs(tu, tb, k2u, k2b);
    for (int c = 0; c < 3; ++c)
        for (std::size_t s = 0; s < ns; ++s) {
            tu[c][s] = E2[s] * u_[c][s] + 0.5 * dt * k2u[c][s];
            tb[c][s] = E2[s] * b_[c][s] + 0.5 * dt * k2b[c][s];
        }
    rhs(tu, tb, k3u, k3b);
    for (int c = 0; c < 3; ++c)
        for (std::size_t s = 0; s < ns; ++s) {
            tu[c][s] = E[s] * u_[c][s] + dt * E2[s] * k3u[c][s];
            tb[c][s] = E[s] * b_[c][s] + dt * E2[s] * k3b[c][s];
        }
    rhs(tu, tb, k4u, k4b);
    for (int c = 0; c < 3; ++c)
        for (std::size_t s = 0; s < ns; ++s) {
            u_[c][s] = E[s] * u_[c][s] +
                       dt / 6.0 * (E[s] * k1u[c][s] + 2.0 * E2[s] * (k2u[c][s] + k3u[c][s]) + k4u[c][s]);
            b_[c][s] = E[s] * b_[c][s] +
                       dt / 6.0 * (E[s] * k1b[c][s] + 2.0 * E2[s] * (k2b[c][s] + k3b[c][s]) + k4b[c][s]);
        }
    time_ += dt;
}

FieldSnapshot Simulation::to_field(const SpecArray (&x)[3], const char* name) const {
    Grid g = space_;
    g.t_start = time_;
    FieldSnapshot out(g, 3, name);
    for (int c = 0; c < 3; ++c) ws_->inverse(x[c].data(), out.slice(0, c));
    return out;
}

FieldSnapshot Simulation::u() const { return to_field(u_, "u"); }
FieldSnapshot Simulation::b() const { return to_field(b_, "b"); }
FieldSnapshot Simulation::f() const { return to_field(f_, "f"); }
FieldSnapshot Simulation::g() const { return to_field(g_, "g"); }

double Simulation::energy() const {
    const FieldSnapshot U = u(), B = b();
    return 0.5 * (U.values().square().sum() + B.values().square().sum()) * space_.cell_volume();
}

double Simulation::dissipation() const {
    return (gradient_energy(u()).values().sum() + gradient_energy(b()).values().sum()) * space_.cell_volume();
}

double Simulation::work() const {
    return ((f().values() * u().values()).sum() + (g().values() * b().values()).sum()) * space_.cell_volume();
}

ElsasserState record(Simulation& sim, int stride) {
    if (stride < 1) throw ValidationError("record: stride must be at least 1");
    const Grid& g = sim.config().grid;
    const double dt = g.dt / stride;
    Grid out = g;
    out.t_start = sim.time();
    ElsasserState s{FieldSnapshot(out, 3, "u"), FieldSnapshot(out, 3, "b"), FieldSnapshot(), FieldSnapshot(out, 3, "f"),
                    FieldSnapshot(out, 3, "g")};
    const std::size_t n = g.slice_size();
    for (int t = 0; t < g.nt; ++t) {
        if (t > 0)
            for (int k = 0; k < stride; ++k) sim.step(dt);
        const FieldSnapshot U = sim.u(), B = sim.b(), F = sim.f(), G = sim.g();
        for (int c = 0; c < 3; ++c) {
            std::copy(U.slice(0, c), U.slice(0, c) + n, s.u.slice(t, c));
            std::copy(B.slice(0, c), B.slice(0, c) + n, s.b.slice(t, c));
            std::copy(F.slice(0, c), F.slice(0, c) + n, s.f.slice(t, c));
            std::copy(G.slice(0, c), G.slice(0, c) + n, s.g.slice(t, c));
        }
    }
    s.P = solve_pressure(s.u, s.b);
    s.P.set_name("P");
    return s;
}

ElsasserState simulate(const SimConfig& cfg) {
    Simulation sim(cfg);
    return record(sim, cfg.substeps);
}

} // namespace mhdlab
