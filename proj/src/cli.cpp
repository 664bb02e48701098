#include "mhdlab/cli.hpp"
#include "mhdlab/dissipation.hpp"
#include "mhdlab/elsasser.hpp"
#include "mhdlab/fsnap.hpp"
#include "mhdlab/localization.hpp"
#include "mhdlab/norms.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/regularity.hpp"
#include "mhdlab/sim.hpp"
#include "mhdlab/spectral.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace mhdlab {

#ifndef MHDLAB_VERSION
#define MHDLAB_VERSION "0.0.0"
#endif
const char* const kVersion = MHDLAB_VERSION;

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
    std::string command;
    std::string config;
    std::vector<std::string> inputs;
    std::string out;
    bool strict = false;
    int threads = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> p, q, alpha;
    // raw values from the parser
    std::uint64_t seed_raw = 0;
    double p_raw = 0, q_raw = 0, alpha_raw = 0;
    bool inverse = false;
};

// ---------------------------------------------------------------- config helpers

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config '" + path + "'");
    try {
        json j = json::parse(is);
        if (!j.is_object()) throw ValidationError("config root must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
}

json section(const json& user, const char* key) {
    if (!user.contains(key)) return json::object();
    if (!user[key].is_object()) throw ValidationError(std::string("config '") + key + "' must be an object");
    return user[key];
}

template <class T>
T get(const json& j, const char* key, const T& def) {
    if (!j.contains(key) || j[key].is_null()) return def;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config key '") + key + "' has the wrong type");
    }
}

json vec3(const Eigen::Vector3d& x) { return json::array({x[0], x[1], x[2]}); }

Eigen::Vector3d to_vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json cyl(const ParabolicCylinder& Q) { return json{{"t0", Q.t0}, {"x0", vec3(Q.x0)}, {"r", Q.r}}; }

json grid_json(const Grid& g) {
    return json{{"n", json::array({g.nx, g.ny, g.nz})},
                {"box_length", json::array({g.box_length[0], g.box_length[1], g.box_length[2]})},
                {"nt", g.nt},
                {"dt", g.dt},
                {"t_start", g.t_start}};
}

double hmax(const Grid& g) { return std::max({g.h(0), g.h(1), g.h(2)}); }
double lmin(const Grid& g) { return std::min({g.box_length[0], g.box_length[1], g.box_length[2]}); }

// ---------------------------------------------------------------- data

struct Data {
    ElsasserState s;
    json resolved;
    json info = json::object();
};

FieldSnapshot zeros_like(const FieldSnapshot& u, const char* name) { return FieldSnapshot(u.grid(), 3, name); }

ElsasserState read_state(const std::vector<std::string>& inputs) {
    std::vector<std::string> paths = inputs;
    if (paths.size() == 1 && fs::is_directory(paths[0])) {
        const fs::path d = paths[0];
        paths.clear();
        for (const char* n : {"u", "b", "P", "f", "g"}) {
            const fs::path p = d / (std::string(n) + ".fsnap");
            if (fs::exists(p)) paths.push_back(p.string());
            else if (std::string(n) == "u" || std::string(n) == "b")
                throw ValidationError("input directory lacks " + p.string());
            else
                paths.push_back("");
        }
    }
    if (paths.size() < 2 || paths.size() > 5)
        throw ValidationError("expected inputs u b [P [f g]] or a directory holding them");
    for (const auto& p : paths)
        if (!p.empty() && !fs::exists(p)) throw ValidationError("input file '" + p + "' does not exist");
    ElsasserState s;
    s.u = read_fsnap(paths[0]);
    s.b = read_fsnap(paths[1]);
    require_same_grid(s.u, s.b, "inputs");
    s.P = paths.size() > 2 && !paths[2].empty() ? read_fsnap(paths[2]) : solve_pressure(s.u, s.b);
    if (paths.size() > 4 && !paths[3].empty() && !paths[4].empty()) {
        s.f = read_fsnap(paths[3]);
        s.g = read_fsnap(paths[4]);
    } else {
        s.f = zeros_like(s.u, "f");
        s.g = zeros_like(s.u, "g");
    }
    for (const FieldSnapshot* x : {&s.P, &s.f, &s.g}) require_same_grid(s.u, *x, "inputs");
    return s;
}

SimConfig sim_config(const json& ds, const Grid& g, std::uint64_t seed, json& resolved) {
    const json sim = section(ds, "sim");
    SimConfig c;
    c.grid = g;
    c.substeps = get(sim, "substeps", 4);
    c.initial = get<std::string>(sim, "initial", "taylor-green");
    c.amplitude = get(sim, "amplitude", 1.0);
    c.random_kmax = get(sim, "random_kmax", 3);
    c.aligned = get(sim, "aligned", false);
    c.forcing = get<std::string>(sim, "forcing", "none");
    c.forcing_amplitude = get(sim, "forcing_amplitude", 0.0);
    c.cfl = get(sim, "cfl", 0.5);
    c.seed = seed;
    c.validate();
    resolved["sim"] = json{{"substeps", c.substeps},       {"initial", c.initial},
                           {"amplitude", c.amplitude},     {"random_kmax", c.random_kmax},
                           {"aligned", c.aligned},         {"forcing", c.forcing},
                           {"forcing_amplitude", c.forcing_amplitude}, {"cfl", c.cfl}};
    return c;
}

Data load_data(const json& user, const Options& opt, std::uint64_t seed) {
    Data d;
    if (!opt.inputs.empty()) {
        d.s = read_state(opt.inputs);
        d.resolved = json{{"source", "files"}, {"inputs", opt.inputs}, {"grid", grid_json(d.s.u.grid())}};
        return d;
    }
    const json ds = section(user, "dataset");
    const std::string source = get<std::string>(ds, "source", "manufactured");
    const int n = get(ds, "n", 32);
    const double L = get(ds, "box_length", 2.0 * M_PI);
    Grid g = Grid::cube(n, L, get(ds, "nt", 64), get(ds, "dt", 0.01), get(ds, "t_start", 0.0));
    g.validate();
    d.resolved = json{{"source", source}};
    if (source == "manufactured") {
        const std::string name = get<std::string>(ds, "name", "taylor-green");
        const double A = get(ds, "amplitude", 1.0);
        d.resolved["name"] = name;
        d.resolved["amplitude"] = A;
        d.resolved["grid"] = grid_json(g);
        d.s = manufactured_solution(name, g, A);
    } else if (source == "simulation") {
        d.resolved["grid"] = grid_json(g);
        const SimConfig c = sim_config(ds, g, seed, d.resolved);
        d.s = simulate(c);
    } else {
        throw ValidationError("dataset source must be manufactured or simulation (or pass --input)");
    }
    return d;
}

// ---------------------------------------------------------------- parameter blocks

struct Params {
    json resolved = json::object();
    CutoffLadder cutoff;
    MollifierLadder ladder;
    TestBank bank;
    ParabolicCylinder bank_cylinder;
    MorreyParams morrey;
    HolderParams holder;
    CriterionParams criterion;
    std::vector<SpaceTimePoint> points;
    int space_stride = 4, time_stride = 4;
    SerrinExponents serrin;
    int serrin_stride = 2;
    double serrin_shrink = 0.5;
    int correct_slices = 5;
    double tau0 = 6.0;
    double residual_tol = 1e-2, tol_sign = std::numeric_limits<double>::quiet_NaN();
    double harmonic_tol = 1e-7, manufactured_tol = 1e-6, divergence_tol = 1e-8;
    bool waive_residual = false;
};

std::vector<double> get_list(const json& j, const char* key, const std::vector<double>& def) {
    if (!j.contains(key) || j[key].is_null()) return def;
    if (!j[key].is_array()) throw ValidationError(std::string("config key '") + key + "' must be an array");
    return j[key].get<std::vector<double>>();
}

std::vector<double> default_morrey_radii(const Grid& g, const json& m) {
    const double r_max = get(m, "r_max", std::min(lmin(g) / 4.0, MorreyParams::max_time_radius(g)));
    std::vector<double> r = MorreyParams::geometric_radii(g, r_max);
    if (r.empty()) {
        std::ostringstream os;
        os << "default Morrey radii: r_max = " << r_max << " is below 2h = " << 2.0 * hmax(g)
           << " (the sampled time range bounds r_max); record more slices or set morrey.radii";
        throw ValidationError(os.str());
    }
    return r;
}

Params resolve_params(const json& user, const Grid& g, const Options& opt, std::uint64_t seed) {
    Params P;
    const double h = hmax(g);
    // cut-off
    {
        const json c = section(user, "cutoff");
        const double t0 = get(c, "t0", g.time(g.nt / 2));
        const Eigen::Vector3d x0 =
            c.contains("x0") && !c["x0"].is_null() ? to_vec3(c["x0"], "cutoff x0") : g.position(g.nx / 2, g.ny / 2, g.nz / 2);
        // default rho: 0.445 Lmin, clamped so B(x0, rho) keeps the cell margins of the box
        double fit = 0.445 * lmin(g);
        for (int a = 0; a < 3; ++a)
            fit = std::min({fit, x0[a] - 0.5 * g.h(a), g.box_length[a] - 1.5 * g.h(a) - x0[a]});
        const double rho = get(c, "rho", fit * (1.0 - 1e-12));
        const std::vector<double> fr = get_list(c, "fractions", {0.5, 0.6, 0.7, 0.8});
        if (fr.size() != 4) throw ValidationError("cutoff fractions must list rho0, rho3, rho2, rho1 over rho");
        CutoffRadii radii = CutoffRadii::from_fractions(rho, fr[0], fr[1], fr[2], fr[3]);
        if (c.contains("radii")) {
            const std::vector<double> r = get_list(c, "radii", {});
            if (r.size() != 5) throw ValidationError("cutoff radii must list rho0, rho3, rho2, rho1, rho");
            radii = {r[0], r[1], r[2], r[3], r[4]};
        }
        radii.validate();
        const CutoffProfile prof = parse_cutoff_profile(get<std::string>(c, "profile", "quintic"));
        P.cutoff = build_cutoff(g, t0, x0, radii, prof);
        P.resolved["cutoff"] = json{{"t0", t0},
                                    {"x0", vec3(x0)},
                                    {"radii", json::array({radii.rho0, radii.rho3, radii.rho2, radii.rho1, radii.rho})},
                                    {"profile", to_string(prof)}};
    }
    // mollifier ladders and test bank
    {
        const json m = section(user, "mollifier");
        P.ladder.theta = parse_bump_profile(get<std::string>(m, "theta", "exponential"));
        P.ladder.phi = parse_bump_profile(get<std::string>(m, "phi", "exponential"));
        P.ladder.alphas = get_list(m, "alphas", {16 * g.dt, 8 * g.dt, 4 * g.dt, 2 * g.dt});
        const double s2 = std::sqrt(2.0);
        P.ladder.epsilons = get_list(m, "epsilons", {2 * h * 2 * s2, 2 * h * 2, 2 * h * s2, 2 * h});
        P.ladder.validate(g);
        P.resolved["mollifier"] = json{{"theta", to_string(P.ladder.theta)},
                                       {"phi", to_string(P.ladder.phi)},
                                       {"alphas", P.ladder.alphas},
                                       {"epsilons", P.ladder.epsilons}};
        const json tb = section(user, "test_bank");
        const double frac = get(tb, "radius_fraction", 0.25);
        P.bank_cylinder = P.cutoff.cylinder(frac * P.cutoff.radii.rho0);
        P.bank = TestBank::lattice(P.bank_cylinder);
        P.resolved["test_bank"] = json{{"radius_fraction", frac}, {"cylinder", cyl(P.bank_cylinder)}};
    }
    // norms
    {
        const json m = section(user, "morrey");
        P.morrey.p = opt.p.value_or(get(m, "p", 3.0));
        P.morrey.q = opt.q.value_or(get(m, "q", 6.0));
        P.morrey.scan_radii = get_list(m, "radii", default_morrey_radii(g, m));
        P.morrey.center_stride = get(m, "stride", 2);
        P.morrey.validate();
        P.tau0 = get(m, "tau0", 6.0);
        if (!(P.tau0 > 5.0)) throw ValidationError("morrey tau0 must exceed 5");
        P.resolved["morrey"] = json{{"p", P.morrey.p},
                                    {"q", P.morrey.q},
                                    {"radii", P.morrey.scan_radii},
                                    {"stride", P.morrey.center_stride},
                                    {"tau0", P.tau0}};
        const json ho = section(user, "holder");
        P.holder.alpha = opt.alpha.value_or(get(ho, "alpha", 0.5));
        P.holder.pair_budget = get<std::size_t>(ho, "pair_budget", 200000);
        P.holder.seed = seed;
        P.holder.validate();
        P.resolved["holder"] = json{{"alpha", P.holder.alpha}, {"pair_budget", P.holder.pair_budget}};
    }
    // criterion
    {
        const json c = section(user, "criterion");
        const CriterionParams d = CriterionParams::defaults(g);
        P.criterion.epsilon_star = get(c, "epsilon_star", d.epsilon_star);
        P.criterion.radii = get_list(c, "radii", d.radii);
        P.criterion.window = get(c, "window", d.window);
        P.criterion.irregular_slope = get(c, "irregular_slope", d.irregular_slope);
        P.criterion.validate(g);
        json pts = json::array();
        if (c.contains("points") && !c["points"].is_null()) {
            for (const auto& p : c["points"]) {
                if (!p.is_array() || p.size() != 4) throw ValidationError("criterion points are [t, x, y, z]");
                P.points.push_back({p[0].get<double>(), {p[1].get<double>(), p[2].get<double>(), p[3].get<double>()}});
            }
        } else {
            P.points.push_back({P.cutoff.t0, P.cutoff.x0});
        }
        for (const auto& p : P.points) pts.push_back(json::array({p.t, p.x[0], p.x[1], p.x[2]}));
        P.space_stride = get(c, "space_stride", 4);
        P.time_stride = get(c, "time_stride", 4);
        P.resolved["criterion"] = json{{"epsilon_star", P.criterion.epsilon_star},
                                       {"radii", P.criterion.radii},
                                       {"window", P.criterion.window},
                                       {"irregular_slope", P.criterion.irregular_slope},
                                       {"points", pts},
                                       {"space_stride", P.space_stride},
                                       {"time_stride", P.time_stride}};
    }
    // serrin
    {
        const json s = section(user, "serrin");
        P.serrin.p0 = get(s, "p0", 3.0);
        P.serrin.q0 = get(s, "q0", 6.0);
        P.serrin.p1 = get(s, "p1", 3.0);
        P.serrin.q1 = get(s, "q1", 6.0);
        P.serrin.validate();
        P.serrin_stride = get(s, "stride", 2);
        P.serrin_shrink = get(s, "shrink", 0.5);
        P.resolved["serrin"] = json{{"p0", P.serrin.p0}, {"q0", P.serrin.q0}, {"p1", P.serrin.p1},
                                    {"q1", P.serrin.q1}, {"stride", P.serrin_stride}, {"shrink", P.serrin_shrink}};
    }
    {
        const json c = section(user, "correct");
        P.correct_slices = get(c, "slices", 5);
        if (P.correct_slices < 3) throw ValidationError("correct.slices must be at least 3");
        P.resolved["correct"] = json{{"slices", P.correct_slices}};
    }
    {
        const json t = section(user, "tolerances");
        P.residual_tol = get(t, "residual_tol", 1e-2);
        P.waive_residual = get(t, "waive_residual_check", false);
        P.tol_sign = get(t, "tol_sign", std::numeric_limits<double>::quiet_NaN());
        P.harmonic_tol = get(t, "harmonic_identity", 1e-7);
        P.manufactured_tol = get(t, "manufactured_residual", 1e-6);
        P.divergence_tol = get(t, "divergence", 1e-8);
        json ts = json{{"residual_tol", P.residual_tol}, {"waive_residual_check", P.waive_residual}};
        ts["tol_sign"] = std::isnan(P.tol_sign) ? json(nullptr) : json(P.tol_sign);
        ts["harmonic_identity"] = P.harmonic_tol;
        ts["manufactured_residual"] = P.manufactured_tol;
        ts["divergence"] = P.divergence_tol;
        P.resolved["tolerances"] = ts;
    }
    return P;
}

// ---------------------------------------------------------------- reports

struct Report {
    json results = json::object();
    json checks = json::object();
    std::vector<std::pair<std::string, std::string>> csv; // file name, contents
    std::vector<std::pair<std::string, FieldSnapshot>> fields;
};

double max_on(const FieldSnapshot& X, const ParabolicCylinder& Q) {
    const CylinderCells c = restrict_cylinder_window(X.grid(), Q);
    double m = 0.0;
    for (int t : c.slices)
        for (std::size_t p : c.points) {
            double s = 0.0;
            for (int k = 0; k < X.components(); ++k) s += X.slice(t, k)[p] * X.slice(t, k)[p];
            m = std::max(m, std::sqrt(s));
        }
    return m;
}

FieldSnapshot minus(const FieldSnapshot& a, const FieldSnapshot& b) {
    FieldSnapshot out = a;
    out.values() -= b.values();
    return out;
}

json residual_json(const MhdResidual& r) {
    return json{{"max_u", r.max_u}, {"max_b", r.max_b}, {"scale", r.scale}, {"relative", r.relative()}};
}

void step_dataset(const Data& d, const Params& P, Report& R) {
    const MhdResidual r = mhd_residual(d.s, d.s.u.nt() >= 5 ? 4 : 2);
    R.results["dataset"] = json{{"grid", grid_json(d.s.u.grid())},
                                {"mhd_residual", residual_json(r)},
                                {"max_div_u", max_divergence(d.s.u)},
                                {"max_div_b", max_divergence(d.s.b)}};
    (void)P;
}

void step_correct(const ElsasserState& s, const Params& P, Report& R, CompanionSystem* keep = nullptr) {
    const Grid& g = s.u.grid();
    const int c = std::clamp(int(std::lround((P.cutoff.t0 - g.t_start) / g.dt)), 0, g.nt - 1);
    const int count = std::min(P.correct_slices, g.nt);
    const int first = std::clamp(c - count / 2, 0, g.nt - count);
    const FieldSnapshot u = s.u.time_window(first, count), b = s.b.time_window(first, count),
                        f = s.f.time_window(first, count), gg = s.g.time_window(first, count);
    CompanionSystem cs = companion_system(u, b, f, gg, P.cutoff);
    const ParabolicCylinder Q0 = P.cutoff.cylinder(P.cutoff.radii.rho0);
    const double harm_v = max_on(minus(laplacian(cs.v), laplacian(u)), Q0);
    const double harm_h = max_on(minus(laplacian(cs.h), laplacian(b)), Q0);
    FieldSnapshot gb = gradient_energy(cs.beta), gc = gradient_energy(cs.gamma);
    gb.values() = gb.values().sqrt();
    gc.values() = gc.values().sqrt();
    const FieldSnapshot q = cs.pressures.q(), r = cs.pressures.r();
    const FieldSnapshot kk = minus(cs.forces.k(), cs.forces.k0), ll = minus(cs.forces.l(), cs.forces.l0);
    json res{{"slices", json{{"first", first}, {"count", count}, {"t_first", g.time(first)}}},
             {"cylinder_rho0", cyl(Q0)},
             {"harmonic_identity_v", harm_v},
             {"harmonic_identity_h", harm_h},
             {"beta_lipschitz", max_on(gb, Q0)},
             {"gamma_lipschitz", max_on(gc, Q0)},
             {"q_L3_2", lebesgue_cylinder_norm(q, Q0, 1.5, 1.5, true)},
             {"r_L3_2", lebesgue_cylinder_norm(r, Q0, 1.5, 1.5, true)},
             {"k_minus_k0_L2", lebesgue_cylinder_norm(kk, Q0, 2.0, 2.0, true)},
             {"l_minus_l0_L2", lebesgue_cylinder_norm(ll, Q0, 2.0, 2.0, true)},
             {"max_div_v", max_divergence(cs.v)},
             {"max_div_h", max_divergence(cs.h)}};
    const CompanionResidual cr = companion_residual(cs);
    res["companion_residual_v"] = max_on(cr.rv, Q0);
    res["companion_residual_h"] = max_on(cr.rh, Q0);
    R.results["correct"] = res;
    R.checks["harmonic_identity"] = std::max(harm_v, harm_h) <= P.harmonic_tol;
    if (keep) *keep = std::move(cs);
}

void step_norms_field(const FieldSnapshot& X, const Params& P, json& out) {
    const MorreyResult m = morrey_norm(X, P.morrey);
    const HolderResult h = holder_seminorm(X, P.holder);
    out = json{{"morrey", json{{"value", m.value}, {"argmax", cyl(m.argmax)}, {"cylinders", m.cylinders_scanned}}},
               {"holder", json{{"value", h.value},
                               {"a", json::array({h.a.t, h.a.k, h.a.j, h.a.i})},
                               {"b", json::array({h.b.t, h.b.k, h.b.j, h.b.i})},
                               {"pairs", h.pairs},
                               {"exhaustive", h.exhaustive}}}};
}

// M^{3,tau0} norms of 1_{Q_rho0} v and 1_{Q_rho0} h over the full sampled time range
void step_companion_morrey(const ElsasserState& s, const Params& P, Report& R) {
    MorreyParams mp = P.morrey;
    mp.p = 3.0;
    mp.q = P.tau0;
    const ParabolicCylinder Q0 = P.cutoff.cylinder(P.cutoff.radii.rho0);
    const MorreyResult mv = morrey_norm(harmonic_correction(s.u, P.cutoff), mp, Q0);
    const MorreyResult mh = morrey_norm(harmonic_correction(s.b, P.cutoff), mp, Q0);
    R.results["correct"]["v_morrey_3_tau0"] = mv.value;
    R.results["correct"]["h_morrey_3_tau0"] = mh.value;
    R.checks["companion_morrey_finite"] = std::isfinite(mv.value) && std::isfinite(mh.value);
}

void step_dissipation(const ElsasserState& s, const Params& P, Report& R) {
    LambdaOptions lo;
    lo.tol_sign = P.tol_sign;
    lo.residual_tol = P.residual_tol;
    lo.waive_residual_check = P.waive_residual;
    const LambdaReport L = lambda_assemble(s.u, s.b, s.P, s.f, s.g, P.cutoff, P.ladder, P.bank, lo);
    json tests = json::array();
    bool agree = true;
    for (std::size_t j = 0; j < L.direct.size(); ++j) {
        const TestFunction& c = P.bank.items[j];
        tests.push_back(json{{"tc", c.tc},
                             {"xc", vec3(c.xc)},
                             {"lambda", L.direct[j]},
                             {"lambda_error", L.direct_error[j]},
                             {"lambda_via_eta", L.via_eta[j]},
                             {"lambda_via_eta_error", L.via_eta_error[j]},
                             {"routes_agree", bool(L.routes_agree[j])},
                             {"smooth_reference", L.smooth_reference[j]},
                             {"pressure_defect", L.pressure.value[j]},
                             {"pressure_defect_error", L.pressure.error[j]},
                             {"pressure_joint_diff", L.pressure.joint_diff[j]},
                             {"pressure_converged", bool(L.pressure.converged[j])},
                             {"companion_balance", L.scan.companion_balance[j]}});
        agree = agree && L.routes_agree[j];
    }
    R.results["dissipation"] = json{{"tests", tests},
                                    {"tol_sign", L.tol_sign},
                                    {"min_lambda", L.min_value},
                                    {"min_margin", L.min_margin},
                                    {"dissipative", L.dissipative},
                                    {"relative_residual", L.scan.relative_residual}};
    R.checks["dissipative"] = L.dissipative;
    R.checks["routes_agree"] = agree;
    std::ostringstream os;
    os.precision(17);
    os << "test,alpha,epsilon,pressure,residual\n";
    const DefectTable& t = L.scan.table;
    for (std::size_t j = 0; j < t.n_tests; ++j)
        for (std::size_t a = 0; a < t.alphas.size(); ++a)
            for (std::size_t e = 0; e < t.epsilons.size(); ++e)
                os << j << ',' << t.alphas[a] << ',' << t.epsilons[e] << ',' << t.P(a, e, j) << ',' << t.Res(a, e, j)
                   << '\n';
    R.csv.emplace_back("defect_table.csv", os.str());
}

void step_criterion(const ElsasserState& s, const Params& P, Report& R) {
    const std::vector<PointVerdict> pv = gradient_density_scan(s.u, s.b, P.points, P.criterion);
    json pts = json::array();
    std::ostringstream os;
    os.precision(17);
    os << "point,r,G\n";
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const PointVerdict& v = pv[i];
        json slope = std::isnan(v.slope) ? json(nullptr) : json(v.slope);
        pts.push_back(json{{"t", v.point.t},
                           {"x", vec3(v.point.x)},
                           {"radii", v.radii},
                           {"G", v.G},
                           {"surrogate", v.surrogate},
                           {"slope", slope},
                           {"verdict", to_string(v.verdict)}});
        for (std::size_t k = 0; k < v.radii.size(); ++k) os << i << ',' << v.radii[k] << ',' << v.G[k] << '\n';
    }
    const SingularSetReport ss = singular_set_boxcount(s.u, s.b, P.criterion, P.space_stride, P.time_stride);
    json cands = json::array(), counts = json::array();
    for (const auto& c : ss.candidates) cands.push_back(json::array({c.t, c.x[0], c.x[1], c.x[2]}));
    for (const auto& c : ss.counts) counts.push_back(json{{"scale", c.scale}, {"count", c.count}});
    R.results["criterion"] = json{{"points", pts},
                                  {"singular_set",
                                   json{{"points_scanned", ss.points_scanned},
                                        {"candidates", cands},
                                        {"box_counts", counts},
                                        {"slope", std::isnan(ss.slope) ? json(nullptr) : json(ss.slope)}}}};
    R.csv.emplace_back("criterion_G.csv", os.str());
}

void step_serrin(const ElsasserState& s, const Params& P, Report& R) {
    const PhysicalFields ph = from_elsasser(s.u, s.b, s.f, s.g);
    const ParabolicCylinder region = P.cutoff.cylinder(P.cutoff.radii.rho0);
    const SerrinReport sr = serrin_hypothesis_check(ph.U, ph.B, region, P.serrin, P.serrin_stride, P.serrin_shrink);
    R.results["serrin"] = json{{"region", cyl(sr.region)},
                               {"shrunk", cyl(sr.shrunk)},
                               {"ordering_ok", sr.ordering_ok},
                               {"U_morrey", sr.U_morrey.value},
                               {"B_morrey", sr.B_morrey.value},
                               {"hypothesis_satisfied", sr.hypothesis_satisfied},
                               {"U_conclusion_Lq0", sr.U_conclusion},
                               {"B_conclusion_Lq1", sr.B_conclusion}};
    R.checks["serrin_hypothesis"] = sr.hypothesis_satisfied;
}

// ---------------------------------------------------------------- commands

std::uint64_t resolve_seed(const json& user, const Options& opt) {
    if (opt.seed) return *opt.seed;
    return get<std::uint64_t>(user, "seed", 1);
}

void keep_state(ElsasserState&& s, Report& R) {
    R.fields.emplace_back("u.fsnap", std::move(s.u));
    R.fields.emplace_back("b.fsnap", std::move(s.b));
    R.fields.emplace_back("P.fsnap", std::move(s.P));
    R.fields.emplace_back("f.fsnap", std::move(s.f));
    R.fields.emplace_back("g.fsnap", std::move(s.g));
}

int finish(const Options& opt, const json& config, Report& R) {
    bool ok = true;
    for (const auto& [k, v] : R.checks.items()) ok = ok && v.get<bool>();
    json rep{{"tool", "mhdlab"},
             {"version", kVersion},
             {"command", opt.command},
             {"config", config},
             {"results", R.results},
             {"checks", R.checks},
             {"status", ok ? "ok" : "tolerance-failure"}};
    const std::string text = rep.dump(2) + "\n";
    if (opt.out.empty()) {
        std::cout << text;
    } else {
        const fs::path dir = opt.out;
        fs::create_directories(dir);
        std::ofstream(dir / "report.json", std::ios::binary) << text;
        for (const auto& [name, body] : R.csv) std::ofstream(dir / name, std::ios::binary) << body;
        for (const auto& [name, f] : R.fields) write_fsnap(f, (dir / name).string());
        std::cout << opt.command << ": " << (ok ? "ok" : "tolerance-failure") << ", report in "
                  << (dir / "report.json").string() << "\n";
    }
    if (!ok) {
        for (const auto& [k, v] : R.checks.items())
            if (!v.get<bool>()) std::cerr << "check failed: " << k << "\n";
    }
    return (!ok && opt.strict) ? 3 : 0;
}

int cmd_synth_or_simulate(const Options& opt, const json& user) {
    if (opt.out.empty()) throw ValidationError(opt.command + " needs --out DIR");
    json ds = section(user, "dataset");
    if (opt.command == "simulate") ds["source"] = "simulation";
    else if (!ds.contains("source")) ds["source"] = "manufactured";
    json u2 = user;
    u2["dataset"] = ds;
    Options o2 = opt;
    o2.inputs.clear();
    const std::uint64_t seed = resolve_seed(user, opt);
    Data d = load_data(u2, o2, seed);
    json config{{"seed", seed}, {"dataset", d.resolved}};
    Params P;
    const json t = section(user, "tolerances");
    P.manufactured_tol = get(t, "manufactured_residual", 1e-6);
    P.divergence_tol = get(t, "divergence", 1e-8);
    config["tolerances"] = json{{"manufactured_residual", P.manufactured_tol}, {"divergence", P.divergence_tol}};
    Report R;
    step_dataset(d, P, R);
    const json& ds_res = R.results["dataset"];
    R.checks["divergence"] = std::max(ds_res["max_div_u"].get<double>(), ds_res["max_div_b"].get<double>()) <= P.divergence_tol;
    if (opt.command == "synth")
        R.checks["manufactured_residual"] = ds_res["mhd_residual"]["relative"].get<double>() <= P.manufactured_tol;
    keep_state(std::move(d.s), R);
    return finish(opt, config, R);
}

int cmd_elsasser(const Options& opt) {
    if (opt.out.empty()) throw ValidationError("elsasser needs --out DIR");
    if (opt.inputs.size() != 2 && opt.inputs.size() != 4)
        throw ValidationError("elsasser expects two or four input files (U B [F G], or u b [f g] with --inverse)");
    FieldSnapshot X = read_fsnap(opt.inputs[0]), Y = read_fsnap(opt.inputs[1]);
    FieldSnapshot F = opt.inputs.size() == 4 ? read_fsnap(opt.inputs[2]) : zeros_like(X, "F");
    FieldSnapshot G = opt.inputs.size() == 4 ? read_fsnap(opt.inputs[3]) : zeros_like(X, "G");
    Report R;
    json config{{"inputs", opt.inputs}, {"inverse", opt.inverse}};
    if (opt.inverse) {
        PhysicalFields ph = from_elsasser(X, Y, F, G);
        R.fields.emplace_back("U.fsnap", std::move(ph.U));
        R.fields.emplace_back("B.fsnap", std::move(ph.B));
        R.fields.emplace_back("F.fsnap", std::move(ph.F));
        R.fields.emplace_back("G.fsnap", std::move(ph.G));
    } else {
        ElsasserFields e = to_elsasser(X, Y, F, G);
        FieldSnapshot P = solve_pressure(e.u, e.b);
        R.results["pressure_residual"] = pressure_residual(e.u, e.b, P);
        keep_state({std::move(e.u), std::move(e.b), std::move(P), std::move(e.f), std::move(e.g)}, R);
    }
    R.results["grid"] = grid_json(X.grid());
    return finish(opt, config, R);
}

int cmd_norms(const Options& opt, const json& user) {
    if (opt.inputs.size() != 1) throw ValidationError("norms expects exactly one --input field");
    const FieldSnapshot X = read_fsnap(opt.inputs[0]);
    const std::uint64_t seed = resolve_seed(user, opt);
    const Grid& g = X.grid();
    const json m = section(user, "morrey");
    MorreyParams mp;
    mp.p = opt.p.value_or(get(m, "p", 3.0));
    mp.q = opt.q.value_or(get(m, "q", 6.0));
    mp.scan_radii = get_list(m, "radii", default_morrey_radii(g, m));
    mp.center_stride = get(m, "stride", 2);
    mp.validate();
    const json ho = section(user, "holder");
    HolderParams hp;
    hp.alpha = opt.alpha.value_or(get(ho, "alpha", 0.5));
    hp.pair_budget = get<std::size_t>(ho, "pair_budget", 200000);
    hp.seed = seed;
    hp.validate();
    json config{{"seed", seed},
                {"inputs", opt.inputs},
                {"morrey", json{{"p", mp.p}, {"q", mp.q}, {"radii", mp.scan_radii}, {"stride", mp.center_stride}}},
                {"holder", json{{"alpha", hp.alpha}, {"pair_budget", hp.pair_budget}}}};
    Params P;
    P.morrey = mp;
    P.holder = hp;
    Report R;
    json out;
    step_norms_field(X, P, out);
    R.results["field"] = X.name();
    R.results["norms"] = out;
    return finish(opt, config, R);
}

struct Context {
    std::uint64_t seed = 1;
    Data data;
    Params params;
    json config;
};

Context prepare(const Options& opt, const json& user) {
    Context c;
    c.seed = resolve_seed(user, opt);
    c.data = load_data(user, opt, c.seed);
    c.params = resolve_params(user, c.data.s.u.grid(), opt, c.seed);
    c.config = json{{"seed", c.seed}, {"dataset", c.data.resolved}};
    for (const auto& [k, v] : c.params.resolved.items()) c.config[k] = v;
    return c;
}

int cmd_state(const Options& opt, const json& user) {
    Context c = prepare(opt, user);
    Report R;
    const ElsasserState& s = c.data.s;
    if (opt.command == "correct") {
        CompanionSystem cs;
        step_correct(s, c.params, R, &cs);
        if (!opt.out.empty()) {
            R.fields.emplace_back("v.fsnap", std::move(cs.v));
            R.fields.emplace_back("h.fsnap", std::move(cs.h));
        }
    } else if (opt.command == "dissipation") {
        step_dissipation(s, c.params, R);
    } else if (opt.command == "criterion") {
        step_criterion(s, c.params, R);
    } else if (opt.command == "serrin") {
        step_serrin(s, c.params, R);
    } else { // pipeline
        step_dataset(c.data, c.params, R);
        step_correct(s, c.params, R);
        step_companion_morrey(s, c.params, R);
        json nu, nb;
        step_norms_field(s.u, c.params, nu);
        step_norms_field(s.b, c.params, nb);
        R.results["norms"] = json{{"u", nu}, {"b", nb}};
        step_dissipation(s, c.params, R);
        step_criterion(s, c.params, R);
        step_serrin(s, c.params, R);
        R.checks["singular_set_empty"] = R.results["criterion"]["singular_set"]["candidates"].empty();
    }
    return finish(opt, c.config, R);
}

int dispatch(const Options& opt) {
    int threads = opt.threads;
    if (threads <= 0)
        if (const char* env = std::getenv("MHDLAB_THREADS")) threads = std::atoi(env);
    if (threads > 0) set_threads(threads);
    const json user = load_config(opt.config);
    if (opt.command == "synth" || opt.command == "simulate") return cmd_synth_or_simulate(opt, user);
    if (opt.command == "elsasser") return cmd_elsasser(opt);
    if (opt.command == "norms") return cmd_norms(opt, user);
    return cmd_state(opt, user);
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"mhdlab: local energy and regularity diagnostics for incompressible MHD snapshots", "mhdlab"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Options opt;
    const std::vector<std::pair<std::string, std::string>> cmds{
        {"synth", "write a manufactured exact solution (u, b, P, f, g)"},
        {"simulate", "run the pseudo-spectral Elsasser solver and record snapshots"},
        {"elsasser", "convert U B [F G] to Elsasser variables (or back with --inverse)"},
        {"correct", "harmonic correction, correctors and companion system on the cut-off cylinder"},
        {"norms", "parabolic Morrey norm and Holder seminorm of one field"},
        {"dissipation", "local energy defect: pressure limit, lambda by two routes, sign verdict"},
        {"criterion", "small-gradient criterion at points and candidate singular set"},
        {"serrin", "localized Morrey hypotheses and conclusion norms"},
        {"pipeline", "all steps with one master report"}};
    for (const auto& [name, help] : cmds) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--input", opt.inputs, "input FSNAP1 files, or a directory with u b P f g");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_flag("--strict", opt.strict, "exit 3 when a tolerance check fails");
        sub->add_option("--threads", opt.threads, "worker threads (fallback: MHDLAB_THREADS)");
        CLI::Option* seed = sub->add_option("--seed", opt.seed_raw, "random seed");
        CLI::Option *p = nullptr, *q = nullptr, *alpha = nullptr;
        if (name == "norms" || name == "pipeline") {
            p = sub->add_option("--p", opt.p_raw, "Morrey integrability exponent");
            q = sub->add_option("--q", opt.q_raw, "Morrey scaling exponent");
            alpha = sub->add_option("--alpha", opt.alpha_raw, "Holder exponent");
        }
        if (name == "elsasser") sub->add_flag("--inverse", opt.inverse, "convert u b [f g] back to U B [F G]");
        sub->callback([&opt, n = name, seed, p, q, alpha] {
            opt.command = n;
            if (seed->count()) opt.seed = opt.seed_raw;
            if (p && p->count()) opt.p = opt.p_raw;
            if (q && q->count()) opt.q = opt.q_raw;
            if (alpha && alpha->count()) opt.alpha = opt.alpha_raw;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    try {
        return dispatch(opt);
    } catch (const std::exception& e) {
        std::cerr << "mhdlab " << opt.command << ": " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"mhdlab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(int(argv.size()), argv.data());
}

} // namespace mhdlab
