#include "mhdlab/regularity.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mhdlab {

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::regular_candidate: return "regular-candidate";
    case Verdict::irregular_candidate: return "irregular-candidate";
    default: return "inconclusive";
    }
}

void CriterionParams::validate(const Grid& g) const {
    if (!(epsilon_star > 0.0)) throw ValidationError("epsilon_star must be positive");
    if (radii.empty()) throw ValidationError("criterion radii ladder is empty");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] < radii[i - 1])) throw ValidationError("criterion radii must be strictly decreasing");
    const double hmax = std::max({g.h(0), g.h(1), g.h(2)});
    if (!(radii.back() >= 2.0 * hmax * (1.0 - 1e-12)))
        throw ValidationError("smallest criterion radius must span at least 2 cells");
    if (window < 1 || window > int(radii.size())) throw ValidationError("criterion window must lie in [1, #radii]");
}

CriterionParams CriterionParams::defaults(const Grid& g) {
    const double h = std::max({g.h(0), g.h(1), g.h(2)});
    CriterionParams p;
    // time room around the middle slice
    const double tm = g.time(g.nt / 2);
    const double room = std::min(tm - g.t_start, g.time(g.nt - 1) - tm) - 0.5 * g.dt;
    const double r0 = 2.0 * h;
    double q = 2.0;
    if ((4.0 * r0) * (4.0 * r0) > room) q = std::pow(std::max(room, 0.0) / (r0 * r0), 0.25) * (1.0 - 1e-9);
    if (q > 1.05) {
        p.radii = {r0 * q * q, r0 * q, r0};
    } else {
        p.radii = {r0};
        p.window = 1;
    }
    return p;
}

FieldSnapshot gradient_density(const FieldSnapshot& u, const FieldSnapshot& b) {
    u.require_components(3, "gradient_density");
    b.require_components(3, "gradient_density");
    require_same_grid(u, b, "gradient_density");
    FieldSnapshot D = gradient_energy(u);
    D.values() += gradient_energy(b).values();
    D.set_name("grad_density");
    return D;
}

namespace {

double loglog_slope(const std::vector<double>& r, const std::vector<double>& G, std::size_t first) {
    const std::size_t n = r.size() - first;
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < r.size(); ++i) {
        if (!(G[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double x = std::log(r[i]), y = std::log(G[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    return den != 0.0 ? (n * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
}

void finish_verdict(PointVerdict& v, const CriterionParams& p) {
    const std::size_t first = v.radii.size() - std::size_t(p.window);
    v.surrogate = *std::max_element(v.G.begin() + first, v.G.end());
    v.slope = loglog_slope(v.radii, v.G, first);
    v.verdict = classify(v.surrogate, v.slope, p);
}

} // namespace

Verdict classify(double surrogate, double slope, const CriterionParams& p) {
    if (surrogate < p.epsilon_star) return Verdict::regular_candidate;
    if (std::isnan(slope) || slope <= p.irregular_slope) return Verdict::irregular_candidate;
    return Verdict::inconclusive;
}

std::vector<PointVerdict> gradient_density_scan(const FieldSnapshot& u, const FieldSnapshot& b,
                                                const std::vector<SpaceTimePoint>& points,
                                                const CriterionParams& params) {
    const Grid& g = u.grid();
    params.validate(g);
    // validate geometry before the expensive part
    std::vector<std::vector<CylinderCells>> cells(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        for (double r : params.radii) {
            try {
                cells[i].push_back(restrict_cylinder(g, {points[i].t, points[i].x, r}));
            } catch (const DomainError& e) {
                std::ostringstream os;
                os << "point " << i << " too near the boundary for r = " << r << ": " << e.what();
                throw DomainError(os.str());
            }
        }
    const FieldSnapshot D = gradient_density(u, b);
    std::vector<PointVerdict> out(points.size());
    for_each_index(int(points.size()), [&](int i) {
        PointVerdict& v = out[i];
        v.point = points[i];
        v.radii = params.radii;
        for (std::size_t k = 0; k < params.radii.size(); ++k) {
            const CylinderCells& c = cells[i][k];
            double s = 0.0;
            for (int t : c.slices) {
                const double* d = D.slice(t, 0);
                for (std::size_t p : c.points) s += d[p];
            }
            v.G.push_back(s * c.cell_measure / params.radii[k]);
        }
        finish_verdict(v, params);
    });
    return out;
}

std::size_t parabolic_cover_count(const std::vector<SpaceTimePoint>& pts, double s) {
    std::vector<char> covered(pts.size(), 0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (covered[i]) continue;
        ++n;
        for (std::size_t j = i; j < pts.size(); ++j)
            if (!covered[j] && (pts[j].x - pts[i].x).norm() <= s && std::abs(pts[j].t - pts[i].t) <= s * s)
                covered[j] = 1;
    }
    return n;
}

SingularSetReport singular_set_boxcount(const FieldSnapshot& u, const FieldSnapshot& b, const CriterionParams& params,
                                        int space_stride, int time_stride) {
    const Grid& g = u.grid();
    params.validate(g);
    if (space_stride < 1 || time_stride < 1) throw ValidationError("scan strides must be positive");
    const FieldSnapshot D = gradient_density(u, b);
    const std::size_t nr = params.radii.size(), N = g.slice_size();
    const double cell = g.dt * g.cell_volume();

    // centers whose largest cylinder fits
    std::vector<std::pair<int, std::size_t>> centers;
    for (int t = 0; t < g.nt; t += time_stride)
        for (int k = 0; k < g.nz; k += space_stride)
            for (int j = 0; j < g.ny; j += space_stride)
                for (int i = 0; i < g.nx; i += space_stride)
                    if (cylinder_inside(g, {g.time(t), g.position(i, j, k), params.radii.front()}))
                        centers.emplace_back(t, (std::size_t(k) * g.ny + j) * g.nx + i);

    std::vector<std::vector<double>> G(centers.size(), std::vector<double>(nr));
    for (std::size_t ri = 0; ri < nr; ++ri) {
        const double r = params.radii[ri], r2 = r * r;
        const std::vector<double> B = ball_sums(D, r);
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const int t = centers[c].first;
            double s = 0.0;
            for (int n = 0; n < g.nt; ++n)
                if (std::abs(g.time(n) - g.time(t)) < r2) s += B[std::size_t(n) * N + centers[c].second];
            G[c][ri] = s * cell / r;
        }
    }

    SingularSetReport rep;
    rep.points_scanned = centers.size();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        PointVerdict v;
        v.radii = params.radii;
        v.G = G[c];
        finish_verdict(v, params);
        if (v.verdict != Verdict::irregular_candidate) continue;
        const std::size_t sp = centers[c].second;
        const int i = int(sp % g.nx), j = int((sp / g.nx) % g.ny), k = int(sp / (std::size_t(g.nx) * g.ny));
        rep.candidates.push_back({g.time(centers[c].first), g.position(i, j, k)});
    }
    const double h = std::max({g.h(0), g.h(1), g.h(2)});
    const double Lmax = std::max({g.box_length[0], g.box_length[1], g.box_length[2]});
    std::vector<double> lx, ly;
    for (double s = 2.0 * h; s <= Lmax; s *= 2.0) {
        const std::size_t n = parabolic_cover_count(rep.candidates, s);
        rep.counts.push_back({s, n});
        if (n > 0) {
            lx.push_back(std::log(s));
            ly.push_back(std::log(double(n)));
        }
    }
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    if (lx.size() >= 2) {
        const double n = double(lx.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        rep.slope = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

void SerrinExponents::validate() const {
    auto pair_ok = [](double p, double q, const char* name) {
        if (!(p > 2.0 && p <= q)) {
            std::ostringstream os;
            os << "exponents (" << name << "): need 2 < p <= q, got p = " << p << ", q = " << q;
            throw ValidationError(os.str());
        }
        if (!(q > 5.0 && std::isfinite(q))) {
            std::ostringstream os;
            os << "exponents (" << name << "): need 5 < q < inf, got q = " << q;
            throw ValidationError(os.str());
        }
    };
    pair_ok(p0, q0, "p0,q0");
    pair_ok(p1, q1, "p1,q1");
    if (!(p1 <= p0)) throw ValidationError("exponents: need p1 <= p0");
    if (!(q1 <= q0)) throw ValidationError("exponents: need q1 <= q0");
}

SerrinReport serrin_hypothesis_check(const FieldSnapshot& U, const FieldSnapshot& B, const ParabolicCylinder& region,
                                     const SerrinExponents& exps, int center_stride, double shrink) {
    exps.validate();
    U.require_components(3, "serrin_hypothesis_check");
    B.require_components(3, "serrin_hypothesis_check");
    require_same_grid(U, B, "serrin_hypothesis_check");
    if (!(shrink > 0.0 && shrink < 1.0)) throw ValidationError("shrink factor must lie in ]0,1[");
    const Grid& g = U.grid();
    restrict_cylinder_window(g, region); // spatial margin check

    SerrinReport rep;
    rep.exponents = exps;
    rep.ordering_ok = true;
    rep.region = region;
    rep.shrunk = {region.t0, region.x0, shrink * region.r};

    MorreyParams mu;
    mu.p = exps.p0;
    mu.q = exps.q0;
    mu.scan_radii = MorreyParams::geometric_radii(g, std::min(region.r, MorreyParams::max_time_radius(g)));
    mu.center_stride = center_stride;
    rep.U_morrey = morrey_norm(U, mu, region);
    MorreyParams mb = mu;
    mb.p = exps.p1;
    mb.q = exps.q1;
    rep.B_morrey = morrey_norm(B, mb, region);
    rep.hypothesis_satisfied = std::isfinite(rep.U_morrey.value) && std::isfinite(rep.B_morrey.value);

    const bool window = !cylinder_inside(g, rep.shrunk);
    rep.U_conclusion = lebesgue_cylinder_norm(U, rep.shrunk, exps.q0, exps.q0, window);
    rep.B_conclusion = lebesgue_cylinder_norm(B, rep.shrunk, exps.q1, exps.q1, window);
    return rep;
}

} // namespace mhdlab
