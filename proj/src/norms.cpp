#include "mhdlab/norms.hpp"
#include "mhdlab/parallel.hpp"
#include "mhdlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mhdlab {

void MorreyParams::validate() const {
    if (!(p > 1.0 && p <= q && std::isfinite(q)))
        throw ValidationError("Morrey exponents must satisfy 1 < p <= q < inf");
    if (scan_radii.empty()) throw ValidationError("Morrey scan needs at least one radius");
    for (std::size_t i = 0; i < scan_radii.size(); ++i) {
        if (!(scan_radii[i] > 0.0)) throw ValidationError("Morrey radii must be positive");
        if (i && !(scan_radii[i] < scan_radii[i - 1])) throw ValidationError("Morrey radii must be strictly decreasing");
    }
    if (center_stride < 1) throw ValidationError("center_stride must be >= 1");
}

double MorreyParams::max_time_radius(const Grid& g) {
    const double half = ((g.nt - 1) / 2) * g.dt - 0.5 * g.dt;
    return half > 0.0 ? std::sqrt(half) * (1.0 - 1e-9) : 0.0;
}

std::vector<double> MorreyParams::geometric_radii(const Grid& g, double r_max, double ratio) {
    const double hmax = std::max({g.h(0), g.h(1), g.h(2)});
    std::vector<double> r;
    for (double x = r_max; x >= 2.0 * hmax; x /= ratio) r.push_back(x);
    return r;
}

namespace {

FieldSnapshot magnitude_pow(const FieldSnapshot& X, double p, const std::optional<ParabolicCylinder>& mask) {
    const Grid& g = X.grid();
    FieldSnapshot out(g, 1, "abs_pow");
    std::vector<unsigned char> in_ball;
    double r2 = 0.0;
    if (mask) {
        in_ball.assign(g.slice_size(), 0);
        for (std::size_t s : ball_points(g, mask->x0, mask->r)) in_ball[s] = 1;
        r2 = mask->r * mask->r;
    }
    for (int t = 0; t < g.nt; ++t) {
        const bool t_in = !mask || std::abs(g.time(t) - mask->t0) < r2;
        auto o = out.component(t, 0);
        if (!t_in) continue;
        Eigen::ArrayXd m2 = Eigen::ArrayXd::Zero(o.size());
        for (int c = 0; c < X.components(); ++c) m2 += X.component(t, c).square();
        o = m2.pow(0.5 * p);
        if (mask)
            for (Eigen::Index s = 0; s < o.size(); ++s)
                if (!in_ball[s]) o[s] = 0.0;
    }
    return out;
}

// Ball-sum of one slice via FFT against the periodic ball indicator.
SpecArray ball_kernel_hat(const SpectralWorkspace& ws, double r) {
    const Grid& g = ws.grid();
    std::vector<double> K(g.slice_size(), 0.0);
    const double r2 = r * r;
    for (int k = 0; k < g.nz; ++k) {
        const double dz = ((k <= g.nz / 2) ? k : k - g.nz) * g.h(2);
        for (int j = 0; j < g.ny; ++j) {
            const double dy = ((j <= g.ny / 2) ? j : j - g.ny) * g.h(1);
            for (int i = 0; i < g.nx; ++i) {
                const double dx = ((i <= g.nx / 2) ? i : i - g.nx) * g.h(0);
                if (dx * dx + dy * dy + dz * dz < r2) K[(std::size_t(k) * g.ny + j) * g.nx + i] = 1.0;
            }
        }
    }
    return ws.forward(K.data());
}

} // namespace

std::vector<double> ball_sums(const FieldSnapshot& A, double r) {
    A.require_components(1, "ball_sums");
    const Grid& g = A.grid();
    const SpectralWorkspace& ws = workspace_for(g);
    const SpecArray Kh = ball_kernel_hat(ws, r);
    std::vector<double> B(std::size_t(g.nt) * g.slice_size());
    for_each_index(g.nt, [&](int t) {
        SpecArray fh = ws.forward(A.slice(t, 0));
        for (std::size_t s = 0; s < fh.size(); ++s) fh[s] *= std::conj(Kh[s]);
        double* o = B.data() + std::size_t(t) * g.slice_size();
        ws.inverse(fh.data(), o);
        for (std::size_t p = 0; p < g.slice_size(); ++p) o[p] = std::max(o[p], 0.0);
    });
    return B;
}

MorreyResult morrey_norm(const FieldSnapshot& X, const MorreyParams& params,
                         const std::optional<ParabolicCylinder>& mask) {
    params.validate();
    X.require_finite();
    const Grid& g = X.grid();
    const FieldSnapshot A = magnitude_pow(X, params.p, mask);
    const double cell = g.dt * g.cell_volume();
    const double expo = -5.0 * (1.0 - params.p / params.q);
    const int st = params.center_stride;

    MorreyResult best;
    best.value = -1.0;
    bool any = false;
    for (double r : params.scan_radii) {
        const std::vector<double> B = ball_sums(A, r);
        const double r2 = r * r;
        const double scale = std::pow(r, expo) * cell;
        // deterministic scan order (t, k, j, i); first strict maximum wins
        for (int t = 0; t < g.nt; t += st) {
            int lo = t, hi = t;
            while (lo - 1 >= 0 && std::abs(g.time(lo - 1) - g.time(t)) < r2) --lo;
            while (hi + 1 < g.nt && std::abs(g.time(hi + 1) - g.time(t)) < r2) ++hi;
            for (int k = 0; k < g.nz; k += st)
                for (int j = 0; j < g.ny; j += st)
                    for (int i = 0; i < g.nx; i += st) {
                        const ParabolicCylinder Q{g.time(t), g.position(i, j, k), r};
                        if (!cylinder_inside(g, Q)) continue;
                        any = true;
                        ++best.cylinders_scanned;
                        const std::size_t sp = (std::size_t(k) * g.ny + j) * g.nx + i;
                        double sum = 0.0;
                        for (int n = lo; n <= hi; ++n) sum += B[std::size_t(n) * g.slice_size() + sp];
                        const double val = std::pow(scale * sum, 1.0 / params.p);
                        if (val > best.value) {
                            best.value = val;
                            best.argmax = Q;
                        }
                    }
        }
    }
    if (!any) throw DomainError("Morrey scan set is empty: no cylinder fits inside the sampled domain");
    return best;
}

void HolderParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("Hölder exponent must lie in ]0,1[");
    if (pair_budget < 1) throw ValidationError("pair_budget must be positive");
}

namespace {

struct Quotient {
    const FieldSnapshot& X;
    double alpha;

    double diff(const GridPoint& a, const GridPoint& b) const {
        double s = 0.0;
        for (int c = 0; c < X.components(); ++c) {
            const double d = X.at(a.t, c, a.k, a.j, a.i) - X.at(b.t, c, b.k, b.j, b.i);
            s += d * d;
        }
        return std::sqrt(s);
    }

    double dist(const GridPoint& a, const GridPoint& b) const {
        const Grid& g = X.grid();
        const double dx = (a.i - b.i) * g.h(0), dy = (a.j - b.j) * g.h(1), dz = (a.k - b.k) * g.h(2);
        return std::sqrt(std::abs(a.t - b.t) * g.dt) + std::sqrt(dx * dx + dy * dy + dz * dz);
    }

    double operator()(const GridPoint& a, const GridPoint& b) const {
        const double d = dist(a, b);
        return d > 0.0 ? diff(a, b) / std::pow(d, alpha) : 0.0;
    }
};

struct Best {
    double value = 0.0;
    GridPoint a, b;
    void offer(double q, const GridPoint& x, const GridPoint& y) {
        if (q > value) {
            value = q;
            a = x;
            b = y;
        }
    }
};

GridPoint unflatten(const Grid& g, std::size_t idx) {
    GridPoint p;
    p.i = int(idx % g.nx);
    idx /= g.nx;
    p.j = int(idx % g.ny);
    idx /= g.ny;
    p.k = int(idx % g.nz);
    p.t = int(idx / g.nz);
    return p;
}

} // namespace

HolderResult holder_seminorm(const FieldSnapshot& X, const HolderParams& params) {
    params.validate();
    X.require_finite();
    const Grid& g = X.grid();
    const Quotient Qf{X, params.alpha};
    const std::size_t npts = std::size_t(g.nt) * g.slice_size();
    const double total_pairs = 0.5 * double(npts) * double(npts - 1);

    HolderResult res;
    Best best;
    if (total_pairs <= double(params.pair_budget)) {
        // exhaustive, rows reduced in parallel then merged in row order
        std::vector<Best> rows(npts);
        for_each_index(int(npts), [&](int a) {
            const GridPoint pa = unflatten(g, std::size_t(a));
            for (std::size_t b = std::size_t(a) + 1; b < npts; ++b) {
                const GridPoint pb = unflatten(g, b);
                rows[a].offer(Qf(pa, pb), pa, pb);
            }
        });
        for (const Best& r : rows) best.offer(r.value, r.a, r.b);
        res.pairs = std::size_t(total_pairs);
        res.exhaustive = true;
    } else {
        // offsets within parabolic distance 4 cells, lexicographically positive
        const double hmin = std::min({g.h(0), g.h(1), g.h(2)});
        const double R = 4.0 * hmin;
        std::vector<std::array<int, 4>> offs;
        const int mt = int(std::floor(R * R / g.dt));
        for (int dt = 0; dt <= mt; ++dt) {
            const double rt = std::sqrt(dt * g.dt);
            for (int dk = -4; dk <= 4; ++dk)
                for (int dj = -4; dj <= 4; ++dj)
                    for (int di = -4; di <= 4; ++di) {
                        const std::array<int, 4> o{dt, dk, dj, di};
                        if (o <= std::array<int, 4>{0, 0, 0, 0}) continue;
                        const double dx = di * g.h(0), dy = dj * g.h(1), dz = dk * g.h(2);
                        if (rt + std::sqrt(dx * dx + dy * dy + dz * dz) <= R * (1.0 + 1e-12)) offs.push_back(o);
                    }
        }
        const double near_total = double(npts) * double(offs.size());
        const std::size_t half = std::max<std::size_t>(1, params.pair_budget / 2);
        int stride = 1;
        while (near_total / std::pow(double(stride), 4) > double(half)) ++stride;
        res.near_stride = stride;
        std::vector<Best> rows(g.nt);
        std::vector<std::size_t> counts(g.nt, 0);
        for_each_index(g.nt, [&](int t) {
            if (t % stride) return;
            for (int k = 0; k < g.nz; k += stride)
                for (int j = 0; j < g.ny; j += stride)
                    for (int i = 0; i < g.nx; i += stride) {
                        const GridPoint pa{t, k, j, i};
                        for (const auto& o : offs) {
                            const GridPoint pb{t + o[0], k + o[1], j + o[2], i + o[3]};
                            if (pb.t >= g.nt || pb.k < 0 || pb.k >= g.nz || pb.j < 0 || pb.j >= g.ny || pb.i < 0 ||
                                pb.i >= g.nx)
                                continue;
                            rows[t].offer(Qf(pa, pb), pa, pb);
                            ++counts[t];
                        }
                    }
        });
        for (int t = 0; t < g.nt; ++t) {
            best.offer(rows[t].value, rows[t].a, rows[t].b);
            res.pairs += counts[t];
        }
        // long-range sample: base points cycle through time slices, partners uniform
        std::mt19937_64 rng(params.seed);
        std::uniform_int_distribution<std::size_t> pick(0, g.slice_size() - 1), any(0, npts - 1);
        const std::size_t nlong = params.pair_budget - half;
        for (std::size_t s = 0; s < nlong; ++s) {
            const std::size_t a = std::size_t(s % g.nt) * g.slice_size() + pick(rng);
            const std::size_t b = any(rng);
            if (a == b) continue;
            const GridPoint pa = unflatten(g, a), pb = unflatten(g, b);
            best.offer(Qf(pa, pb), pa, pb);
            ++res.pairs;
        }
    }
    res.value = best.value;
    res.a = best.a;
    res.b = best.b;
    return res;
}

double lebesgue_cylinder_norm(const FieldSnapshot& X, const ParabolicCylinder& Q, double pt, double px,
                              bool window_only) {
    if (!(pt >= 1.0) || !(px >= 1.0)) throw ValidationError("Lebesgue exponents must be >= 1");
    X.require_finite();
    const Grid& g = X.grid();
    const CylinderCells cells = window_only ? restrict_cylinder_window(g, Q) : restrict_cylinder(g, Q);
    const double vol = g.cell_volume();
    double outer = 0.0;
    for (int t : cells.slices) {
        double inner = 0.0;
        for (std::size_t s : cells.points) {
            double m2 = 0.0;
            for (int c = 0; c < X.components(); ++c) m2 += X.slice(t, c)[s] * X.slice(t, c)[s];
            const double m = std::sqrt(m2);
            inner = std::isinf(px) ? std::max(inner, m) : inner + std::pow(m, px) * vol;
        }
        if (!std::isinf(px)) inner = std::pow(inner, 1.0 / px);
        outer = std::isinf(pt) ? std::max(outer, inner) : outer + std::pow(inner, pt) * g.dt;
    }
    return std::isinf(pt) ? outer : std::pow(outer, 1.0 / pt);
}

} // namespace mhdlab
