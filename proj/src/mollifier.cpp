#include "mhdlab/mollifier.hpp"
#include "mhdlab/parallel.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace mhdlab {

BumpProfile parse_bump_profile(const std::string& name) {
    if (name == "exponential" || name == "exp") return BumpProfile::exponential;
    if (name == "polynomial" || name == "poly") return BumpProfile::polynomial;
    throw ValidationError("unknown bump profile '" + name + "' (expected exponential or polynomial)");
}

std::string to_string(BumpProfile p) { return p == BumpProfile::exponential ? "exponential" : "polynomial"; }

double bump(BumpProfile p, double s) {
    const double a = std::abs(s);
    if (a >= 1.0) return 0.0;
    const double w = 1.0 - a * a;
    if (p == BumpProfile::exponential) return std::exp(-1.0 / w);
    return w * w * w * w;
}

namespace {

double ladder_ratio(const std::vector<double>& v, const char* what) {
    if (v.size() < 2) return 0.0;
    const double r = v[0] / v[1];
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (std::abs(v[i] / v[i + 1] - r) > 1e-9 * r) {
            std::ostringstream os;
            os << what << " ladder must be geometric";
            throw ValidationError(os.str());
        }
    }
    return r;
}

} // namespace

void MollifierLadder::validate(const Grid& g) const {
    if (alphas.empty() || epsilons.empty()) throw ValidationError("mollifier ladders must be non-empty");
    const double hmax = std::max({g.h(0), g.h(1), g.h(2)});
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 2.0 * g.dt * (1.0 - 1e-12)))
            throw ValidationError("alpha = " + std::to_string(alphas[i]) + " is below 2 dt");
        if (i && !(alphas[i] < alphas[i - 1])) throw ValidationError("alpha ladder must be strictly decreasing");
    }
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] >= 2.0 * hmax * (1.0 - 1e-12)))
            throw ValidationError("epsilon = " + std::to_string(epsilons[i]) + " is below 2 h");
        if (i && !(epsilons[i] < epsilons[i - 1])) throw ValidationError("epsilon ladder must be strictly decreasing");
    }
    ladder_ratio(alphas, "alpha");
    ladder_ratio(epsilons, "epsilon");
}

double MollifierLadder::alpha_ratio() const { return ladder_ratio(alphas, "alpha"); }
double MollifierLadder::epsilon_ratio() const { return ladder_ratio(epsilons, "epsilon"); }

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
struct Gauss {
    std::vector<double> x, w;
};

const Gauss& gauss(int n) {
    static std::mutex m;
    static std::map<int, Gauss> cache;
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Gauss g;
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5)), dp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        g.x.push_back(0.5 * (1.0 - z));
        g.w.push_back(1.0 / ((1.0 - z * z) * dp * dp));
    }
    return cache.emplace(n, std::move(g)).first->second;
}

constexpr int kStencil = 6; // local quintic interpolation in time

} // namespace

std::vector<double> time_weights(BumpProfile p, double alpha, double dt) {
    if (alpha <= 0.0) return {1.0};
    // w_j = int theta_alpha(s) L_j(s) ds, L_j the cardinal functions of piecewise quintic Lagrange
    // interpolation at s = j dt; discrete moments of order <= 5 equal the continuum ones.
    const int reach = int(std::ceil(alpha / dt - 1e-12));
    const int m = reach + kStencil / 2;
    std::vector<double> w(2 * m + 1, 0.0);
    const Gauss& G = gauss(24);
    for (int i = -reach; i < reach; ++i) { // interval [i dt, (i+1) dt]
        const int first = i - kStencil / 2 + 1;
        for (std::size_t q = 0; q < G.x.size(); ++q) {
            const double s = (i + G.x[q]) * dt;
            const double th = bump(p, s / alpha) * G.w[q] * dt;
            if (th == 0.0) continue;
            for (int a = 0; a < kStencil; ++a) {
                double L = 1.0;
                for (int c = 0; c < kStencil; ++c)
                    if (c != a) L *= (s / dt - (first + c)) / double(a - c);
                w[first + a + m] += th * L;
            }
        }
    }
    double sum = 0.0;
    for (double x : w) sum += x;
    if (!(sum > 0.0)) throw ValidationError("time mollifier has no resolved support");
    for (double& x : w) x /= sum;
    while (w.size() > 1 && w.front() == 0.0 && w.back() == 0.0) {
        w.erase(w.begin());
        w.pop_back();
    }
    return w;
}

double kernel_symbol(BumpProfile p, double kappa) {
    // radial Fourier transform over the unit ball, normalized to 1 at kappa = 0
    const Gauss& G = gauss(160);
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < G.x.size(); ++q) {
        const double s = G.x[q];
        const double f = bump(p, s) * s * s * G.w[q];
        const double ks = kappa * s;
        num += f * (ks == 0.0 ? 1.0 : std::sin(ks) / ks);
        den += f;
    }
    return num / den;
}

std::vector<double> space_kernel_symbol(const SpectralWorkspace& ws, BumpProfile p, double eps) {
    const Grid& g = ws.grid();
    std::vector<double> sym(ws.spec_size());
    std::map<double, double> cache;
    for (std::size_t s = 0; s < sym.size(); ++s) {
        const auto m = ws.mode(s);
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double k = 2.0 * M_PI * m[a] / g.box_length[a];
            k2 += k * k;
        }
        auto it = cache.find(k2);
        if (it == cache.end()) it = cache.emplace(k2, kernel_symbol(p, eps * std::sqrt(k2))).first;
        sym[s] = it->second;
    }
    return sym;
}

FieldSnapshot mollify(const FieldSnapshot& X, double alpha, double eps, BumpProfile theta, BumpProfile phi) {
    X.require_finite();
    const Grid& g = X.grid();
    const double hmax = std::max({g.h(0), g.h(1), g.h(2)});
    if (alpha != 0.0 && !(alpha >= 2.0 * g.dt * (1.0 - 1e-12))) throw ValidationError("alpha below 2 dt");
    if (eps != 0.0 && !(eps >= 2.0 * hmax * (1.0 - 1e-12))) throw ValidationError("epsilon below 2 h");
    const std::vector<double> w = time_weights(theta, alpha, g.dt);
    const int m = int(w.size() / 2);
    if (g.nt - 2 * m < 1) throw DomainError("time mollifier window exceeds the sampled time range");

    FieldSnapshot space = X;
    if (eps > 0.0) {
        const SpectralWorkspace& ws = workspace_for(g);
        const std::vector<double> sym = space_kernel_symbol(ws, phi, eps);
        for_each_index(g.nt * X.components(), [&](int tc) {
            const int t = tc / X.components(), c = tc % X.components();
            SpecArray xh = ws.forward(X.slice(t, c));
            for (std::size_t s = 0; s < xh.size(); ++s) xh[s] *= sym[s];
            ws.inverse(xh.data(), space.slice(t, c));
        });
    }
    Grid go = g;
    go.nt = g.nt - 2 * m;
    go.t_start = g.time(m);
    FieldSnapshot out(go, X.components(), X.name() + "_moll");
    for (int t = 0; t < go.nt; ++t)
        for (int c = 0; c < X.components(); ++c) {
            auto o = out.component(t, c);
            for (int j = 0; j <= 2 * m; ++j) o += w[j] * space.component(t + j, c);
        }
    return out;
}

} // namespace mhdlab
