#include "mhdlab/grid.hpp"

#include <cmath>
#include <sstream>

namespace mhdlab {

Grid Grid::cube(int n, double length, int nt, double dt, double t_start) {
    Grid g;
    g.nx = g.ny = g.nz = n;
    g.box_length = {length, length, length};
    g.nt = nt;
    g.dt = dt;
    g.t_start = t_start;
    g.validate();
    return g;
}

void Grid::validate() const {
    for (int n : dims()) {
        if (n < 4 || n % 2 != 0)
            throw ValidationError("grid counts must be even and >= 4, got " + std::to_string(n));
    }
    for (double L : box_length) {
        if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("box_length must be positive");
    }
    if (nt < 1) throw ValidationError("nt must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
    if (!std::isfinite(t_start)) throw ValidationError("t_start must be finite");
}

bool Grid::same_space(const Grid& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && box_length == o.box_length;
}

bool Grid::operator==(const Grid& o) const {
    return same_space(o) && nt == o.nt && dt == o.dt && t_start == o.t_start;
}

FieldSnapshot::FieldSnapshot(const Grid& grid, int components, std::string name)
    : grid_(grid), comps_(components), name_(std::move(name)) {
    grid_.validate();
    if (components != 1 && components != 3)
        throw ValidationError("components must be 1 or 3");
    data_ = Eigen::ArrayXd::Zero(Eigen::Index(grid_.nt) * comps_ * grid_.slice_size());
}

Eigen::Map<Eigen::ArrayXd> FieldSnapshot::component(int t, int c) {
    return {slice(t, c), Eigen::Index(grid_.slice_size())};
}

Eigen::Map<const Eigen::ArrayXd> FieldSnapshot::component(int t, int c) const {
    return {slice(t, c), Eigen::Index(grid_.slice_size())};
}

void FieldSnapshot::require_finite() const {
    if (!is_finite()) throw ValidationError("field '" + name_ + "' contains NaN or Inf");
}

void FieldSnapshot::require_components(int c, const char* op) const {
    if (comps_ != c) {
        std::ostringstream os;
        os << op << ": expected " << c << "-component field, got " << comps_;
        throw ValidationError(os.str());
    }
}

FieldSnapshot FieldSnapshot::time_window(int first, int count) const {
    if (first < 0 || count < 1 || first + count > grid_.nt)
        throw ValidationError("time window out of range");
    Grid g = grid_;
    g.nt = count;
    g.t_start = grid_.time(first);
    FieldSnapshot out(g, comps_, name_);
    const std::size_t n = std::size_t(count) * comps_ * grid_.slice_size();
    out.data_ = data_.segment(Eigen::Index(offset(first, 0)), Eigen::Index(n));
    return out;
}

double FieldSnapshot::mean(int t, int c) const {
    return component(t, c).mean();
}

void require_same_grid(const FieldSnapshot& a, const FieldSnapshot& b, const char* op) {
    if (!(a.grid() == b.grid())) throw ValidationError(std::string(op) + ": grid mismatch");
}

std::vector<std::size_t> ball_points(const Grid& g, const Eigen::Vector3d& x0, double r) {
    std::vector<std::size_t> pts;
    const double r2 = r * r;
    for (int k = 0; k < g.nz; ++k) {
        const double dz = k * g.h(2) - x0[2];
        if (dz * dz >= r2) continue;
        for (int j = 0; j < g.ny; ++j) {
            const double dy = j * g.h(1) - x0[1];
            if (dy * dy + dz * dz >= r2) continue;
            for (int i = 0; i < g.nx; ++i) {
                const double dx = i * g.h(0) - x0[0];
                if (dx * dx + dy * dy + dz * dz < r2)
                    pts.push_back((std::size_t(k) * g.ny + j) * g.nx + i);
            }
        }
    }
    return pts;
}

namespace {

void check_ball(const Grid& g, const ParabolicCylinder& Q) {
    if (!(Q.r > 0.0)) throw ValidationError("cylinder radius must be positive");
    static const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        // cells span [i*h - h/2, i*h + h/2]; keep one full cell between ball and domain edge
        const double lo = 0.5 * g.h(a);
        const double hi = g.box_length[a] - 1.5 * g.h(a);
        if (Q.x0[a] - Q.r < lo) throw DomainError(std::string("cylinder exits domain through ") + names[a] + "-low face");
        if (Q.x0[a] + Q.r > hi) throw DomainError(std::string("cylinder exits domain through ") + names[a] + "-high face");
    }
}

std::vector<int> slices_inside(const Grid& g, const ParabolicCylinder& Q) {
    std::vector<int> s;
    const double r2 = Q.r * Q.r;
    for (int n = 0; n < g.nt; ++n) {
        if (std::abs(g.time(n) - Q.t0) < r2) s.push_back(n);
    }
    return s;
}

CylinderCells finish(const Grid& g, const ParabolicCylinder& Q, std::vector<int> slices) {
    CylinderCells c;
    c.slices = std::move(slices);
    c.points = ball_points(g, Q.x0, Q.r);
    c.cell_measure = g.dt * g.cell_volume();
    if (c.slices.empty() || c.points.empty())
        throw DomainError("cylinder contains no cell centers");
    return c;
}

} // namespace

bool cylinder_inside(const Grid& g, const ParabolicCylinder& Q, bool check_time) {
    if (!(Q.r > 0.0)) return false;
    for (int a = 0; a < 3; ++a) {
        if (Q.x0[a] - Q.r < 0.5 * g.h(a)) return false;
        if (Q.x0[a] + Q.r > g.box_length[a] - 1.5 * g.h(a)) return false;
    }
    if (!check_time) return true;
    const double r2 = Q.r * Q.r;
    return Q.t0 - r2 >= g.t_start + 0.5 * g.dt && Q.t0 + r2 <= g.time(g.nt - 1) - 0.5 * g.dt;
}

CylinderCells restrict_cylinder(const Grid& g, const ParabolicCylinder& Q) {
    check_ball(g, Q);
    const double r2 = Q.r * Q.r;
    const double lo = g.t_start + 0.5 * g.dt;
    const double hi = g.time(g.nt - 1) - 0.5 * g.dt;
    if (Q.t0 - r2 < lo) throw DomainError("cylinder exits domain through t-low face");
    if (Q.t0 + r2 > hi) throw DomainError("cylinder exits domain through t-high face");
    return finish(g, Q, slices_inside(g, Q));
}

CylinderCells restrict_cylinder_window(const Grid& g, const ParabolicCylinder& Q) {
    check_ball(g, Q);
    return finish(g, Q, slices_inside(g, Q));
}

} // namespace mhdlab
