#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mhdlab {

// Thrown for malformed inputs (bad shapes, bad parameters); the CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A cylinder or stencil that leaves the sampled domain.
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Grid {
    int nx = 0, ny = 0, nz = 0;
    std::array<double, 3> box_length{0.0, 0.0, 0.0};
    int nt = 1;
    double dt = 1.0;
    double t_start = 0.0;

    static Grid cube(int n, double length, int nt, double dt, double t_start = 0.0);

    void validate() const;
    std::array<int, 3> dims() const { return {nx, ny, nz}; }
    double h(int axis) const { return box_length[axis] / dims()[axis]; }
    double time(int n) const { return t_start + n * dt; }
    std::size_t slice_size() const { return std::size_t(nx) * ny * nz; }
    double cell_volume() const { return h(0) * h(1) * h(2); }
    Eigen::Vector3d position(int i, int j, int k) const { return {i * h(0), j * h(1), k * h(2)}; }

    bool same_space(const Grid& o) const;
    bool operator==(const Grid& o) const;
};

// Real samples of shape (nt, components, nz, ny, nx); x varies fastest.
class FieldSnapshot {
public:
    FieldSnapshot() = default;
    FieldSnapshot(const Grid& grid, int components, std::string name = "");

    const Grid& grid() const { return grid_; }
    int components() const { return comps_; }
    int nt() const { return grid_.nt; }
    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    Eigen::ArrayXd& values() { return data_; }
    const Eigen::ArrayXd& values() const { return data_; }

    double* slice(int t, int c) { return data_.data() + offset(t, c); }
    const double* slice(int t, int c) const { return data_.data() + offset(t, c); }
    Eigen::Map<Eigen::ArrayXd> component(int t, int c);
    Eigen::Map<const Eigen::ArrayXd> component(int t, int c) const;

    double& at(int t, int c, int k, int j, int i) { return data_[index(t, c, k, j, i)]; }
    double at(int t, int c, int k, int j, int i) const { return data_[index(t, c, k, j, i)]; }

    std::size_t index(int t, int c, int k, int j, int i) const {
        return offset(t, c) + (std::size_t(k) * grid_.ny + j) * grid_.nx + i;
    }

    bool is_finite() const { return data_.allFinite(); }
    void require_finite() const;
    void require_components(int c, const char* op) const;

    // Slices [first, first + count) as a new snapshot with shifted t_start.
    FieldSnapshot time_window(int first, int count) const;

    // Per-slice spatial mean of one component.
    double mean(int t, int c) const;

private:
    std::size_t offset(int t, int c) const { return (std::size_t(t) * comps_ + c) * grid_.slice_size(); }

    Grid grid_{};
    int comps_ = 0;
    std::string name_;
    Eigen::ArrayXd data_;
};

void require_same_grid(const FieldSnapshot& a, const FieldSnapshot& b, const char* op);

struct ParabolicCylinder {
    double t0 = 0.0;
    Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
    double r = 0.0;
};

// Cells whose centers lie in a cylinder, for midpoint quadrature.
struct CylinderCells {
    std::vector<int> slices;                    // time indices
    std::vector<std::size_t> points;            // flat spatial indices (k*ny + j)*nx + i
    double cell_measure = 0.0;                  // dt * h^3
    std::size_t size() const { return slices.size() * points.size(); }
};

// Spatial cells of the ball B(x0, r) (no time restriction, no margin check).
std::vector<std::size_t> ball_points(const Grid& g, const Eigen::Vector3d& x0, double r);

// Throws DomainError naming the violated face when Q (with a one-cell margin) leaves the
// sampled domain, or when no cell center falls inside Q.
CylinderCells restrict_cylinder(const Grid& g, const ParabolicCylinder& Q);

// Non-throwing form of the restrict_cylinder margin test.
bool cylinder_inside(const Grid& g, const ParabolicCylinder& Q, bool check_time = true);

// Same, but only the spatial ball is required to sit inside the box; time slices are those
// of the sampled window that fall inside Q.
CylinderCells restrict_cylinder_window(const Grid& g, const ParabolicCylinder& Q);

} // namespace mhdlab
