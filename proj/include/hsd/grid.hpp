#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hsd/matrix.hpp"

namespace hsd {

/// One cell of the grid: an interval (1D), a rectangle (2D) or, on split
/// grids, a triangle. Geometry is stored in reference coordinates.
struct Cell {
    int id = 0;
    Vec centroid;
    double volume = 0.0;
    std::vector<Vec> vertices;
};

/// Oriented interface between two cells; `plus < 0` marks a boundary face.
/// The normal points from `minus` into `plus` (outward on the boundary).
struct Face {
    int minus = -1;
    int plus = -1;
    Vec a, b;    // endpoints (a == b for the point faces of a 1D grid)
    Vec normal;  // unit, reference coordinates
    double measure = 1.0;
};

/// Tensor grid over an axis-aligned box, N in {1,2}. The rotation maps
/// reference to physical coordinates and realizes the rotated cube Q_nu.
/// `split_diagonal` divides each rectangle into two triangles along the
/// (lo,lo)-(hi,hi) diagonal so that oblique jump normals are available to
/// the cell solvers. `with_boundary_layer` splits the outermost row of
/// cells on each side into a thin strip plus a remainder: the strip carries
/// the boundary-trace constraint at a small volume, which tightens the
/// discrete upper bound for the relaxation.
class Grid {
public:
    Grid() : Grid(1, 1) {}

    Grid(int dim, int n, Vec lo = {}, Vec hi = {}, Matrix rotation = Matrix{{1.0}},
         bool split_diagonal = false, double boundary_layer = 0.0)
        : dim_(dim), n_(n), lo_(std::move(lo)), hi_(std::move(hi)), rot_(std::move(rotation)),
          split_(split_diagonal) {
        if (dim_ != 1 && dim_ != 2) throw std::invalid_argument("Grid: dim must be 1 or 2");
        if (n_ < 1) throw std::invalid_argument("Grid: n must be positive");
        if (lo_.empty()) {
            lo_.assign(static_cast<std::size_t>(dim_), -0.5);
            hi_.assign(static_cast<std::size_t>(dim_), 0.5);
        }
        if (static_cast<int>(lo_.size()) != dim_ || static_cast<int>(hi_.size()) != dim_)
            throw std::invalid_argument("Grid: box dimension mismatch");
        for (int k = 0; k < dim_; ++k)
            if (!(hi_[static_cast<std::size_t>(k)] > lo_[static_cast<std::size_t>(k)]))
                throw std::invalid_argument("Grid: empty box");
        if (rot_.rows() == 1 && rot_.cols() == 1 && dim_ == 2 && rot_(0, 0) == 1.0)
            rot_ = Matrix::identity(2);
        if (rot_.rows() != dim_ || rot_.cols() != dim_)
            throw std::invalid_argument("Grid: rotation dimension mismatch");
        check_orthonormal();
        if (split_ && dim_ != 2) throw std::invalid_argument("Grid: diagonal split requires dim 2");
        if (boundary_layer < 0.0 || boundary_layer >= 0.5)
            throw std::invalid_argument("Grid: boundary layer fraction must be in [0, 0.5)");
        if (boundary_layer > 0.0 && n_ < 2)
            throw std::invalid_argument("Grid: boundary layer needs n >= 2");
        graded_ = boundary_layer > 0.0;
        layer_ = boundary_layer;
        for (int k = 0; k < dim_; ++k) {
            const double a = lo_[static_cast<std::size_t>(k)], b = hi_[static_cast<std::size_t>(k)];
            const double h = (b - a) / n_;
            std::vector<double>& xs = breaks_[static_cast<std::size_t>(k)];
            xs.push_back(a);
            if (graded_) xs.push_back(a + boundary_layer * h);
            for (int i = 1; i < n_; ++i) xs.push_back(a + i * h);
            if (graded_) xs.push_back(b - boundary_layer * h);
            xs.push_back(b);
        }
    }

    static Grid unit_cube(int dim, int n) { return Grid(dim, n); }

    static Grid with_boundary_layer(int dim, int n, double layer, bool split_diagonal = false) {
        return Grid(dim, n, {}, {}, dim == 2 ? Matrix::identity(2) : Matrix{{1.0}}, split_diagonal,
                    layer);
    }

    /// Unit cube with two faces orthogonal to nu (2D); the first reference
    /// axis is mapped onto nu.
    static Grid rotated_cube(const Vec& nu, int n, bool split_diagonal = false) {
        if (nu.size() == 1) return Grid(1, n);
        Matrix r{{nu[0], -nu[1]}, {nu[1], nu[0]}};
        return Grid(2, n, {}, {}, r, split_diagonal);
    }

    int dim() const { return dim_; }
    int cells_per_side() const { return n_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const Matrix& rotation() const { return rot_; }
    bool split_diagonal() const { return split_; }
    bool graded() const { return graded_; }
    double boundary_layer() const { return layer_; }

    /// Nominal spacing of the uniform interior lattice.
    double spacing(int axis) const {
        return (hi_[static_cast<std::size_t>(axis)] - lo_[static_cast<std::size_t>(axis)]) / n_;
    }

    /// Number of intervals along an axis (n, or n + 2 on graded grids).
    int intervals(int axis) const {
        return static_cast<int>(breaks_[static_cast<std::size_t>(axis)].size()) - 1;
    }

    int cell_count() const {
        if (dim_ == 1) return intervals(0);
        const int q = intervals(0) * intervals(1);
        return split_ ? 2 * q : q;
    }

    double volume() const {
        double v = 1.0;
        for (int k = 0; k < dim_; ++k) v *= hi_[static_cast<std::size_t>(k)] - lo_[static_cast<std::size_t>(k)];
        return v;
    }

    Vec to_physical(const Vec& ref) const { return rot_.apply(ref); }

    Cell cell(int id) const {
        Cell c;
        c.id = id;
        const std::vector<double>& xs = breaks_[0];
        if (dim_ == 1) {
            c.vertices = {{xs[static_cast<std::size_t>(id)]}, {xs[static_cast<std::size_t>(id) + 1]}};
            c.centroid = {0.5 * (c.vertices[0][0] + c.vertices[1][0])};
            c.volume = c.vertices[1][0] - c.vertices[0][0];
            return c;
        }
        const std::vector<double>& ys = breaks_[1];
        int q = id, t = 0;
        if (split_) {
            t = id % 2;
            q = id / 2;
        }
        const int m0 = intervals(0);
        const int i = q % m0, j = q / m0;
        const double x0 = xs[static_cast<std::size_t>(i)], y0 = ys[static_cast<std::size_t>(j)];
        const double x1 = xs[static_cast<std::size_t>(i) + 1], y1 = ys[static_cast<std::size_t>(j) + 1];
        if (!split_) {
            c.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
            c.centroid = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
            c.volume = (x1 - x0) * (y1 - y0);
        } else if (t == 0) { // below the (x0,y0)-(x1,y1) diagonal
            c.vertices = {{x0, y0}, {x1, y0}, {x1, y1}};
            c.centroid = {(x0 + 2.0 * x1) / 3.0, (2.0 * y0 + y1) / 3.0};
            c.volume = 0.5 * (x1 - x0) * (y1 - y0);
        } else {
            c.vertices = {{x0, y0}, {x1, y1}, {x0, y1}};
            c.centroid = {(2.0 * x0 + x1) / 3.0, (y0 + 2.0 * y1) / 3.0};
            c.volume = 0.5 * (x1 - x0) * (y1 - y0);
        }
        return c;
    }

    /// Reference cell index containing a point; points on a face belong to
    /// the upper cell, points outside are clamped.
    int locate(const Vec& ref) const {
        auto idx = [&](int axis) {
            const std::vector<double>& xs = breaks_[static_cast<std::size_t>(axis)];
            const double v = ref[static_cast<std::size_t>(axis)];
            int i = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), v) - xs.begin()) - 1;
            if (i < 0) i = 0;
            if (i > static_cast<int>(xs.size()) - 2) i = static_cast<int>(xs.size()) - 2;
            return i;
        };
        if (dim_ == 1) return idx(0);
        const int i = idx(0), j = idx(1);
        int id = i + intervals(0) * j;
        if (!split_) return id;
        const double x0 = breaks_[0][static_cast<std::size_t>(i)], y0 = breaks_[1][static_cast<std::size_t>(j)];
        const double hx = breaks_[0][static_cast<std::size_t>(i) + 1] - x0;
        const double hy = breaks_[1][static_cast<std::size_t>(j) + 1] - y0;
        const int t = ((ref[1] - y0) / hy > (ref[0] - x0) / hx) ? 1 : 0;
        return 2 * id + t;
    }

    /// Interior faces, in a fixed deterministic order.
    std::vector<Face> interior_faces() const {
        std::vector<Face> fs;
        if (dim_ == 1) {
            const std::vector<double>& xs = breaks_[0];
            for (int i = 1; i < intervals(0); ++i) {
                Face f;
                f.minus = i - 1;
                f.plus = i;
                f.a = f.b = {xs[static_cast<std::size_t>(i)]};
                f.normal = {1.0};
                f.measure = 1.0;
                fs.push_back(f);
            }
            return fs;
        }
        const std::vector<double>& xs = breaks_[0];
        const std::vector<double>& ys = breaks_[1];
        const int m0 = intervals(0), m1 = intervals(1);
        auto quad_id = [&](int i, int j) { return i + m0 * j; };
        for (int j = 0; j < m1; ++j)
            for (int i = 0; i < m0; ++i) {
                const double x0 = xs[static_cast<std::size_t>(i)], y0 = ys[static_cast<std::size_t>(j)];
                const double x1 = xs[static_cast<std::size_t>(i) + 1], y1 = ys[static_cast<std::size_t>(j) + 1];
                if (i > 0) { // vertical face with the left neighbor
                    Face f;
                    f.minus = split_ ? 2 * quad_id(i - 1, j) : quad_id(i - 1, j);
                    f.plus = split_ ? 2 * quad_id(i, j) + 1 : quad_id(i, j);
                    f.a = {x0, y0};
                    f.b = {x0, y1};
                    f.normal = {1.0, 0.0};
                    f.measure = y1 - y0;
                    fs.push_back(f);
                }
                if (j > 0) { // horizontal face with the bottom neighbor
                    Face f;
                    f.minus = split_ ? 2 * quad_id(i, j - 1) + 1 : quad_id(i, j - 1);
                    f.plus = split_ ? 2 * quad_id(i, j) : quad_id(i, j);
                    f.a = {x0, y0};
                    f.b = {x1, y0};
                    f.normal = {0.0, 1.0};
                    f.measure = x1 - x0;
                    fs.push_back(f);
                }
                if (split_) { // diagonal face inside the cell
                    Face f;
                    f.minus = 2 * quad_id(i, j);
                    f.plus = 2 * quad_id(i, j) + 1;
                    f.a = {x0, y0};
                    f.b = {x1, y1};
                    const double len = std::hypot(x1 - x0, y1 - y0);
                    f.normal = {-(y1 - y0) / len, (x1 - x0) / len};
                    f.measure = len;
                    fs.push_back(f);
                }
            }
        return fs;
    }

    /// Faces on the boundary of the box, outward normals, plus == -1.
    std::vector<Face> boundary_faces() const {
        std::vector<Face> fs;
        if (dim_ == 1) {
            Face l;
            l.minus = 0;
            l.a = l.b = {lo_[0]};
            l.normal = {-1.0};
            fs.push_back(l);
            Face r;
            r.minus = intervals(0) - 1;
            r.a = r.b = {hi_[0]};
            r.normal = {1.0};
            fs.push_back(r);
            return fs;
        }
        const std::vector<double>& xs = breaks_[0];
        const std::vector<double>& ys = breaks_[1];
        const int m0 = intervals(0), m1 = intervals(1);
        auto quad_id = [&](int i, int j) { return i + m0 * j; };
        for (int j = 0; j < m1; ++j) {
            { // left edge belongs to the upper triangle on split grids
                Face f;
                f.minus = split_ ? 2 * quad_id(0, j) + 1 : quad_id(0, j);
                f.a = {lo_[0], ys[static_cast<std::size_t>(j)]};
                f.b = {lo_[0], ys[static_cast<std::size_t>(j) + 1]};
                f.normal = {-1.0, 0.0};
                f.measure = f.b[1] - f.a[1];
                fs.push_back(f);
            }
            {
                Face f;
                f.minus = split_ ? 2 * quad_id(m0 - 1, j) : quad_id(m0 - 1, j);
                f.a = {hi_[0], ys[static_cast<std::size_t>(j)]};
                f.b = {hi_[0], ys[static_cast<std::size_t>(j) + 1]};
                f.normal = {1.0, 0.0};
                f.measure = f.b[1] - f.a[1];
                fs.push_back(f);
            }
        }
        for (int i = 0; i < m0; ++i) {
            { // bottom edge belongs to the lower triangle
                Face f;
                f.minus = split_ ? 2 * quad_id(i, 0) : quad_id(i, 0);
                f.a = {xs[static_cast<std::size_t>(i)], lo_[1]};
                f.b = {xs[static_cast<std::size_t>(i) + 1], lo_[1]};
                f.normal = {0.0, -1.0};
                f.measure = f.b[0] - f.a[0];
                fs.push_back(f);
            }
            {
                Face f;
                f.minus = split_ ? 2 * quad_id(i, m1 - 1) + 1 : quad_id(i, m1 - 1);
                f.a = {xs[static_cast<std::size_t>(i)], hi_[1]};
                f.b = {xs[static_cast<std::size_t>(i) + 1], hi_[1]};
                f.normal = {0.0, 1.0};
                f.measure = f.b[0] - f.a[0];
                fs.push_back(f);
            }
        }
        return fs;
    }

    bool same_layout(const Grid& o) const {
        return dim_ == o.dim_ && n_ == o.n_ && lo_ == o.lo_ && hi_ == o.hi_ && split_ == o.split_ &&
               rot_ == o.rot_ && breaks_[0] == o.breaks_[0] && breaks_[1] == o.breaks_[1];
    }

private:
    void check_orthonormal() const {
        const Matrix should_be_id = rot_.transposed() * rot_;
        const Matrix err = should_be_id - Matrix::identity(dim_);
        if (err.frobenius() > 1e-12) throw std::invalid_argument("Grid: rotation is not orthonormal");
    }

    int dim_;
    int n_;
    Vec lo_, hi_;
    Matrix rot_;
    bool split_;
    bool graded_ = false;
    double layer_ = 0.0;
    std::vector<double> breaks_[2];
};

} // namespace hsd
