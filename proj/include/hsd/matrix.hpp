#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace hsd {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec operator*(double t, const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = t * a[i];
    return r;
}

/// Dense d-by-N matrix of doubles, row major. Holds gradients, the
/// deformation-without-disarrangement tensors G and the disarrangement
/// tensor M = grad(g) - G.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows * cols), fill) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("Matrix: dimensions must be positive");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = static_cast<int>(rows.size());
        cols_ = static_cast<int>(rows.begin()->size());
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != cols_)
                throw std::invalid_argument("Matrix: ragged initializer");
            for (double v : r) a_.push_back(v);
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix scalar(double v) { return Matrix{{v}}; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i * cols_ + j)]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i * cols_ + j)]; }

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double trace() const {
        if (rows_ != cols_) throw std::invalid_argument("trace: matrix is not square");
        double s = 0.0;
        for (int i = 0; i < rows_; ++i) s += (*this)(i, i);
        return s;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    bool finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Vec apply(const Vec& x) const {
        assert(static_cast<int>(x.size()) == cols_);
        Vec y(static_cast<std::size_t>(rows_), 0.0);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) y[static_cast<std::size_t>(i)] += (*this)(i, j) * x[static_cast<std::size_t>(j)];
        return y;
    }

    /// Column j as a vector.
    Vec col(int j) const {
        Vec c(static_cast<std::size_t>(rows_));
        for (int i = 0; i < rows_; ++i) c[static_cast<std::size_t>(i)] = (*this)(i, j);
        return c;
    }

    void set_col(int j, const Vec& c) {
        assert(static_cast<int>(c.size()) == rows_);
        for (int i = 0; i < rows_; ++i) (*this)(i, j) = c[static_cast<std::size_t>(i)];
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    friend Matrix operator+(const Matrix& a, const Matrix& b) {
        assert(a.same_shape(b));
        Matrix r = a;
        for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] += b.a_[k];
        return r;
    }

    friend Matrix operator-(const Matrix& a, const Matrix& b) {
        assert(a.same_shape(b));
        Matrix r = a;
        for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] -= b.a_[k];
        return r;
    }

    friend Matrix operator*(double t, const Matrix& a) {
        Matrix r = a;
        for (double& v : r.a_) v *= t;
        return r;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        assert(a.cols_ == b.rows_);
        Matrix r(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i)
            for (int k = 0; k < a.cols_; ++k)
                for (int j = 0; j < b.cols_; ++j) r(i, j) += a(i, k) * b(k, j);
        return r;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.a_ == b.a_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

/// Dyad lambda (x) nu.
inline Matrix outer(const Vec& lambda, const Vec& nu) {
    Matrix m(static_cast<int>(lambda.size()), static_cast<int>(nu.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = lambda[static_cast<std::size_t>(i)] * nu[static_cast<std::size_t>(j)];
    return m;
}

/// M = grad(g) - G, the macroscopic trace of submacroscopic slips and separations.
inline Matrix disarrangement_tensor(const Matrix& gradient, const Matrix& G) {
    if (!gradient.same_shape(G)) throw std::invalid_argument("disarrangement_tensor: shape mismatch");
    return gradient - G;
}

/// Jump amplitude and unit interface normal.
struct JumpDatum {
    Vec amplitude; // lambda
    Vec normal;    // nu, |nu| = 1

    JumpDatum(Vec lambda, Vec nu) : amplitude(std::move(lambda)), normal(std::move(nu)) {
        if (std::abs(norm(normal) - 1.0) > 1e-12)
            throw std::invalid_argument("JumpDatum: normal must be unit length");
    }
};

} // namespace hsd
