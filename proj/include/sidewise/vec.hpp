#ifndef SIDEWISE_VEC_HPP
#define SIDEWISE_VEC_HPP

#include <array>
#include <cmath>

namespace sidewise {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double a) const { return {a * x, a * y}; }
    Vec2 operator/(double a) const { return {x / a, y / a}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double a) { x *= a; y *= a; return *this; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    Vec2 normalized() const { double n = norm(); return {x / n, y / n}; }
    Vec2 perp() const { return {-y, x}; }  // rotate +90 degrees
};

inline Vec2 operator*(double a, Vec2 v) { return v * a; }

// Symmetric 2x2 matrix (stores the upper triangle).
struct Mat2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;

    Mat2() = default;
    Mat2(double m11, double m12, double m22) : a11(m11), a12(m12), a22(m22) {}

    static Mat2 identity() { return {1.0, 0.0, 1.0}; }

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }
    double quad(Vec2 v) const { return v.dot(apply(v)); }  // v^T M v
    double det() const { return a11 * a22 - a12 * a12; }
    Mat2 inverse() const {
        double d = det();
        return {a22 / d, -a12 / d, a11 / d};
    }
    Mat2 operator+(const Mat2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    Mat2 operator*(double c) const { return {c * a11, c * a12, c * a22}; }

    // Eigenvalues of the symmetric matrix, ascending.
    std::array<double, 2> eigenvalues() const {
        double tr = a11 + a22;
        double disc = std::sqrt(std::max(0.0, 0.25 * (a11 - a22) * (a11 - a22) + a12 * a12));
        return {0.5 * tr - disc, 0.5 * tr + disc};
    }
};

struct BBox {
    Vec2 lo{0, 0};
    Vec2 hi{0, 0};

    bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
    BBox inflated(double m) const { return {{lo.x - m, lo.y - m}, {hi.x + m, hi.y + m}}; }
    void absorb(Vec2 p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
    }
};

}  // namespace sidewise

#endif
