#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

// Forward-mode automatic differentiation with a single tangent component.
// Gradients are obtained by seeding one coordinate at a time, which keeps the
// scalar type trivially copyable and allocation-free. Nesting Dual<Dual<double>>
// yields exact second derivatives.

namespace rbayes::ad {

template <class T>
struct Dual {
    T v{};  // value
    T d{};  // tangent

    Dual() = default;
    Dual(T value) : v(value) {}
    Dual(T value, T tangent) : v(value), d(tangent) {}
    // recursive double conversion so nested duals construct from scalars
    template <class U, class = std::enable_if_t<std::is_arithmetic_v<U> && !std::is_same_v<T, U>>>
    Dual(U value) : v(value) {}

    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
    Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

template <class T> Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T> Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T> Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T> Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator+(const Dual<T>& a) { return a; }

// mixed double ops recurse through T so arbitrarily nested duals work
template <class T> Dual<T> operator+(Dual<T> a, double b) { a.v = a.v + b; return a; }
template <class T> Dual<T> operator+(double b, Dual<T> a) { a.v = a.v + b; return a; }
template <class T> Dual<T> operator-(Dual<T> a, double b) { a.v = a.v - b; return a; }
template <class T> Dual<T> operator-(double b, const Dual<T>& a) { return {b - a.v, -a.d}; }
template <class T> Dual<T> operator*(Dual<T> a, double b) { a.v = a.v * b; a.d = a.d * b; return a; }
template <class T> Dual<T> operator*(double b, Dual<T> a) { return a * b; }
template <class T> Dual<T> operator/(Dual<T> a, double b) { a.v = a.v / b; a.d = a.d / b; return a; }
template <class T> Dual<T> operator/(double b, const Dual<T>& a) { return Dual<T>(b) / a; }

template <class T> bool operator<(const Dual<T>& a, const Dual<T>& b) { return a.v < b.v; }
template <class T> bool operator>(const Dual<T>& a, const Dual<T>& b) { return a.v > b.v; }
template <class T> bool operator<=(const Dual<T>& a, const Dual<T>& b) { return a.v <= b.v; }
template <class T> bool operator>=(const Dual<T>& a, const Dual<T>& b) { return a.v >= b.v; }
template <class T> bool operator<(const Dual<T>& a, double b) { return a.v < b; }
template <class T> bool operator>(const Dual<T>& a, double b) { return a.v > b; }
template <class T> bool operator<=(const Dual<T>& a, double b) { return a.v <= b; }
template <class T> bool operator>=(const Dual<T>& a, double b) { return a.v >= b; }
template <class T> bool operator<(double b, const Dual<T>& a) { return b < a.v; }
template <class T> bool operator>(double b, const Dual<T>& a) { return b > a.v; }

// value extraction that works for nested duals
inline double value_of(double x) { return x; }
template <class T> double value_of(const Dual<T>& x) { return value_of(x.v); }

using std::exp;
using std::log;
using std::sqrt;
using std::lgamma;
using std::log1p;
using std::pow;
using std::fabs;
using std::cos;
using std::sin;
using std::expm1;
using std::isfinite;
using std::atan;

template <class T> Dual<T> exp(const Dual<T>& a) { T e = exp(a.v); return {e, a.d * e}; }
template <class T> Dual<T> log(const Dual<T>& a) { return {log(a.v), a.d / a.v}; }
template <class T> Dual<T> log1p(const Dual<T>& a) { return {log1p(a.v), a.d / (1.0 + a.v)}; }
template <class T> Dual<T> expm1(const Dual<T>& a) { T e = exp(a.v); return {expm1(a.v), a.d * e}; }
template <class T> Dual<T> sqrt(const Dual<T>& a) { T s = sqrt(a.v); return {s, a.d / (2.0 * s)}; }
template <class T> Dual<T> fabs(const Dual<T>& a) { return a.v < 0.0 ? -a : a; }
template <class T> Dual<T> sin(const Dual<T>& a) { return {sin(a.v), a.d * cos(a.v)}; }
template <class T> Dual<T> cos(const Dual<T>& a) { return {cos(a.v), -a.d * sin(a.v)}; }
template <class T> Dual<T> atan(const Dual<T>& a) { return {atan(a.v), a.d / (1.0 + a.v * a.v)}; }

template <class T> Dual<T> pow(const Dual<T>& a, double b) {
    T p = pow(a.v, b);
    return {p, a.d * b * pow(a.v, b - 1.0)};
}
template <class T> Dual<T> pow(const Dual<T>& a, const Dual<T>& b) {
    return exp(b * log(a));
}
template <class T> bool isfinite(const Dual<T>& a) { return isfinite(a.v) && isfinite(a.d); }

// digamma via the standard recurrence + asymptotic series (error < 1e-13 past
// the cutover at x >= 8)
inline double digamma(double x) {
    double r = 0.0;
    while (x < 8.0) { r -= 1.0 / x; x += 1.0; }
    double f = 1.0 / (x * x);
    return r + log(x) - 0.5 / x
        - f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0
        - f * (1.0 / 132.0 - f * (691.0 / 32760.0))))));
}

inline double trigamma(double x) {
    double r = 0.0;
    while (x < 8.0) { r += 1.0 / (x * x); x += 1.0; }
    double f = 1.0 / (x * x);
    return r + 1.0 / x + f * (0.5 + (1.0 / x) * (1.0 / 6.0 - f * (1.0 / 30.0 - f * (1.0 / 42.0
        - f * (1.0 / 30.0 - f * (5.0 / 66.0 - f * (691.0 / 2730.0)))))));
}

// psi''(x)
inline double tetragamma(double x) {
    double r = 0.0;
    while (x < 8.0) { r -= 2.0 / (x * x * x); x += 1.0; }
    double f = 1.0 / (x * x);
    return r - f * (1.0 + 1.0 / x + f * (0.5 - f * (1.0 / 6.0 - f * (1.0 / 6.0
        - f * (3.0 / 10.0 - f * (5.0 / 6.0 - f * (691.0 * 13.0 / 2730.0)))))));
}

template <class T> Dual<T> lgamma(const Dual<T>& a);
template <class T> Dual<T> digamma(const Dual<T>& a);
template <class T> Dual<T> trigamma(const Dual<T>& a);

template <class T> Dual<T> lgamma(const Dual<T>& a) { return {lgamma(a.v), a.d * digamma(a.v)}; }
template <class T> Dual<T> digamma(const Dual<T>& a) { return {digamma(a.v), a.d * trigamma(a.v)}; }
template <class T> Dual<T> trigamma(const Dual<T>& a) { return {trigamma(a.v), a.d * tetragamma(a.v)}; }

using dual = Dual<double>;
using dual2 = Dual<Dual<double>>;

// Gradient by repeated single-direction forward sweeps.
// f must be callable as f(std::span<const dual>) -> dual.
template <class F>
void gradient(F&& f, std::span<const double> x, double& value, std::span<double> grad) {
    std::vector<dual> xs(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i].d = 1.0;
        dual y = f(std::span<const dual>(xs));
        grad[i] = y.d;
        if (i == 0) value = y.v;
        xs[i].d = 0.0;
    }
    if (x.empty()) value = f(std::span<const dual>(xs)).v;
}

// Dense Hessian (plus value and gradient) by nested forward sweeps, one
// evaluation per unordered coordinate pair. f must be callable as
// f(std::span<const dual2>) -> dual2. hess is row-major with n*n entries.
template <class F>
void hessian(F&& f, std::span<const double> x, double& value, std::span<double> grad,
             std::span<double> hess) {
    const std::size_t n = x.size();
    std::vector<dual2> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = dual2(Dual<double>(x[i]));
    if (n == 0) {
        value = value_of(f(std::span<const dual2>(xs)));
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        xs[i].v.d = 1.0;  // inner tangent e_i
        for (std::size_t j = 0; j <= i; ++j) {
            xs[j].d.v = 1.0;  // outer tangent e_j
            dual2 y = f(std::span<const dual2>(xs));
            hess[i * n + j] = hess[j * n + i] = y.d.d;
            if (j == 0) grad[i] = y.v.d;
            if (i == 0 && j == 0) value = y.v.v;
            xs[j].d.v = 0.0;
        }
        xs[i].v.d = 0.0;
    }
}

}  // namespace rbayes::ad
