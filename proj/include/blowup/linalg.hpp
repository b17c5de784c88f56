#pragma once

// Fixed-size 3-vectors and 3x3 matrices, enough for the quadratic fields here.
// Two-dimensional charts embed into the first two components.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace blowup {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;
using cplx = std::complex<double>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm_inf(const Vec3& a) { return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])}); }

inline Vec3 mul(const Mat3& A, const Vec3& v)
{
    Vec3 r{};
    for (int i = 0; i < 3; ++i)
        r[i] = A[i][0] * v[0] + A[i][1] * v[1] + A[i][2] * v[2];
    return r;
}

namespace detail {

inline cplx polish_root(cplx z, double c2, double c1, double c0)
{
    // Newton on z^3 + c2 z^2 + c1 z + c0
    for (int it = 0; it < 8; ++it) {
        cplx p = ((z + c2) * z + c1) * z + c0;
        cplx dp = (3.0 * z + 2.0 * c2) * z + c1;
        if (std::abs(dp) == 0.0) break;
        cplx step = p / dp;
        z -= step;
        if (std::abs(step) <= 1e-16 * (1.0 + std::abs(z))) break;
    }
    return z;
}

} // namespace detail

// Roots of z^3 + c2 z^2 + c1 z + c0 (monic). Imaginary parts below `imag_tol`
// are snapped to zero and conjugate pairs are made exact.
inline std::vector<cplx> cubic_roots(double c2, double c1, double c0, double imag_tol = 1e-12)
{
    const double a = c2 / 3.0;
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * a * a * a - a * c1 + c0;
    cplx disc = cplx(q * q / 4.0 + p * p * p / 27.0, 0.0);
    cplx s = std::sqrt(disc);
    cplx u = std::pow(-q / 2.0 + s, 1.0 / 3.0);
    if (std::abs(u) < 1e-300) u = std::pow(-q / 2.0 - s, 1.0 / 3.0);
    const cplx w(-0.5, std::sqrt(3.0) / 2.0);
    std::vector<cplx> r;
    for (int k = 0; k < 3; ++k) {
        cplx uk = u;
        for (int j = 0; j < k; ++j) uk *= w;
        cplx t = (std::abs(uk) < 1e-300) ? cplx(0.0) : uk - p / (3.0 * uk);
        r.push_back(detail::polish_root(t - a, c2, c1, c0));
    }
    // the real-coefficient cubic has at least one real root: pick it, deflate exactly
    std::size_t ireal = 0;
    for (std::size_t i = 1; i < 3; ++i)
        if (std::abs(r[i].imag()) < std::abs(r[ireal].imag())) ireal = i;
    double x0 = detail::polish_root(cplx(r[ireal].real(), 0.0), c2, c1, c0).real();
    double b = c2 + x0, c = c1 + b * x0; // z^2 + b z + c
    double d = b * b / 4.0 - c;
    std::vector<cplx> out{cplx(x0, 0.0)};
    if (d >= 0.0) {
        double sq = std::sqrt(d);
        double z1 = -b / 2.0 - std::copysign(sq, b);
        double z2 = (z1 != 0.0) ? c / z1 : -b / 2.0 + std::copysign(sq, b);
        out.emplace_back(detail::polish_root(cplx(z1, 0.0), c2, c1, c0).real(), 0.0);
        out.emplace_back(detail::polish_root(cplx(z2, 0.0), c2, c1, c0).real(), 0.0);
    } else {
        double im = std::sqrt(-d);
        if (im < imag_tol) im = 0.0;
        out.emplace_back(-b / 2.0, im);
        out.emplace_back(-b / 2.0, -im);
    }
    std::sort(out.begin(), out.end(), [](const cplx& x, const cplx& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return out;
}

inline std::vector<cplx> eigenvalues2(double a, double b, double c, double d, double imag_tol = 1e-12);

inline std::vector<cplx> eigenvalues3(const Mat3& A, double imag_tol = 1e-12)
{
    // a decoupled row or column gives one eigenvalue exactly and leaves a 2x2 block;
    // critical points of the charts here are mostly of this shape, repeated roots included
    for (int i = 0; i < 3; ++i) {
        int j = (i + 1) % 3, k = (i + 2) % 3;
        bool row = A[i][j] == 0 && A[i][k] == 0, col = A[j][i] == 0 && A[k][i] == 0;
        if (row || col) {
            auto r = eigenvalues2(A[j][j], A[j][k], A[k][j], A[k][k], imag_tol);
            r.push_back(cplx(A[i][i], 0.0));
            std::sort(r.begin(), r.end(), [](const cplx& x, const cplx& y) {
                return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
            });
            return r;
        }
    }
    double tr = A[0][0] + A[1][1] + A[2][2];
    double m2 = A[0][0] * A[1][1] - A[0][1] * A[1][0] + A[0][0] * A[2][2] - A[0][2] * A[2][0] +
                A[1][1] * A[2][2] - A[1][2] * A[2][1];
    double det = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                 A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                 A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    return cubic_roots(-tr, m2, -det, imag_tol);
}

inline std::vector<cplx> eigenvalues2(double a, double b, double c, double d, double imag_tol)
{
    double tr = a + d, det = a * d - b * c;
    double disc = (a - d) * (a - d) / 4.0 + b * c;
    std::vector<cplx> out;
    if (disc >= 0.0) {
        double sq = std::sqrt(disc);
        double l1 = tr / 2.0 + std::copysign(sq, tr);
        double l2 = (l1 != 0.0) ? det / l1 : tr / 2.0 - sq;
        out = {cplx(std::min(l1, l2), 0.0), cplx(std::max(l1, l2), 0.0)};
    } else {
        double im = std::sqrt(-disc);
        if (im < imag_tol) im = 0.0;
        out = {cplx(tr / 2.0, -im), cplx(tr / 2.0, im)};
    }
    return out;
}

} // namespace blowup
