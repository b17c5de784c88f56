#pragma once

// Right-hand sides of the phase-space system in all of its charts, their
// Jacobians, the critical points (finite and at infinity) with spectra, the
// normal-form data at P3 and Taylor approximations of the P0/P1 manifolds.

#include <blowup/error.hpp>
#include <blowup/linalg.hpp>
#include <blowup/model.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace blowup {

enum class ChartId { MAIN, SHIFTED, PLANE_Z0, PLANE_X0, ALT, RESCALED, CHART_Q1, CHART_Q23 };

inline const char* to_string(ChartId c)
{
    switch (c) {
    case ChartId::MAIN: return "MAIN";
    case ChartId::SHIFTED: return "SHIFTED";
    case ChartId::PLANE_Z0: return "PLANE_Z0";
    case ChartId::PLANE_X0: return "PLANE_X0";
    case ChartId::ALT: return "ALT";
    case ChartId::RESCALED: return "RESCALED";
    case ChartId::CHART_Q1: return "CHART_Q1";
    case ChartId::CHART_Q23: return "CHART_Q23";
    }
    return "?";
}

inline std::optional<ChartId> chart_from_string(const std::string& s)
{
    for (ChartId c : {ChartId::MAIN, ChartId::SHIFTED, ChartId::PLANE_Z0, ChartId::PLANE_X0, ChartId::ALT,
                      ChartId::RESCALED, ChartId::CHART_Q1, ChartId::CHART_Q23})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

inline int chart_dim(ChartId c) { return (c == ChartId::PLANE_Z0 || c == ChartId::PLANE_X0) ? 2 : 3; }

inline std::vector<std::string> chart_components(ChartId c)
{
    switch (c) {
    case ChartId::MAIN: return {"X", "Y", "Z"};
    case ChartId::SHIFTED: return {"X", "H", "Z"};
    case ChartId::PLANE_Z0: return {"X", "Y"};
    case ChartId::PLANE_X0: return {"Y", "Z"};
    case ChartId::ALT: return {"x", "y", "z"};
    case ChartId::RESCALED: return {"U", "Y", "Z"};
    case ChartId::CHART_Q1: return {"y", "z", "w"};
    case ChartId::CHART_Q23: return {"x", "z", "w"};
    }
    return {};
}

namespace detail {
inline double rescaled_lambda(const ModelParams& p)
{
    if (!(p.sigma > 0)) throw Error(ErrorCode::BAD_SPEC, "RESCALED chart needs sigma > 0");
    return 1.0 / p.sigma;
}
} // namespace detail

// Fast path: 2D charts use the first two components and return 0 in the third.
// `branch` is the sign of Y for CHART_Q23 (+1: Q2 side, -1: Q3 side).
inline Vec3 field(ChartId c, const Vec3& u, const ModelParams& p, int branch = 1)
{
    const double m = p.m, N = p.N, s = p.sigma;
    switch (c) {
    case ChartId::MAIN: {
        const double X = u[0], Y = u[1], Z = u[2];
        return {(m - 1) / 2 * X * Y - X * X, -(m + 1) / 2 * Y * Y + 1 - Z - (N - 1) * X * Y,
                Z * ((m - 1) * Y + s * X)};
    }
    case ChartId::SHIFTED: {
        // 1 - (m+1)Y^2/2 expanded around Y = -h0 so nothing cancels near P1
        const double h0 = h0_of(m), X = u[0], H = u[1], Y = H - h0, Z = u[2];
        return {(m - 1) / 2 * X * Y - X * X, -(m + 1) / 2 * H * H + (m + 1) * h0 * H - Z - (N - 1) * X * Y,
                Z * ((m - 1) * Y + s * X)};
    }
    case ChartId::PLANE_Z0: {
        const double X = u[0], Y = u[1];
        return {(m - 1) / 2 * X * Y - X * X, -(m + 1) / 2 * Y * Y + 1 - (N - 1) * X * Y, 0.0};
    }
    case ChartId::PLANE_X0: {
        const double Y = u[0], Z = u[1];
        return {-(m + 1) / 2 * Y * Y + 1 - Z, (m - 1) * Y * Z, 0.0};
    }
    case ChartId::ALT: {
        const double x = u[0], y = u[1], z = u[2];
        return {x * (2 - (m - 1) * y), -m * y * y - (N - 2) * y + x - z, (s + 2) * z};
    }
    case ChartId::RESCALED: {
        const double lam = detail::rescaled_lambda(p);
        const double U = u[0], Y = u[1], Z = u[2];
        return {(m - 1) / 2 * U * Y - lam * U * U, -(m + 1) / 2 * Y * Y + 1 - Z - (N - 1) * lam * U * Y,
                Z * ((m - 1) * Y + U)};
    }
    case ChartId::CHART_Q1: {
        const double y = u[0], z = u[1], w = u[2];
        return {-(N - 2) * y - m * y * y + w * w - z * w, z * ((s + 1) + (m - 1) / 2 * y),
                w * (1 - (m - 1) / 2 * y)};
    }
    case ChartId::CHART_Q23: {
        const double b = branch >= 0 ? 1.0 : -1.0;
        const double x = u[0], z = u[1], w = u[2];
        return {b * m * x + (N - 2) * x * x - b * x * w * w + b * x * z * w,
                (N + s - 1) * x * z + b * (3 * m - 1) / 2 * z - b * w * w * z + b * w * z * z,
                (N - 1) * x * w + b * (m + 1) / 2 * w - b * w * w * w + b * w * w * z};
    }
    }
    return {};
}

inline Mat3 jacobian3(ChartId c, const Vec3& u, const ModelParams& p, int branch = 1)
{
    const double m = p.m, N = p.N, s = p.sigma;
    Mat3 J{};
    switch (c) {
    case ChartId::MAIN:
    case ChartId::SHIFTED: {
        const double X = u[0], Y = (c == ChartId::SHIFTED) ? u[1] - h0_of(m) : u[1], Z = u[2];
        J[0] = {(m - 1) / 2 * Y - 2 * X, (m - 1) / 2 * X, 0.0};
        J[1] = {-(N - 1) * Y, -(m + 1) * Y - (N - 1) * X, -1.0};
        J[2] = {s * Z, (m - 1) * Z, (m - 1) * Y + s * X};
        break;
    }
    case ChartId::PLANE_Z0: {
        const double X = u[0], Y = u[1];
        J[0] = {(m - 1) / 2 * Y - 2 * X, (m - 1) / 2 * X, 0.0};
        J[1] = {-(N - 1) * Y, -(m + 1) * Y - (N - 1) * X, 0.0};
        break;
    }
    case ChartId::PLANE_X0: {
        const double Y = u[0], Z = u[1];
        J[0] = {-(m + 1) * Y, -1.0, 0.0};
        J[1] = {(m - 1) * Z, (m - 1) * Y, 0.0};
        break;
    }
    case ChartId::ALT: {
        const double x = u[0], y = u[1];
        J[0] = {2 - (m - 1) * y, -(m - 1) * x, 0.0};
        J[1] = {1.0, -2 * m * y - (N - 2), -1.0};
        J[2] = {0.0, 0.0, s + 2};
        break;
    }
    case ChartId::RESCALED: {
        const double lam = detail::rescaled_lambda(p);
        const double U = u[0], Y = u[1], Z = u[2];
        J[0] = {(m - 1) / 2 * Y - 2 * lam * U, (m - 1) / 2 * U, 0.0};
        J[1] = {-(N - 1) * lam * Y, -(m + 1) * Y - (N - 1) * lam * U, -1.0};
        J[2] = {Z, (m - 1) * Z, (m - 1) * Y + U};
        break;
    }
    case ChartId::CHART_Q1: {
        const double y = u[0], z = u[1], w = u[2];
        J[0] = {-(N - 2) - 2 * m * y, -w, 2 * w - z};
        J[1] = {(m - 1) / 2 * z, (s + 1) + (m - 1) / 2 * y, 0.0};
        J[2] = {-(m - 1) / 2 * w, 0.0, 1 - (m - 1) / 2 * y};
        break;
    }
    case ChartId::CHART_Q23: {
        const double b = branch >= 0 ? 1.0 : -1.0;
        const double x = u[0], z = u[1], w = u[2];
        J[0] = {b * m + 2 * (N - 2) * x - b * w * w + b * z * w, b * x * w, -2 * b * x * w + b * x * z};
        J[1] = {(N + s - 1) * z, (N + s - 1) * x + b * (3 * m - 1) / 2 - b * w * w + 2 * b * w * z,
                -2 * b * w * z + b * z * z};
        J[2] = {(N - 1) * w, b * w * w, (N - 1) * x + b * (m + 1) / 2 - 3 * b * w * w + 2 * b * w * z};
        break;
    }
    }
    return J;
}

// Checked API on arbitrary-length state vectors.
inline std::vector<double> eval_field(ChartId c, std::span<const double> state, const ModelParams& p,
                                      int branch = 1)
{
    const int d = chart_dim(c);
    if (static_cast<int>(state.size()) != d)
        throw Error(ErrorCode::DIM_MISMATCH, std::string(to_string(c)) + " expects dimension " + std::to_string(d));
    Vec3 u{state[0], state[1], d == 3 ? state[2] : 0.0};
    Vec3 f = field(c, u, p, branch);
    return std::vector<double>(f.begin(), f.begin() + d);
}

inline std::vector<std::vector<double>> jacobian(ChartId c, std::span<const double> state, const ModelParams& p,
                                                 int branch = 1)
{
    const int d = chart_dim(c);
    if (static_cast<int>(state.size()) != d)
        throw Error(ErrorCode::DIM_MISMATCH, std::string(to_string(c)) + " expects dimension " + std::to_string(d));
    Vec3 u{state[0], state[1], d == 3 ? state[2] : 0.0};
    Mat3 J = jacobian3(c, u, p, branch);
    std::vector<std::vector<double>> out(d, std::vector<double>(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out[i][j] = J[i][j];
    return out;
}

inline std::vector<cplx> spectrum(ChartId c, const Vec3& u, const ModelParams& p, int branch = 1)
{
    Mat3 J = jacobian3(c, u, p, branch);
    if (chart_dim(c) == 2) return eigenvalues2(J[0][0], J[0][1], J[1][0], J[1][1]);
    return eigenvalues3(J);
}

// ---- chart dictionaries (to and from MAIN, X > 0 where needed) --------------

// Map a MAIN state into another chart. For CHART_Q23 the branch is sign(Y).
inline Vec3 from_main(ChartId c, const Vec3& u, const ModelParams& p, int* branch = nullptr)
{
    const double X = u[0], Y = u[1], Z = u[2];
    switch (c) {
    case ChartId::MAIN: return u;
    case ChartId::SHIFTED: return {X, Y + h0_of(p.m), Z};
    case ChartId::PLANE_Z0: return {X, Y, 0.0};
    case ChartId::PLANE_X0: return {Y, Z, 0.0};
    case ChartId::ALT: return {1 / (X * X), Y / X, Z / (X * X)};
    case ChartId::RESCALED: return {p.sigma * X, Y, Z};
    case ChartId::CHART_Q1: return {Y / X, Z / X, 1 / X};
    case ChartId::CHART_Q23: {
        double a = std::abs(Y);
        if (branch) *branch = Y >= 0 ? 1 : -1;
        return {X / a, Z / a, 1 / a};
    }
    }
    return u;
}

inline Vec3 to_main(ChartId c, const Vec3& v, const ModelParams& p, int branch = 1)
{
    switch (c) {
    case ChartId::MAIN: return v;
    case ChartId::SHIFTED: return {v[0], v[1] - h0_of(p.m), v[2]};
    case ChartId::PLANE_Z0: return {v[0], v[1], 0.0};
    case ChartId::PLANE_X0: return {0.0, v[0], v[1]};
    case ChartId::ALT: {
        double X = 1 / std::sqrt(v[0]);
        return {X, v[1] * X, v[2] * X * X};
    }
    case ChartId::RESCALED: return {v[0] / p.sigma, v[1], v[2]};
    case ChartId::CHART_Q1: return {1 / v[2], v[0] / v[2], v[1] / v[2]};
    case ChartId::CHART_Q23: {
        double b = branch >= 0 ? 1.0 : -1.0;
        return {v[0] / v[2], b / v[2], v[1] / v[2]};
    }
    }
    return v;
}

// d(eta_chart)/d(eta_main) at a MAIN state: the chart field equals
// (pushforward of the MAIN field) / time_factor.
inline double time_factor(ChartId c, const Vec3& u)
{
    switch (c) {
    case ChartId::ALT: return u[0];
    case ChartId::CHART_Q1: return u[0];
    case ChartId::CHART_Q23: return std::abs(u[1]);
    default: return 1.0;
    }
}

// ---- critical points ---------------------------------------------------------

enum class PointId { P0, P1, P2, P3, Q1, Q2, Q3, Q4, Q5 };

inline const char* to_string(PointId q)
{
    static const char* n[] = {"P0", "P1", "P2", "P3", "Q1", "Q2", "Q3", "Q4", "Q5"};
    return n[static_cast<int>(q)];
}

struct CriticalPoint {
    PointId id;
    ChartId chart;
    int branch = 1;
    Vec3 location{};
    std::vector<cplx> spectrum;
    int stable = 0, unstable = 0, center = 0;
    std::string tag;
    bool merged_node = false; // Q4 and Q5 are one destination
};

inline constexpr double kSpectralTol = 1e-12;

namespace detail {

inline void count_dims(CriticalPoint& cp, int dim)
{
    cp.stable = cp.unstable = cp.center = 0;
    for (int i = 0; i < dim; ++i) {
        double re = cp.spectrum[i].real();
        if (re < -kSpectralTol) ++cp.stable;
        else if (re > kSpectralTol) ++cp.unstable;
        else ++cp.center;
    }
}

inline std::string hyperbolic_tag(const CriticalPoint& cp, int dim)
{
    if (cp.center > 0) return "nonhyperbolic";
    if (cp.stable == dim) return "stable node";
    if (cp.unstable == dim) return "unstable node";
    return "saddle";
}

inline CriticalPoint make_point(PointId id, ChartId c, const Vec3& loc, const ModelParams& p, int branch = 1)
{
    CriticalPoint cp;
    cp.id = id;
    cp.chart = c;
    cp.branch = branch;
    cp.location = loc;
    cp.spectrum = spectrum(c, loc, p, branch);
    const int d = chart_dim(c);
    count_dims(cp, d);
    cp.tag = hyperbolic_tag(cp, d);
    return cp;
}

} // namespace detail

inline std::vector<CriticalPoint> finite_critical_points(const ModelParams& p)
{
    const double h0 = h0_of(p.m);
    std::vector<CriticalPoint> out;
    out.push_back(detail::make_point(PointId::P0, ChartId::MAIN, {0, h0, 0}, p));
    out.push_back(detail::make_point(PointId::P1, ChartId::MAIN, {0, -h0, 0}, p));
    out.push_back(detail::make_point(PointId::P2, ChartId::MAIN, closed::P2(p), p));
    auto p3 = detail::make_point(PointId::P3, ChartId::MAIN, {0, 0, 1}, p);
    double k1 = closed::K1(p);
    if (closed::is_critical(p)) p3.tag = "nonhyperbolic (critical case)";
    else if (k1 < 0) p3.tag = "nonhyperbolic, attractor for X>0";
    else p3.tag = "nonhyperbolic, repeller for X>0";
    out.push_back(p3);
    return out;
}

inline std::vector<CriticalPoint> infinity_critical_points(const ModelParams& p)
{
    const double m = p.m, N = p.N;
    std::vector<CriticalPoint> out;
    auto q1 = detail::make_point(PointId::Q1, ChartId::CHART_Q1, {0, 0, 0}, p);
    if (q1.center > 0) q1.tag = "saddle-node";
    out.push_back(q1);
    out.push_back(detail::make_point(PointId::Q2, ChartId::CHART_Q23, {0, 0, 0}, p, 1));
    out.push_back(detail::make_point(PointId::Q3, ChartId::CHART_Q23, {0, 0, 0}, p, -1));
    auto q4 = detail::make_point(PointId::Q4, ChartId::ALT, {0, (2 - N) / m, 0}, p);
    q4.merged_node = true;
    out.push_back(q4);
    auto q5 = detail::make_point(PointId::Q5, ChartId::CHART_Q1, {(2 - N) / m, 0, 0}, p);
    q5.merged_node = true;
    double K = closed::K_mNsigma(p);
    if (q5.center > 0) q5.tag = "nonhyperbolic";
    else q5.tag = K > 0 ? "unstable node" : "saddle";
    out.push_back(q5);
    return out;
}

inline CriticalPoint critical_point(PointId id, const ModelParams& p)
{
    auto f = finite_critical_points(p);
    for (auto& c : f)
        if (c.id == id) return c;
    auto i = infinity_critical_points(p);
    for (auto& c : i)
        if (c.id == id) return c;
    throw Error(ErrorCode::BAD_SPEC, "unknown point");
}

// ---- P3 normal form --------------------------------------------------------

struct NormalFormTables {
    double g200, g110, g101;
    cplx h200, h110, h101, h020, h011, h002;
};

struct NormalFormP3 {
    double z_coef;
    double radial_coef;
    double rotation;
    std::optional<double> K3;
    bool critical_case = false;
    std::string tag;
    NormalFormTables tables;          // closed forms
    NormalFormTables tables_from_field; // extracted from the field's Taylor coefficients
    double table_mismatch = 0.0;
};

namespace detail {

// Taylor coefficients of the field at P3 in (z, w, wbar) with z = X,
// w = v + i u, v = (m-1)Y + sigma X, u = sqrt(m-1)(Z-1). The field is
// quadratic, so central second differences are exact up to rounding.
inline NormalFormTables tables_from_field(const ModelParams& p)
{
    const double m = p.m, s = p.sigma, r = std::sqrt(m - 1);
    auto to_main_zvu = [&](const Vec3& q) {
        // q = (z, v, u)
        double X = q[0];
        double Y = (q[1] - s * X) / (m - 1);
        double Z = 1 + q[2] / r;
        return Vec3{X, Y, Z};
    };
    auto f_zvu = [&](const Vec3& q) {
        Vec3 f = field(ChartId::MAIN, to_main_zvu(q), p);
        return Vec3{f[0], (m - 1) * f[1] + s * f[0], r * f[2]};
    };
    const double h = 1e-3;
    double H[3][3][3]; // H[k][i][j] = d2 f_k / dq_i dq_j at 0
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Vec3 ei{}, ej{};
            ei[i] = h;
            ej[j] = h;
            Vec3 fpp = f_zvu(ei + ej), fpm = f_zvu(ei - ej), fmp = f_zvu(-ei + ej), fmm = f_zvu(-ei - ej);
            for (int k = 0; k < 3; ++k) H[k][i][j] = (fpp[k] - fpm[k] - fmp[k] + fmm[k]) / (4 * h * h);
        }
    NormalFormTables t{};
    const cplx I(0, 1);
    // d/dw = (d/dv - i d/du)/2, d/dwbar = (d/dv + i d/du)/2
    auto Hw = [&](int i, int j) { return cplx(H[1][i][j], H[2][i][j]); }; // Hessian of v' + i u'
    t.g200 = H[0][0][0];
    t.g110 = (cplx(H[0][0][1]) - I * H[0][0][2]).real() / 2;
    t.g101 = (cplx(H[0][0][1]) + I * H[0][0][2]).real() / 2;
    t.h200 = Hw(0, 0);
    t.h110 = (Hw(0, 1) - I * Hw(0, 2)) / 2.0;
    t.h101 = (Hw(0, 1) + I * Hw(0, 2)) / 2.0;
    t.h020 = (Hw(1, 1) - 2.0 * I * Hw(1, 2) - Hw(2, 2)) / 4.0;
    t.h011 = (Hw(1, 1) + Hw(2, 2)) / 4.0;
    t.h002 = (Hw(1, 1) + 2.0 * I * Hw(1, 2) - Hw(2, 2)) / 4.0;
    return t;
}

} // namespace detail

inline NormalFormP3 normal_form_P3(const ModelParams& p)
{
    const double m = p.m, s = p.sigma;
    const double k1 = closed::K1(p), k2 = closed::K2(p);
    NormalFormP3 nf{};
    NormalFormTables& t = nf.tables;
    t.g200 = -(s + 2);
    t.g110 = t.g101 = 0.25;
    t.h200 = 2 * k2 / (m - 1);
    t.h110 = t.h101 = k1 / (4 * (m - 1));
    t.h020 = 0.5 - (m + 1) / (4 * (m - 1));
    t.h011 = -(m + 1) / (4 * (m - 1));
    t.h002 = -(0.5 + (m + 1) / (4 * (m - 1)));
    nf.tables_from_field = detail::tables_from_field(p);

    const auto& f = nf.tables_from_field;
    auto d = [](cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    nf.table_mismatch = std::max({d(f.g200, t.g200), d(f.g110, t.g110), d(f.g101, t.g101), d(f.h200, t.h200),
                                  d(f.h110, t.h110), d(f.h101, t.h101), d(f.h020, t.h020), d(f.h011, t.h011),
                                  d(f.h002, t.h002)});

    nf.z_coef = t.g200 / 2;
    nf.radial_coef = t.h110.real();
    nf.rotation = std::sqrt(m - 1);
    nf.K3 = closed::K3(p);
    nf.critical_case = closed::is_critical(p);
    if (nf.critical_case) {
        nf.radial_coef = 0.0;
        nf.tag = "critical_case";
    } else if (nf.radial_coef < 0) {
        nf.tag = "attractor for X>0";
    } else {
        nf.tag = "repeller for X>0 (hyperbola regime)";
    }
    return nf;
}

// ---- invariant-manifold Taylor approximations ------------------------------

enum class ManifoldBase { P0, P1 };

struct ManifoldApprox {
    ManifoldBase base;
    int order;
    double A, B, C, D, E, F;
    double h0;

    // H is measured from the base point: H = Y + h0 at P1, H = Y - h0 at P0
    double eval(double X, double H) const
    {
        double sgn = base == ManifoldBase::P1 ? 1.0 : -1.0;
        double z = sgn * A * X + sgn * B * H + C * X * X + D * H * H + E * X * H;
        if (order >= 3) z += sgn * F * X * X * X;
        return z;
    }
    double eval_XY(double X, double Y) const { return eval(X, base == ManifoldBase::P1 ? Y + h0 : Y - h0); }
    double dX(double X, double H) const
    {
        double sgn = base == ManifoldBase::P1 ? 1.0 : -1.0;
        double d = sgn * A + 2 * C * X + E * H;
        if (order >= 3) d += 3 * sgn * F * X * X;
        return d;
    }
    double dH(double X, double H) const
    {
        double sgn = base == ManifoldBase::P1 ? 1.0 : -1.0;
        return sgn * B + 2 * D * H + E * X;
    }
    double base_Y() const { return base == ManifoldBase::P1 ? -h0 : h0; }

    // |Z' - Z_X X' - Z_H H'| on the approximated surface; H' is expanded
    // around the base point to keep the O(1) terms from cancelling
    double invariance_defect(double X, double H, const ModelParams& p) const
    {
        const double m = p.m, b = base_Y(), Y = b + H;
        double Z = eval(X, H);
        double Xd = (m - 1) / 2 * X * Y - X * X;
        double Hd = -(m + 1) / 2 * H * H - (m + 1) * b * H - Z - (p.N - 1) * X * Y;
        double Zd = Z * ((m - 1) * Y + p.sigma * X);
        return std::abs(Zd - dX(X, H) * Xd - dH(X, H) * Hd);
    }
};

inline ManifoldApprox manifold_approx(ManifoldBase base, int order, const ModelParams& p)
{
    if (order != 2 && order != 3) throw Error(ErrorCode::ORDER_UNAVAILABLE, "order must be 2 or 3");
    if (order == 3 && !closed::is_critical(p))
        throw Error(ErrorCode::ORDER_UNAVAILABLE, "order 3 is only available at sigma = sigma_c");
    ManifoldApprox a{};
    a.base = base;
    a.order = order;
    a.A = closed::A(p);
    a.B = closed::B(p);
    a.C = closed::C(p);
    a.D = closed::D(p);
    a.E = closed::E(p);
    a.F = order == 3 ? closed::F_at_sigma_c(p.m, p.N) : 0.0;
    a.h0 = h0_of(p.m);
    return a;
}

} // namespace blowup
