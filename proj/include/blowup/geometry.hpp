#pragma once

// The separatrix surface Z(X,Y), its normal and the sign of the flow across
// it, the periodic-orbit family in {X = 0}, and the sign certificates behind
// the existence / non-existence arguments.

#include <blowup/error.hpp>
#include <blowup/linalg.hpp>
#include <blowup/model.hpp>
#include <blowup/vectorfields.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blowup {

inline double surface_eval(double X, double Y, const ModelParams& p) { return closed::separatrix_Z(X, Y, p); }

// Completed-square form; an elliptic paraboloid when (2N+s-2)(s+6-2N) > 0.
inline double parab_ell(double X, double Y, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    double t = Y + (2 * N + s - 2) / (4 * m) * X;
    return 2 * m / (m + 1) - m * t * t - (2 * N + s - 2) * (s + 6 - 2 * N) / (16 * m) * X * X;
}

inline bool surface_elliptic(const ModelParams& p)
{
    return (2 * p.N + p.sigma - 2) * (p.sigma + 6 - 2 * p.N) > 0;
}

// Normal (dZ/dX, dZ/dH, -1) in SHIFTED coordinates (X, H = Y + h0, Z).
inline Vec3 surface_normal(double X, double H, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma, Y = H - h0_of(m);
    return {-(s + 2) * (2 * N + s - 2) / (4 * m) * X - (2 * N + s - 2) / 2 * Y,
            -(2 * N + s - 2) / 2 * X - 2 * m * Y, -1.0};
}

// Closed-form flux across the surface; it depends on X only.
inline double surface_flux(double X, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return -closed::K1(p) * X / (2 * (m + 1)) - (2 * N - s - 6) * (2 * N + s - 2) * (s + 2) * X * X * X / (16 * m);
}

// Normal . field evaluated at the surface point above (X, Y).
inline double flux_direct(double X, double Y, const ModelParams& p)
{
    const double H = Y + h0_of(p.m);
    Vec3 u{X, H, surface_eval(X, Y, p)};
    return dot(surface_normal(X, H, p), field(ChartId::SHIFTED, u, p));
}

// Flux in the rescaled variable U = sigma X, written with lambda = 1/sigma.
inline double flux_rescaled(double U, const ModelParams& p)
{
    const double m = p.m, N = p.N, lam = 1.0 / p.sigma;
    return closed::K_lambda(lam, p) / (2 * (m + 1)) * U -
           (2 * lam + 1) * (2 * lam * N - 2 * lam + 1) * (2 * lam * N - 6 * lam - 1) / (16 * m) * U * U * U;
}

// Same quantity computed in the RESCALED chart: normal . field there.
inline double flux_rescaled_direct(double U, double Y, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma, lam = 1.0 / s;
    const double X = lam * U, Z = surface_eval(X, Y, p);
    Vec3 f = field(ChartId::RESCALED, {U, Y, Z}, p);
    // dZ/dU = lambda dZ/dX
    double ZU = lam * (-(s + 2) * (2 * N + s - 2) / (4 * m) * X - (2 * N + s - 2) / 2 * Y);
    double ZY = -(2 * N + s - 2) / 2 * X - 2 * m * Y;
    return ZU * f[0] + ZY * f[1] - f[2];
}

// ---- periodic orbits in {X = 0} ---------------------------------------------

// Y^2 on the cycle of label K at height Z > 0.
inline double cycle_eval(double Z, double K, const ModelParams& p)
{
    if (!(Z > 0)) throw Error(ErrorCode::BAD_SPEC, "cycle_eval needs Z > 0");
    const double m = p.m;
    return 2 / (m + 1) - Z / m - K * std::pow(Z, -(m + 1) / (m - 1));
}

// First integral on {X = 0}: the label of the cycle through (Y, Z).
inline double cycle_label(double Y, double Z, const ModelParams& p)
{
    const double m = p.m;
    return std::pow(Z, (m + 1) / (m - 1)) * (2 / (m + 1) - Z / m - Y * Y);
}

// Largest label: the centre P3 = (0, 1).
inline double cycle_label_max(const ModelParams& p) { return cycle_label(0, 1, p); }

// Closed (Y, Z) polyline of the cycle with label K in [0, K_max). For K = 0
// the curve is the arc through P0 and P1 closed along Z = 0.
inline std::vector<std::pair<double, double>> cycle_curve(double K, const ModelParams& p, int n = 400)
{
    const double kmax = cycle_label_max(p);
    if (K < 0 || K >= kmax) throw Error(ErrorCode::BAD_SPEC, "cycle label must lie in [0, K_max)");
    auto g = [&](double Z) { return cycle_eval(Z, K, p); };
    auto root = [&](double a, double b) {
        // g(a) < 0 <= g(b) or the reverse
        double ga = g(a);
        for (int i = 0; i < 200; ++i) {
            double c = 0.5 * (a + b), gc = g(c);
            if ((gc < 0) == (ga < 0)) {
                a = c;
                ga = gc;
            } else {
                b = c;
            }
        }
        return 0.5 * (a + b);
    };
    double zlo = 0.0;
    if (K > 0) zlo = root(1e-12, 1.0);
    double zhi = root(1.0, 2 * p.m / (p.m + 1) + 1e-9);
    std::vector<std::pair<double, double>> up, down;
    for (int i = 0; i <= n; ++i) {
        // cluster samples near the turning points where Y varies fastest
        double t = 0.5 - 0.5 * std::cos(M_PI * i / n);
        double Z = zlo + (zhi - zlo) * t;
        double y2 = Z > 0 ? std::max(0.0, g(Z)) : 2 / (p.m + 1);
        up.emplace_back(std::sqrt(y2), Z);
        down.emplace_back(-std::sqrt(y2), Z);
    }
    std::vector<std::pair<double, double>> out(up.begin(), up.end());
    out.insert(out.end(), down.rbegin(), down.rend());
    return out;
}

// ---- sign certificates -------------------------------------------------------

enum class Sign { NEGATIVE = -1, ZERO = 0, POSITIVE = 1 };

inline const char* to_string(Sign s)
{
    return s == Sign::POSITIVE ? "positive" : s == Sign::NEGATIVE ? "negative" : "zero";
}

struct Certificate {
    std::string claim;
    double value = 0.0;       // direct numerical evaluation
    double closed_form = 0.0; // the formula's value, for comparison
    Sign expected = Sign::POSITIVE;
    std::string range;        // where the claim is asserted
    bool in_range = false;
    bool pass = false;        // in_range and the value has the expected sign
};

struct CertificateReport {
    ModelParams params;
    std::vector<Certificate> entries;

    int applicable() const
    {
        int n = 0;
        for (auto& c : entries) n += c.in_range;
        return n;
    }
    int failures() const
    {
        int n = 0;
        for (auto& c : entries) n += c.in_range && !c.pass;
        return n;
    }
    const Certificate* find(const std::string& id) const
    {
        for (auto& c : entries)
            if (c.claim == id) return &c;
        return nullptr;
    }
};

namespace detail {

inline constexpr double kZeroClaimTol = 1e-10;

// Flux F(X) = a X + b X^3 recovered from two normal.field evaluations.
struct FluxFit {
    double a, b;
};

inline FluxFit flux_fit(const ModelParams& p)
{
    // Y is arbitrary: the flux does not depend on it
    double f1 = flux_direct(1.0, 0.3, p), f2 = flux_direct(2.0, -0.7, p) / 2;
    double b = (f2 - f1) / 3;
    return {f1 - b, b};
}

inline std::optional<double> direct_X0_sq(const ModelParams& p)
{
    auto [a, b] = flux_fit(p);
    double x = -a / b;
    if (!std::isfinite(x) || x <= 0) return std::nullopt;
    return x;
}

// q in Z = Z(0) - q X^2 along the plane {Y = k X}, from surface evaluations
inline double parabola_coef(double k, const ModelParams& p)
{
    double z0 = surface_eval(0, 0, p), z1 = surface_eval(1, k, p);
    return z0 - z1;
}

// Richardson limit of g(x) as x -> 0 with g(x) = g0 + g1 x + O(x^2)
inline double richardson0(const std::function<double(double)>& g, double h)
{
    double a = g(h), b = g(h / 2), c = g(h / 4);
    double r1 = 2 * b - a, r2 = 2 * c - b;
    return (4 * r2 - r1) / 3;
}

// Signed invariance defect of the order-2 P1 approximation along H = 0.
inline double signed_defect_P1(double X, const ModelParams& p)
{
    auto a = manifold_approx(ManifoldBase::P1, 2, p);
    const double m = p.m, b = a.base_Y(), H = 0.0, Y = b + H;
    double Z = a.eval(X, H);
    double Xd = (m - 1) / 2 * X * Y - X * X;
    double Hd = -(m + 1) / 2 * H * H - (m + 1) * b * H - Z - (p.N - 1) * X * Y;
    double Zd = Z * ((m - 1) * Y + p.sigma * X);
    return Zd - a.dX(X, H) * Xd - a.dH(X, H) * Hd;
}

// X^3 coefficient of the P1 manifold at sigma = sigma_c from the defect of the
// order-2 truncation: defect = -F h0 (5m-1)/2 X^3 + O(X^4) along H = 0.
inline double direct_F(const ModelParams& pc)
{
    const double h0 = h0_of(pc.m);
    double lim = richardson0([&](double X) { return signed_defect_P1(X, pc) / (X * X * X); }, 1e-2);
    return -2 * lim / (h0 * (5 * pc.m - 1));
}

// Upper end of the connected interval [lo, t*) on which cond holds, scanning
// to hi; returns hi when cond holds throughout, lo when it fails at lo.
inline double component_end(const std::function<bool(double)>& cond, double lo, double hi, int n = 4000)
{
    if (!cond(lo)) return lo;
    double prev = lo;
    for (int i = 1; i <= n; ++i) {
        double t = lo + (hi - lo) * i / n;
        if (!cond(t)) {
            double a = prev, b = t;
            for (int k = 0; k < 100; ++k) {
                double c = 0.5 * (a + b);
                (cond(c) ? a : b) = c;
            }
            return a;
        }
        prev = t;
    }
    return hi;
}

inline std::string fmt(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline bool sign_ok(double v, Sign e)
{
    switch (e) {
    case Sign::POSITIVE: return v > 0;
    case Sign::NEGATIVE: return v < 0;
    case Sign::ZERO: return std::abs(v) <= kZeroClaimTol;
    }
    return false;
}

} // namespace detail

// Every displayed sign claim, evaluated at p. Claims stated at sigma = sigma_c
// are evaluated at (m, N, sigma_c(m, N)) whatever p.sigma is. Claims stated
// for "sigma small" (or "lambda = 1/sigma small") are asserted on the
// connected component, next to 0, of the closed-form sign condition.
inline CertificateReport proof_certificates(const ModelParams& p)
{
    using namespace closed;
    using detail::fmt;
    const double m = p.m, N = p.N, s = p.sigma, h0 = h0_of(m);
    const double sc = sigma_c(m, N), ns = n_star(m);
    const bool high = N > ns, low = N < ns;
    CertificateReport rep{p, {}};
    auto add = [&](std::string id, double value, double closed_value, Sign expected, std::string range, bool in) {
        Certificate c;
        c.claim = std::move(id);
        c.value = value;
        c.closed_form = closed_value;
        c.expected = expected;
        c.range = std::move(range);
        c.in_range = in;
        c.pass = in && detail::sign_ok(value, expected);
        rep.entries.push_back(c);
    };
    auto with_s = [&](double t) { return ModelParams(m, N, t); };

    // sigma small, N above N*: the P2 orbit is trapped below the surface
    auto X0d = detail::direct_X0_sq(p);
    {
        double v = X0d ? *X0d : -std::abs(-detail::flux_fit(p).a / detail::flux_fit(p).b);
        bool in = high && s > 0 && s < sc;
        add("X0_sq_positive", v, X0_sq_raw(p), Sign::POSITIVE, "N > N*, 0 < sigma < sigma_c", in);
    }
    {
        auto cond = [&](double t) {
            double x = X0_sq_raw(with_s(t));
            double xp = P2(with_s(t))[0];
            return x > 0 && x - xp * xp > 0;
        };
        double end = high ? detail::component_end(cond, 0.0, sc) : 0.0;
        double xp2 = critical_point(PointId::P2, p).location[0];
        double v = X0d ? *X0d - xp2 * xp2 : -xp2 * xp2;
        double P2x = P2(p)[0];
        add("XP2_sq_below_X0_sq", v, X0_sq_raw(p) - P2x * P2x, Sign::POSITIVE,
            "N > N*, 0 <= sigma < " + fmt(end), high && s < end);
    }
    {
        auto cond = [&](double t) { return surface_at_P2(with_s(t)) > 0; };
        double end = detail::component_end(cond, 0.0, 10 * (sc + 1));
        Vec3 q = critical_point(PointId::P2, p).location;
        add("surface_at_P2_positive", surface_eval(q[0], q[1], p), surface_at_P2(p), Sign::POSITIVE,
            "N > N*, 0 <= sigma < " + fmt(end), high && s < end);
    }
    {
        // flux is positive on the strip next to the axis for sigma < sigma_c
        double top = X0d ? std::sqrt(*X0d) : 3.0;
        double v = 1e300;
        for (int i = 1; i <= 20; ++i) {
            double X = top * i / 21.0;
            v = std::min(v, flux_direct(X, 0.1 * i - 1.0, p) / X);
        }
        add("flux_positive_on_strip", v, surface_flux(0.5 * top, p) / (0.5 * top), Sign::POSITIVE,
            "0 < sigma < sigma_c, 0 < X < min(X0, 3)", s > 0 && s < sc);
    }
    // the parabola where the surface meets Z = 0
    {
        double q = detail::parabola_coef(2 / (m - 1), p); // = R / (8m(m-1)^2)
        double x1 = surface_eval(0, 0, p) / q;
        add("X1_sq_positive", x1, X1_sq_raw(p), Sign::POSITIVE, "N > N*, sigma >= 0", high);

        auto condL = [&](double t) { return L_sigma(with_s(t)) < 0; };
        double endL = high ? detail::component_end(condL, 0.0, sc) : 0.0;
        bool inL = high && s < endL;
        double Z0d = X0d ? surface_eval(0, 0, p) - q * *X0d : std::nan("");
        double pref = (2 * m * N + (m - 1) * s + 6 * m - 2 * N + 2) /
                      ((m - 1) * (m - 1) * (m + 1) * (2 * N - 6 - s) * (2 * N + s - 2) * (s + 2));
        add("L_negative", X0d ? Z0d / pref : L_sigma(p), L_sigma(p), Sign::NEGATIVE,
            "N > N*, 0 <= sigma < " + fmt(endL), inL && X0d.has_value());
        add("Z0_negative", X0d ? Z0d : std::nan(""), X0d ? Z0_sigma(p) : std::nan(""), Sign::NEGATIVE,
            "N > N*, 0 < sigma < " + fmt(std::min(endL, sc)), inL && X0d.has_value() && s > 0);
        auto condX = [&](double t) {
            double x0 = X0_sq_raw(with_s(t));
            return x0 > 0 && x0 - X1_sq_raw(with_s(t)) > 0;
        };
        double endX = high ? detail::component_end(condX, 0.0, sc) : 0.0;
        add("X1_below_X0", X0d ? *X0d - x1 : std::nan(""), X0_sq_raw(p) - X1_sq_raw(p), Sign::POSITIVE,
            "N > N*, 0 < sigma < " + fmt(endX), high && s > 0 && s < endX && X0d.has_value());
    }
    // sigma = sigma_c claims; the sign flips across N*
    if (high || low) {
        auto pc = ModelParams(m, N, sc);
        Sign e = high ? Sign::NEGATIVE : Sign::POSITIVE;
        std::string r = high ? "sigma = sigma_c, N > N*" : "sigma = sigma_c, N < N*";
        add("F_sign_at_sigma_c", detail::direct_F(pc), F_at_sigma_c(m, N), e, r, true);
        Vec3 q = P2(pc);
        add("surface_at_P2_sign_at_sigma_c", surface_eval(q[0], q[1], pc), surface_at_P2_sigma_c(m, N), e, r, true);
        add("flux_cubic_sign_at_sigma_c", flux_direct(1.0, 0.2, pc), flux_cubic_at_sigma_c(m, N), e, r, true);
    }
    // the manifolds of P1 and P0 leave the surface on opposite sides
    {
        auto a1 = manifold_approx(ManifoldBase::P1, 2, p);
        auto a0 = manifold_approx(ManifoldBase::P0, 2, p);
        double d1 = detail::richardson0(
            [&](double X) { return (a1.eval(X, 0) - surface_eval(X, -h0, p)) / X; }, 1e-3);
        double d0 = detail::richardson0(
            [&](double X) { return (a0.eval(X, 0) - surface_eval(X, h0, p)) / X; }, 1e-3);
        bool in = s < sc && !is_critical(p);
        add("difP1_leading_positive", d1, -K1(p) * h0 / (2 * (3 * m + 1)), Sign::POSITIVE, "sigma < sigma_c", in);
        add("difP0_leading_negative", d0, K1(p) * h0 / (2 * (3 * m + 1)), Sign::NEGATIVE, "sigma < sigma_c", in);
    }
    // [sigma_c, 2(N-3)]: the flux is negative for all X > 0
    {
        double v = -1e300;
        for (int i = 1; i <= 30; ++i) {
            double X = 0.1 * i;
            v = std::max(v, flux_direct(X, 0.0, p) / X);
        }
        bool in = high && s >= sc - 1e-12 && s <= 2 * (N - 3);
        add("flux_negative_nonexistence_window", v, surface_flux(1.0, p), Sign::NEGATIVE,
            "N > N*, sigma_c <= sigma <= 2(N-3)", in);
    }
    // paraboloid form and elliptic flag
    {
        double worst = 0;
        for (double X : {0.1, 0.7, 1.9})
            for (double Y : {-1.3, 0.0, 0.8})
                worst = std::max(worst, std::abs(parab_ell(X, Y, p) - surface_eval(X, Y, p)) /
                                            std::max(1.0, std::abs(surface_eval(X, Y, p))));
        add("paraboloid_identity", worst, 0.0, Sign::ZERO, "all parameters", true);
        double e = (2 * N + s - 2) * (s + 6 - 2 * N);
        add("elliptic_paraboloid", e, e, Sign::POSITIVE, "N < 3 and sigma > 0, or sigma > 2(N-3)",
            s > 0 && (N < 3 || s > 2 * (N - 3)));
    }
    // lambda = 1/sigma small
    if (s > 0) {
        const double lam = 1 / s;
        auto lam_end = [&](const std::function<bool(double)>& cond) {
            return detail::component_end(cond, 1e-9, 10.0);
        };
        auto ok = [&](double end) { return lam < end; };
        auto pl = [&](double l) { return ModelParams(m, N, 1 / l); };
        // U0 from the direct flux fit: U0 = sigma X0
        std::optional<double> U0d;
        if (X0d) U0d = s * s * *X0d;
        double e1 = lam_end([&](double l) { return U0_sq_raw(l, pl(l)) > 0; });
        add("U0_sq_positive", U0d ? *U0d : -1.0, U0_sq_raw(lam, p), Sign::POSITIVE,
            "0 < lambda < " + fmt(e1), ok(e1));

        double z0 = surface_eval(0, 0, p), zu = surface_eval(lam, 0, p); // U = 1, Y = 0
        double U1d = z0 / (z0 - zu);
        double e2 = lam_end([&](double l) {
            return U0_sq_raw(l, pl(l)) > 0 && U1_sq_raw(l, pl(l)) - U0_sq_raw(l, pl(l)) < 0;
        });
        add("U1_sq_below_U0_sq", U0d ? U1d - *U0d : std::nan(""), U1_minus_U0_sq_factored(lam, p), Sign::NEGATIVE,
            "0 < lambda < " + fmt(e2), ok(e2) && U0d.has_value());

        double e3 = std::min(e1, (m + 3) / (2 * (m - 1) * (N + 1)));
        double Mdir = std::nan("");
        if (U0d) {
            // maximum over Y of the parabola Z(U0, Y), from three evaluations
            double X = std::sqrt(*U0d) * lam;
            double za = surface_eval(X, -1, p), zb = surface_eval(X, 0, p), zc = surface_eval(X, 1, p);
            double A2 = (za + zc) / 2 - zb, A1 = (zc - za) / 2;
            Mdir = zb - A1 * A1 / (4 * A2);
        }
        add("M_minus_1_negative", Mdir - 1, M_minus_1_factored(lam, p), Sign::NEGATIVE,
            "0 < lambda < " + fmt(e3), ok(e3) && U0d.has_value());

        double e4 = lam_end([&](double l) {
            return U0_sq_raw(l, pl(l)) > 0 && B_lambda(l, pl(l)) < 0;
        });
        double Bd = U0d ? 1 - (m + 1) * *U0d / (2 * (m - 1) * (m - 1)) : std::nan("");
        add("B_negative", Bd, B_lambda_factored(lam, p), Sign::NEGATIVE, "0 < lambda < " + fmt(e4),
            ok(e4) && U0d.has_value());
        add("U0_beyond_h0", U0d ? *U0d / ((m - 1) * (m - 1)) - h0 * h0 : std::nan(""),
            -2 / (m + 1) * B_lambda(lam, p), Sign::POSITIVE, "0 < lambda < " + fmt(e4), ok(e4) && U0d.has_value());

        double worst = 0;
        for (double U : {0.3, 1.0, 2.5}) {
            double fx = surface_flux(lam * U, p);
            worst = std::max(worst, std::abs(flux_rescaled_direct(U, 0.4, p) - fx) / std::max(1.0, std::abs(fx)));
            worst = std::max(worst, std::abs(flux_rescaled(U, p) - fx) / std::max(1.0, std::abs(fx)));
        }
        add("flux_rescaled_identity", worst, 0.0, Sign::ZERO, "sigma > 0", true);
    }
    return rep;
}

} // namespace blowup
