#pragma once

#include <blowup/error.hpp>
#include <blowup/integrate.hpp>
#include <blowup/model.hpp>
#include <blowup/shooting.hpp>
#include <blowup/vectorfields.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace blowup {

// Slope of f^{(m-1)/2} at an interface, in absolute value.
inline double interface_slope(double m) { return (m - 1) * h0_of(m) / (2 * std::sqrt(m * (m - 1))); }

enum class BehaviorKind { INTERFACE, OUT_P0, ORIGIN_P2, TAIL_P3, FLAT_Q1, ASYMPTOTE_Q5, LOG_Q1_N2, HYPERBOLA };

inline const char* to_string(BehaviorKind k)
{
    static const char* names[] = {"INTERFACE", "OUT_P0",       "ORIGIN_P2", "TAIL_P3",
                                  "FLAT_Q1",   "ASYMPTOTE_Q5", "LOG_Q1_N2", "HYPERBOLA"};
    return names[static_cast<int>(k)];
}

// `constant` is K for INTERFACE/OUT_P0, a for FLAT_Q1, C for ASYMPTOTE_Q5,
// D for LOG_Q1_N2; unused otherwise.
struct LocalBehavior {
    BehaviorKind kind = BehaviorKind::INTERFACE;
    double constant = 0.0;
};

struct ProfileCurve {
    std::vector<double> xi, f, dfm; // dfm = (f^m)'
    std::optional<double> interface; // right end: f -> 0 as xi -> xi0-
    std::optional<double> support_start; // left end: f -> 0 as xi -> xi0+
    std::string origin_tag, end_tag, provenance;
    bool touchdown_ambiguous = false;
    std::function<double(double)> eval; // continuous f on [xi_min, xi_max]

    std::size_t size() const { return xi.size(); }
    double xi_min() const { return xi.front(); }
    double xi_max() const { return xi.back(); }
};

namespace detail {

inline void check_positive(double v, const char* what)
{
    if (!(v > 0) || !std::isfinite(v)) throw Error(ErrorCode::BAD_CONSTANTS, std::string(what) + " must be > 0");
}

inline double tail_coef(double m) { return std::pow(1 / (m - 1), 1 / (m - 1)); }

// f'' coefficient of the flat start f = a + b xi^2; the weight enters only at sigma = 0
inline double flat_b(double a, const ModelParams& p)
{
    double rhs = a / (p.m - 1) - (p.sigma == 0 ? std::pow(a, p.m) : 0.0);
    return rhs / (2 * p.N * p.m * std::pow(a, p.m - 1));
}

// phi = f^{(m-1)/2} near a zero at xi0, s = distance into the support:
// phi = c s - sgn b c s^2/(2 xi0), with b = -(N-1)(m-1)/(3m+1) from the
// linear part of the P0/P1 manifolds.
inline double support_phi(double s, double xi0, bool left_of_zero, const ModelParams& p)
{
    double c = interface_slope(p.m), b = -(p.N - 1) * (p.m - 1) / (3 * p.m + 1);
    return left_of_zero ? c * s - b * c * s * s / (2 * xi0) : c * s + b * c * s * s / (2 * xi0);
}
inline double support_dphi_ds(double s, double xi0, bool left_of_zero, const ModelParams& p)
{
    double c = interface_slope(p.m), b = -(p.N - 1) * (p.m - 1) / (3 * p.m + 1);
    return left_of_zero ? c - b * c * s / xi0 : c + b * c * s / xi0;
}

} // namespace detail

inline std::function<double(double)> local_expansion(const LocalBehavior& lb, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma, c = interface_slope(m), e = 2 / (m - 1);
    switch (lb.kind) {
    case BehaviorKind::INTERFACE: {
        double K = lb.constant;
        detail::check_positive(K, "K");
        return [=](double x) { return std::pow(std::max(0.0, K - c * x), e); };
    }
    case BehaviorKind::OUT_P0: {
        double K = lb.constant;
        detail::check_positive(K, "K");
        return [=](double x) { return std::pow(std::max(0.0, c * x - K), e); };
    }
    case BehaviorKind::ORIGIN_P2: {
        double A = std::pow((m - 1) / (2 * m * (m * N - N + 2)), 1 / (m - 1));
        return [=](double x) { return A * std::pow(x, e); };
    }
    case BehaviorKind::TAIL_P3:
    case BehaviorKind::HYPERBOLA: {
        double A = detail::tail_coef(m);
        return [=](double x) { return A * std::pow(x, -s / (m - 1)); };
    }
    case BehaviorKind::FLAT_Q1: {
        double a = lb.constant;
        detail::check_positive(a, "a");
        double b = detail::flat_b(a, p);
        return [=](double x) { return a + b * x * x; };
    }
    case BehaviorKind::ASYMPTOTE_Q5: {
        double C = lb.constant;
        detail::check_positive(C, "C");
        return [=](double x) { return C * std::pow(x, (2 - N) / m); };
    }
    case BehaviorKind::LOG_Q1_N2: {
        double D = lb.constant;
        detail::check_positive(D, "D");
        return [=](double x) { return D * std::pow(std::max(0.0, -std::log(x)), 1 / m); };
    }
    }
    throw Error(ErrorCode::BAD_CONSTANTS, "unknown behavior kind");
}

// Where an expansion is anchored (the interface point for INTERFACE/OUT_P0, else 0).
inline double anchor_point(const LocalBehavior& lb, const ModelParams& p)
{
    if (lb.kind == BehaviorKind::INTERFACE || lb.kind == BehaviorKind::OUT_P0) return lb.constant / interface_slope(p.m);
    return 0.0;
}

// Residual of the profile equation for a callable f, by 5-point differences of f^m.
inline double ode_residual(const std::function<double(double)>& f, double xi, const ModelParams& p, double h = 1e-3)
{
    auto g = [&](double x) { return std::pow(f(x), p.m); };
    double gm2 = g(xi - 2 * h), gm1 = g(xi - h), g0 = g(xi), gp1 = g(xi + h), gp2 = g(xi + 2 * h);
    double d1 = (gm2 - 8 * gm1 + 8 * gp1 - gp2) / (12 * h);
    double d2 = (-gm2 + 16 * gm1 - 30 * g0 + 16 * gp1 - gp2) / (12 * h * h);
    return d2 + (p.N - 1) / xi * d1 - f(xi) / (p.m - 1) + std::pow(xi, p.sigma) * g0;
}

// ---------------------------------------------------------------------------
// Phase space -> profile

struct ReconstructOptions {
    static ReconstructOptions plain(int per_step)
    {
        ReconstructOptions o;
        o.per_step = per_step;
        o.insert_extrema = false;
        return o;
    }

    int per_step = 4;            // dense sub-samples per accepted step
    bool insert_extrema = true;  // add the exact Z-extrema of the orbit
    std::optional<SeedOrigin> origin;
    std::optional<Fate> fate;
    double interface_f = 1e-8;   // f below this at an end may be an interface
    double slope_tol = 1e-2;
};

namespace detail {

struct PhasePoint {
    double tau;
    Vec3 u;
};

inline Vec3 profile_of(const Vec3& u, const ModelParams& p)
{
    const double m = p.m;
    double xi = std::pow(m * u[2] / (u[0] * u[0]), 1 / (p.sigma + 2));
    double f = std::pow(u[2] / ((m - 1) * std::pow(xi, p.sigma)), 1 / (m - 1));
    double dfm = m * std::pow(f, (m + 1) / 2) * u[1] / std::sqrt(m * (m - 1));
    return {xi, f, dfm};
}

// Least-squares line through (xi, phi) near a zero of phi; returns (xi0, slope).
inline std::optional<std::pair<double, double>> zero_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    if (den == 0) return std::nullopt;
    double k = (n * sxy - sx * sy) / den, b0 = (sy - k * sx) / n;
    if (k == 0) return std::nullopt;
    return std::make_pair(-b0 / k, k);
}

} // namespace detail

struct InterfaceFit {
    double xi0 = 0, slope = 0; // slope of f^{(m-1)/2}
    double relative_error = 0; // |slope|/interface_slope - 1
    int points = 0;
};

// Fit f^{(m-1)/2} linearly over the samples within `width` of the right
// (or left) end; the zero of the line estimates the interface.
inline std::optional<InterfaceFit> fit_interface(const ProfileCurve& c, const ModelParams& p, bool right_end = true,
                                                 double width = 1e-3)
{
    if (c.size() < 3) return std::nullopt;
    std::vector<double> x, y;
    double e = right_end ? c.xi.back() : c.xi.front();
    for (std::size_t i = 0; i < c.size(); ++i)
        if (std::abs(c.xi[i] - e) <= width * std::max(1.0, e)) {
            x.push_back(c.xi[i]);
            y.push_back(std::pow(c.f[i], (p.m - 1) / 2));
        }
    auto r = detail::zero_fit(x, y);
    if (!r) return std::nullopt;
    InterfaceFit fit;
    fit.xi0 = r->first;
    fit.slope = r->second;
    fit.relative_error = std::abs(r->second) / interface_slope(p.m) - 1;
    fit.points = static_cast<int>(x.size());
    return fit;
}

inline ProfileCurve reconstruct_profile(const Trajectory& traj, const ModelParams& p, const ReconstructOptions& o = {})
{
    if (traj.chart != ChartId::MAIN) throw Error(ErrorCode::BAD_SPEC, "reconstruct_profile needs a MAIN-chart trajectory");
    if (traj.states.size() < 2) throw Error(ErrorCode::DEGENERATE_TRAJECTORY, "trajectory has fewer than two states");
    const double T = traj.span();
    std::vector<detail::PhasePoint> pts;
    const int ps = std::max(1, o.per_step);
    for (const auto& seg : traj.dense)
        for (int k = 0; k < ps; ++k) {
            double t = seg.t0 + seg.h * k / ps;
            if (t < T) pts.push_back({t, seg.eval(t)});
        }
    pts.push_back({T, traj.final_state()});
    if (traj.dense.empty()) {
        pts.clear();
        for (std::size_t i = 0; i < traj.states.size(); ++i)
            pts.push_back({std::abs(traj.eta[i] - traj.eta0), traj.states[i]});
    }

    auto locate = [&](double t) {
        auto it = std::upper_bound(traj.dense.begin(), traj.dense.end(), t,
                                   [](double v, const DenseSegment& s) { return v < s.t0; });
        return it == traj.dense.begin() ? traj.dense.front() : *(it - 1);
    };
    if (o.insert_extrema && !traj.dense.empty()) {
        // Z' = Z[(m-1)Y + sigma X]: extrema where the bracket changes sign
        auto g = [&](const Vec3& u) { return (p.m - 1) * u[1] + p.sigma * u[0]; };
        std::vector<detail::PhasePoint> extra;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            double g0 = g(pts[i - 1].u), g1 = g(pts[i].u);
            if ((g0 < 0) == (g1 < 0) || g0 == 0 || g1 == 0) continue;
            double a = pts[i - 1].tau, b = pts[i].tau, ga = g0;
            for (int it = 0; it < 100 && b - a > 1e-14 * std::max(1.0, b); ++it) {
                double mid = 0.5 * (a + b);
                double gm = g(locate(mid).eval(mid));
                if ((gm < 0) == (ga < 0)) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            double t = 0.5 * (a + b);
            extra.push_back({t, locate(t).eval(t)});
        }
        pts.insert(pts.end(), extra.begin(), extra.end());
        std::sort(pts.begin(), pts.end(), [](auto& x, auto& y) { return x.tau < y.tau; });
    }

    // X and Z must stay positive inside; the ends may touch the invariant planes
    std::vector<std::pair<double, Vec3>> rows; // (tau, (xi, f, dfm))
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3& u = pts[i].u;
        bool ok = u[0] > 0 && u[2] > 0 && std::isfinite(u[0]) && std::isfinite(u[2]);
        if (!ok) {
            if (i == 0 || i + 1 == pts.size()) continue;
            throw Error(ErrorCode::DEGENERATE_TRAJECTORY,
                        "X or Z vanishes inside the trajectory (tau = " + std::to_string(pts[i].tau) + ")");
        }
        rows.emplace_back(pts[i].tau, detail::profile_of(u, p));
    }
    if (rows.size() < 2) throw Error(ErrorCode::DEGENERATE_TRAJECTORY, "no interior samples");
    // xi is monotone along an orbit (dxi/deta > 0); sort by xi
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.second[0] < b.second[0]; });

    ProfileCurve c;
    std::vector<double> taus;
    for (auto& [t, r] : rows) {
        if (!c.xi.empty() && r[0] <= c.xi.back()) continue;
        taus.push_back(t);
        c.xi.push_back(r[0]);
        c.f.push_back(r[1]);
        c.dfm.push_back(r[2]);
    }
    c.provenance = "trajectory";

    // continuous evaluation: invert xi(tau) on the dense output
    auto tr = std::make_shared<Trajectory>(traj);
    auto xs = std::make_shared<std::vector<double>>(c.xi);
    auto ts = std::make_shared<std::vector<double>>(taus);
    ModelParams pp = p;
    c.eval = [tr, xs, ts, pp](double x) {
        const auto& X = *xs;
        if (x <= X.front()) return detail::profile_of(tr->at(tr->eta0 + tr->sign() * ts->front()), pp)[1];
        if (x >= X.back()) return detail::profile_of(tr->at(tr->eta0 + tr->sign() * ts->back()), pp)[1];
        std::size_t j = std::upper_bound(X.begin(), X.end(), x) - X.begin();
        double a = (*ts)[j - 1], b = (*ts)[j];
        if (X[j - 1] == x) return detail::profile_of(tr->at(tr->eta0 + tr->sign() * a), pp)[1];
        auto xi_at = [&](double t) { return detail::profile_of(tr->at(tr->eta0 + tr->sign() * t), pp)[0]; };
        // xi(a) < x <= xi(b)
        for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
            double mid = 0.5 * (a + b);
            if (xi_at(mid) < x) a = mid;
            else b = mid;
        }
        return detail::profile_of(tr->at(tr->eta0 + tr->sign() * 0.5 * (a + b)), pp)[1];
    };

    // end annotations
    if (o.origin) {
        switch (*o.origin) {
        case SeedOrigin::P2_E3: c.origin_tag = "ORIGIN_P2"; break;
        case SeedOrigin::P0_UNSTABLE: c.origin_tag = "OUT_P0"; break;
        case SeedOrigin::Q1_OUT: c.origin_tag = "FLAT_Q1"; break;
        case SeedOrigin::Q5_OUT: c.origin_tag = "ASYMPTOTE_Q5"; break;
        case SeedOrigin::NEAR_P3: c.origin_tag = "NEAR_P3"; break;
        case SeedOrigin::P1_BACKWARD: c.end_tag = "INTERFACE"; break;
        }
    }
    if (o.fate) {
        switch (*o.fate) {
        case Fate::ENTERS_P1: c.end_tag = "INTERFACE"; break;
        case Fate::ENTERS_P3: c.end_tag = "TAIL_P3"; break;
        case Fate::ENTERS_Q3: c.end_tag = "Q3"; break;
        case Fate::ESCAPES_Q5: c.origin_tag = "ASYMPTOTE_Q5"; break;
        case Fate::ESCAPES_Q2: c.origin_tag = "Q2"; break;
        case Fate::FROM_Q1: c.origin_tag = "FLAT_Q1"; break;
        case Fate::FROM_P0: c.origin_tag = "OUT_P0"; break;
        case Fate::FROM_P3: c.origin_tag = "FROM_P3"; break;
        default: break;
        }
    }
    auto end_check = [&](bool right) -> std::optional<double> {
        double fe = right ? c.f.back() : c.f.front();
        auto fit = fit_interface(c, p, right);
        if (!(fe < o.interface_f && fit && std::abs(fit->relative_error) <= o.slope_tol)) return std::nullopt;
        // extrapolate from the end sample with the two-term expansion
        double xe = right ? c.xi.back() : c.xi.front(), phi = std::pow(fe, (p.m - 1) / 2);
        double x0 = fit->xi0;
        for (int it = 0; it < 3; ++it) {
            double sgap = phi / interface_slope(p.m);
            for (int k = 0; k < 3; ++k)
                sgap -= (detail::support_phi(sgap, x0, right, p) - phi) / detail::support_dphi_ds(sgap, x0, right, p);
            x0 = right ? xe + sgap : xe - sgap;
        }
        return x0;
    };
    if (c.end_tag == "INTERFACE") {
        c.interface = end_check(true);
        c.touchdown_ambiguous = !c.interface;
    }
    if (c.origin_tag == "OUT_P0") {
        c.support_start = end_check(false);
        c.touchdown_ambiguous = c.touchdown_ambiguous || !c.support_start;
    }
    return c;
}

// Relative change of (X, Y, Z) when the profile samples are mapped back
// through the change of variables; Y comes from a 5-point difference of
// f^{(m-1)/2} on the continuous profile, with a step worth h_eta of phase
// time; samples whose stencil leaves the profile are skipped.
inline double round_trip_error(const Trajectory& traj, const ModelParams& p, int stride = 50, double h_eta = 1e-2,
                               double h_lo = 3e-4)
{
    ProfileCurve c = reconstruct_profile(traj, p, ReconstructOptions::plain(1));
    const double m = p.m, sq = std::sqrt(m * (m - 1));
    auto phi = [&](double x) { return std::pow(c.eval(x), (m - 1) / 2); };
    double worst = 0;
    for (std::size_t i = 1; i + 1 < traj.states.size(); i += stride) {
        const Vec3& u = traj.states[i];
        if (!(u[0] > 0 && u[2] > 0)) continue;
        Vec3 r = detail::profile_of(u, p);
        double xi = r[0], f = r[1];
        // dxi/deta = X xi; clamp the relative step where xi barely moves or races
        double h = xi * std::clamp(h_eta * u[0], h_lo, 3e-3);
        if (xi - 2 * h < c.xi_min() || xi + 2 * h > c.xi_max()) continue; // stencil must fit
        double d = (phi(xi - 2 * h) - 8 * phi(xi - h) + 8 * phi(xi + h) - phi(xi + 2 * h)) / (12 * h);
        Vec3 back{sq * std::pow(f, (m - 1) / 2) / xi, 2 * sq / (m - 1) * d,
                  (m - 1) * std::pow(xi, p.sigma) * std::pow(f, m - 1)};
        worst = std::max(worst, norm(back - u) / std::max(1.0, norm(u)));
    }
    return worst;
}

// Integrate an orbit from a seed in the MAIN chart for profile work. A seed in
// the Q1 chart is first carried out to w = 0.1.
struct TraceOptions {
    // X and Z start many decades below one: error control must be relative
    IntegrationControls ode = [] {
        IntegrationControls c;
        c.rel_tol = 1e-12;
        c.abs_tol = 1e-20;
        return c;
    }();
    double span = 200;
    double stop_radius_P1 = 1e-4; // forward: stop on entering this ball around P1
    double p3_x_stop = 0;         // forward: stop once X falls below this (0: off)
};

inline Trajectory trace_orbit(const SeedSpec& spec, const ModelParams& p, const TraceOptions& o = {})
{
    Seed s = seed(spec, p);
    IntegrationControls ctl = o.ode;
    ctl.direction = s.direction;
    ctl.max_span = o.span;
    Vec3 u = s.state;
    if (s.chart == ChartId::CHART_Q1) {
        IntegrationControls c1 = ctl;
        c1.max_span = 200;
        auto t = integrate(ChartId::CHART_Q1, u, p, c1, {EventSpec::plane(2, 0.1, Crossing::UP, true)});
        u = to_main(ChartId::CHART_Q1, t.final_state(), p);
    }
    std::vector<EventSpec> ev;
    const double h0 = h0_of(p.m);
    if (s.direction == Direction::FORWARD) {
        ev.push_back(EventSpec::ball("P1", {0, -h0, 0}, o.stop_radius_P1, 0.0));
        if (o.p3_x_stop > 0) ev.push_back(EventSpec::plane(0, o.p3_x_stop, Crossing::DOWN, true));
    }
    return integrate(ChartId::MAIN, u, p, ctl, ev);
}

// ---------------------------------------------------------------------------
// The xi-domain oracle

struct CauchyDatum {
    double xi = 0, f = 0, dfm = 0;
};

struct Anchor {
    LocalBehavior behavior;
    double delta = 0; // 0: 1e-6 for FLAT_Q1, 1e-4 otherwise
    double start = 0; // TAIL_P3/HYPERBOLA: the xi to start from
};

namespace detail {

inline CauchyDatum anchor_datum(const Anchor& a, const ModelParams& p)
{
    const double m = p.m;
    const LocalBehavior& lb = a.behavior;
    double d = a.delta > 0 ? a.delta : (lb.kind == BehaviorKind::FLAT_Q1 ? 1e-6 : 1e-4);
    auto f = local_expansion(lb, p); // validates constants
    auto from_f = [&](double x, double fx, double dfx) { return CauchyDatum{x, fx, m * std::pow(fx, m - 1) * dfx}; };
    switch (lb.kind) {
    case BehaviorKind::INTERFACE:
    case BehaviorKind::OUT_P0: {
        bool left = lb.kind == BehaviorKind::INTERFACE;
        double x0 = anchor_point(lb, p), x = left ? x0 - d : x0 + d;
        double phi = support_phi(d, x0, left, p), dphi = support_dphi_ds(d, x0, left, p) * (left ? -1 : 1);
        // f^m = phi^{2m/(m-1)}
        double fx = std::pow(phi, 2 / (m - 1));
        double dfm = 2 * m / (m - 1) * std::pow(phi, (m + 1) / (m - 1)) * dphi;
        return {x, fx, dfm};
    }
    case BehaviorKind::FLAT_Q1: {
        double b = flat_b(lb.constant, p);
        return from_f(d, f(d), 2 * b * d);
    }
    case BehaviorKind::ORIGIN_P2: return from_f(d, f(d), 2 / (m - 1) * f(d) / d);
    case BehaviorKind::ASYMPTOTE_Q5: return from_f(d, f(d), (2 - p.N) / m * f(d) / d);
    case BehaviorKind::LOG_Q1_N2: return from_f(d, f(d), -f(d) / (m * d * -std::log(d)));
    case BehaviorKind::TAIL_P3:
    case BehaviorKind::HYPERBOLA: {
        check_positive(a.start, "start");
        double x = a.start;
        return from_f(x, f(x), -p.sigma / (m - 1) * f(x) / x);
    }
    }
    throw Error(ErrorCode::BAD_CONSTANTS, "unknown behavior kind");
}

} // namespace detail

struct OracleOptions {
    IntegrationControls ode = [] {
        IntegrationControls c;
        c.rel_tol = 1e-12;
        c.abs_tol = 1e-14;
        return c;
    }();
    double f_floor = 1e-8; // touchdown threshold
    double f_ceiling = 1e12;
    double slope_tol = 1e-2;
    int per_step = 4;
};

// Integrates (f^m)'' + (N-1)/xi (f^m)' - f/(m-1) + xi^s f^m = 0 as a system in
// (f, (f^m)') from `d` towards `xi_end`.
inline ProfileCurve direct_ode_solve(const ModelParams& p, const CauchyDatum& d, double xi_end,
                                     const OracleOptions& o = {})
{
    if (!(d.xi > 0) || !(d.f > 0) || !(xi_end > 0) || xi_end == d.xi)
        throw Error(ErrorCode::BAD_CONSTANTS, "oracle datum needs xi > 0, f > 0 and a nonempty span");
    const double m = p.m, N = p.N, s = p.sigma;
    const double dir = xi_end > d.xi ? 1.0 : -1.0;
    auto rhs = [=](const Vec3& y) -> Vec3 {
        double f = y[0], w = y[1], x = y[2];
        if (!(f > 0) || !(x > 0)) return {NAN, NAN, NAN};
        double fp = w / (m * std::pow(f, m - 1));
        double wp = -(N - 1) * w / x + f / (m - 1) - std::pow(x, s) * std::pow(f, m);
        return {dir * fp, dir * wp, dir};
    };
    // a start below the floor (e.g. next to an interface) is allowed as long as f grows
    const double floor = std::min(o.f_floor, 0.5 * d.f);
    auto stop = [&](const Vec3& y) { return y[0] < floor || y[0] > o.f_ceiling; };
    auto res = dopri5(rhs, Vec3{d.f, d.dfm, d.xi}, std::abs(xi_end - d.xi), 2, o.ode, {}, {}, stop);

    ProfileCurve c;
    c.provenance = "oracle";
    auto dense = std::make_shared<std::vector<DenseSegment>>(res.dense);
    const int ps = std::max(1, o.per_step);
    std::vector<Vec3> rows;
    for (const auto& seg : res.dense)
        for (int k = 0; k < ps; ++k) rows.push_back(seg.eval(seg.t0 + seg.h * k / ps));
    rows.push_back(res.y.back());
    if (res.dense.empty()) rows = res.y;
    if (dir < 0) std::reverse(rows.begin(), rows.end());
    for (auto& r : rows) {
        if (!c.xi.empty() && r[2] <= c.xi.back()) continue;
        c.xi.push_back(r[2]);
        c.f.push_back(r[0]);
        c.dfm.push_back(r[1]);
    }
    const double x0 = d.xi, T = res.t.back();
    c.eval = [dense, x0, dir, T](double x) {
        double t = std::clamp((x - x0) * dir, 0.0, T);
        auto it = std::upper_bound(dense->begin(), dense->end(), t,
                                   [](double v, const DenseSegment& sg) { return v < sg.t0; });
        const DenseSegment& sg = it == dense->begin() ? dense->front() : *(it - 1);
        return sg.eval(t)[0];
    };

    const Vec3& y = res.y.back();
    bool reached = res.termination == Termination::MAX_SPAN;
    if (!reached) {
        if (y[0] > o.f_ceiling) throw Error(ErrorCode::BLOWUP, "f -> infinity at xi = " + std::to_string(y[2]));
        if (y[0] < floor || res.termination == Termination::STEP_UNDERFLOW) {
            // slope of f^{(m-1)/2} is (m-1) w / (2 m f^{(m+1)/2})
            double slope = (m - 1) * y[1] / (2 * m * std::pow(y[0], (m + 1) / 2));
            double want = interface_slope(m);
            if (std::abs(std::abs(slope) / want - 1) > o.slope_tol || (slope < 0) != (dir > 0))
                throw Error(ErrorCode::TOUCHDOWN, "f -> 0 at xi = " + std::to_string(y[2]) + " with slope " +
                                                      std::to_string(slope));
            double xi0 = y[2] + dir * std::pow(y[0], (m - 1) / 2) / want;
            if (dir > 0) {
                c.interface = xi0;
                c.end_tag = "INTERFACE";
            } else {
                c.support_start = xi0;
                c.origin_tag = "OUT_P0";
            }
        } else if (res.termination != Termination::MAX_SPAN) {
            throw Error(ErrorCode::STEP_UNDERFLOW,
                        std::string("oracle stopped early: ") + to_string(res.termination));
        }
    }
    return c;
}

inline ProfileCurve direct_ode_solve(const ModelParams& p, const Anchor& a, double xi_end, const OracleOptions& o = {})
{
    CauchyDatum d = detail::anchor_datum(a, p);
    ProfileCurve c = direct_ode_solve(p, d, xi_end, o);
    const BehaviorKind k = a.behavior.kind;
    if (k == BehaviorKind::INTERFACE) {
        c.interface = anchor_point(a.behavior, p);
        c.end_tag = "INTERFACE";
    } else if (k == BehaviorKind::OUT_P0) {
        c.support_start = anchor_point(a.behavior, p);
        c.origin_tag = "OUT_P0";
    } else if (k == BehaviorKind::TAIL_P3 || k == BehaviorKind::HYPERBOLA) {
        c.end_tag = to_string(k);
    } else {
        c.origin_tag = to_string(k);
    }
    c.provenance = std::string("oracle:") + to_string(k);
    return c;
}

// Max relative difference of `a` against `b.eval` on the overlap of their ranges.
inline double max_relative_difference(const ProfileCurve& a, const ProfileCurve& b, double lo = 0,
                                      double hi = INFINITY)
{
    lo = std::max({lo, a.xi_min(), b.xi_min()});
    hi = std::min({hi, a.xi_max(), b.xi_max()});
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.xi[i] < lo || a.xi[i] > hi) continue;
        worst = std::max(worst, std::abs(a.f[i] - b.eval(a.xi[i])) / a.f[i]);
    }
    return worst;
}

// Least-squares power law f ~ A xi^k over [lo, hi], on n log-spaced points.
struct PowerFit {
    double exponent = 0, prefactor = 0;
};

inline PowerFit fit_power(const std::function<double(double)>& f, double lo, double hi, int n = 400)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        double x = std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1);
        double y = std::log(f(std::exp(x)));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double k = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {k, std::exp((sy - k * sx) / n)};
}

// ---------------------------------------------------------------------------
// Oscillations about the hyperbola

struct GExtremum {
    double zeta, G, amplitude, energy; // energy = Phi(G) - Phi(1)
    bool is_max;
};

struct GTransform {
    std::vector<double> zeta, G;
    std::vector<GExtremum> extrema;
    double N_bar = 0;
    bool energy_decreasing = false;      // Phi - Phi(1) strictly down across all extrema
    bool maxima_decreasing = false;      // |G-1| strictly down among maxima
    bool minima_decreasing = false;      // and among minima
    bool amplitudes_decreasing = false;  // |G-1| strictly down across all extrema
};

inline double g_energy(double G, double m) { return std::pow(G, 2 * m) / (2 * m) - std::pow(G, m + 1) / (m + 1); }

inline GTransform g_transform(const ProfileCurve& c, const ModelParams& p)
{
    const double m = p.m, s = p.sigma;
    GTransform g;
    g.N_bar = 1 - closed::K1(p) / ((m - 1) * (s + 2));
    const double k = std::pow(m - 1, 1 / (m - 1)), Phi1 = g_energy(1, m);
    for (std::size_t i = 0; i < c.size(); ++i) {
        g.zeta.push_back(2 * std::pow(c.xi[i], (s + 2) / 2) / (s + 2));
        g.G.push_back(k * std::pow(c.xi[i], s / (m - 1)) * c.f[i]);
    }
    for (std::size_t i = 1; i + 1 < g.G.size(); ++i) {
        double a = g.G[i - 1], b = g.G[i], d = g.G[i + 1];
        double tol = 1e-13 * std::abs(b); // rounding on a flat G is not an extremum
        bool mx = b > a + tol && b >= d, mn = b < a - tol && b <= d;
        if (!mx && !mn) continue;
        if (!g.extrema.empty() && g.extrema.back().is_max == mx) continue; // plateau duplicates
        g.extrema.push_back({g.zeta[i], b, std::abs(b - 1), g_energy(b, m) - Phi1, mx});
    }
    auto down = [](const std::vector<double>& v) {
        if (v.size() < 2) return false;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] < v[i - 1])) return false;
        return true;
    };
    std::vector<double> en, amp, mxs, mns;
    for (auto& e : g.extrema) {
        en.push_back(e.energy);
        amp.push_back(e.amplitude);
        (e.is_max ? mxs : mns).push_back(e.amplitude);
    }
    g.energy_decreasing = down(en);
    g.amplitudes_decreasing = down(amp);
    g.maxima_decreasing = down(mxs);
    g.minima_decreasing = down(mns);
    return g;
}

// Near P3 an orbit obeys X ~ C r^{K3}, r = sqrt(m-1)|Z-1| at the Z-extrema.
// Adjacent extrema are paired (geometric mean of X, arithmetic mean of r) to
// cancel the max/min asymmetry of the oscillation.
inline PowerFit fit_p3_power(const ProfileCurve& c, const GTransform& g, const ModelParams& p, std::size_t first = 0,
                             std::size_t count = 0)
{
    const double m = p.m;
    std::vector<double> lx, lr;
    std::vector<double> X, r;
    for (auto& e : g.extrema) {
        double xi = std::pow(e.zeta * (p.sigma + 2) / 2, 2 / (p.sigma + 2));
        double f = e.G / (std::pow(m - 1, 1 / (m - 1)) * std::pow(xi, p.sigma / (m - 1)));
        X.push_back(std::sqrt(m * (m - 1)) * std::pow(f, (m - 1) / 2) / xi);
        r.push_back(std::sqrt(m - 1) * std::abs(std::pow(e.G, m - 1) - 1));
    }
    (void)c;
    std::size_t last = count ? std::min(X.size() - 1, first + count) : X.size() - 1;
    for (std::size_t i = first; i < last; ++i) {
        lx.push_back(0.5 * (std::log(X[i]) + std::log(X[i + 1])));
        lr.push_back(std::log(0.5 * (r[i] + r[i + 1])));
    }
    if (lx.size() < 3) throw Error(ErrorCode::NO_PROFILE, "too few extrema for the P3 fit");
    double n = lx.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lr[i];
        sy += lx[i];
        sxx += lr[i] * lr[i];
        sxy += lr[i] * lx[i];
    }
    double k = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {k, std::exp((sy - k * sx) / n)};
}

// ---------------------------------------------------------------------------
// The self-map at N* = (4m+2)/(m+1), sigma = 2(m-1)/(m+1)

struct SelfMap {
    double m, k; // xi = (k eta)^{(m+1)/(2m)}, F = f (k eta)^{1/m}
    double xi_of(double eta) const { return std::pow(k * eta, (m + 1) / (2 * m)); }
    double eta_of(double xi) const { return std::pow(xi, 2 * m / (m + 1)) / k; }
    double F_of(double f, double eta) const { return f * std::pow(k * eta, 1 / m); }
    double f_of(double F, double eta) const { return F * std::pow(k * eta, -1 / m); }
};

inline SelfMap self_map(double m) { return {m, 2 * m / (m + 1)}; }

struct SelfMapReport {
    ModelParams params;
    double exponent_xi = 0, exponent_f = 0; // (m+1)/(2m) and -1/m
    double eta_lo = 0, eta_hi = 0;
    double residual_sup = 0;
    double round_trip = 0;
    double closest_P1 = 0;
    int points = 0;
};

// Residual of F in (F^m)'' - F/(m-1) + F^m = 0, the N = 1, sigma = 0 equation.
inline double homogeneous_residual(const std::function<double(double)>& F, double eta, double m, double h)
{
    auto g = [&](double e) { return std::pow(F(e), m); };
    double d2 = (-g(eta - 2 * h) + 16 * g(eta - h) - 30 * g(eta) + 16 * g(eta + h) - g(eta + 2 * h)) / (12 * h * h);
    return d2 - F(eta) / (m - 1) + g(eta);
}

inline SelfMapReport self_map_check(double m, int points = 400, double h = 1e-2)
{
    if (!(m > 1)) throw Error(ErrorCode::M_OUT_OF_RANGE, "m must be > 1");
    const double Ns = n_star(m);
    ModelParams p = validate_params(m, Ns, sigma_c(m, Ns));
    SelfMapReport rep;
    rep.params = p;
    rep.exponent_xi = (m + 1) / (2 * m);
    rep.exponent_f = -1 / m;

    // the unique orbit out of P2 connects to P1 here; follow it to its closest approach
    const double h0 = h0_of(m);
    const Vec3 P1{0, -h0, 0};
    IntegrationControls ctl;
    ctl.rel_tol = 1e-12;
    ctl.abs_tol = 1e-15;
    ctl.max_span = 500;
    auto approach = [&p, P1](const Vec3& u) {
        Vec3 d = u - P1;
        return norm(d) < 0.1 ? dot(d, field(ChartId::MAIN, u, p)) : -1.0;
    };
    auto t = integrate(ChartId::MAIN, seed(SeedSpec::p2(1e-8), p).state, p, ctl,
                       {EventSpec::custom("closest", approach, Crossing::UP, true)});
    rep.closest_P1 = norm(t.final_state() - P1);
    if (t.termination != Termination::EVENT || rep.closest_P1 > 1e-2)
        throw Error(ErrorCode::NO_PROFILE, "no good orbit found at (N*, sigma_c(N*))");
    ProfileCurve c = reconstruct_profile(t, p, ReconstructOptions::plain(2));

    SelfMap sm = self_map(m);
    auto F = [&](double eta) { return sm.F_of(c.eval(sm.xi_of(eta)), eta); };
    rep.eta_lo = sm.eta_of(c.xi_min()) + 2 * h;
    rep.eta_hi = sm.eta_of(c.xi_max()) - 2 * h;
    if (!(rep.eta_hi > rep.eta_lo)) throw Error(ErrorCode::NO_PROFILE, "resolved range too short");
    for (int i = 0; i < points; ++i) {
        double eta = rep.eta_lo + (rep.eta_hi - rep.eta_lo) * i / (points - 1);
        rep.residual_sup = std::max(rep.residual_sup, std::abs(homogeneous_residual(F, eta, m, h)));
        double xi = sm.xi_of(eta);
        double back = sm.f_of(sm.F_of(c.eval(xi), eta), sm.eta_of(xi));
        rep.round_trip = std::max(rep.round_trip, std::abs(back - c.eval(xi)) / std::max(1e-300, c.eval(xi)));
    }
    rep.points = points;
    return rep;
}

} // namespace blowup
