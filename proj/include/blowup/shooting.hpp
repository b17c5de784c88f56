#pragma once

// Orbit seeding on the invariant manifolds, fate classification by
// integration (with chart handoffs at infinity), three-sets bisection over a
// shooting parameter, and threaded sweeps.

#include <blowup/integrate.hpp>
#include <blowup/model.hpp>
#include <blowup/vectorfields.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace blowup {

enum class SeedOrigin { P2_E3, P0_UNSTABLE, Q1_OUT, P1_BACKWARD, Q5_OUT, NEAR_P3 };

inline const char* to_string(SeedOrigin o)
{
    static const char* n[] = {"P2_E3", "P0_UNSTABLE", "Q1_OUT", "P1_BACKWARD", "Q5_OUT", "NEAR_P3"};
    return n[static_cast<int>(o)];
}

inline std::optional<SeedOrigin> origin_from_string(const std::string& s)
{
    for (int i = 0; i < 6; ++i)
        if (s == to_string(static_cast<SeedOrigin>(i))) return static_cast<SeedOrigin>(i);
    // short names used on the command line
    if (s == "P2") return SeedOrigin::P2_E3;
    if (s == "P0") return SeedOrigin::P0_UNSTABLE;
    if (s == "Q1") return SeedOrigin::Q1_OUT;
    if (s == "P1") return SeedOrigin::P1_BACKWARD;
    if (s == "Q5") return SeedOrigin::Q5_OUT;
    if (s == "P3") return SeedOrigin::NEAR_P3;
    return std::nullopt;
}

// `param` is theta for P0_UNSTABLE and Q5_OUT, phi for Q1_OUT, D for
// P1_BACKWARD and x0 for NEAR_P3 (with r0 in `param2`). Angles live in
// [0, pi/2) and act on the resonant invariant Z/X^2 (resp. z/w^{s+1}).
struct SeedSpec {
    SeedOrigin origin = SeedOrigin::P2_E3;
    double param = 0.0;
    double param2 = 0.0;
    double epsilon = 1e-6;

    static SeedSpec p2(double eps = 1e-6) { return {SeedOrigin::P2_E3, 0, 0, eps}; }
    static SeedSpec p0(double theta, double eps = 1e-6) { return {SeedOrigin::P0_UNSTABLE, theta, 0, eps}; }
    static SeedSpec q1(double phi, double eps = 1e-6) { return {SeedOrigin::Q1_OUT, phi, 0, eps}; }
    static SeedSpec p1(double D, double eps = 1e-6) { return {SeedOrigin::P1_BACKWARD, D, 0, eps}; }
    static SeedSpec q5(double theta, double eps = 1e-6) { return {SeedOrigin::Q5_OUT, theta, 0, eps}; }
    static SeedSpec p3(double x0, double r0) { return {SeedOrigin::NEAR_P3, x0, r0, 1e-6}; }
};

struct Seed {
    ChartId chart = ChartId::MAIN;
    Vec3 state{};
    Direction direction = Direction::FORWARD;
};

namespace detail {

// small root of a x^2 + b x + c = 0 (b != 0)
inline double small_root(double a, double b, double c)
{
    if (a == 0) return -c / b;
    double disc = b * b - 4 * a * c;
    if (disc < 0) throw Error(ErrorCode::BAD_SPEC, "seed off the manifold chart");
    double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    return c / q;
}

// H with Z = manifold(X, H) for the order-2 approximation at `base`
inline double manifold_H(ManifoldBase base, double X, double Z, const ModelParams& p)
{
    auto a = manifold_approx(base, 2, p);
    double s = base == ManifoldBase::P1 ? 1.0 : -1.0;
    return small_root(a.D, s * a.B + a.E * X, s * a.A * X + a.C * X * X - Z);
}

} // namespace detail

inline Seed seed(const SeedSpec& spec, const ModelParams& p)
{
    const double eps = spec.epsilon, m = p.m, N = p.N, s = p.sigma, h0 = h0_of(m);
    if (!(eps > 0 && eps <= 1e-3)) throw Error(ErrorCode::BAD_SPEC, "epsilon must lie in (0, 1e-3]");
    auto angle_ok = [](double a) { return a >= 0 && a < M_PI / 2; };
    Seed out;
    switch (spec.origin) {
    case SeedOrigin::P2_E3: {
        Vec3 e = closed::e3(p);
        e = (1 / norm(e)) * e; // third component > 0: into {Z > 0}
        out.state = closed::P2(p) + eps * e;
        break;
    }
    case SeedOrigin::P0_UNSTABLE: {
        if (!angle_ok(spec.param)) throw Error(ErrorCode::BAD_SPEC, "theta must lie in [0, pi/2)");
        double X = eps, Z = std::tan(spec.param) * eps * eps;
        out.state = {X, h0 + detail::manifold_H(ManifoldBase::P0, X, Z, p), Z};
        break;
    }
    case SeedOrigin::P1_BACKWARD: {
        if (!(spec.param > 0)) throw Error(ErrorCode::BAD_SPEC, "D must be > 0");
        double X = eps, Z = spec.param * eps * eps;
        out.state = {X, -h0 + detail::manifold_H(ManifoldBase::P1, X, Z, p), Z};
        out.direction = Direction::BACKWARD;
        break;
    }
    case SeedOrigin::Q1_OUT: {
        if (!angle_ok(spec.param)) throw Error(ErrorCode::BAD_SPEC, "phi must lie in [0, pi/2)");
        double w = eps, z = std::tan(spec.param) * std::pow(eps, s + 1);
        // graph of the unstable manifold of Q1 to second order
        out.chart = ChartId::CHART_Q1;
        out.state = {-z * w / (s + N) + w * w / N, z, w};
        break;
    }
    case SeedOrigin::Q5_OUT: {
        if (!angle_ok(spec.param)) throw Error(ErrorCode::BAD_SPEC, "theta must lie in [0, pi/2)");
        double y5 = (2 - N) / m;
        double lz = (s + 1) + (m - 1) / 2 * y5, lw = 1 - (m - 1) / 2 * y5;
        if (!(lz > 0 && lw > 0)) throw Error(ErrorCode::BAD_SPEC, "Q5 is not an unstable node here");
        out.chart = ChartId::CHART_Q1;
        out.state = {y5, std::tan(spec.param) * std::pow(eps, lz / lw), eps};
        break;
    }
    case SeedOrigin::NEAR_P3: {
        double x0 = spec.param, r0 = spec.param2;
        if (!(x0 > 0) || !(r0 >= 0)) throw Error(ErrorCode::BAD_SPEC, "NEAR_P3 needs x0 > 0, r0 >= 0");
        out.state = {x0, -s * x0 / (m - 1), 1 + r0 / std::sqrt(m - 1)};
        break;
    }
    }
    return out;
}

// ---- fates -----------------------------------------------------------------

// Forward fates: ENTERS_*. Backward fates (P1_BACKWARD): where the orbit comes
// from, ESCAPES_Q5 / ESCAPES_Q2 / FROM_*.
enum class Fate {
    ENTERS_P1,
    ENTERS_P3,
    ENTERS_Q3,
    ESCAPES_Q5,
    ESCAPES_Q2,
    FROM_Q1,
    FROM_P0,
    FROM_P3,
    CYCLE_SUSPECT,
    INDETERMINATE
};

inline const char* to_string(Fate f)
{
    static const char* n[] = {"ENTERS_P1", "ENTERS_P3", "ENTERS_Q3", "ESCAPES_Q5", "ESCAPES_Q2",
                              "FROM_Q1",   "FROM_P0",   "FROM_P3",   "CYCLE_SUSPECT", "INDETERMINATE"};
    return n[static_cast<int>(f)];
}

enum class ProfileClass { GOOD_P1_BEHAVIOR, GOOD_P2_BEHAVIOR, GOOD_P3_BEHAVIOR, TAIL, NOT_GOOD };

inline const char* to_string(ProfileClass c)
{
    static const char* n[] = {"GOOD_P1_BEHAVIOR", "GOOD_P2_BEHAVIOR", "GOOD_P3_BEHAVIOR", "TAIL", "NOT_GOOD"};
    return n[static_cast<int>(c)];
}

struct FateControls {
    IntegrationControls ode = [] {
        IntegrationControls c;
        c.max_span = 5000;
        return c;
    }();
    double ball_radius = 1e-4;  // P1 / P0 entry
    double field_gate = 1e-6;
    double p3_x_cap = 1e-2;     // P3 capture region: X below this ...
    double p3_r_cap = 0.3;      // ... and rotation radius below this
    int p3_extrema = 8;         // Z-extrema examined after capture
    double chart_span = 200;    // per candidate chart at infinity
    double chart_radius = 1e-4; // convergence ball at the point at infinity
    double p1_near = 2e-2;      // bracket certification distance to P1
};

struct FateReport {
    Fate fate = Fate::INDETERMINATE;
    std::optional<Event> terminal_event;
    double eta_span = 0.0;
    std::vector<Event> crossings; // {Y = 0} crossings on the MAIN leg
    std::optional<ProfileClass> profile_class;
    Seed seed;
    ChartId final_chart = ChartId::MAIN;
    Vec3 final_state{};
    double min_dist_P1 = INFINITY;
    double min_dist_Q1 = INFINITY; // in the Q1 chart, along the legs at infinity
    std::vector<double> extrema_Z; // Z at successive Z-extrema near P3
    bool critical_case = false;
    std::string diagnostics;
};

inline std::optional<ProfileClass> profile_class(SeedOrigin o, Fate f)
{
    using PC = ProfileClass;
    if (f == Fate::INDETERMINATE || f == Fate::CYCLE_SUSPECT) return std::nullopt;
    if (f == Fate::ENTERS_Q3 || f == Fate::ESCAPES_Q5 || f == Fate::ESCAPES_Q2) return PC::NOT_GOOD;
    if (o == SeedOrigin::P1_BACKWARD) {
        if (f == Fate::FROM_Q1) return PC::GOOD_P1_BEHAVIOR;
        if (f == Fate::FROM_P0) return PC::GOOD_P3_BEHAVIOR;
        return PC::NOT_GOOD; // from P3: Z -> 1 at xi -> 0 is not admissible
    }
    PC good;
    switch (o) {
    case SeedOrigin::Q1_OUT: good = PC::GOOD_P1_BEHAVIOR; break;
    case SeedOrigin::P2_E3: good = PC::GOOD_P2_BEHAVIOR; break;
    case SeedOrigin::P0_UNSTABLE: good = PC::GOOD_P3_BEHAVIOR; break;
    default: return PC::NOT_GOOD; // Q5 (vertical asymptote) and P3 origins are not good
    }
    if (f == Fate::ENTERS_P1) return good;
    if (f == Fate::ENTERS_P3) return PC::TAIL;
    return PC::NOT_GOOD;
}

namespace detail {

inline double p3_radius(const Vec3& u, const ModelParams& p)
{
    return std::hypot((p.m - 1) * u[1] + p.sigma * u[0], std::sqrt(p.m - 1) * (u[2] - 1));
}

inline double min_dist_to(const Trajectory& t, const Vec3& q)
{
    double best = INFINITY;
    for (const auto& u : t.states) best = std::min(best, norm(u - q));
    for (const auto& seg : t.dense)
        for (double f : {0.25, 0.5, 0.75}) best = std::min(best, norm(seg.eval(seg.t0 + f * seg.h) - q));
    return best;
}

// amplitudes |Z - 1| split into maxima and minima; both strictly decreasing
inline bool damped(const std::vector<double>& Zs, int min_each = 3)
{
    std::vector<double> hi, lo;
    for (double z : Zs) (z > 1 ? hi : lo).push_back(std::abs(z - 1));
    if ((int)hi.size() < min_each || (int)lo.size() < min_each) return false;
    for (auto* v : {&hi, &lo})
        for (std::size_t i = 1; i < v->size(); ++i)
            if (!((*v)[i] < (*v)[i - 1])) return false;
    return true;
}

// >= 5 successive same-type amplitude ratios inside [0.99, 1.01]
inline bool cycle_like(const std::vector<double>& Zs)
{
    int run = 0;
    for (std::size_t i = 2; i < Zs.size(); ++i) {
        double a = std::abs(Zs[i - 2] - 1), b = std::abs(Zs[i] - 1);
        double r = a > 0 ? b / a : 0;
        run = (r >= 0.99 && r <= 1.01) ? run + 1 : 0;
        if (run >= 5) return true;
    }
    return false;
}

struct InfinityVerdict {
    Fate fate = Fate::INDETERMINATE;
    ChartId chart = ChartId::MAIN;
    Vec3 state{};
    double span = 0;
    double min_dist_Q1 = INFINITY;
    std::string note;
};

// Continue an escaping MAIN orbit in the charts at infinity and report which
// point (if any) it converges to.
inline InfinityVerdict classify_at_infinity(const Vec3& u, Direction dir, const ModelParams& p,
                                            const FateControls& fc, int depth = 0)
{
    const double m = p.m, N = p.N;
    struct Cand {
        ChartId chart;
        int branch;
        std::vector<std::pair<Vec3, Fate>> targets;
    };
    std::vector<Cand> cands;
    const bool fwd = dir == Direction::FORWARD;
    const double X = u[0], Y = u[1];
    const Vec3 q5{(2 - N) / m, 0, 0};
    if (Y != 0 && std::abs(Y) >= 1e-3 * X) {
        int b = Y > 0 ? 1 : -1;
        Fate f = b < 0 ? (fwd ? Fate::ENTERS_Q3 : Fate::INDETERMINATE) : (fwd ? Fate::INDETERMINATE : Fate::ESCAPES_Q2);
        cands.push_back({ChartId::CHART_Q23, b, {{Vec3{0, 0, 0}, f}}});
    }
    if (X > 0) {
        Fate f5 = fwd ? Fate::INDETERMINATE : Fate::ESCAPES_Q5;
        Fate f1 = fwd ? Fate::INDETERMINATE : Fate::FROM_Q1;
        cands.push_back({ChartId::CHART_Q1, 1, {{q5, f5}, {Vec3{0, 0, 0}, f1}}});
        cands.push_back({ChartId::ALT, 1, {{q5, f5}}}); // Q4: the same node seen in the ALT chart
    }
    InfinityVerdict best;
    std::optional<std::pair<ChartId, Trajectory>> escaped;
    for (const auto& c : cands) {
        Vec3 v = from_main(c.chart, u, p);
        if (!admissible(c.chart, v)) continue;
        IntegrationControls ctl = fc.ode;
        ctl.direction = dir;
        ctl.max_span = fc.chart_span;
        std::vector<EventSpec> specs;
        for (const auto& [pt, f] : c.targets)
            specs.push_back(EventSpec::ball(to_string(f), pt, fc.chart_radius, 0.0, true));
        Trajectory t;
        try {
            t = integrate(c.chart, v, p, ctl, specs, c.branch);
        } catch (const Error& e) {
            best.note += std::string(to_string(c.chart)) + ": " + e.what() + "; ";
            continue;
        }
        if (c.chart == ChartId::CHART_Q1)
            best.min_dist_Q1 = std::min(best.min_dist_Q1, min_dist_to(t, Vec3{0, 0, 0}));
        if (t.termination == Termination::EVENT && !t.events.empty() &&
            t.events.back().kind == EventKind::BALL_ENTRY) {
            const auto& ev = t.events.back();
            Fate f = c.targets[ev.spec_index].second;
            if (f == Fate::INDETERMINATE) {
                best.note += std::string("converged to an unexpected point in ") + to_string(c.chart) + "; ";
                continue;
            }
            return {f, c.chart, ev.state, t.span(), best.min_dist_Q1, ""};
        }
        if (t.termination == Termination::HANDOFF && !escaped) escaped.emplace(c.chart, std::move(t));
        else best.note += std::string(to_string(c.chart)) + " run ended " + to_string(t.termination) + "; ";
    }
    // left one chart through its own boundary (e.g. past Q1 towards Q2): re-route
    if (escaped && depth < 3) {
        const auto& [ch, t] = *escaped;
        Vec3 v = to_main(ch, t.final_state(), p, t.branch);
        if (admissible(ChartId::MAIN, v)) {
            auto r = classify_at_infinity(v, dir, p, fc, depth + 1);
            r.span += t.span();
            r.min_dist_Q1 = std::min(r.min_dist_Q1, best.min_dist_Q1);
            return r;
        }
    }
    best.state = u;
    return best;
}

} // namespace detail

// Integrate the seeded orbit and classify where it goes (forward seeds) or
// where it comes from (P1_BACKWARD). Integrator failures become INDETERMINATE
// with the message in `diagnostics`.
inline FateReport classify_fate(const SeedSpec& spec, const ModelParams& p, const FateControls& fc = {})
{
    FateReport rep;
    const double h0 = h0_of(p.m);
    const Vec3 P1{0, -h0, 0}, P0{0, h0, 0};
    rep.critical_case = closed::is_critical(p);
    try {
        rep.seed = seed(spec, p);
        Direction dir = rep.seed.direction;
        const bool fwd = dir == Direction::FORWARD;
        IntegrationControls ctl = fc.ode;
        ctl.direction = dir;

        Vec3 u = rep.seed.state;
        // leave the neighbourhood of infinity inside the Q1 chart
        if (rep.seed.chart == ChartId::CHART_Q1) {
            IntegrationControls c1 = ctl;
            c1.max_span = 200;
            auto t = integrate(ChartId::CHART_Q1, u, p, c1, {EventSpec::plane(2, 0.1, Crossing::UP, true)});
            rep.eta_span += t.span();
            if (t.termination != Termination::EVENT && t.termination != Termination::HANDOFF) {
                rep.diagnostics = "did not leave the Q1 chart";
                rep.final_chart = ChartId::CHART_Q1;
                rep.final_state = t.final_state();
                rep.profile_class = profile_class(spec.origin, rep.fate);
                return rep;
            }
            u = to_main(ChartId::CHART_Q1, t.final_state(), p);
        }

        const double k1 = closed::K1(p);
        // P3 attracts X > 0 forward when K1 < 0 and backward when K1 > 0
        const bool p3_active = rep.critical_case || (fwd ? k1 < 0 : k1 > 0);
        const double xc = fc.p3_x_cap, rc = fc.p3_r_cap;
        auto in_p3 = [&](const Vec3& v) { return v[0] < xc && detail::p3_radius(v, p) < rc; };

        std::vector<EventSpec> specs;
        specs.push_back(EventSpec::plane(1, 0.0)); // crossing log
        if (fwd) specs.push_back(EventSpec::ball("P1", P1, fc.ball_radius, fc.field_gate));
        else specs.push_back(EventSpec::ball("P0", P0, fc.ball_radius, fc.field_gate));
        if (p3_active)
            specs.push_back(EventSpec::custom(
                "P3", [&, xc, rc](const Vec3& v) { return std::max(v[0] - xc, detail::p3_radius(v, p) - rc); },
                Crossing::DOWN, true));
        // Z extrema along the way, for the cycle test at the end of the span
        specs.push_back(EventSpec::custom(
            "zext", [&](const Vec3& v) { return (p.m - 1) * v[1] + p.sigma * v[0]; }, Crossing::ANY, false));

        Trajectory t;
        bool captured = p3_active && in_p3(u);
        if (!captured) {
            t = integrate(ChartId::MAIN, u, p, ctl, specs);
            rep.eta_span += t.span();
            rep.min_dist_P1 = detail::min_dist_to(t, P1);
            std::vector<double> zs;
            for (const auto& e : t.events) {
                if (e.label == "plane") rep.crossings.push_back(e);
                if (e.label == "zext") zs.push_back(e.state[2]);
            }
            rep.final_state = t.final_state();
            if (!t.events.empty() && t.termination != Termination::MAX_SPAN) rep.terminal_event = t.events.back();
            switch (t.termination) {
            case Termination::EVENT: {
                const auto& ev = t.events.back();
                if (ev.label == "P1") rep.fate = Fate::ENTERS_P1;
                else if (ev.label == "P0") rep.fate = Fate::FROM_P0;
                else if (ev.label == "P3") captured = true;
                break;
            }
            case Termination::HANDOFF: {
                auto v = detail::classify_at_infinity(t.final_state(), dir, p, fc);
                rep.fate = v.fate;
                rep.eta_span += v.span;
                rep.final_chart = v.chart;
                rep.final_state = v.state;
                rep.min_dist_Q1 = v.min_dist_Q1;
                rep.diagnostics = v.note;
                break;
            }
            case Termination::MAX_SPAN: {
                rep.extrema_Z = zs;
                if (detail::cycle_like(zs) && t.final_state()[0] > fc.ball_radius) {
                    rep.fate = Fate::CYCLE_SUSPECT;
                } else {
                    rep.diagnostics = "span exhausted";
                }
                break;
            }
            default: rep.diagnostics = std::string("integration ended ") + to_string(t.termination); break;
            }
            u = t.final_state();
        }
        if (captured) {
            // look at successive Z-extrema inside the capture region
            IntegrationControls c3 = ctl;
            c3.max_span = 4000;
            auto ext = EventSpec::custom(
                "zext", [&](const Vec3& v) { return (p.m - 1) * v[1] + p.sigma * v[0]; }, Crossing::ANY, false);
            ext.max_count = fc.p3_extrema;
            // continue the clock of the first leg so event times are absolute
            const double eta_start = t.eta.empty() ? 0.0 : t.eta.back();
            auto t3 = integrate(ChartId::MAIN, u, p, c3, {ext}, 1, eta_start);
            rep.eta_span += t3.span();
            rep.final_state = t3.final_state();
            rep.min_dist_P1 = std::min(rep.min_dist_P1, detail::min_dist_to(t3, P1));
            for (const auto& e : t3.events)
                if (e.label == "zext") rep.extrema_Z.push_back(e.state[2]);
            if (!t3.events.empty()) rep.terminal_event = t3.events.back();
            bool stayed = in_p3(t3.final_state()) || t3.final_state()[0] < xc;
            if (rep.critical_case) {
                rep.diagnostics = "critical_case: P3 fate not decided at sigma = sigma_c";
            } else if ((int)rep.extrema_Z.size() >= fc.p3_extrema && stayed && detail::damped(rep.extrema_Z)) {
                rep.fate = fwd ? Fate::ENTERS_P3 : Fate::FROM_P3;
            } else if (detail::cycle_like(rep.extrema_Z)) {
                rep.fate = Fate::CYCLE_SUSPECT;
            } else {
                rep.diagnostics = "captured near P3 but oscillations are not damped";
            }
        }
    } catch (const Error& e) {
        rep.fate = Fate::INDETERMINATE;
        rep.diagnostics = e.what();
    }
    rep.profile_class = profile_class(spec.origin, rep.fate);
    return rep;
}

// ---- bisection and sweeps ---------------------------------------------------

enum class ShootParam { SIGMA, D, ANGLE };

inline const char* to_string(ShootParam s) { return s == ShootParam::SIGMA ? "SIGMA" : s == ShootParam::D ? "D" : "ANGLE"; }

struct TransitionBracket {
    ShootParam parameter = ShootParam::SIGMA;
    double lo = 0, hi = 0;
    Fate fate_lo = Fate::INDETERMINATE, fate_hi = Fate::INDETERMINATE;
    double width = 0;
    // fate of the separating orbit; ENTERS_P1 when both end orbits pass
    // within p1_near of P1 and leave it on opposite sides
    Fate boundary = Fate::INDETERMINATE;
    double dist_lo = INFINITY, dist_hi = INFINITY; // to P1 (forward) or Q1 (backward)
    int probes = 0, indeterminate = 0;
};

namespace detail {

inline FateReport probe(ShootParam what, double v, const SeedSpec& spec, const ModelParams& base,
                        const FateControls& fc)
{
    if (what == ShootParam::SIGMA) return classify_fate(spec, base.with_sigma(v), fc);
    SeedSpec s = spec;
    s.param = v;
    return classify_fate(s, base, fc);
}

inline bool same_pair(Fate a, Fate b, Fate x, Fate y) { return (a == x && b == y) || (a == y && b == x); }

} // namespace detail

// Bisection on the discrete fate function. Reports the first transition from
// lo upward: a probe with a third conclusive fate replaces the upper end.
// INDETERMINATE probes are retried at nearby points inside the bracket.
inline TransitionBracket bisect_transition(ShootParam what, const SeedSpec& spec, double lo, double hi, double tol,
                                           const ModelParams& base, const FateControls& fc = {})
{
    if (!(hi > lo) || !(tol > 0)) throw Error(ErrorCode::BAD_SPEC, "need lo < hi and tol > 0");
    TransitionBracket br;
    br.parameter = what;
    auto flo = detail::probe(what, lo, spec, base, fc);
    auto fhi = detail::probe(what, hi, spec, base, fc);
    br.probes = 2;
    if (flo.fate == Fate::INDETERMINATE || fhi.fate == Fate::INDETERMINATE)
        throw Error(ErrorCode::TOO_MANY_INDETERMINATE, "endpoint fate is INDETERMINATE");
    if (flo.fate == fhi.fate)
        throw Error(ErrorCode::SAME_FATE_AT_ENDPOINTS, std::string("both endpoints: ") + to_string(flo.fate));
    while (hi - lo > tol) {
        double w = hi - lo;
        std::optional<std::pair<double, FateReport>> hit;
        for (double off : {0.0, 1.0 / 16, -1.0 / 16, 3.0 / 16, -3.0 / 16, 5.0 / 16, -5.0 / 16}) {
            double x = lo + w * (0.5 + off);
            auto r = detail::probe(what, x, spec, base, fc);
            ++br.probes;
            if (r.fate == Fate::INDETERMINATE) {
                ++br.indeterminate;
                continue;
            }
            hit.emplace(x, std::move(r));
            break;
        }
        if (2 * br.indeterminate > br.probes)
            throw Error(ErrorCode::TOO_MANY_INDETERMINATE, "more than half of the probes are INDETERMINATE");
        if (!hit) throw Error(ErrorCode::TOO_MANY_INDETERMINATE, "no conclusive probe near the midpoint");
        auto& [x, r] = *hit;
        if (r.fate == flo.fate) {
            lo = x;
            flo = std::move(r);
        } else {
            hi = x;
            fhi = std::move(r);
        }
    }
    br.lo = lo;
    br.hi = hi;
    br.width = hi - lo;
    br.fate_lo = flo.fate;
    br.fate_hi = fhi.fate;
    // forward: the separating orbit enters P1 between P3 and Q3 orbits;
    // backward from P1: it comes from Q1 between Q2 and Q5 origins
    if (detail::same_pair(flo.fate, fhi.fate, Fate::ENTERS_P3, Fate::ENTERS_Q3)) {
        br.dist_lo = flo.min_dist_P1;
        br.dist_hi = fhi.min_dist_P1;
        if (br.dist_lo < fc.p1_near && br.dist_hi < fc.p1_near) br.boundary = Fate::ENTERS_P1;
    } else if (detail::same_pair(flo.fate, fhi.fate, Fate::ESCAPES_Q2, Fate::ESCAPES_Q5)) {
        br.dist_lo = flo.min_dist_Q1;
        br.dist_hi = fhi.min_dist_Q1;
        if (br.dist_lo < fc.p1_near && br.dist_hi < fc.p1_near) br.boundary = Fate::FROM_Q1;
    }
    return br;
}

struct SweepPoint {
    double value;
    FateReport report;
};

// Independent classifications over a sorted grid, on a worker pool; results
// keep grid order.
inline std::vector<SweepPoint> sweep(ShootParam what, const std::vector<double>& grid, const SeedSpec& spec,
                                     const ModelParams& base, const FateControls& fc = {}, unsigned threads = 0)
{
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error(ErrorCode::BAD_SPEC, "sweep grid must be sorted");
    std::vector<SweepPoint> out(grid.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, std::max<std::size_t>(1, grid.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < grid.size();) {
            out[i].value = grid[i];
            try {
                out[i].report = detail::probe(what, grid[i], spec, base, fc);
            } catch (const Error& e) {
                out[i].report.fate = Fate::INDETERMINATE;
                out[i].report.diagnostics = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

} // namespace blowup
