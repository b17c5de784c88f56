#pragma once

// Dormand-Prince 5(4) with PI step control, dense output and event location
// by bisection on the interpolant. Backward time is integration of the
// negated field; eta is reported in the true (decreasing) direction.

#include <blowup/error.hpp>
#include <blowup/linalg.hpp>
#include <blowup/model.hpp>
#include <blowup/vectorfields.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace blowup {

enum class Direction { FORWARD, BACKWARD };

struct IntegrationControls {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_span = 1e4;
    long max_steps = 10'000'000;
    double handoff_threshold = 1e3;
    Direction direction = Direction::FORWARD;
    double initial_step = 0.0; // 0: automatic
    double max_step = std::numeric_limits<double>::infinity();
};

enum class EventKind { PLANE_CROSS, SURFACE_CROSS, BALL_ENTRY, ESCAPE, STALL, CUSTOM };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::PLANE_CROSS: return "PLANE_CROSS";
    case EventKind::SURFACE_CROSS: return "SURFACE_CROSS";
    case EventKind::BALL_ENTRY: return "BALL_ENTRY";
    case EventKind::ESCAPE: return "ESCAPE";
    case EventKind::STALL: return "STALL";
    case EventKind::CUSTOM: return "CUSTOM";
    }
    return "?";
}

// direction of a sign change of the event function, in integration time
enum class Crossing { ANY, UP, DOWN };

struct EventSpec {
    EventKind kind = EventKind::CUSTOM;
    std::string label;
    int axis = 0;
    double level = 0.0;
    Crossing crossing = Crossing::ANY;
    Vec3 point{};
    double radius = 1e-4;
    double field_gate = 1e-6;
    bool terminal = false;
    int max_count = 0; // terminal after this many occurrences (0: unlimited)
    std::function<double(const Vec3&)> fn;

    static EventSpec plane(int axis, double level, Crossing c = Crossing::ANY, bool terminal = false)
    {
        EventSpec e;
        e.kind = EventKind::PLANE_CROSS;
        e.axis = axis;
        e.level = level;
        e.crossing = c;
        e.terminal = terminal;
        e.label = "plane";
        return e;
    }
    // separatrix surface Z - Z(X,Y); only meaningful in MAIN/SHIFTED
    static EventSpec separatrix(Crossing c = Crossing::ANY, bool terminal = false)
    {
        EventSpec e;
        e.kind = EventKind::SURFACE_CROSS;
        e.crossing = c;
        e.terminal = terminal;
        e.label = "separatrix";
        return e;
    }
    static EventSpec ball(std::string id, const Vec3& p, double radius = 1e-4, double gate = 1e-6,
                          bool terminal = true)
    {
        EventSpec e;
        e.kind = EventKind::BALL_ENTRY;
        e.label = std::move(id);
        e.point = p;
        e.radius = radius;
        e.field_gate = gate;
        e.crossing = Crossing::DOWN;
        e.terminal = terminal;
        return e;
    }
    static EventSpec custom(std::string label, std::function<double(const Vec3&)> fn, Crossing c = Crossing::ANY,
                            bool terminal = false)
    {
        EventSpec e;
        e.kind = EventKind::CUSTOM;
        e.label = std::move(label);
        e.fn = std::move(fn);
        e.crossing = c;
        e.terminal = terminal;
        return e;
    }
};

struct Event {
    EventKind kind = EventKind::CUSTOM;
    std::string label;
    int spec_index = -1;
    double eta = 0.0;
    Vec3 state{};
    int axis = 0;
    double level = 0.0;
    int direction = 0; // +1 the event function increased, -1 decreased (integration time)
};

enum class Termination { RUNNING, EVENT, MAX_SPAN, MAX_STEPS, HANDOFF, STEP_UNDERFLOW, OBSERVER };

inline const char* to_string(Termination t)
{
    switch (t) {
    case Termination::RUNNING: return "RUNNING";
    case Termination::EVENT: return "EVENT";
    case Termination::MAX_SPAN: return "MAX_SPAN";
    case Termination::MAX_STEPS: return "MAX_STEPS";
    case Termination::HANDOFF: return "HANDOFF";
    case Termination::STEP_UNDERFLOW: return "STEP_UNDERFLOW";
    case Termination::OBSERVER: return "OBSERVER";
    }
    return "?";
}

// One accepted step's continuous extension, in integration time tau.
struct DenseSegment {
    double t0, h;
    std::array<Vec3, 5> r;
    Vec3 eval(double t) const
    {
        double th = (t - t0) / h, th1 = 1 - th;
        Vec3 y;
        for (int i = 0; i < 3; ++i)
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        return y;
    }
};

struct Trajectory {
    ChartId chart = ChartId::MAIN;
    int branch = 1;
    Direction direction = Direction::FORWARD;
    double eta0 = 0.0;
    std::vector<double> eta;
    std::vector<Vec3> states;
    std::vector<DenseSegment> dense; // in tau = |eta - eta0|
    std::vector<Event> events;
    Termination termination = Termination::RUNNING;
    long steps = 0, rejected = 0;

    double sign() const { return direction == Direction::FORWARD ? 1.0 : -1.0; }
    double span() const { return eta.empty() ? 0.0 : std::abs(eta.back() - eta0); }
    const Vec3& final_state() const { return states.back(); }

    // dense interpolation at a true-time eta inside the run
    Vec3 at(double e) const
    {
        double t = (e - eta0) * sign();
        if (dense.empty()) return states.front();
        auto it = std::upper_bound(dense.begin(), dense.end(), t,
                                   [](double v, const DenseSegment& s) { return v < s.t0; });
        const DenseSegment& seg = it == dense.begin() ? dense.front() : *(it - 1);
        return seg.eval(t);
    }
    std::optional<Event> first_event(const std::string& label) const
    {
        for (const auto& e : events)
            if (e.label == label) return e;
        return std::nullopt;
    }
};

// Optional hook called for every located event; returning true stops the run.
using EventObserver = std::function<bool(const Event&, const Trajectory&)>;

namespace detail {

struct DP5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                            d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                            d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

inline Vec3 lin(std::initializer_list<std::pair<double, const Vec3*>> terms, const Vec3& base, double h)
{
    Vec3 r = base;
    for (auto& [c, v] : terms)
        for (int i = 0; i < 3; ++i) r[i] += h * c * (*v)[i];
    return r;
}

} // namespace detail

// Generic adaptive integrator over tau >= 0 for y' = rhs(y). `dim` components
// enter the error norm. `events` are scalar functions g(y); sign changes
// consistent with `crossing` are located on the dense output.
struct OdeEvent {
    std::function<double(const Vec3&)> g;
    Crossing crossing = Crossing::ANY;
    bool terminal = false;
    int max_count = 0;
    std::function<bool(const Vec3&)> accept; // extra gate at the located point
};

struct OdeResult {
    std::vector<double> t;
    std::vector<Vec3> y;
    std::vector<DenseSegment> dense;
    std::vector<std::tuple<int, double, Vec3, int>> hits; // (event index, t, y, direction)
    Termination termination = Termination::RUNNING;
    long steps = 0, rejected = 0;
};

template <class Rhs>
OdeResult dopri5(Rhs&& rhs, const Vec3& y0, double t_end, int dim, const IntegrationControls& ctl,
                 const std::vector<OdeEvent>& events = {},
                 const std::function<bool(int, double, const Vec3&)>& on_hit = {},
                 const std::function<bool(const Vec3&)>& stop_when = {})
{
    using detail::DP5;
    OdeResult res;
    double t = 0.0;
    Vec3 y = y0;
    res.t.push_back(t);
    res.y.push_back(y);
    Vec3 k1 = rhs(y);

    auto errnorm_scale = [&](const Vec3& a, const Vec3& b, int i) {
        return ctl.abs_tol + ctl.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
    };

    // initial step (Hairer & Wanner's heuristic)
    double h = ctl.initial_step;
    if (h <= 0) {
        double d0 = 0, d1 = 0;
        for (int i = 0; i < dim; ++i) {
            double sc = ctl.abs_tol + ctl.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / dim);
        d1 = std::sqrt(d1 / dim);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t_end);
        Vec3 y1 = y + h0 * k1;
        Vec3 k2 = rhs(y1);
        double d2 = 0;
        for (int i = 0; i < dim; ++i) {
            double sc = ctl.abs_tol + ctl.rel_tol * std::abs(y[i]);
            d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / dim) / h0;
        double h1 = (std::max(d1, d2) <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 1.0 / 5);
        h = std::min(100 * h0, h1);
    }
    h = std::min({h, ctl.max_step, t_end});

    std::vector<double> gprev(events.size());
    std::vector<int> counts(events.size(), 0);
    for (std::size_t i = 0; i < events.size(); ++i) gprev[i] = events[i].g(y);

    const double beta = 0.04, expo = 0.2 - beta * 0.75, safe = 0.9;
    double facold = 1e-4;
    bool reject = false;

    while (true) {
        if (res.steps + res.rejected >= ctl.max_steps) {
            res.termination = Termination::MAX_STEPS;
            break;
        }
        if (t >= t_end) {
            res.termination = Termination::MAX_SPAN;
            break;
        }
        if (t + h > t_end) h = t_end - t;
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            res.termination = Termination::STEP_UNDERFLOW;
            break;
        }
        Vec3 k2 = rhs(detail::lin({{DP5::a21, &k1}}, y, h));
        Vec3 k3 = rhs(detail::lin({{DP5::a31, &k1}, {DP5::a32, &k2}}, y, h));
        Vec3 k4 = rhs(detail::lin({{DP5::a41, &k1}, {DP5::a42, &k2}, {DP5::a43, &k3}}, y, h));
        Vec3 k5 = rhs(detail::lin({{DP5::a51, &k1}, {DP5::a52, &k2}, {DP5::a53, &k3}, {DP5::a54, &k4}}, y, h));
        Vec3 k6 = rhs(detail::lin(
            {{DP5::a61, &k1}, {DP5::a62, &k2}, {DP5::a63, &k3}, {DP5::a64, &k4}, {DP5::a65, &k5}}, y, h));
        Vec3 ynew = detail::lin(
            {{DP5::a71, &k1}, {DP5::a73, &k3}, {DP5::a74, &k4}, {DP5::a75, &k5}, {DP5::a76, &k6}}, y, h);
        Vec3 k7 = rhs(ynew);

        double err = 0;
        bool finite = true;
        for (int i = 0; i < dim; ++i) {
            double e = h * (DP5::e1 * k1[i] + DP5::e3 * k3[i] + DP5::e4 * k4[i] + DP5::e5 * k5[i] +
                            DP5::e6 * k6[i] + DP5::e7 * k7[i]);
            double sc = errnorm_scale(y, ynew, i);
            err += (e / sc) * (e / sc);
            if (!std::isfinite(ynew[i])) finite = false;
        }
        err = std::sqrt(err / dim);
        if (!finite || !std::isfinite(err)) {
            h *= 0.1;
            ++res.rejected;
            reject = true;
            continue;
        }

        double fac11 = std::pow(std::max(err, 1e-300), expo);
        double fac = fac11 / std::pow(facold, beta);
        fac = std::clamp(fac / safe, 1.0 / 10.0, 1.0 / 0.2);
        double hnew = h / fac;

        if (err <= 1.0) {
            facold = std::max(err, 1e-4);
            ++res.steps;
            DenseSegment seg;
            seg.t0 = t;
            seg.h = h;
            seg.r[0] = y;
            for (int i = 0; i < 3; ++i) {
                double ydiff = ynew[i] - y[i];
                double bspl = h * k1[i] - ydiff;
                seg.r[1][i] = ydiff;
                seg.r[2][i] = bspl;
                seg.r[3][i] = ydiff - h * k7[i] - bspl;
                seg.r[4][i] = h * (DP5::d1 * k1[i] + DP5::d3 * k3[i] + DP5::d4 * k4[i] + DP5::d5 * k5[i] +
                                   DP5::d6 * k6[i] + DP5::d7 * k7[i]);
            }
            double tnew = t + h;

            // events inside [t, tnew]
            std::vector<std::tuple<double, int, Vec3, int>> found;
            for (std::size_t i = 0; i < events.size(); ++i) {
                double g1 = events[i].g(ynew);
                double g0 = gprev[i];
                bool up = g0 < 0 && g1 >= 0, down = g0 > 0 && g1 <= 0;
                bool hit = (events[i].crossing == Crossing::ANY && (up || down)) ||
                           (events[i].crossing == Crossing::UP && up) ||
                           (events[i].crossing == Crossing::DOWN && down);
                if (hit && std::isfinite(g0) && std::isfinite(g1)) {
                    double a = t, b = tnew, ga = g0;
                    for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
                        double mid = 0.5 * (a + b);
                        double gm = events[i].g(seg.eval(mid));
                        if ((gm < 0) == (ga < 0) && gm != 0) {
                            a = mid;
                            ga = gm;
                        } else {
                            b = mid;
                        }
                    }
                    Vec3 ye = seg.eval(b);
                    if (!events[i].accept || events[i].accept(ye))
                        found.emplace_back(b, static_cast<int>(i), ye, up ? 1 : -1);
                }
                gprev[i] = g1;
            }
            std::sort(found.begin(), found.end(),
                      [](const auto& x, const auto& z) { return std::get<0>(x) < std::get<0>(z); });
            bool stop = false;
            double tstop = tnew;
            Vec3 ystop = ynew;
            for (auto& [te, idx, ye, dir] : found) {
                res.hits.emplace_back(idx, te, ye, dir);
                ++counts[idx];
                bool term = events[idx].terminal ||
                            (events[idx].max_count > 0 && counts[idx] >= events[idx].max_count);
                if (on_hit && on_hit(idx, te, ye)) term = true;
                if (term) {
                    stop = true;
                    tstop = te;
                    ystop = ye;
                    break;
                }
            }
            if (stop) {
                seg.h = h; // keep the full-step interpolant; it covers tstop
                res.dense.push_back(seg);
                res.t.push_back(tstop);
                res.y.push_back(ystop);
                res.termination = Termination::EVENT;
                break;
            }
            res.dense.push_back(seg);
            t = tnew;
            y = ynew;
            k1 = k7;
            res.t.push_back(t);
            res.y.push_back(y);
            if (stop_when && stop_when(y)) {
                res.termination = Termination::HANDOFF;
                break;
            }
            if (reject) hnew = std::min(hnew, h);
            reject = false;
            h = std::min(hnew, ctl.max_step);
        } else {
            hnew = h / std::min(1.0 / 0.2, fac11 / safe);
            reject = true;
            ++res.rejected;
            h = hnew;
        }
    }
    return res;
}

namespace detail {

inline bool admissible(ChartId c, const Vec3& u)
{
    for (double v : u)
        if (!std::isfinite(v)) return false;
    switch (c) {
    case ChartId::MAIN:
    case ChartId::SHIFTED:
    case ChartId::RESCALED: return u[0] >= 0 && u[2] >= 0;
    case ChartId::PLANE_Z0: return u[0] >= 0;
    case ChartId::PLANE_X0: return u[1] >= 0;
    case ChartId::ALT: return u[0] >= 0 && u[2] >= 0;
    case ChartId::CHART_Q1: return u[1] >= 0 && u[2] >= 0;
    case ChartId::CHART_Q23: return u[0] >= 0 && u[1] >= 0 && u[2] >= 0;
    }
    return true;
}

inline std::function<double(const Vec3&)> event_function(const EventSpec& s, ChartId c, const ModelParams& p,
                                                          int branch)
{
    switch (s.kind) {
    case EventKind::PLANE_CROSS: {
        int a = s.axis;
        double lv = s.level;
        return [a, lv](const Vec3& u) { return u[a] - lv; };
    }
    case EventKind::SURFACE_CROSS: {
        bool shifted = c == ChartId::SHIFTED;
        double h0 = h0_of(p.m);
        return [p, shifted, h0](const Vec3& u) {
            double Y = shifted ? u[1] - h0 : u[1];
            return u[2] - closed::separatrix_Z(u[0], Y, p);
        };
    }
    case EventKind::BALL_ENTRY: {
        // inside the ball and slow: both must hold, so the test is a max
        Vec3 pt = s.point;
        double r = s.radius, gate = s.field_gate;
        int d = chart_dim(c);
        return [pt, r, gate, d, c, p, branch](const Vec3& u) {
            double s2 = 0;
            for (int i = 0; i < d; ++i) s2 += (u[i] - pt[i]) * (u[i] - pt[i]);
            double g = std::sqrt(s2) - r;
            if (gate > 0) g = std::max(g, norm(field(c, u, p, branch)) - gate);
            return g;
        };
    }
    case EventKind::CUSTOM: return s.fn;
    default: break;
    }
    return [](const Vec3&) { return 1.0; };
}

} // namespace detail

// Integrate a chart's field from `initial`. Terminates on the first terminal
// event, max_span, max_steps, a component exceeding the handoff threshold
// (recorded as an ESCAPE event), step underflow (recorded as STALL) or an
// observer request. Throws INADMISSIBLE_START when the start is outside the
// chart's closed positive region or not finite.
inline Trajectory integrate(ChartId chart, const Vec3& initial, const ModelParams& p,
                            const IntegrationControls& ctl, const std::vector<EventSpec>& specs = {},
                            int branch = 1, double eta0 = 0.0, const EventObserver& observer = {})
{
    if (!detail::admissible(chart, initial))
        throw Error(ErrorCode::INADMISSIBLE_START, std::string("start outside admissible region of ") +
                                                       to_string(chart));
    if (!(ctl.rel_tol > 0) || !(ctl.abs_tol > 0) || !(ctl.max_span > 0))
        throw Error(ErrorCode::BAD_SPEC, "tolerances and max_span must be positive");
    const int dim = chart_dim(chart);
    const double sgn = ctl.direction == Direction::FORWARD ? 1.0 : -1.0;
    auto rhs = [&](const Vec3& u) {
        Vec3 f = field(chart, u, p, branch);
        return sgn * f;
    };

    Trajectory tr;
    tr.chart = chart;
    tr.branch = branch;
    tr.direction = ctl.direction;
    tr.eta0 = eta0;

    std::vector<OdeEvent> evs;
    for (const auto& s : specs) {
        OdeEvent e;
        e.g = detail::event_function(s, chart, p, branch);
        e.crossing = s.crossing;
        e.terminal = s.terminal;
        e.max_count = s.max_count;
        evs.push_back(std::move(e));
    }
    const int escape_index = static_cast<int>(evs.size());
    const double thr = ctl.handoff_threshold;
    if (std::isfinite(thr)) {
        OdeEvent e;
        e.g = [thr, dim](const Vec3& u) {
            double mx = 0;
            for (int i = 0; i < dim; ++i) mx = std::max(mx, std::abs(u[i]));
            return mx - thr;
        };
        e.crossing = Crossing::UP;
        e.terminal = true;
        evs.push_back(std::move(e));
    }

    auto make_event = [&](int idx, double t, const Vec3& y, int dir) {
        Event ev;
        ev.spec_index = idx;
        ev.eta = eta0 + sgn * t;
        ev.state = y;
        ev.direction = dir;
        if (idx == escape_index) {
            ev.kind = EventKind::ESCAPE;
            ev.label = "escape";
            int a = 0;
            for (int i = 1; i < dim; ++i)
                if (std::abs(y[i]) > std::abs(y[a])) a = i;
            ev.axis = a;
            ev.level = thr;
        } else {
            const auto& s = specs[idx];
            ev.kind = s.kind;
            ev.label = s.label;
            ev.axis = s.axis;
            ev.level = s.kind == EventKind::BALL_ENTRY ? s.radius : s.level;
        }
        return ev;
    };

    bool observer_stop = false;
    std::function<bool(int, double, const Vec3&)> on_hit;
    if (observer) {
        on_hit = [&](int idx, double t, const Vec3& y) {
            if (idx == escape_index) return false;
            // direction is not known here; observers receive the final event list too
            Event ev = make_event(idx, t, y, 0);
            if (observer(ev, tr)) {
                observer_stop = true;
                return true;
            }
            return false;
        };
    }

    OdeResult r = dopri5(rhs, initial, ctl.max_span, dim, ctl, evs, on_hit);

    tr.steps = r.steps;
    tr.rejected = r.rejected;
    tr.eta.reserve(r.t.size());
    for (double t : r.t) tr.eta.push_back(eta0 + sgn * t);
    tr.states = std::move(r.y);
    tr.dense = std::move(r.dense);
    bool escaped = false;
    for (auto& [idx, t, y, dir] : r.hits) {
        tr.events.push_back(make_event(idx, t, y, dir));
        if (idx == escape_index) escaped = true;
    }
    tr.termination = r.termination;
    if (r.termination == Termination::EVENT) {
        if (escaped && tr.events.back().kind == EventKind::ESCAPE) tr.termination = Termination::HANDOFF;
        else if (observer_stop) tr.termination = Termination::OBSERVER;
    }
    if (r.termination == Termination::STEP_UNDERFLOW) {
        Event ev;
        ev.kind = EventKind::STALL;
        ev.label = "stall";
        ev.eta = tr.eta.back();
        ev.state = tr.states.back();
        tr.events.push_back(ev);
    }
    return tr;
}

// Same as integrate() but turns a step underflow into an exception.
inline Trajectory integrate_checked(ChartId chart, const Vec3& initial, const ModelParams& p,
                                    const IntegrationControls& ctl, const std::vector<EventSpec>& specs = {},
                                    int branch = 1)
{
    Trajectory t = integrate(chart, initial, p, ctl, specs, branch);
    if (t.termination == Termination::STEP_UNDERFLOW)
        throw Error(ErrorCode::STEP_UNDERFLOW, "step size collapsed at eta = " + std::to_string(t.eta.back()));
    return t;
}

// Successive same-direction crossings of {u[axis] = level}. The direction is
// fixed by the field at `initial` when it lies on the section, otherwise by
// the first crossing encountered.
inline std::vector<Vec3> poincare_section(ChartId chart, const Vec3& initial, int axis, double level, int n_returns,
                                          const ModelParams& p, const IntegrationControls& ctl, int branch = 1)
{
    Crossing want = Crossing::ANY;
    const double sgn = ctl.direction == Direction::FORWARD ? 1.0 : -1.0;
    if (std::abs(initial[axis] - level) <= 1e-12 * (1 + std::abs(level))) {
        double fa = sgn * field(chart, initial, p, branch)[axis];
        if (fa == 0) throw Error(ErrorCode::BAD_SPEC, "section not transversal at the initial point");
        want = fa > 0 ? Crossing::UP : Crossing::DOWN;
    }
    std::vector<Vec3> out;
    Crossing fixed = want;
    auto spec = EventSpec::plane(axis, level, Crossing::ANY, false);
    Trajectory tr = integrate(chart, initial, p, ctl, {spec}, branch);
    for (const auto& e : tr.events) {
        if (e.kind != EventKind::PLANE_CROSS) continue;
        if (std::abs(e.eta - tr.eta0) < 1e-9) continue; // the start itself
        Crossing c = e.direction > 0 ? Crossing::UP : Crossing::DOWN;
        if (fixed == Crossing::ANY) fixed = c;
        if (c != fixed) continue;
        out.push_back(e.state);
        if (static_cast<int>(out.size()) == n_returns) break;
    }
    if (static_cast<int>(out.size()) < n_returns)
        throw Error(ErrorCode::NO_RETURN, "only " + std::to_string(out.size()) + " returns before the run ended");
    return out;
}

} // namespace blowup
