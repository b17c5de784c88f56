#pragma once

// Plain-text output: CSV tables and JSON envelopes. Numbers carry 17
// significant digits so every double survives a round trip, and nothing
// time-dependent is written, so identical runs give identical bytes.

#include <blowup/geometry.hpp>
#include <blowup/integrate.hpp>
#include <blowup/model.hpp>
#include <blowup/profiles.hpp>
#include <blowup/shooting.hpp>
#include <blowup/vectorfields.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#ifndef BLOWUP_VERSION
#define BLOWUP_VERSION "0.1.0"
#endif

namespace blowup {

inline constexpr const char* kToolName = "blowup";
inline constexpr const char* kToolVersion = BLOWUP_VERSION;

using json = nlohmann::ordered_json;

inline std::string fmt17(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// First line of every CSV: tool, version and parameters, as a comment row.
inline std::string csv_banner(const ModelParams& p)
{
    return std::string("# ") + kToolName + " " + kToolVersion + " m=" + fmt17(p.m) + " N=" + fmt17(p.N) +
           " sigma=" + fmt17(p.sigma);
}

inline json params_json(const ModelParams& p)
{
    return json{{"m", p.m}, {"N", p.N}, {"sigma", p.sigma}};
}

// JSON numbers through nlohmann are printed shortest-round-trip; NaN/inf
// become null, which is what a reader would want anyway.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json vec_json(const Vec3& v, int dim = 3)
{
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(num(v[i]));
    return a;
}

namespace detail {

template <class... T>
void csv_row(std::ostream& os, const T&... cols)
{
    bool first = true;
    ((os << (first ? "" : ",") << cols, first = false), ...);
    os << '\n';
}

} // namespace detail

// ---- trajectories ------------------------------------------------------------

inline void write_csv(std::ostream& os, const Trajectory& t, const ModelParams& p)
{
    const int d = chart_dim(t.chart);
    auto names = chart_components(t.chart);
    os << csv_banner(p) << " chart=" << to_string(t.chart) << '\n';
    os << "eta";
    for (auto& n : names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < t.eta.size(); ++i) {
        os << fmt17(t.eta[i]);
        for (int k = 0; k < d; ++k) os << ',' << fmt17(t.states[i][k]);
        os << '\n';
    }
}

inline json event_json(const Event& e, int dim = 3)
{
    return json{{"kind", to_string(e.kind)}, {"label", e.label}, {"eta", num(e.eta)},
                {"state", vec_json(e.state, dim)}, {"direction", e.direction}};
}

inline json to_json(const Trajectory& t, const ModelParams& p)
{
    const int d = chart_dim(t.chart);
    json ev = json::array();
    for (auto& e : t.events) ev.push_back(event_json(e, d));
    return json{{"tool", kToolName},
                {"version", kToolVersion},
                {"chart", to_string(t.chart)},
                {"branch", t.branch},
                {"components", chart_components(t.chart)},
                {"params", params_json(p)},
                {"direction", t.direction == Direction::FORWARD ? "FORWARD" : "BACKWARD"},
                {"termination", to_string(t.termination)},
                {"eta_span", num(t.span())},
                {"points", t.eta.size()},
                {"steps", t.steps},
                {"rejected", t.rejected},
                {"events", ev}};
}

// ---- fates, sweeps, brackets -----------------------------------------------------

inline json to_json(const FateReport& r)
{
    const int d = chart_dim(r.final_chart);
    json j{{"fate", to_string(r.fate)},
           {"profile_class", r.profile_class ? json(to_string(*r.profile_class)) : json(nullptr)},
           {"eta_span", num(r.eta_span)},
           {"final_chart", to_string(r.final_chart)},
           {"final_state", vec_json(r.final_state, d)},
           {"min_dist_P1", num(r.min_dist_P1)},
           {"min_dist_Q1", num(r.min_dist_Q1)},
           {"critical_case", r.critical_case},
           {"diagnostics", r.diagnostics}};
    j["terminal_event"] = r.terminal_event ? event_json(*r.terminal_event, d) : json(nullptr);
    return j;
}

inline double terminal_eta(const FateReport& r) { return r.terminal_event ? r.terminal_event->eta : r.eta_span; }

inline void write_csv(std::ostream& os, const std::vector<SweepPoint>& pts, const ModelParams& p, ShootParam what,
                      SeedOrigin origin)
{
    os << csv_banner(p) << " origin=" << to_string(origin) << " parameter=" << to_string(what) << '\n';
    os << "value,fate,eta_span,terminal_eta,terminal_state_1,terminal_state_2,terminal_state_3,final_chart\n";
    for (auto& s : pts) {
        const auto& r = s.report;
        detail::csv_row(os, fmt17(s.value), to_string(r.fate), fmt17(r.eta_span), fmt17(terminal_eta(r)),
                        fmt17(r.final_state[0]), fmt17(r.final_state[1]), fmt17(r.final_state[2]),
                        to_string(r.final_chart));
    }
}

inline json to_json(const std::vector<SweepPoint>& pts, const ModelParams& p, ShootParam what, SeedOrigin origin)
{
    json rows = json::array();
    int indeterminate = 0;
    for (auto& s : pts) {
        json r = to_json(s.report);
        r["value"] = s.value;
        rows.push_back(std::move(r));
        indeterminate += s.report.fate == Fate::INDETERMINATE;
    }
    return json{{"tool", kToolName}, {"version", kToolVersion},   {"params", params_json(p)},
                {"origin", to_string(origin)}, {"parameter", to_string(what)}, {"indeterminate", indeterminate},
                {"rows", rows}};
}

inline json to_json(const TransitionBracket& b, const ModelParams& p, SeedOrigin origin)
{
    return json{{"tool", kToolName},
                {"version", kToolVersion},
                {"params", params_json(p)},
                {"origin", to_string(origin)},
                {"parameter", to_string(b.parameter)},
                {"lo", b.lo},
                {"hi", b.hi},
                {"width", b.width},
                {"fate_lo", to_string(b.fate_lo)},
                {"fate_hi", to_string(b.fate_hi)},
                {"boundary", to_string(b.boundary)},
                {"dist_lo", num(b.dist_lo)},
                {"dist_hi", num(b.dist_hi)},
                {"probes", b.probes},
                {"indeterminate", b.indeterminate}};
}

// ---- certificates --------------------------------------------------------------

inline json to_json(const CertificateReport& r)
{
    json a = json::array();
    for (auto& c : r.entries)
        a.push_back(json{{"claim", c.claim},
                         {"value", num(c.value)},
                         {"closed_form", num(c.closed_form)},
                         {"expected_sign", to_string(c.expected)},
                         {"range", c.range},
                         {"in_range", c.in_range},
                         {"pass", c.pass}});
    return a;
}

// ---- profiles ------------------------------------------------------------------

inline void write_csv(std::ostream& os, const ProfileCurve& c, const ModelParams& p)
{
    os << csv_banner(p) << '\n' << "xi,f\n";
    for (std::size_t i = 0; i < c.size(); ++i) detail::csv_row(os, fmt17(c.xi[i]), fmt17(c.f[i]));
}

inline json to_json(const ProfileCurve& c, const ModelParams& p)
{
    auto opt = [](const std::optional<double>& v) { return v ? num(*v) : json(nullptr); };
    return json{{"tool", kToolName},
                {"version", kToolVersion},
                {"params", params_json(p)},
                {"origin", c.origin_tag},
                {"end", c.end_tag},
                {"provenance", c.provenance},
                {"interface", opt(c.interface)},
                {"support_start", opt(c.support_start)},
                {"touchdown_ambiguous", c.touchdown_ambiguous},
                {"points", c.size()},
                {"xi_range", c.size() ? json{c.xi_min(), c.xi_max()} : json(nullptr)}};
}

} // namespace blowup
