// Batch front-end: parameter reports, trajectories, fate sweeps, transition
// brackets, certificate audits, profiles and figure data. Emits CSV/JSON only.
//
// Exit codes: 0 ok, 2 invalid input, 3 classification unreliable, 4 numerical failure.

#include <blowup/geometry.hpp>
#include <blowup/io.hpp>
#include <blowup/profiles.hpp>
#include <blowup/shooting.hpp>
#include <blowup/vectorfields.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace blowup;
namespace fs = std::filesystem;

namespace {

enum Exit { OK = 0, INVALID = 2, UNRELIABLE = 3, NUMERICAL = 4 };

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flags land in optionals so that a JSON config can fill whatever was not given.
struct Flags {
    std::string config;
    std::optional<double> m, N, sigma;
    std::optional<double> epsilon, ball_radius, rel_tol, abs_tol, span;
    std::optional<std::string> out;
    bool json_out = false;
    unsigned threads = 0;

    // command specific
    std::string origin = "P2";
    std::string parameter = "sigma";
    std::string range;
    std::optional<double> param, param2, lo, hi, tol;
    std::string chart = "MAIN";
    std::vector<double> start;
    std::string direction = "forward";
    int figure = 0;
};

struct RunConfig {
    ModelParams params;
    double epsilon = 1e-6;
    double ball_radius = 1e-4;
    std::optional<double> rel_tol, abs_tol, span;
    std::optional<std::string> out;
    nlohmann::json file;
};

template <class T>
std::optional<T> from_file(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key)) return std::nullopt;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(std::string("config key '") + key + "' has the wrong type");
    }
}

template <class T>
T pick(const std::optional<T>& flag, const nlohmann::json& j, const char* key, T dflt)
{
    if (flag) return *flag;
    if (auto v = from_file<T>(j, key)) return *v;
    return dflt;
}

template <class T>
std::optional<T> pick(const std::optional<T>& flag, const nlohmann::json& j, const char* key)
{
    return flag ? flag : from_file<T>(j, key);
}

RunConfig resolve(const Flags& f)
{
    RunConfig rc;
    if (!f.config.empty()) {
        std::ifstream is(f.config);
        if (!is) throw InputError("cannot open config file " + f.config);
        try {
            rc.file = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("bad config file: ") + e.what());
        }
    }
    const auto& j = rc.file;
    rc.params = validate_params(pick(f.m, j, "m", 2.0), pick(f.N, j, "N", 4.0), pick(f.sigma, j, "sigma", 0.5));
    rc.epsilon = pick(f.epsilon, j, "epsilon", 1e-6);
    rc.ball_radius = pick(f.ball_radius, j, "ball_radius", 1e-4);
    rc.rel_tol = pick(f.rel_tol, j, "rel_tol");
    rc.abs_tol = pick(f.abs_tol, j, "abs_tol");
    rc.span = pick(f.span, j, "span");
    rc.out = pick(f.out, j, "out");
    if (!(rc.epsilon > 0) || !(rc.ball_radius > 0)) throw InputError("epsilon and ball radius must be > 0");
    return rc;
}

FateControls fate_controls(const RunConfig& rc)
{
    FateControls fc;
    fc.ball_radius = rc.ball_radius;
    if (rc.rel_tol) fc.ode.rel_tol = *rc.rel_tol;
    if (rc.abs_tol) fc.ode.abs_tol = *rc.abs_tol;
    if (rc.span) fc.ode.max_span = *rc.span;
    return fc;
}

SeedOrigin parse_origin(const std::string& s)
{
    static const std::pair<const char*, SeedOrigin> alias[] = {
        {"P2", SeedOrigin::P2_E3}, {"P0", SeedOrigin::P0_UNSTABLE}, {"Q1", SeedOrigin::Q1_OUT},
        {"P1", SeedOrigin::P1_BACKWARD}, {"Q5", SeedOrigin::Q5_OUT}, {"P3", SeedOrigin::NEAR_P3}};
    for (auto& [k, v] : alias)
        if (s == k) return v;
    if (auto o = origin_from_string(s)) return *o;
    throw InputError("unknown origin '" + s + "'");
}

// The shooting parameter a seed family is swept over when sigma is held fixed.
ShootParam seed_parameter(SeedOrigin o)
{
    switch (o) {
    case SeedOrigin::P1_BACKWARD: return ShootParam::D;
    case SeedOrigin::P0_UNSTABLE:
    case SeedOrigin::Q1_OUT:
    case SeedOrigin::Q5_OUT: return ShootParam::ANGLE;
    default: throw InputError(std::string("origin ") + to_string(o) + " has no seed parameter; sweep sigma");
    }
}

SeedSpec seed_spec(SeedOrigin o, double param, double param2, double eps)
{
    SeedSpec s;
    s.origin = o;
    s.param = param;
    s.param2 = param2;
    s.epsilon = eps;
    return s;
}

// Default seed parameters: the centre of each family.
double default_param(SeedOrigin o)
{
    switch (o) {
    case SeedOrigin::P1_BACKWARD: return 1.0;
    case SeedOrigin::NEAR_P3: return 1e-3;
    case SeedOrigin::P2_E3: return 0.0;
    default: return M_PI / 4;
    }
}

// "a:b:step" or "a:b" (step = (b - a)/10). Grid includes b when it lands on it.
std::vector<double> parse_range(const std::string& s, const ModelParams& p)
{
    std::vector<double> v;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ':');) {
        if (tok == "sigma_c" || tok == "σ_c") {
            v.push_back(sigma_c(p.m, p.N));
            continue;
        }
        try {
            std::size_t n = 0;
            v.push_back(std::stod(tok, &n));
            if (n != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InputError("bad range '" + s + "'");
        }
    }
    if (v.size() == 2) v.push_back((v[1] - v[0]) / 10);
    if (v.size() != 3 || !(v[1] >= v[0]) || !(v[2] > 0)) throw InputError("range must be lo:hi[:step] with step > 0");
    std::vector<double> g;
    const long n = std::lround(std::floor((v[1] - v[0]) / v[2] + 1e-9));
    for (long i = 0; i <= n; ++i) g.push_back(v[0] + i * v[2]);
    if (v[1] - g.back() > 1e-9 * std::max(1.0, std::abs(v[1]))) g.push_back(v[1]);
    return g;
}

// Output sink: a file under the output directory, or stdout.
struct Sink {
    std::optional<fs::path> dir;
    std::ofstream file;
    std::ostream& open(const std::string& name)
    {
        if (!dir) return std::cout;
        fs::create_directories(*dir);
        if (file.is_open()) file.close();
        file.open(*dir / name);
        if (!file) throw InputError("cannot write " + (*dir / name).string());
        return file;
    }
};

void write_json(Sink& sink, const std::string& name, const json& j)
{
    sink.open(name) << j.dump(2) << '\n';
}

// ---- report --------------------------------------------------------------------------

std::string cplx_str(const cplx& z)
{
    if (z.imag() == 0) return fmt17(z.real());
    return fmt17(z.real()) + (z.imag() < 0 ? "-" : "+") + fmt17(std::abs(z.imag())) + "i";
}

// sigma within rounding of a typed-in decimal of sigma_c counts as critical in the report
bool near_critical(const ModelParams& p)
{
    return closed::is_critical(p) || std::abs(p.sigma - sigma_c(p.m, p.N)) <= 1e-8 * std::max(1.0, p.sigma);
}

int cmd_report(const RunConfig& rc, bool as_json)
{
    const auto& p = rc.params;
    auto dc = derived_constants(p);
    auto cp = coefficient_pack(p);
    std::vector<CriticalPoint> pts = finite_critical_points(p);
    for (auto& q : infinity_critical_points(p)) pts.push_back(q);
    auto cert = proof_certificates(p);
    const bool crit = near_critical(p);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

    if (as_json) {
        json cps = json::array();
        for (auto& q : pts) {
            json sp = json::array();
            for (int i = 0; i < chart_dim(q.chart); ++i)
                sp.push_back(json{{"re", q.spectrum[i].real()}, {"im", q.spectrum[i].imag()}});
            cps.push_back(json{{"id", to_string(q.id)}, {"chart", to_string(q.chart)},
                               {"location", vec_json(q.location, chart_dim(q.chart))}, {"spectrum", sp},
                               {"stable", q.stable}, {"unstable", q.unstable}, {"center", q.center}, {"tag", q.tag}});
        }
        json j{{"tool", kToolName},
               {"version", kToolVersion},
               {"params", params_json(p)},
               {"sigma_c", dc.sigma_c},
               {"N_star", dc.n_star},
               {"h0", dc.h0},
               {"high_dimension", high_dimension(p)},
               {"critical", crit},
               {"coefficients",
                {{"K1", cp.K1}, {"K2", cp.K2}, {"K3", opt(cp.K3)}, {"lambda3_P2", cp.lambda3_P2},
                 {"l_sigma", cp.l_sigma}, {"A", cp.A}, {"B", cp.B}, {"C", cp.C}, {"D", cp.D}, {"E", cp.E},
                 {"F_at_sigma_c", cp.F}, {"X0_sq", opt(cp.X0_sq)}, {"X1_sq", opt(cp.X1_sq)},
                 {"U0_sq", opt(cp.U0_sq)}, {"U1_sq", opt(cp.U1_sq)}, {"L_sigma", cp.L_sigma},
                 {"R_sigma", cp.R_sigma}, {"Z0_sigma", opt(cp.Z0_sigma)}}},
               {"critical_points", cps},
               {"certificates", to_json(cert)}};
        std::cout << j.dump(2) << '\n';
        return OK;
    }

    auto& os = std::cout;
    auto o = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string("n/a"); };
    os << kToolName << ' ' << kToolVersion << "  m = " << fmt17(p.m) << "  N = " << fmt17(p.N)
       << "  sigma = " << fmt17(p.sigma) << '\n';
    os << "sigma_c = " << fmt17(dc.sigma_c) << '\n';
    os << "N* = " << fmt17(dc.n_star) << (high_dimension(p) ? "  (N > N*)" : "  (N <= N*)") << '\n';
    os << "h0 = " << fmt17(dc.h0) << '\n';
    os << "K1 = " << fmt17(cp.K1) << "  K2 = " << fmt17(cp.K2) << "  K3 = " << o(cp.K3) << '\n';
    if (crit) os << "critical: K1 ~ 0, sigma = sigma_c; P3 fates are not decided here\n";
    else os << "critical: no (" << (cp.K1 < 0 ? "sigma < sigma_c" : "sigma > sigma_c") << ")\n";
    os << "\ncritical points\n";
    for (auto& q : pts) {
        const int d = chart_dim(q.chart);
        os << "  " << to_string(q.id) << "  " << to_string(q.chart) << "  (";
        for (int i = 0; i < d; ++i) os << (i ? ", " : "") << fmt17(q.location[i]);
        os << ")  spectrum [";
        for (int i = 0; i < d; ++i) os << (i ? ", " : "") << cplx_str(q.spectrum[i]);
        os << "]  " << q.tag << '\n';
    }
    os << "\ncoefficients\n";
    os << "  lambda3(P2) = " << fmt17(cp.lambda3_P2) << "  l(sigma) = " << fmt17(cp.l_sigma) << '\n';
    os << "  A = " << fmt17(cp.A) << "  B = " << fmt17(cp.B) << "  C = " << fmt17(cp.C) << "  D = " << fmt17(cp.D)
       << "  E = " << fmt17(cp.E) << "  F(sigma_c) = " << fmt17(cp.F) << '\n';
    os << "  X0^2 = " << o(cp.X0_sq) << "  X1^2 = " << o(cp.X1_sq) << "  U0^2 = " << o(cp.U0_sq)
       << "  U1^2 = " << o(cp.U1_sq) << '\n';
    os << "  L(sigma) = " << fmt17(cp.L_sigma) << "  R(sigma) = " << fmt17(cp.R_sigma) << "  Z0(sigma) = " << o(cp.Z0_sigma)
       << '\n';
    os << "\ncertificates: " << cert.applicable() << " applicable, " << cert.failures() << " failed\n";
    for (auto& c : cert.entries)
        os << "  " << (c.in_range ? (c.pass ? "pass " : "FAIL ") : "n/a  ") << c.claim << " = " << fmt17(c.value)
           << " (want " << to_string(c.expected) << ", " << c.range << ")\n";
    return OK;
}

// ---- runs -------------------------------------------------------------------------

int cmd_integrate(const RunConfig& rc, const Flags& f)
{
    const auto& p = rc.params;
    Trajectory t;
    if (!f.start.empty()) {
        auto chart = chart_from_string(f.chart);
        if (!chart) throw InputError("unknown chart '" + f.chart + "'");
        if (static_cast<int>(f.start.size()) != chart_dim(*chart))
            throw Error(ErrorCode::DIM_MISMATCH, "start needs " + std::to_string(chart_dim(*chart)) + " components");
        Vec3 u{};
        for (std::size_t i = 0; i < f.start.size(); ++i) u[i] = f.start[i];
        IntegrationControls c;
        if (rc.rel_tol) c.rel_tol = *rc.rel_tol;
        if (rc.abs_tol) c.abs_tol = *rc.abs_tol;
        c.max_span = rc.span.value_or(100.0);
        if (f.direction == "backward") c.direction = Direction::BACKWARD;
        else if (f.direction != "forward") throw InputError("direction must be forward or backward");
        t = integrate(*chart, u, p, c, {EventSpec::plane(1, 0.0)});
    } else {
        auto o = parse_origin(f.origin);
        TraceOptions to;
        if (rc.rel_tol) to.ode.rel_tol = *rc.rel_tol;
        if (rc.abs_tol) to.ode.abs_tol = *rc.abs_tol;
        to.span = rc.span.value_or(200.0);
        to.stop_radius_P1 = rc.ball_radius;
        t = trace_orbit(seed_spec(o, f.param.value_or(default_param(o)), f.param2.value_or(1e-2), rc.epsilon), p, to);
    }
    Sink sink{rc.out ? std::optional<fs::path>(*rc.out) : std::nullopt, {}};
    write_csv(sink.open("trajectory.csv"), t, p);
    if (sink.dir) write_json(sink, "trajectory.json", to_json(t, p));
    return OK;
}

int cmd_classify(const RunConfig& rc, const Flags& f)
{
    const auto& p = rc.params;
    auto o = parse_origin(f.origin);
    ShootParam what = ShootParam::SIGMA;
    std::string range = f.range;
    if (f.parameter == "sigma") {
        if (range.empty()) throw InputError("classify needs --sigma-range or --range");
    } else {
        what = seed_parameter(o);
        if (range.empty()) throw InputError("classify needs --range");
    }
    auto grid = parse_range(range, p);
    if (what == ShootParam::SIGMA)
        for (double s : grid)
            if (s < 0) throw Error(ErrorCode::SIGMA_NEGATIVE, "sigma grid point " + fmt17(s));
    auto spec = seed_spec(o, f.param.value_or(default_param(o)), f.param2.value_or(1e-2), rc.epsilon);
    auto pts = sweep(what, grid, spec, p, fate_controls(rc), f.threads);
    Sink sink{rc.out ? std::optional<fs::path>(*rc.out) : std::nullopt, {}};
    write_csv(sink.open("sweep.csv"), pts, p, what, o);
    if (sink.dir) write_json(sink, "sweep.json", to_json(pts, p, what, o));
    std::size_t bad = 0;
    for (auto& s : pts) bad += s.report.fate == Fate::INDETERMINATE;
    std::cerr << bad << " of " << pts.size() << " grid points INDETERMINATE\n";
    return 2 * bad > pts.size() ? UNRELIABLE : OK;
}

int cmd_bisect(const RunConfig& rc, const Flags& f)
{
    const auto& p = rc.params;
    auto o = parse_origin(f.origin);
    ShootParam what = f.parameter == "sigma" ? ShootParam::SIGMA : seed_parameter(o);
    if (!f.lo || !f.hi) throw InputError("bisect needs --lo and --hi");
    auto spec = seed_spec(o, f.param.value_or(default_param(o)), f.param2.value_or(1e-2), rc.epsilon);
    auto br = bisect_transition(what, spec, *f.lo, *f.hi, f.tol.value_or(1e-3), p, fate_controls(rc));
    Sink sink{rc.out ? std::optional<fs::path>(*rc.out) : std::nullopt, {}};
    write_json(sink, "bracket.json", to_json(br, p, o));
    return OK;
}

int cmd_certify(const RunConfig& rc)
{
    auto r = proof_certificates(rc.params);
    Sink sink{rc.out ? std::optional<fs::path>(*rc.out) : std::nullopt, {}};
    write_json(sink, "certificates.json", to_json(r));
    std::cerr << r.applicable() << " applicable claims, " << r.failures() << " failed\n";
    return OK;
}

int cmd_profile(const RunConfig& rc, const Flags& f)
{
    const auto& p = rc.params;
    auto o = parse_origin(f.origin);
    auto spec = seed_spec(o, f.param.value_or(default_param(o)), f.param2.value_or(1e-2), rc.epsilon);
    auto fate = classify_fate(spec, p, fate_controls(rc));
    TraceOptions to;
    to.span = rc.span.value_or(o == SeedOrigin::P1_BACKWARD ? 200.0 : 60.0);
    to.stop_radius_P1 = rc.ball_radius;
    auto t = trace_orbit(spec, p, to);
    ReconstructOptions ro;
    ro.origin = o;
    ro.fate = fate.fate;
    auto c = reconstruct_profile(t, p, ro);
    Sink sink{rc.out ? std::optional<fs::path>(*rc.out) : std::nullopt, {}};
    write_csv(sink.open("profile.csv"), c, p);
    json j = to_json(c, p);
    j["fate"] = to_string(fate.fate);
    j["profile_class"] = fate.profile_class ? json(to_string(*fate.profile_class)) : json(nullptr);
    if (sink.dir) write_json(sink, "profile.json", j);
    else std::cerr << j.dump(2) << '\n';
    return OK;
}

// ---- figures -------------------------------------------------------------------------

// short numbers for file names; data columns keep 17 digits
std::string label(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

struct Orbit {
    std::string name;
    SeedSpec spec;
};

std::vector<Orbit> figure_orbits(double eps)
{
    std::vector<Orbit> v{{"P2_E3", SeedSpec::p2(eps)}};
    for (double th : {0.3, 0.8, 1.3}) v.push_back({"P0_UNSTABLE_" + label(th), SeedSpec::p0(th, eps)});
    for (double ph : {0.3, 0.8, 1.3}) v.push_back({"Q1_OUT_" + label(ph), SeedSpec::q1(ph, eps)});
    for (double D : {0.1, 1.0, 10.0}) v.push_back({"P1_BACKWARD_" + label(D), SeedSpec::p1(D, eps)});
    return v;
}

void orbit_bundle(const RunConfig& rc, const ModelParams& p, const fs::path& dir, const std::string& tag)
{
    Sink sink{dir, {}};
    auto& idx = sink.open("fates_" + tag + ".csv");
    std::ostringstream table;
    table << csv_banner(p) << '\n' << "orbit,fate,eta_span,min_dist_P1,file\n";
    TraceOptions to;
    to.span = rc.span.value_or(200.0);
    to.stop_radius_P1 = rc.ball_radius;
    auto fc = fate_controls(rc);
    for (auto& ob : figure_orbits(rc.epsilon)) {
        auto r = classify_fate(ob.spec, p, fc);
        auto t = trace_orbit(ob.spec, p, to);
        std::string file = "orbit_" + tag + "_" + ob.name + ".csv";
        std::ofstream os(dir / file);
        write_csv(os, t, p);
        table << ob.name << ',' << to_string(r.fate) << ',' << fmt17(r.eta_span) << ',' << fmt17(detail::min_dist_to(t, {0, -h0_of(p.m), 0}))
              << ',' << file << '\n';
    }
    idx << table.str();
}

int cmd_figure(const RunConfig& rc, int id)
{
    fs::path dir = rc.out.value_or("figure" + std::to_string(id));
    fs::create_directories(dir);
    if (id == 1) {
        const auto& p = rc.params;
        const double kmax = cycle_label_max(p);
        std::ofstream os(dir / "cycles.csv");
        os << csv_banner(p) << '\n' << "K,Y,Z\n";
        for (double frac : {0.0, 0.2, 0.4, 0.6, 0.8}) {
            double K = frac * kmax;
            for (auto& [Y, Z] : cycle_curve(K, p)) os << fmt17(K) << ',' << fmt17(Y) << ',' << fmt17(Z) << '\n';
        }
        return OK;
    }
    if (id == 2) {
        for (double s : {0.5, 0.84}) orbit_bundle(rc, rc.params.with_sigma(s), dir, "sigma" + label(s));
        return OK;
    }
    if (id == 3) {
        auto p = rc.params.with_sigma(5.0);
        orbit_bundle(rc, p, dir, "sigma5");
        // the separatrix surface over the part of the (X, Y) plane where it sits above Z = 0
        std::ofstream os(dir / "surface.csv");
        os << csv_banner(p) << '\n' << "X,Y,Z\n";
        const int n = 60;
        for (int i = 0; i <= n; ++i)
            for (int k = 0; k <= n; ++k) {
                double X = 1.5 * i / n, Y = -1.5 + 3.0 * k / n;
                double Z = surface_eval(X, Y, p);
                if (Z >= 0) os << fmt17(X) << ',' << fmt17(Y) << ',' << fmt17(Z) << '\n';
            }
        return OK;
    }
    throw InputError("figure id must be 1, 2 or 3");
}

int exit_for(const Error& e)
{
    switch (e.code()) {
    case ErrorCode::M_OUT_OF_RANGE:
    case ErrorCode::N_OUT_OF_RANGE:
    case ErrorCode::SIGMA_NEGATIVE:
    case ErrorCode::DIM_MISMATCH:
    case ErrorCode::ORDER_UNAVAILABLE:
    case ErrorCode::INADMISSIBLE_START:
    case ErrorCode::BAD_SPEC:
    case ErrorCode::BAD_CONSTANTS:
    case ErrorCode::SAME_FATE_AT_ENDPOINTS: return INVALID;
    case ErrorCode::TOO_MANY_INDETERMINATE: return UNRELIABLE;
    default: return NUMERICAL;
    }
}

void common_options(CLI::App* c, Flags& f)
{
    c->add_option("--config", f.config, "JSON config file; flags override it");
    c->add_option("--m", f.m, "diffusion exponent m > 1");
    c->add_option("--N", f.N, "dimension N > 1");
    c->add_option("--sigma", f.sigma, "weight exponent sigma >= 0");
    c->add_option("--epsilon", f.epsilon, "seed distance from the critical point");
    c->add_option("--ball-radius", f.ball_radius, "P1/P3 entry ball radius (the most result-sensitive knob)");
    c->add_option("--rel-tol", f.rel_tol, "integrator relative tolerance");
    c->add_option("--abs-tol", f.abs_tol, "integrator absolute tolerance");
    c->add_option("--span", f.span, "maximal integration span in eta");
    c->add_option("--out", f.out, "output directory (default: stdout)");
}

void seed_options(CLI::App* c, Flags& f)
{
    c->add_option("--origin", f.origin, "seed family: P2, P0, Q1, P1, Q5, P3 (or the long names)");
    c->add_option("--param", f.param, "seed parameter: angle for P0/Q1/Q5, D for P1, x0 for P3");
    c->add_option("--param2", f.param2, "second seed parameter (r0 for P3)");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Phase-space toolkit for self-similar blow-up profiles"};
    app.require_subcommand(1);
    Flags f;

    auto* report = app.add_subcommand("report", "constants, critical points, coefficients, certificates");
    common_options(report, f);
    report->add_flag("--json", f.json_out, "JSON instead of text");

    auto* integ = app.add_subcommand("integrate", "one trajectory, as CSV");
    common_options(integ, f);
    seed_options(integ, f);
    integ->add_option("--chart", f.chart, "chart for an explicit start");
    integ->add_option("--start", f.start, "explicit start state (instead of a seed)")->expected(2, 3);
    integ->add_option("--direction", f.direction, "forward or backward (explicit start)");

    auto* cls = app.add_subcommand("classify", "fate sweep over sigma or a seed parameter");
    common_options(cls, f);
    seed_options(cls, f);
    cls->add_option("--sigma-range", f.range, "lo:hi[:step]; hi may be sigma_c");
    cls->add_option("--range", f.range, "lo:hi[:step] of the seed parameter (with --parameter seed)");
    cls->add_option("--parameter", f.parameter, "sigma or seed")->check(CLI::IsMember({"sigma", "seed"}));
    cls->add_option("--threads", f.threads, "worker threads (0: all cores)");

    auto* bis = app.add_subcommand("bisect", "first fate transition between lo and hi");
    common_options(bis, f);
    seed_options(bis, f);
    bis->add_option("--lo", f.lo)->required();
    bis->add_option("--hi", f.hi)->required();
    bis->add_option("--tol", f.tol, "bracket width");
    bis->add_option("--parameter", f.parameter, "sigma or seed")->check(CLI::IsMember({"sigma", "seed"}));

    auto* cert = app.add_subcommand("certify", "sign certificates as JSON");
    common_options(cert, f);

    auto* prof = app.add_subcommand("profile", "reconstructed profile f(xi) along a seeded orbit");
    common_options(prof, f);
    seed_options(prof, f);

    auto* fig = app.add_subcommand("figure", "plot-ready data bundles");
    common_options(fig, f);
    fig->add_option("id", f.figure, "1, 2 or 3")->required()->check(CLI::Range(1, 3));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return INVALID;
    }

    try {
        RunConfig rc = resolve(f);
        if (*report) return cmd_report(rc, f.json_out);
        if (*integ) return cmd_integrate(rc, f);
        if (*cls) return cmd_classify(rc, f);
        if (*bis) return cmd_bisect(rc, f);
        if (*cert) return cmd_certify(rc);
        if (*prof) return cmd_profile(rc, f);
        if (*fig) return cmd_figure(rc, f.figure);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_for(e);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return INVALID;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return NUMERICAL;
    }
    return OK;
}
