#include <blowup/profiles.hpp>

#include <gtest/gtest.h>

using namespace blowup;

namespace {

ProfileCurve interface_orbit(double sigma, double D = 1.0)
{
    auto p = validate_params(2, 4, sigma);
    auto t = trace_orbit(SeedSpec::p1(D, 1e-8), p);
    ReconstructOptions o;
    o.origin = SeedOrigin::P1_BACKWARD;
    return reconstruct_profile(t, p, o);
}

ProfileCurve sampled(const std::function<double(double)>& f, double lo, double hi, int n = 2000)
{
    ProfileCurve c;
    for (int i = 0; i < n; ++i) {
        double x = lo * std::pow(hi / lo, double(i) / (n - 1));
        c.xi.push_back(x);
        c.f.push_back(f(x));
    }
    c.eval = f;
    return c;
}

} // namespace

TEST(Expansion, ClosedForms)
{
    auto p = validate_params(2, 4, 0.5);
    auto f = local_expansion({BehaviorKind::ORIGIN_P2}, p);
    EXPECT_NEAR(f(0.1) / 0.01, 1.0 / 24, 1e-15);
    auto a = local_expansion({BehaviorKind::ASYMPTOTE_Q5, 2.0}, p);
    EXPECT_NEAR(std::log(a(1e-3) / a(1e-2)) / std::log(0.1), -1.0, 1e-12);
    auto tail = local_expansion({BehaviorKind::TAIL_P3}, validate_params(3, 4, 1));
    EXPECT_NEAR(tail(4.0), std::sqrt(0.5) * std::pow(4.0, -0.5), 1e-15);
    auto i = local_expansion({BehaviorKind::INTERFACE, 1.0}, p);
    double x0 = anchor_point({BehaviorKind::INTERFACE, 1.0}, p);
    EXPECT_EQ(i(x0 + 0.1), 0.0);
    EXPECT_GT(i(x0 - 0.1), 0.0);
    auto o = local_expansion({BehaviorKind::OUT_P0, 1.0}, p);
    EXPECT_EQ(o(x0 - 0.1), 0.0);
    EXPECT_GT(o(x0 + 0.1), 0.0);
    auto l = local_expansion({BehaviorKind::LOG_Q1_N2, 1.5}, validate_params(2, 2, 0.2));
    EXPECT_NEAR(l(std::exp(-4.0)), 3.0, 1e-14);
}

TEST(Expansion, BadConstants)
{
    auto p = validate_params(2, 4, 0.5);
    for (auto k : {BehaviorKind::INTERFACE, BehaviorKind::OUT_P0, BehaviorKind::FLAT_Q1, BehaviorKind::ASYMPTOTE_Q5,
                   BehaviorKind::LOG_Q1_N2}) {
        try {
            local_expansion({k, 0.0}, p);
            FAIL() << to_string(k);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::BAD_CONSTANTS);
        }
        EXPECT_THROW(local_expansion({k, -1.0}, p), Error);
    }
}

// The hyperbola balances the reaction and absorption terms but not the diffusion term.
TEST(Expansion, HyperbolaIsNotASolution)
{
    auto p = validate_params(2, 4, 0.5);
    auto h = local_expansion({BehaviorKind::HYPERBOLA}, p);
    for (double x : {0.5, 1.0, 3.0}) {
        double fm = std::pow(h(x), 2), k = -0.5 * 2; // f^m = xi^{-1}
        double lap = k * (k - 1) * std::pow(x, k - 2) + (p.N - 1) * k * std::pow(x, k - 2);
        (void)fm;
        EXPECT_NEAR(ode_residual(h, x, p), lap, 1e-6);
        EXPECT_GT(std::abs(ode_residual(h, x, p)), 1e-2);
    }
    // Z = 1 along it
    for (double x : {0.5, 2.0}) EXPECT_NEAR((p.m - 1) * std::pow(x, p.sigma) * h(x), 1.0, 1e-15);
    auto g = g_transform(sampled(h, 0.1, 100), p);
    for (double G : g.G) EXPECT_NEAR(G, 1.0, 1e-14);
    EXPECT_TRUE(g.extrema.empty());
}

TEST(Reconstruct, RoundTrip)
{
    for (double s : {0.3, 1.5}) {
        auto p = validate_params(2, 4, s);
        auto t = trace_orbit(SeedSpec::p1(1.0, 1e-8), p);
        EXPECT_LT(round_trip_error(t, p), 1e-8) << s;
    }
    auto p = validate_params(2, 4, 0.5);
    TraceOptions o;
    o.span = 60;
    EXPECT_LT(round_trip_error(trace_orbit(SeedSpec::p2(), p, o), p), 1e-8);
}

TEST(Reconstruct, SortedPositive)
{
    auto c = interface_orbit(0.3);
    ASSERT_GT(c.size(), 100u);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c.xi[i - 1], c.xi[i]);
    for (double f : c.f) EXPECT_GT(f, 0);
    EXPECT_EQ(c.end_tag, "INTERFACE");
}

TEST(Reconstruct, Degenerate)
{
    auto p = validate_params(2, 4, 0.5);
    Trajectory t;
    t.eta = {0, 1, 2};
    t.states = {Vec3{0.1, 0.2, 0.3}, Vec3{0.1, 0.2, 0.0}, Vec3{0.1, 0.2, 0.3}};
    try {
        reconstruct_profile(t, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DEGENERATE_TRAJECTORY);
    }
}

// Near the interface f^{m-1} ~ c^2 (xi0 - xi)^2 and the interface sits where
// the P1 beam Z = D X^2 puts it, xi0 = (m D)^{1/(sigma+2)}.
TEST(Reconstruct, InterfaceBehaviour)
{
    for (double s : {0.3, 0.83, 1.5}) {
        auto c = interface_orbit(s, 2.0);
        ASSERT_TRUE(c.interface.has_value());
        EXPECT_FALSE(c.touchdown_ambiguous);
        double xi0 = *c.interface, cc = interface_slope(2);
        EXPECT_NEAR(xi0, std::pow(4.0, 1 / (s + 2)), 1e-6);
        for (double gap : {1e-3, 3e-3}) {
            double x = xi0 - gap * xi0;
            EXPECT_NEAR(c.eval(x) / std::pow(xi0 - x, 2) / (cc * cc), 1.0, 1e-2) << s;
        }
        auto fit = fit_interface(c, validate_params(2, 4, s));
        ASSERT_TRUE(fit);
        EXPECT_LT(std::abs(fit->relative_error), 1e-2);
        EXPECT_LT(fit->slope, 0);
    }
}

TEST(Oracle, MatchesReconstruction)
{
    for (double s : {0.3, 0.83, 1.5}) {
        auto p = validate_params(2, 4, s);
        auto c = interface_orbit(s);
        Anchor a{{BehaviorKind::INTERFACE, interface_slope(2) * *c.interface}, 1e-3};
        auto o = direct_ode_solve(p, a, c.xi_min());
        EXPECT_EQ(o.end_tag, "INTERFACE");
        EXPECT_LT(o.xi_min(), 1.01 * c.xi_min());
        EXPECT_LT(max_relative_difference(c, o), 1e-6) << s;
    }
}

TEST(Oracle, InterfaceTouchdownDetected)
{
    // integrating towards the interface from a datum on the good orbit
    auto p = validate_params(2, 4, 0.3);
    auto c = interface_orbit(0.3);
    // close to the interface: the approach to P1 amplifies datum errors like X^{-2(m+1)/(m-1)}
    std::size_t i = 0;
    while (c.xi[i] < 0.99 * *c.interface) ++i;
    CauchyDatum d{c.xi[i], c.f[i], c.dfm[i]};
    OracleOptions opt;
    opt.f_floor = 1e-7; // stop while the amplification is still modest
    auto o = direct_ode_solve(p, d, 2.0, opt);
    ASSERT_TRUE(o.interface.has_value());
    EXPECT_NEAR(*o.interface, *c.interface, 1e-6);
    // a datum with the wrong flux reaches f = 0 with the wrong slope
    CauchyDatum bad{d.xi, d.f, 3 * d.dfm};
    try {
        direct_ode_solve(p, bad, 2.0, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == ErrorCode::TOUCHDOWN) << e.what();
    }
}

TEST(Oracle, BlowupReported)
{
    auto p = validate_params(2, 4, 0.5);
    // a large flat start is carried upward by the reaction term
    try {
        direct_ode_solve(p, Anchor{{BehaviorKind::FLAT_Q1, 50.0}}, 50.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == ErrorCode::BLOWUP || e.code() == ErrorCode::TOUCHDOWN) << e.what();
    }
}

// The flat start: (f^m)''(0) = f(0)/((m-1)N) for sigma > 0, and the result
// does not depend on where the series start is placed.
TEST(Oracle, FlatSeriesStart)
{
    auto p = validate_params(2, 4, 0.3);
    const double a = 0.8;
    auto f = local_expansion({BehaviorKind::FLAT_Q1, a}, p);
    double h = 1e-3;
    double d2 = (std::pow(f(h), 2) - 2 * a * a + std::pow(f(-h), 2)) / (h * h);
    EXPECT_NEAR(d2 * p.N, a / (p.m - 1), 1e-6);
    std::vector<ProfileCurve> runs;
    for (double d : {1e-5, 1e-6, 1e-7}) runs.push_back(direct_ode_solve(p, Anchor{{BehaviorKind::FLAT_Q1, a}, d}, 0.5));
    for (double x : {0.01, 0.1, 0.4}) {
        EXPECT_NEAR(runs[0].eval(x), runs[1].eval(x), 1e-9 * a);
        EXPECT_NEAR(runs[2].eval(x), runs[1].eval(x), 1e-9 * a);
    }
    // and the profile bends downward first
    EXPECT_LT(runs[1].eval(0.4), a + 1e-12 + 0.4 * 0.4 * a / (2 * p.N * p.m * a));
}

// G oscillates about 1 with decreasing energy; the tail decays like xi^{-sigma/(m-1)}.
TEST(Tail, DampedOscillationAndExponent)
{
    auto p = validate_params(2, 4, 0.5);
    TraceOptions o;
    o.span = 5000;
    ReconstructOptions r;
    r.origin = SeedOrigin::P2_E3;
    r.fate = Fate::ENTERS_P3;
    auto c = reconstruct_profile(trace_orbit(SeedSpec::p2(), p, o), p, r);
    EXPECT_EQ(c.origin_tag, "ORIGIN_P2");
    EXPECT_EQ(c.end_tag, "TAIL_P3");
    auto g = g_transform(c, p);
    EXPECT_NEAR(g.N_bar, 1 + 2.5 / 2.5, 1e-12);
    ASSERT_GE(g.extrema.size(), 5u);
    EXPECT_TRUE(g.energy_decreasing);
    EXPECT_TRUE(g.maxima_decreasing);
    EXPECT_TRUE(g.minima_decreasing);
    for (std::size_t i = 1; i < g.extrema.size(); ++i) EXPECT_NE(g.extrema[i].is_max, g.extrema[i - 1].is_max);
    EXPECT_NEAR(c.f.back() * std::pow(c.xi_max(), 0.5), 1.0, 1e-2);
    auto pf = fit_power(c.eval, c.xi_max() / 30, c.xi_max());
    EXPECT_NEAR(pf.exponent, -0.5, 0.005);
    auto k3 = fit_p3_power(c, g, p, 50, 200);
    EXPECT_NEAR(k3.exponent, *closed::K3(p), 0.1 * *closed::K3(p));
}

TEST(GTransform, CriticalDimension)
{
    auto p = validate_params(2, 4, 6.0 / 7);
    auto g = g_transform(sampled(local_expansion({BehaviorKind::HYPERBOLA}, p), 1, 2, 10), p);
    EXPECT_NEAR(g.N_bar, 1.0, 1e-12);
}

TEST(SelfMap, Parameters)
{
    auto s = self_map(2);
    EXPECT_DOUBLE_EQ(s.k, 4.0 / 3);
    EXPECT_NEAR(s.xi_of(0.75), 1.0, 1e-15);
    EXPECT_NEAR(s.xi_of(3.0), std::pow(4.0, 0.75), 1e-14);
    EXPECT_NEAR(s.F_of(1.0, 3.0), std::pow(4.0, 0.5), 1e-15);
    for (double e : {0.1, 1.0, 7.0}) EXPECT_NEAR(s.eta_of(s.xi_of(e)), e, 1e-14 * e);
}

TEST(SelfMap, ResidualSmall)
{
    for (double m : {2.0, 3.0}) {
        auto r = self_map_check(m);
        EXPECT_NEAR(r.params.N, n_star(m), 1e-15);
        EXPECT_NEAR(r.params.sigma, 2 * (m - 1) / (m + 1), 1e-15);
        EXPECT_LT(r.residual_sup, 1e-4) << m;
        EXPECT_LT(r.round_trip, 1e-10);
        EXPECT_GT(r.eta_hi - r.eta_lo, 1.0);
    }
}

// The orbit out of P2 at (N*, sigma_c(N*)) is the pull-back of the explicit
// N = 1 profile F^{m-1} = 2m/(m^2-1) sin^2((m-1) eta/(2m)).
TEST(SelfMap, ExplicitPullback)
{
    for (double m : {2.0, 3.0}) {
        auto p = validate_params(m, n_star(m), sigma_c(m, n_star(m)));
        TraceOptions o;
        o.span = 40;
        o.stop_radius_P1 = 1e-2;
        auto c = reconstruct_profile(trace_orbit(SeedSpec::p2(1e-8), p, o), p);
        auto sm = self_map(m);
        double worst = 0;
        for (double x = 0.05 * c.xi_max(); x < 0.9 * c.xi_max(); x += 0.01 * c.xi_max()) {
            double eta = sm.eta_of(x);
            double F = std::pow(2 * m / (m * m - 1) * std::pow(std::sin((m - 1) * eta / (2 * m)), 2), 1 / (m - 1));
            worst = std::max(worst, std::abs(c.eval(x) / sm.f_of(F, eta) - 1));
        }
        EXPECT_LT(worst, 1e-6) << m;
    }
}
