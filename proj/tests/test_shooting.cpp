#include <blowup/shooting.hpp>

#include <gtest/gtest.h>

using namespace blowup;

TEST(Seed, BeamAnchoredAtP1)
{
    auto p = validate_params(2, 4, 0.5);
    const double h0 = h0_of(2);
    for (double eps : {1e-4, 1e-6, 1e-8}) {
        auto s = seed(SeedSpec::p1(3.0, eps), p);
        EXPECT_EQ(s.direction, Direction::BACKWARD);
        EXPECT_LT(norm(s.state - Vec3{0, -h0, 0}), 2 * eps);
        // tangent to the beam Z = D X^2, H = -2(N-1)X/(3m+1)
        EXPECT_NEAR((s.state[1] + h0) / eps, -2.0 * 3 / 7, 1e-2 * (eps / 1e-4) + 1e-9);
        EXPECT_DOUBLE_EQ(s.state[2], 3.0 * eps * eps);
    }
}

TEST(Seed, P2AlongE3)
{
    auto p = validate_params(2, 4, 0.5);
    auto s = seed(SeedSpec::p2(1e-6), p);
    Vec3 d = s.state - closed::P2(p);
    Vec3 e = closed::e3(p);
    EXPECT_EQ(e[2], 1.0);
    EXPECT_NEAR(norm(d), 1e-6, 1e-15);
    EXPECT_NEAR(d[2] / norm(d), 1 / norm(e), 1e-9);
    EXPECT_GT(s.state[2], 0);
}

// The P0 seed lies on the order-2 unstable-manifold surface; its invariance
// defect there is third order.
TEST(Seed, P0OnManifold)
{
    auto p = validate_params(2, 4, 0.5);
    auto a = manifold_approx(ManifoldBase::P0, 2, p);
    const double h0 = h0_of(2);
    double prev = 0;
    for (double eps : {1e-3, 1e-4}) {
        auto s = seed(SeedSpec::p0(0.7, eps), p);
        double H = s.state[1] - h0;
        EXPECT_NEAR(a.eval(s.state[0], H), s.state[2], 1e-15);
        double d = a.invariance_defect(s.state[0], H, p);
        if (prev > 0) {
            EXPECT_GT(std::log10(prev / d), 2.8);
        }
        prev = d;
    }
}

TEST(Seed, BadSpecs)
{
    auto p = validate_params(2, 4, 0.5);
    auto code = [&](SeedSpec s) {
        try {
            seed(s, p);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::NO_PROFILE;
    };
    EXPECT_EQ(code(SeedSpec::p2(0)), ErrorCode::BAD_SPEC);
    EXPECT_EQ(code(SeedSpec::p2(2e-3)), ErrorCode::BAD_SPEC);
    EXPECT_EQ(code(SeedSpec::p1(0)), ErrorCode::BAD_SPEC);
    EXPECT_EQ(code(SeedSpec::q1(2.0)), ErrorCode::BAD_SPEC);
    EXPECT_EQ(code(SeedSpec::p3(-1, 0.1)), ErrorCode::BAD_SPEC);
    // a failing seed is reported, not thrown, by the classifier
    EXPECT_EQ(classify_fate(SeedSpec::p1(-1), p).fate, Fate::INDETERMINATE);
}

TEST(Fate, FigureTwoOrbits)
{
    auto a = classify_fate(SeedSpec::p2(), validate_params(2, 4, 0.5));
    EXPECT_EQ(a.fate, Fate::ENTERS_P3);
    EXPECT_EQ(a.profile_class, ProfileClass::TAIL);
    auto b = classify_fate(SeedSpec::p2(), validate_params(2, 4, 6.0 / 7));
    EXPECT_EQ(b.fate, Fate::ENTERS_Q3);
    EXPECT_EQ(b.final_chart, ChartId::CHART_Q23);
    EXPECT_EQ(b.profile_class, ProfileClass::NOT_GOOD);
}

TEST(Fate, SeedEpsilonInvariance)
{
    for (double s : {0.5, 0.7, 6.0 / 7}) {
        auto p = validate_params(2, 4, s);
        Fate ref = classify_fate(SeedSpec::p2(1e-6), p).fate;
        for (double eps : {1e-5, 1e-7}) EXPECT_EQ(classify_fate(SeedSpec::p2(eps), p).fate, ref) << s;
    }
    auto p = validate_params(2, 4, 5);
    for (double D : {0.1, 1.0, 10.0})
        for (double eps : {1e-5, 1e-6, 1e-7})
            EXPECT_EQ(classify_fate(SeedSpec::p1(D, eps), p).fate, Fate::ESCAPES_Q5) << D << " " << eps;
}

// Large D: the orbit comes from Q2; small D: from Q5.
TEST(Fate, BeamEndsConstant)
{
    auto p = validate_params(2, 4, 0.3);
    for (double D : {1e-3, 1e-2, 1.0}) EXPECT_EQ(classify_fate(SeedSpec::p1(D), p).fate, Fate::ESCAPES_Q5);
    for (double D : {1e3, 1e4}) EXPECT_EQ(classify_fate(SeedSpec::p1(D), p).fate, Fate::ESCAPES_Q2);
}

// A backward orbit out of P1, taken up again forward, returns to P1.
TEST(Fate, BackwardForwardDuality)
{
    auto p = validate_params(2, 4, 0.3);
    const double h0 = h0_of(2);
    auto s = seed(SeedSpec::p1(100), p);
    IntegrationControls c;
    c.direction = Direction::BACKWARD;
    c.max_span = 100;
    c.rel_tol = 1e-12;
    c.abs_tol = 1e-15;
    auto back = integrate(ChartId::MAIN, s.state, p, c,
                          {EventSpec::custom("out", [h0](const Vec3& u) { return norm(u - Vec3{0, -h0, 0}) - 3e-3; },
                                             Crossing::UP, true)});
    ASSERT_EQ(back.termination, Termination::EVENT);
    c.direction = Direction::FORWARD;
    c.max_span = 50;
    auto fwd = integrate(ChartId::MAIN, back.final_state(), p, c, {EventSpec::ball("P1", {0, -h0, 0}, 1e-3, 0.0)});
    EXPECT_EQ(fwd.termination, Termination::EVENT);
    EXPECT_EQ(classify_fate(SeedSpec::p1(100), p).fate, Fate::ESCAPES_Q2);
}

// In {Y > h0} the flow has Y' < 0 and Z' >= 0.
TEST(Fate, MonotoneAboveP0)
{
    auto p = validate_params(2, 4, 0.5);
    const double h0 = h0_of(2);
    IntegrationControls c;
    c.max_span = 20;
    for (Vec3 s : {Vec3{0.1, 1.5, 0.5}, Vec3{0.5, 2.0, 0.01}, Vec3{0.01, 1.0, 2.0}}) {
        auto t = integrate(ChartId::MAIN, s, p, c);
        for (std::size_t i = 1; i < t.states.size(); ++i) {
            if (t.states[i][1] <= h0) break;
            EXPECT_LT(t.states[i][1], t.states[i - 1][1]);
            EXPECT_GE(t.states[i][2], t.states[i - 1][2]);
        }
    }
}

TEST(Fate, NearP3Attracts)
{
    auto r = classify_fate(SeedSpec::p3(5e-3, 0.1), validate_params(2, 4, 0.5));
    EXPECT_EQ(r.fate, Fate::ENTERS_P3);
    EXPECT_GE(r.extrema_Z.size(), 8u);
    // sigma = sigma_c: the P3 verdict is withheld
    auto c = classify_fate(SeedSpec::p3(5e-3, 0.1), validate_params(2, 4, 6.0 / 7));
    EXPECT_TRUE(c.critical_case);
    EXPECT_NE(c.fate, Fate::ENTERS_P3);
}

TEST(Fate, DampingAndCycleTests)
{
    EXPECT_TRUE(detail::damped({0.9, 1.1, 0.91, 1.09, 0.92, 1.08}));
    EXPECT_FALSE(detail::damped({0.9, 1.1, 0.91, 1.11, 0.92, 1.08}));
    EXPECT_FALSE(detail::damped({0.9, 1.1, 0.91}));
    std::vector<double> cyc;
    for (int i = 0; i < 10; ++i) cyc.push_back(i % 2 ? 1.2 : 0.8);
    EXPECT_TRUE(detail::cycle_like(cyc));
    EXPECT_FALSE(detail::cycle_like({0.9, 1.1, 0.95, 1.05, 0.97, 1.03, 0.99}));
}

TEST(Fate, ProfileClasses)
{
    EXPECT_EQ(profile_class(SeedOrigin::Q1_OUT, Fate::ENTERS_P1), ProfileClass::GOOD_P1_BEHAVIOR);
    EXPECT_EQ(profile_class(SeedOrigin::P2_E3, Fate::ENTERS_P1), ProfileClass::GOOD_P2_BEHAVIOR);
    EXPECT_EQ(profile_class(SeedOrigin::P0_UNSTABLE, Fate::ENTERS_P1), ProfileClass::GOOD_P3_BEHAVIOR);
    EXPECT_EQ(profile_class(SeedOrigin::P1_BACKWARD, Fate::FROM_Q1), ProfileClass::GOOD_P1_BEHAVIOR);
    EXPECT_EQ(profile_class(SeedOrigin::P1_BACKWARD, Fate::ESCAPES_Q5), ProfileClass::NOT_GOOD);
    EXPECT_FALSE(profile_class(SeedOrigin::P2_E3, Fate::INDETERMINATE).has_value());
}

TEST(Bisect, SigmaBracketForP2)
{
    auto b = bisect_transition(ShootParam::SIGMA, SeedSpec::p2(), 0.5, 6.0 / 7, 1e-3, validate_params(2, 4, 0.5));
    EXPECT_EQ(b.fate_lo, Fate::ENTERS_P3);
    EXPECT_EQ(b.fate_hi, Fate::ENTERS_Q3);
    EXPECT_LE(b.width, 1e-3);
    EXPECT_GT(b.lo, 0);
    EXPECT_LT(b.hi, 6.0 / 7);
    EXPECT_EQ(b.indeterminate, 0);
}

// A tight bracket squeezes both end orbits against P1 (forward) or Q1 (backward).
TEST(Bisect, BoundaryCertification)
{
    auto b = bisect_transition(ShootParam::ANGLE, SeedSpec::q1(0), 0.5, 1.5, 1e-14, validate_params(2, 2, 0.2));
    EXPECT_EQ(b.boundary, Fate::ENTERS_P1);
    EXPECT_LT(b.dist_lo, 2e-2);
    auto d = bisect_transition(ShootParam::D, SeedSpec::p1(1), 1.0, 1e3, 1e-9, validate_params(2, 4, 0.3));
    EXPECT_EQ(d.fate_lo, Fate::ESCAPES_Q5);
    EXPECT_EQ(d.fate_hi, Fate::ESCAPES_Q2);
    EXPECT_EQ(d.boundary, Fate::FROM_Q1);
}

TEST(Bisect, Errors)
{
    auto p = validate_params(2, 4, 1.5);
    try {
        bisect_transition(ShootParam::D, SeedSpec::p1(1), 0.01, 100, 1e-3, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SAME_FATE_AT_ENDPOINTS);
    }
    EXPECT_THROW(bisect_transition(ShootParam::D, SeedSpec::p1(1), 2, 1, 1e-3, p), Error);
}

TEST(Sweep, PrefixThenSuffix)
{
    std::vector<double> g;
    for (double s = 0.1; s < 0.851; s += 0.05) g.push_back(s);
    auto r = sweep(ShootParam::SIGMA, g, SeedSpec::p2(), validate_params(2, 4, 0.1));
    ASSERT_EQ(r.size(), g.size());
    std::size_t k = 0;
    while (k < r.size() && r[k].report.fate == Fate::ENTERS_P3) ++k;
    EXPECT_GT(k, 0u);
    EXPECT_LT(k, r.size());
    for (std::size_t i = k; i < r.size(); ++i) EXPECT_EQ(r[i].report.fate, Fate::ENTERS_Q3);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].value, g[i]);
    // order independence: a serial run gives the same fates
    auto s = sweep(ShootParam::SIGMA, g, SeedSpec::p2(), validate_params(2, 4, 0.1), {}, 1);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].report.fate, s[i].report.fate);
    EXPECT_THROW(sweep(ShootParam::SIGMA, {0.3, 0.1}, SeedSpec::p2(), validate_params(2, 4, 0.1)), Error);
}

TEST(Sweep, NoInterfaceFromP0InLowDimension)
{
    std::vector<double> g{0.05, 0.2, 0.4, 0.6, 0.8};
    for (double s : {0.05, 0.1, 0.2}) {
        auto r = sweep(ShootParam::ANGLE, g, SeedSpec::p0(0), validate_params(2, 2, s));
        for (auto& pt : r) EXPECT_NE(pt.report.fate, Fate::ENTERS_P1);
    }
}

TEST(Sweep, NonexistenceWindow)
{
    for (double s : {6.0 / 7 + 1e-3, 1.2, 1.5, 2.0}) {
        auto p = validate_params(2, 4, s);
        std::vector<double> ang{0.01, 0.3, 0.6, 0.9, 1.2, 1.5};
        for (auto& pt : sweep(ShootParam::ANGLE, ang, SeedSpec::p0(0), p)) EXPECT_NE(pt.report.fate, Fate::ENTERS_P1);
        for (auto& pt : sweep(ShootParam::ANGLE, ang, SeedSpec::q1(0), p)) EXPECT_NE(pt.report.fate, Fate::ENTERS_P1);
        EXPECT_NE(classify_fate(SeedSpec::p2(), p).fate, Fate::ENTERS_P1);
    }
}
