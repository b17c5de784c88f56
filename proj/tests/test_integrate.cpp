#include <blowup/integrate.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace blowup;

TEST(Dopri5, ExponentialAndOrder)
{
    IntegrationControls c;
    c.rel_tol = 1e-12;
    c.abs_tol = 1e-14;
    auto r = dopri5([](const Vec3& y) { return Vec3{y[0], -2 * y[1], 0.0}; }, {1, 1, 0}, 3.0, 2, c);
    EXPECT_NEAR(r.y.back()[0], std::exp(3.0), 1e-9 * std::exp(3.0));
    EXPECT_NEAR(r.y.back()[1], std::exp(-6.0), 1e-12);
    // dense output between steps
    for (const auto& seg : r.dense) {
        double t = seg.t0 + 0.37 * seg.h;
        EXPECT_NEAR(seg.eval(t)[0], std::exp(t), 1e-9 * std::exp(t));
    }
}

// On the invariant Y-axis the flow is the Riccati equation with explicit
// tanh solution, so both time directions have an exact reference.
TEST(Integrate, YAxisExactSolution)
{
    for (double m : {1.5, 2.0, 3.0}) {
        auto p = validate_params(m, 4, 0.5);
        double h0 = h0_of(m), k = (m + 1) * h0 / 2, a0 = std::atanh(0.9);
        Vec3 y0{0, 0.9 * h0, 0};
        IntegrationControls c;
        c.max_span = 20;
        auto f = integrate(ChartId::MAIN, y0, p, c);
        EXPECT_EQ(f.termination, Termination::MAX_SPAN);
        for (double e : {0.5, 3.0, 11.0, 20.0}) {
            Vec3 s = f.at(e);
            EXPECT_EQ(s[0], 0.0);
            EXPECT_EQ(s[2], 0.0);
            EXPECT_NEAR(s[1], h0 * std::tanh(k * e + a0), 1e-9);
        }
        EXPECT_NEAR(f.final_state()[1], h0, 1e-9); // forward: P0
        c.direction = Direction::BACKWARD;
        auto b = integrate(ChartId::MAIN, y0, p, c);
        EXPECT_NEAR(b.eta.back(), -20, 1e-12);
        EXPECT_NEAR(b.at(-2.0)[1], h0 * std::tanh(-2 * k + a0), 1e-9);
        EXPECT_NEAR(b.final_state()[1], -h0, 1e-9); // backward: P1
    }
}

TEST(Integrate, EtaMonotoneInDirection)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 30;
    c.direction = Direction::BACKWARD;
    auto t = integrate(ChartId::MAIN, {0.1, 0.2, 0.5}, p, c);
    for (std::size_t i = 1; i < t.eta.size(); ++i) EXPECT_LT(t.eta[i], t.eta[i - 1]);
}

TEST(Integrate, InvariantPlanes)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 100;
    for (Vec3 s : {Vec3{0, 0.3, 0.7}, Vec3{0, -0.5, 1.4}}) {
        auto t = integrate(ChartId::MAIN, s, p, c);
        for (auto& u : t.states) EXPECT_LE(std::abs(u[0]), 1e-10 * (1 + norm(u)));
    }
    for (Vec3 s : {Vec3{0.2, 0.3, 0}, Vec3{0.05, -0.2, 0}}) {
        auto t = integrate(ChartId::MAIN, s, p, c);
        for (auto& u : t.states) EXPECT_LE(std::abs(u[2]), 1e-10 * (1 + norm(u)));
    }
}

TEST(Integrate, TimeSymmetry)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 50;
    Vec3 s{0.2, 0.1, 0.8};
    auto f = integrate(ChartId::MAIN, s, p, c);
    ASSERT_EQ(f.termination, Termination::MAX_SPAN);
    c.direction = Direction::BACKWARD;
    auto b = integrate(ChartId::MAIN, f.final_state(), p, c);
    EXPECT_LT(norm(b.final_state() - s), 1e-7);
}

TEST(Integrate, ToleranceConvergence)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 30;
    c.rel_tol = 1e-10;
    Vec3 s{0.2, 0.1, 0.8};
    auto a = integrate(ChartId::MAIN, s, p, c);
    c.rel_tol = 5e-11;
    auto b = integrate(ChartId::MAIN, s, p, c);
    EXPECT_LT(norm(a.final_state() - b.final_state()), 10 * 1e-10);
}

// Along {X=0} the quantity Z^{(m+1)/(m-1)}(2/(m+1) - Z/m - Y^2) is conserved.
TEST(Integrate, CycleReturnAndFirstIntegral)
{
    auto p = validate_params(2, 4, 0.5);
    const double m = p.m;
    auto K = [m](double Y, double Z) { return std::pow(Z, (m + 1) / (m - 1)) * (2 / (m + 1) - Z / m - Y * Y); };
    Vec3 s{0.0, 1.3, 0.0}; // PLANE_X0 state (Y, Z) = (0, 1.3)
    ASSERT_GT(K(0, 1.3), 0);
    IntegrationControls c;
    c.max_span = 200;
    auto ret = poincare_section(ChartId::PLANE_X0, s, 0, 0.0, 5, p, c);
    ASSERT_EQ(ret.size(), 5u);
    double z = 1.3;
    for (auto& r : ret) {
        EXPECT_LT(std::abs(r[1] - z), 1e-8);
        EXPECT_NEAR(K(r[0], r[1]), K(0, 1.3), 1e-9);
    }
    c.max_span = 0.5;
    try {
        poincare_section(ChartId::PLANE_X0, s, 0, 0.0, 5, p, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NO_RETURN);
    }
}

TEST(Integrate, EventsLocatedAccurately)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 50;
    auto t = integrate(ChartId::MAIN, {0.2, 0.4, 0.9}, p, c,
                       {EventSpec::plane(1, 0.0), EventSpec::plane(2, 1.0, Crossing::UP)});
    ASSERT_FALSE(t.events.empty());
    int ny = 0;
    for (auto& e : t.events) {
        if (e.kind != EventKind::PLANE_CROSS) continue;
        EXPECT_LT(std::abs(e.state[e.axis] - e.level), 1e-10);
        if (e.axis == 1) {
            ++ny;
            // on {Y=0} the Y-velocity is 1 - Z
            Vec3 f = field(ChartId::MAIN, e.state, p);
            EXPECT_NEAR(f[1], 1 - e.state[2], 1e-9);
            EXPECT_EQ(f[1] > 0, e.direction > 0);
        } else {
            EXPECT_GT(e.direction, 0);
        }
    }
    EXPECT_GT(ny, 0);
}

TEST(Integrate, P2OrbitCrossesYZeroDownward)
{
    auto p = validate_params(2, 4, 0.5);
    Vec3 s = closed::P2(p) + 1e-6 * closed::e3(p);
    IntegrationControls c;
    c.max_span = 500;
    auto t = integrate(ChartId::MAIN, s, p, c, {EventSpec::plane(1, 0.0, Crossing::ANY, true)});
    ASSERT_EQ(t.termination, Termination::EVENT);
    EXPECT_GT(t.events.front().eta, 0);
    EXPECT_LT(t.events.front().direction, 0);
}

TEST(Integrate, BallEntryAndHandoff)
{
    auto p = validate_params(2, 4, 0.5);
    double h0 = h0_of(2);
    IntegrationControls c;
    c.max_span = 100;
    auto t = integrate(ChartId::MAIN, {0, 0.5 * h0, 0}, p, c, {EventSpec::ball("P0", {0, h0, 0})});
    ASSERT_EQ(t.termination, Termination::EVENT);
    EXPECT_EQ(t.events.back().kind, EventKind::BALL_ENTRY);
    EXPECT_EQ(t.events.back().label, "P0");
    EXPECT_LT(std::abs(t.final_state()[1] - h0), 1e-4 + 1e-10);
    // Y' = 1 - 3Y^2/2 - Z < 0 forever when Z is large: Y runs to -infinity
    auto e = integrate(ChartId::MAIN, {0.0, -1.0, 0.0}, p, c);
    EXPECT_EQ(e.termination, Termination::HANDOFF);
    EXPECT_EQ(e.events.back().kind, EventKind::ESCAPE);
    EXPECT_EQ(e.events.back().axis, 1);
}

TEST(Integrate, InadmissibleStart)
{
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    try {
        integrate(ChartId::MAIN, {-0.1, 0, 0.5}, p, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::INADMISSIBLE_START);
    }
    EXPECT_THROW(integrate(ChartId::MAIN, {0.1, 0, -0.5}, p, c), Error);
    EXPECT_THROW(integrate(ChartId::MAIN, {0.1, std::nan(""), 0.5}, p, c), Error);
}

TEST(Integrate, DenseOutputResidual)
{
    // the interpolant's derivative (by differences) matches the field between steps
    auto p = validate_params(2, 4, 0.5);
    IntegrationControls c;
    c.max_span = 20;
    auto t = integrate(ChartId::MAIN, {0.3, 0.2, 0.6}, p, c);
    for (std::size_t i = 0; i + 1 < t.eta.size(); i += 7) {
        double e = 0.5 * (t.eta[i] + t.eta[i + 1]), h = 1e-5;
        Vec3 d = (1 / (2 * h)) * (t.at(e + h) - t.at(e - h));
        Vec3 f = field(ChartId::MAIN, t.at(e), p);
        EXPECT_LT(norm(d - f), 1e-5 * (1 + norm(f)));
    }
}
