#include <blowup/geometry.hpp>
#include <blowup/integrate.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace blowup;

TEST(Surface, ContainsP0AndP1)
{
    for (double s : {0.0, 0.5, 3.0}) {
        auto p = validate_params(2, 4, s);
        double h0 = h0_of(2);
        EXPECT_NEAR(surface_eval(0, h0, p), 0, 1e-15);
        EXPECT_NEAR(surface_eval(0, -h0, p), 0, 1e-15);
        EXPECT_DOUBLE_EQ(surface_eval(0, 0, p), 4.0 / 3.0);
    }
    EXPECT_LT(surface_eval(closed::P2(validate_params(2, 4, 6.0 / 7))[0], closed::P2(validate_params(2, 4, 6.0 / 7))[1],
                           validate_params(2, 4, 6.0 / 7)),
              0);
}

// The normal . field product, a polynomial in (X, Y), collapses to F(X).
TEST(Surface, FluxIdentity)
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uX(0, 3), uY(-2, 2), us(0, 6), uN(1.5, 8), um(1.1, 4);
    for (int i = 0; i < 500; ++i) {
        auto p = validate_params(um(rng), uN(rng), us(rng));
        double X = uX(rng), Y = uY(rng);
        double F = surface_flux(X, p);
        EXPECT_LE(std::abs(flux_direct(X, Y, p) - F), 1e-10 * std::max(1.0, std::abs(F)));
        if (p.sigma > 0.05) {
            double U = X * p.sigma;
            EXPECT_LE(std::abs(flux_rescaled(U, p) - F), 1e-10 * std::max(1.0, std::abs(F)));
            EXPECT_LE(std::abs(flux_rescaled_direct(U, Y, p) - F), 1e-10 * std::max(1.0, std::abs(F)));
        }
    }
    EXPECT_EQ(surface_flux(0, validate_params(2, 4, 0.3)), 0.0);
}

TEST(Surface, ParaboloidIdentity)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uX(0, 3), uY(-2, 2), us(0, 4);
    for (double N : {2.0, 3.0})
        for (int i = 0; i < 5000; ++i) {
            auto p = validate_params(2, N, us(rng));
            double X = uX(rng), Y = uY(rng), z = surface_eval(X, Y, p);
            EXPECT_LE(std::abs(parab_ell(X, Y, p) - z), 1e-12 * std::max(1.0, std::abs(z)));
        }
    EXPECT_TRUE(surface_elliptic(validate_params(2, 2, 0.2)));
    EXPECT_FALSE(surface_elliptic(validate_params(2, 4, 0.5)));
    EXPECT_TRUE(surface_elliptic(validate_params(2, 4, 5)));
}

// Finite differences of surface_eval reproduce the analytic normal.
TEST(Surface, NormalMatchesGradient)
{
    auto p = validate_params(2.5, 5, 0.7);
    double h = 1e-6, h0 = h0_of(2.5);
    for (double X : {0.1, 1.2})
        for (double Y : {-0.8, 0.3}) {
            Vec3 n = surface_normal(X, Y + h0, p);
            EXPECT_NEAR(n[0], (surface_eval(X + h, Y, p) - surface_eval(X - h, Y, p)) / (2 * h), 1e-7);
            EXPECT_NEAR(n[1], (surface_eval(X, Y + h, p) - surface_eval(X, Y - h, p)) / (2 * h), 1e-7);
        }
}

// d/deta (Z_traj - Z_surface) at the surface equals -F(X).
TEST(Surface, BarrierSign)
{
    auto p = validate_params(2, 4, 0.4);
    double x0 = std::sqrt(std::max(0.0, closed::X0_sq_raw(p)));
    ASSERT_GT(x0, 0);
    for (double f : {0.2, 0.5, 0.8}) {
        double X = f * x0, Y = 0.1;
        Vec3 s{X, Y, surface_eval(X, Y, p) - 1e-8};
        IntegrationControls c;
        c.max_span = 1e-3;
        c.rel_tol = 1e-13;
        c.abs_tol = 1e-15;
        auto t = integrate(ChartId::MAIN, s, p, c);
        Vec3 e = t.final_state();
        double gap0 = s[2] - surface_eval(s[0], s[1], p);
        double gap1 = e[2] - surface_eval(e[0], e[1], p);
        double rate = (gap1 - gap0) / 1e-3;
        EXPECT_GT(surface_flux(X, p), 0);
        EXPECT_LT(rate, 0); // the gap below the surface grows
        EXPECT_NEAR(rate, -surface_flux(X, p), 1e-2 * surface_flux(X, p) + 1e-6);
    }
}

TEST(Cycles, FamilyLimits)
{
    auto p = validate_params(2, 4, 0.5);
    double h0 = h0_of(2);
    EXPECT_NEAR(cycle_eval(1e-12, 0, p), h0 * h0, 1e-11);
    EXPECT_NEAR(cycle_eval(4.0 / 3, 0, p), 0, 1e-15);
    EXPECT_THROW(cycle_eval(0, 0, p), Error);
    EXPECT_NEAR(cycle_label(0.3, 0.8, p), cycle_label(0.3, 0.8, p), 0);
    // a curve of the family is a level set of the label
    double K = 0.5 * cycle_label_max(p);
    for (auto [Y, Z] : cycle_curve(K, p, 200))
        if (Z > 0) {
            EXPECT_NEAR(cycle_label(Y, Z, p), K, 1e-8);
        }
    auto c0 = cycle_curve(0, p, 50);
    EXPECT_NEAR(c0.front().first, h0, 1e-12);
    EXPECT_EQ(c0.front().second, 0.0);
    EXPECT_THROW(cycle_curve(-0.1, p), Error);
}

// Direct-route certificate values agree with the closed forms they mirror.
TEST(Certificates, DirectMatchesClosedForm)
{
    for (double N : {2.0, 3.5, 4.0, 6.0})
        for (double s : {0.01, 0.3, 1.5, 5.0}) {
            auto rep = proof_certificates(validate_params(2, N, s));
            for (auto& c : rep.entries) {
                if (!std::isfinite(c.value) || !std::isfinite(c.closed_form) || !c.in_range) continue;
                if (c.expected == Sign::ZERO) continue;
                if (c.claim == "flux_positive_on_strip" || c.claim == "flux_negative_nonexistence_window") continue;
                EXPECT_EQ(c.value > 0, c.closed_form > 0) << c.claim << " N=" << N << " s=" << s;
            }
        }
    // the X^3 coefficient from the defect matches the closed form
    for (double N : {2.5, 4.0, 7.0}) {
        auto pc = validate_params(2, N, sigma_c(2, N));
        EXPECT_NEAR(detail::direct_F(pc), closed::F_at_sigma_c(2, N), 1e-5 * std::max(1.0, std::abs(closed::F_at_sigma_c(2, N))));
    }
}

TEST(Certificates, Examples)
{
    auto a = proof_certificates(validate_params(2, 4, 0.01));
    for (const char* id : {"XP2_sq_below_X0_sq", "surface_at_P2_positive"}) {
        auto c = a.find(id);
        ASSERT_NE(c, nullptr);
        EXPECT_TRUE(c->in_range);
        EXPECT_TRUE(c->pass) << id << " " << c->value;
    }
    EXPECT_EQ(a.failures(), 0);

    auto b = proof_certificates(validate_params(2, 4, 5));
    for (const char* id : {"U1_sq_below_U0_sq", "M_minus_1_negative"}) {
        auto c = b.find(id);
        ASSERT_NE(c, nullptr);
        EXPECT_TRUE(c->in_range) << id;
        EXPECT_TRUE(c->pass) << id << " " << c->value;
    }
    EXPECT_EQ(b.failures(), 0);

    auto f = proof_certificates(validate_params(2, 10.0 / 3 - 1e-9, 2.0 / 3));
    auto c = f.find("F_sign_at_sigma_c");
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->expected, Sign::POSITIVE);
    auto fh = proof_certificates(validate_params(2, 4, 0.5)).find("F_sign_at_sigma_c");
    EXPECT_EQ(fh->expected, Sign::NEGATIVE);
    EXPECT_TRUE(fh->pass);
}

TEST(Certificates, GridAllInRangePass)
{
    for (double N : {2.0, 3.0, 3.5, 4.0, 6.0})
        for (double s : {0.01, 0.3, 0.8, 1.5, 10.0}) {
            auto r = proof_certificates(validate_params(2, N, s));
            for (auto& c : r.entries)
                EXPECT_TRUE(!c.in_range || c.pass) << c.claim << " N=" << N << " s=" << s << " v=" << c.value;
        }
}
