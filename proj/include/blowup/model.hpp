#pragma once

// Parameters (m, N, sigma) of  u_t = Delta u^m + |x|^sigma u^m  and every
// closed-form constant used by the phase-space analysis of its profiles.

#include <blowup/error.hpp>
#include <blowup/linalg.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace blowup {

struct ModelParams {
    double m = 2.0;
    double N = 4.0;
    double sigma = 0.0;
    bool physical = true; // N is an integer >= 2

    ModelParams() = default;
    ModelParams(double m_, double N_, double sigma_) : m(m_), N(N_), sigma(sigma_)
    {
        if (!(m > 1.0) || !std::isfinite(m))
            throw Error(ErrorCode::M_OUT_OF_RANGE, "m must be > 1, got " + std::to_string(m));
        if (!(N > 1.0) || !std::isfinite(N))
            throw Error(ErrorCode::N_OUT_OF_RANGE, "N must be > 1, got " + std::to_string(N));
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw Error(ErrorCode::SIGMA_NEGATIVE, "sigma must be >= 0, got " + std::to_string(sigma));
        physical = N >= 2.0 && N == std::floor(N);
    }

    double alpha() const { return 1.0 / (m - 1.0); }
    ModelParams with_sigma(double s) const { return ModelParams(m, N, s); }
    ModelParams with_N(double n) const { return ModelParams(m, n, sigma); }
};

inline ModelParams validate_params(double m, double N, double sigma) { return ModelParams(m, N, sigma); }

inline bool operator==(const ModelParams& a, const ModelParams& b)
{
    return a.m == b.m && a.N == b.N && a.sigma == b.sigma;
}

// ---- elementary constants -------------------------------------------------

inline double sigma_c(double m, double N) { return 2.0 * (N - 1.0) * (m - 1.0) / (3.0 * m + 1.0); }
inline double h0_of(double m) { return std::sqrt(2.0 / (m + 1.0)); }
inline double n_star(double m) { return (4.0 * m + 2.0) / (m + 1.0); }

struct DerivedConstants {
    double sigma_c;
    double h0;
    double n_star;
    double sigma_c_at_nstar;
    double alpha;
};

inline DerivedConstants derived_constants(const ModelParams& p)
{
    return {sigma_c(p.m, p.N), h0_of(p.m), n_star(p.m), 2.0 * (p.m - 1.0) / (p.m + 1.0), p.alpha()};
}

// Above N* the high-dimension results apply; below it the N in {2,3} ones.
inline bool high_dimension(const ModelParams& p) { return p.N > n_star(p.m); }

// ---- coefficient formulas ---------------------------------------------------

namespace closed {

inline double K1(const ModelParams& p) { return (3 * p.m + 1) * p.sigma - 2 * (p.m - 1) * (p.N - 1); }
inline double K2(const ModelParams& p) { return p.sigma * ((p.m - 1) * (p.N - 2) - p.m * p.sigma); }

inline constexpr double k1_zero_tol = 1e-14;

inline bool is_critical(const ModelParams& p)
{
    // |K1| relative to its two terms, so sigma = sigma_c computed in floating point counts
    double scale = std::max(1.0, 2 * (p.m - 1) * (p.N - 1));
    return std::abs(K1(p)) <= 64 * k1_zero_tol * scale;
}

inline std::optional<double> K3(const ModelParams& p)
{
    double k1 = K1(p);
    if (std::abs(k1) < k1_zero_tol || is_critical(p)) return std::nullopt;
    return -2 * (p.sigma + 2) * (p.m - 1) / k1;
}

inline double q_P2(const ModelParams& p) { return p.m * p.N - p.N + 2; }

inline Vec3 P2(const ModelParams& p)
{
    double q = q_P2(p);
    return {(p.m - 1) / std::sqrt(2 * q), std::sqrt(2 / q), 0.0};
}

inline double lambda3_P2(const ModelParams& p) { return (p.m - 1) * (p.sigma + 2) / std::sqrt(2 * q_P2(p)); }

inline double l_sigma(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return (m - 1) * s * s + (m * N + 6 * m - N - 2) * s + 4 * (m * N + 2 * m - N + 2);
}

inline Vec3 e3(const ModelParams& p)
{
    double r = std::sqrt(2 * q_P2(p)), l = l_sigma(p);
    return {-(p.m - 1) * r / (2 * l), (p.sigma + 3) * r / l, 1.0};
}

// second-order Taylor coefficients of the P1 stable manifold
// Z = A X + B H + C X^2 + D H^2 + E X H  (H = Y + h0)
inline double A(const ModelParams& p) { return 4 * p.m * (p.N - 1) * h0_of(p.m) / (3 * p.m + 1); }
inline double B(const ModelParams& p) { return 2 * p.m * h0_of(p.m); }
inline double C(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return 2 * (N - 1) * (m * N - 4 * m * s - 6 * m - N + 2) / ((3 * m + 1) * (5 * m - 1));
}
inline double D(const ModelParams& p) { return -p.m; }
inline double E(const ModelParams& p) { return -4 * p.m * (p.N + p.sigma - 1) / (5 * p.m - 1); }

// X^3 coefficient at sigma = sigma_c(N) (other cubic monomials vanish there)
inline double F_at_sigma_c(double m, double N)
{
    return -4 * (N - 1) * (m * N + 2 * m - N + 2) * (m * (N - 4) + N - 2) * std::sqrt(2 * (m + 1)) /
           ((5 * m - 1) * std::pow(3 * m + 1, 3));
}

// C at sigma = sigma_c, factored
inline double C_at_sigma_c(double m, double N)
{
    return -2 * (N - 1) * (m * N - N + 2 * m + 2) / ((3 * m + 1) * (3 * m + 1));
}
inline double E_at_sigma_c(double m, double N) { return -4 * m * (N - 1) / (3 * m + 1); }

inline double X0_sq_raw(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return -8 * m * K1(p) / ((2 * N - s - 6) * (2 * N + s - 2) * (s + 2) * (m + 1));
}

inline double K_mNsigma(const ModelParams& p) { return 2 * p.m * (p.sigma + 1) - (p.N - 2) * (p.m - 1); }

// the parabola Z = 2m/(m+1) - R X^2/(8m(m-1)^2) cut from the separatrix by {Y = 2X/(m-1)}
inline double R_sigma(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return (m - 1) * (m - 1) * s * s + 2 * (m - 1) * (m * N + 4 * m - N) * s + 4 * (m - 1) * (5 * m - 1) * N +
           4 * (3 * m * m + 6 * m - 1);
}

inline double X1_sq_raw(const ModelParams& p)
{
    const double m = p.m;
    return 16 * m * m * (m - 1) * (m - 1) / ((m + 1) * R_sigma(p));
}

inline double L_sigma(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return (m * m - 1) * s * s + 2 * (m + 1) * (m * N + 4 * m - N) * s - 4 * (m - 1) * (3 * m - 1) * (N - 1);
}

inline double Z0_sigma(const ModelParams& p)
{
    const double m = p.m;
    return 2 * m / (m + 1) - R_sigma(p) * X0_sq_raw(p) / (8 * m * (m - 1) * (m - 1));
}

inline double Z0_sigma_factored(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return (2 * m * N + (m - 1) * s + 6 * m - 2 * N + 2) * L_sigma(p) /
           ((m - 1) * (m - 1) * (m + 1) * (2 * N - 6 - s) * (2 * N + s - 2) * (s + 2));
}

// sigma -> infinity quantities in lambda = 1/sigma
inline double K_lambda(double lam, const ModelParams& p) { return 2 * lam * (p.m - 1) * (p.N - 1) - (3 * p.m + 1); }

inline double lambda_den(double lam, const ModelParams& p)
{
    const double N = p.N;
    return (2 * lam + 1) * (2 * lam * N - 2 * lam + 1) * (2 * lam * N - 6 * lam - 1);
}

inline double U0_sq_raw(double lam, const ModelParams& p)
{
    return 8 * p.m * K_lambda(lam, p) / ((p.m + 1) * lambda_den(lam, p));
}

inline double U1_sq_raw(double lam, const ModelParams& p)
{
    return 16 * p.m * p.m / ((p.m + 1) * (2 * lam + 1) * (2 * lam * p.N - 2 * lam + 1));
}

inline double U1_minus_U0_sq_factored(double lam, const ModelParams& p)
{
    const double m = p.m, N = p.N;
    return 8 * m * (2 * lam * (m * N - 5 * m + N - 1) + m + 1) / ((m + 1) * lambda_den(lam, p));
}

inline double M_lambda(double lam, const ModelParams& p)
{
    const double m = p.m, N = p.N;
    return (2 * lam * m * N + 6 * lam * m - 2 * lam * N + 2 * lam + m - 1) / (2 * (2 * lam + 1) * (m + 1));
}

inline double M_minus_1_factored(double lam, const ModelParams& p)
{
    const double m = p.m, N = p.N;
    return (2 * lam * (m - 1) * (N + 1) - (m + 3)) / (2 * (2 * lam + 1) * (m + 1));
}

inline double B_lambda(double lam, const ModelParams& p)
{
    return 1 - (p.m + 1) * U0_sq_raw(lam, p) / (2 * (p.m - 1) * (p.m - 1));
}

inline double A_lambda(double lam, const ModelParams& p)
{
    const double m = p.m, N = p.N, m1 = m - 1;
    return 8 * (N - 1) * (N - 3) * m1 * m1 * lam * lam * lam + 4 * (N * N - 4 * N + 1) * m1 * m1 * lam * lam -
           2 * m1 * (4 * m * N - m - 3) * lam + 11 * m * m + 6 * m - 1;
}

inline double B_lambda_factored(double lam, const ModelParams& p)
{
    return A_lambda(lam, p) / ((p.m - 1) * (p.m - 1) * lambda_den(lam, p));
}

inline double X0_sq_minus_XP2_sq_at_zero(const ModelParams& p)
{
    const double m = p.m, N = p.N;
    return (3 * m - 1) * (m - 1) * (m * N - N + m + 3) / (2 * (m * N - N + 2) * (m + 1) * (N - 3));
}

// separatrix height at P2, general sigma and at sigma_c
inline double surface_at_P2(const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return (m - 1) / (4 * m * (m * N - N + 2)) *
           ((3 * m - 1) * (m - 1) * (N - 1) / (m + 1) - (m * N + 4 * m - N) * s / 2 - (m - 1) * s * s / 4);
}

inline double surface_at_P2_sigma_c(double m, double N)
{
    return -std::pow(m - 1, 3) * (N - 1) * (m * (N - 4) + N - 2) /
           ((m * N - N + 2) * (m + 1) * (3 * m + 1) * (3 * m + 1));
}

inline double flux_cubic_at_sigma_c(double m, double N)
{
    return -4 * (N - 1) * (m * N + 2 * m - N + 2) * (m * (N - 4) + N - 2) / std::pow(3 * m + 1, 3);
}

// Z(X,Y) of the separatrix surface
inline double separatrix_Z(double X, double Y, const ModelParams& p)
{
    const double m = p.m, N = p.N, s = p.sigma;
    return -(s + 2) * (2 * N + s - 2) * X * X / (8 * m) - (2 * N + s - 2) * X * Y / 2 - m * Y * Y + 2 * m / (m + 1);
}

} // namespace closed

struct CoefficientPack {
    double K1, K2;
    std::optional<double> K3;
    double lambda3_P2;
    double l_sigma;
    Vec3 e3;
    double A, B, C, D, E;
    double F; // X^3 coefficient, valid on sigma = sigma_c(N)
    std::optional<double> X0_sq;
    double K_mNsigma;
    std::optional<double> U0_sq, U1_sq; // lambda = 1/sigma, need sigma > 0
    std::optional<double> X1_sq;
    double L_sigma;
    double R_sigma;
    std::optional<double> Z0_sigma;
    bool critical; // sigma == sigma_c
};

inline CoefficientPack coefficient_pack(const ModelParams& p)
{
    using namespace closed;
    CoefficientPack c{};
    c.K1 = K1(p);
    c.K2 = K2(p);
    c.K3 = K3(p);
    c.critical = is_critical(p);
    c.lambda3_P2 = lambda3_P2(p);
    c.l_sigma = l_sigma(p);
    c.e3 = e3(p);
    c.A = A(p);
    c.B = B(p);
    c.C = C(p);
    c.D = D(p);
    c.E = E(p);
    c.F = F_at_sigma_c(p.m, p.N);
    double x0 = X0_sq_raw(p);
    if (std::isfinite(x0) && x0 > 0) c.X0_sq = x0;
    c.K_mNsigma = K_mNsigma(p);
    if (p.sigma > 0) {
        double lam = 1.0 / p.sigma;
        double u0 = U0_sq_raw(lam, p), u1 = U1_sq_raw(lam, p);
        if (std::isfinite(u0) && u0 > 0) c.U0_sq = u0;
        if (std::isfinite(u1) && u1 > 0) c.U1_sq = u1;
    }
    c.R_sigma = R_sigma(p);
    double x1 = X1_sq_raw(p);
    if (std::isfinite(x1) && x1 > 0) c.X1_sq = x1;
    c.L_sigma = L_sigma(p);
    if (c.X0_sq) c.Z0_sigma = Z0_sigma(p);
    return c;
}

} // namespace blowup
