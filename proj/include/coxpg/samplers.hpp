#ifndef COXPG_SAMPLERS_HPP
#define COXPG_SAMPLERS_HPP

#include <cmath>
#include <limits>

#include "coxpg/rng.hpp"
#include "coxpg/types.hpp"

namespace coxpg {

// ---------------------------------------------------------------------------
// Scalar helpers

double norm_cdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_norm_cdf(double x);
/// Phi^{-1}(p) for p in (0, 1).
double norm_quantile(double p);

/// log(1 + e^x) without overflow.
template <typename Scalar>
Scalar log1pexp(Scalar x) {
    using std::exp;
    using std::log1p;
    return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

// ---------------------------------------------------------------------------
// Polya-Gamma

/// E[PG(b, c)] = b / (2c) tanh(c / 2), with the b / 4 limit at c = 0.
double pg_mean(double b, double c);
/// Var[PG(b, c)] = b (sinh c - c) / (4 c^3 cosh^2(c / 2)), with the b / 24 limit at c = 0.
double pg_variance(double b, double c);

/// Exact PG(1, c) draw by the alternating-series rejection sampler of Devroye
/// type (truncated exponential / truncated inverse Gaussian proposal).
double sample_pg1(double c, RngStream& rng);

/// PG(b, c) for b > 0. Integer b <= cutoff: sum of exact PG(1, c) draws.
/// Fractional b <= cutoff: floor(b) exact draws plus a truncated gamma-series
/// draw for the fractional part. b > cutoff: Gaussian with the exact PG mean
/// and variance, truncated to the positive axis.
double sample_pg(double b, double c, RngStream& rng, double exact_cutoff = 30.0);

// ---------------------------------------------------------------------------
// Order statistics and truncated families

/// Largest of n uniforms on (0, u): v = u * U^{1/n}; n may be fractional.
double sample_beta_last(double u, double n, RngStream& rng);

/// Gamma(shape, rate) conditioned on tau >= tau0.
double sample_trunc_gamma(double shape, double rate, double tau0, RngStream& rng);

/// N(mean, sd^2) restricted to [lower, upper). Infinite bounds are allowed.
double sample_trunc_normal(double mean, double sd, double lower, double upper, RngStream& rng);

// ---------------------------------------------------------------------------
// Box-constrained multivariate normal

/// Coordinate box; a coordinate is constrained when either bound is finite.
/// Draws lie in [lower, upper).
struct ConstraintBox {
    Vector lower;
    Vector upper;

    static ConstraintBox unbounded(Eigen::Index n);

    Eigen::Index size() const { return lower.size(); }
    bool constrained(Eigen::Index k) const {
        return std::isfinite(lower[k]) || std::isfinite(upper[k]);
    }
    bool contains(const Vector& x) const;
    /// Throws DomainError unless lower < upper everywhere.
    void check_feasible() const;
};

/// Gibbs update for N(Q^{-1} h, Q^{-1}) restricted to `box`, starting from
/// `state`: `sweeps` passes of univariate truncated-normal updates over the
/// constrained coordinates, each followed by an exact joint draw of the
/// unconstrained block from its Gaussian conditional. With no finite bounds
/// this is an exact multivariate normal draw.
Vector sample_tn_canonical(const Matrix& precision, const Vector& linear, const ConstraintBox& box, Vector state,
                           RngStream& rng, int sweeps = 1);

/// Same target parameterized by its mean. The chain starts from the mean
/// projected into the box.
Vector sample_tn_constrained(const Vector& mean, const Matrix& precision, const ConstraintBox& box, RngStream& rng,
                             int sweeps = 1);

}  // namespace coxpg

#endif  // COXPG_SAMPLERS_HPP
