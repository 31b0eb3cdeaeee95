#ifndef COXPG_ERGODICITY_HPP
#define COXPG_ERGODICITY_HPP

#include <string>
#include <vector>

#include "coxpg/design.hpp"
#include "coxpg/rng.hpp"

namespace coxpg {

/// Closed-form pieces of the minorization constant.
struct MinorizationTerms {
    double C1 = 0.0;         ///< || 2 eta_eps mu_tilde' A(tau0)^{-1} M' ||
    double N_epsilon = 0.0;  ///< sum_i (y_i + eps) w_i
    Matrix S;                ///< M' Lambda M / 2 + A(tau0)
    Matrix A0;               ///< A(tau0)
    Vector mu_tilde;         ///< M' kappa + [Sigma_0^{-1} mu_0; 0]
    Vector mu_bar;           ///< -M' Lambda 1 eta_eps / 2
    Vector mu_Lambda;        ///< mu_tilde + mu_bar
    double log_R1 = 0.0;
    double log_det_A0 = 0.0;
    double log_det_S = 0.0;
};

MinorizationTerms minorization_terms(const DesignSystem& design, const ModelSpec& spec);

/// log w(eta) for the minorization integrand; -inf outside 0 < u_alpha < u_plus.
double log_minorization_weight(const DesignSystem& design, const ModelSpec& spec, const Vector& eta);

struct DeltaEstimate {
    double log_delta = 0.0;
    double mc_se = 0.0;      ///< delta-method standard error of log_delta
    double log_mean_w = 0.0;
    long n_mc = 0;
    long n_inside = 0;       ///< draws with positive weight
    MinorizationTerms terms;
    std::vector<std::string> warnings;
};

/// Monte Carlo estimate of log delta with E[w] over N(S^{-1} mu_Lambda, S^{-1}),
/// accumulated by log-sum-exp. All-zero weights give log_delta = -inf.
DeltaEstimate log_minorization_delta(const DesignSystem& design, const ModelSpec& spec, long n_mc, RngStream& rng);

/// Same, reusing standard-normal draws (rows of `z`) for common random numbers.
DeltaEstimate log_minorization_delta(const DesignSystem& design, const ModelSpec& spec, const Matrix& z);

struct CouplingBound {
    double log10_n = 0.0;
    double n = 0.0;  ///< exact count when delta >= 1e-15, otherwise the asymptotic value (may be inf)
};

/// Smallest n with (1 - delta)^n <= tol.
CouplingBound coupling_bound(double log_delta, double tol);

}  // namespace coxpg

#endif  // COXPG_ERGODICITY_HPP
