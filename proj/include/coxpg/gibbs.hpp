#ifndef COXPG_GIBBS_HPP
#define COXPG_GIBBS_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coxpg/design.hpp"
#include "coxpg/rng.hpp"

namespace coxpg {

/// Sampler state. eta is ordered (u_alpha | beta | u_B) like the design columns.
struct ChainState {
    Vector eta;
    Vector omega;   ///< PG auxiliaries, one per row
    Vector v;       ///< last order statistics, one per u_alpha coordinate
    Vector tau;     ///< one precision per random-effect block
    Vector psi;     ///< m_i' eta + eta_epsilon, clamped to [-700, 700]
    Vector lambda;  ///< exp(m_i' eta)
    double eta_epsilon = 0.0;

    auto u_alpha(const DesignSystem& d) const { return eta.head(d.J_total); }
    auto beta(const DesignSystem& d) const { return eta.segment(d.J_total, d.P); }
    auto u_B(const DesignSystem& d) const { return eta.tail(d.M_random); }
};

/// Recomputes psi and lambda from eta.
void refresh_linear(ChainState& state, const DesignSystem& design);

/// Throws NumericalError when a state invariant is violated.
void check_state(const ChainState& state, const DesignSystem& design, const ModelSpec& spec);

struct NewtonResult {
    Vector theta;  ///< (u_alpha | beta)
    int iterations = 0;
    bool converged = false;
};

/// Negative-binomial log posterior over (u_alpha | beta) with u_B = 0 and
/// the slope bounds dropped except positivity.
double nb_log_posterior(const DesignSystem& design, const ModelSpec& spec, const Vector& theta);

/// Damped Newton ascent of nb_log_posterior from `start`, with backtracking
/// that keeps 0 < u_alpha < u_plus.
NewtonResult newton_nb(const DesignSystem& design, const ModelSpec& spec, const Vector& start);

/// Per-partition slopes of the log Nelson-Aalen cumulative hazard, clipped to
/// [1e-6, u_plus (1 - 1e-6)].
Vector nelson_aalen_slopes(const DesignSystem& design, const ModelSpec& spec);

/// Starting state: Nelson-Aalen slopes refined by Newton (falling back to the
/// slopes with beta = 0), u_B = 0, tau = max(a0 / b0, tau0), then one PG pass
/// and one last-order-statistic pass.
ChainState init_state(const DesignSystem& design, const ModelSpec& spec, RngStream& rng);

/// kappa*_i = (y_i - epsilon) w_i / 2.
Vector kappa_star(const DesignSystem& design, const ModelSpec& spec);

/// Conditional precision Q = M' Omega M + A(tau) and linear term
/// mu = M' (kappa* - eta_epsilon omega) + A(tau) b.
std::pair<Matrix, Vector> eta_conditional(const DesignSystem& design, const ModelSpec& spec, const Vector& omega,
                                          const Vector& tau);

struct StepTimings {
    double omega = 0.0;
    double v = 0.0;
    double tau = 0.0;
    double eta = 0.0;
    double mh = 0.0;
};

/// One scan omega -> v -> tau -> eta.
ChainState gibbs_step(const ChainState& state, const DesignSystem& design, const ModelSpec& spec, RngStream& rng,
                      StepTimings* timings = nullptr);

/// Log of the PH / NB likelihood-ratio acceptance ratio for moving prev -> prop.
double log_mh_ratio(const ChainState& prev, const ChainState& prop, const DesignSystem& design, const ModelSpec& spec);

/// Accepts prop with probability min(1, exp(log_mh_ratio)); on rejection prev
/// is returned unchanged.
std::pair<bool, ChainState> mh_accept(const ChainState& prev, const ChainState& prop, const DesignSystem& design,
                                      const ModelSpec& spec, RngStream& rng);

struct PosteriorDraws {
    Matrix eta;  ///< retained draws x dim
    Matrix tau;  ///< retained draws x blocks
    std::vector<std::string> names;
    std::vector<std::string> block_names;
    double mh_accept_rate = 1.0;
    long mh_proposals = 0;
    long mh_accepted = 0;
    StepTimings timings;
    ModelSpec spec;

    Eigen::Index count() const { return eta.rows(); }
};

/// Number of retained draws, floor((draws - burnin) / thin).
int retained_count(const ModelSpec& spec);

/// Runs the chain. `observer`, when set, sees every post-step state.
PosteriorDraws run_chain(const DesignSystem& design, const ModelSpec& spec, RngStream& rng,
                         const std::function<void(int, const ChainState&)>& observer = {});

}  // namespace coxpg

#endif  // COXPG_GIBBS_HPP
