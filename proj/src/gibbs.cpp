#include "coxpg/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace coxpg {

namespace {

constexpr double kPsiClamp = 700.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Vector clip_slopes(Vector u, const DesignSystem& d) {
    for (Eigen::Index j = 0; j < u.size(); ++j)
        u[j] = std::clamp(std::isfinite(u[j]) ? u[j] : 1.0, 1e-6, d.u_plus[j] * (1.0 - 1e-6));
    return u;
}

}  // namespace

void refresh_linear(ChainState& s, const DesignSystem& d) {
    const Vector lp = d.M * s.eta;
    s.eta_epsilon = d.eta_epsilon;
    s.psi = (lp.array() + d.eta_epsilon).cwiseMax(-kPsiClamp).cwiseMin(kPsiClamp);
    s.lambda = lp.array().cwiseMin(kPsiClamp).exp();
}

void check_state(const ChainState& s, const DesignSystem& d, const ModelSpec& spec) {
    for (Eigen::Index j = 0; j < d.J_total; ++j) {
        if (!(s.eta[j] > 0.0 && s.eta[j] < d.u_plus[j]))
            throw NumericalError("u_alpha[" + std::to_string(j) + "] left (0, u_plus)");
        if (!(s.v[j] <= s.eta[j])) throw NumericalError("v[" + std::to_string(j) + "] exceeds u_alpha");
    }
    for (Eigen::Index b = 0; b < s.tau.size(); ++b)
        if (!(s.tau[b] >= spec.tau0)) throw NumericalError("tau fell below tau0");
    if (!s.eta.allFinite()) throw NumericalError("eta is not finite");
}

// ---------------------------------------------------------------------------
// Initialization

double nb_log_posterior(const DesignSystem& d, const ModelSpec& spec, const Vector& theta) {
    const Eigen::Index f = d.fixed_dim();
    for (Eigen::Index j = 0; j < d.J_total; ++j)
        if (!(theta[j] > 0.0)) return -std::numeric_limits<double>::infinity();
    const Vector psi = (d.M.leftCols(f) * theta).array() + d.eta_epsilon;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        ll += d.w[i] * (d.y[i] * psi[i] - (d.y[i] + spec.epsilon) * log1pexp(psi[i]));
    for (Eigen::Index j = 0; j < d.J_total; ++j)
        if (d.n_alpha[j] > 0.0) ll += d.n_alpha[j] * std::log(theta[j]);
    const Vector r = theta - d.prior_mean.head(f);
    return ll - 0.5 * r.dot(d.fixed_precision * r);
}

NewtonResult newton_nb(const DesignSystem& d, const ModelSpec& spec, const Vector& start) {
    const Eigen::Index f = d.fixed_dim();
    const auto Mf = d.M.leftCols(f);
    NewtonResult res;
    res.theta = start;
    double obj = nb_log_posterior(d, spec, res.theta);
    if (!std::isfinite(obj)) return res;
    auto feasible = [&](const Vector& th) {
        for (Eigen::Index j = 0; j < d.J_total; ++j)
            if (!(th[j] > 0.0 && th[j] < d.u_plus[j])) return false;
        return th.allFinite();
    };
    for (int it = 0; it < spec.newton_iterations; ++it) {
        const Vector psi = (Mf * res.theta).array() + d.eta_epsilon;
        Vector resid(d.rows()), curv(d.rows());
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const double p = sigmoid(psi[i]);
            const double b = d.w[i] * (d.y[i] + spec.epsilon);
            resid[i] = d.w[i] * d.y[i] - b * p;
            curv[i] = b * p * (1.0 - p);
        }
        const Vector r = res.theta - d.prior_mean.head(f);
        Vector grad = Mf.transpose() * resid - d.fixed_precision * r;
        Matrix negH = Mf.transpose() * curv.asDiagonal() * Mf + d.fixed_precision;
        for (Eigen::Index j = 0; j < d.J_total; ++j) {
            grad[j] += d.n_alpha[j] / res.theta[j];
            negH(j, j) += d.n_alpha[j] / (res.theta[j] * res.theta[j]);
        }
        Eigen::LLT<Matrix> llt(negH);
        if (llt.info() != Eigen::Success) return res;
        const Vector step = llt.solve(grad);
        const double decrement = grad.dot(step);
        res.iterations = it + 1;
        if (decrement < 1e-10) {
            res.converged = true;
            return res;
        }
        double t = 1.0;
        bool moved = false;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            const Vector cand = res.theta + t * step;
            if (!feasible(cand)) continue;
            const double cand_obj = nb_log_posterior(d, spec, cand);
            if (std::isfinite(cand_obj) && cand_obj >= obj + 1e-4 * t * decrement) {
                res.theta = cand;
                obj = cand_obj;
                moved = true;
                break;
            }
        }
        if (!moved) {
            res.converged = decrement < 1e-6;
            return res;
        }
    }
    return res;
}

Vector nelson_aalen_slopes(const DesignSystem& d, const ModelSpec& /*spec*/) {
    Vector u = Vector::Ones(d.J_total);
    for (std::size_t s = 0; s < d.strata.size(); ++s) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            if (d.row_stratum[static_cast<std::size_t>(i)] == static_cast<int>(s) && d.w[i] > 0.0) rows.push_back(i);
        std::sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) { return d.time[a] < d.time[b]; });

        // Cumulative hazard at each death time.
        std::vector<double> death_t, cumhaz;
        double at_risk = 0.0;
        for (auto i : rows) at_risk += d.w[i];
        double H = 0.0;
        for (std::size_t k = 0; k < rows.size();) {
            const double t = d.time[rows[k]];
            double deaths = 0.0, leaving = 0.0;
            std::size_t m = k;
            for (; m < rows.size() && d.time[rows[m]] == t; ++m) {
                deaths += d.w[rows[m]] * d.y[rows[m]];
                leaving += d.w[rows[m]];
            }
            if (deaths > 0.0 && at_risk > 0.0) {
                H += deaths / at_risk;
                death_t.push_back(t);
                cumhaz.push_back(H);
            }
            at_risk -= leaving;
            k = m;
        }
        if (death_t.empty()) continue;
        auto H_at = [&](double t) {
            const auto it = std::upper_bound(death_t.begin(), death_t.end(), t);
            return it == death_t.begin() ? 0.0 : cumhaz[static_cast<std::size_t>(it - death_t.begin()) - 1];
        };
        const auto& g = d.grids[s];
        for (Eigen::Index j = 0; j < g.partitions(); ++j) {
            const double lo = std::max(g.lower(j), death_t.front());
            const double hi = std::min(g.upper(j), death_t.back());
            const double h_lo = H_at(lo), h_hi = H_at(hi);
            double slope = (hi > lo && h_lo > 0.0 && h_hi > h_lo) ? (std::log(h_hi) - std::log(h_lo)) / (hi - lo) : 1.0;
            u[d.alpha_offset[s] + j] = slope;
        }
    }
    return clip_slopes(u, d);
}

ChainState init_state(const DesignSystem& d, const ModelSpec& spec, RngStream& rng) {
    const Eigen::Index f = d.fixed_dim();
    Vector start = Vector::Zero(f);
    start.head(d.J_total) = nelson_aalen_slopes(d, spec);

    // Intercepts so the expected event count matches the observed one.
    for (std::size_t s = 0; s < d.strata.size(); ++s) {
        const auto c = d.intercept_col[s];
        if (c < 0) continue;
        double events = 0.0, mass = 0.0;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            if (d.row_stratum[static_cast<std::size_t>(i)] != static_cast<int>(s)) continue;
            events += d.w[i] * d.y[i];
            mass += d.w[i] * std::exp(d.M.row(i).head(d.J_total).dot(start.head(d.J_total)));
        }
        if (events > 0.0 && mass > 0.0) start[c] = std::log(events / mass);
    }

    const NewtonResult nr = newton_nb(d, spec, start);
    Vector theta = nr.theta.allFinite() ? nr.theta : start;
    theta.head(d.J_total) = clip_slopes(theta.head(d.J_total), d);

    ChainState s;
    s.eta = Vector::Zero(d.dim());
    s.eta.head(f) = theta;
    s.tau = Vector::Constant(static_cast<Eigen::Index>(d.blocks.size()), spec.tau0);
    refresh_linear(s, d);
    s.omega = Vector::Zero(d.rows());
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (d.w[i] > 0.0) s.omega[i] = sample_pg((d.y[i] + spec.epsilon) * d.w[i], s.psi[i], rng, spec.pg_exact_cutoff);
    s.v = Vector::Zero(d.J_total);
    for (Eigen::Index j = 0; j < d.J_total; ++j)
        if (d.n_alpha[j] > 0.0) s.v[j] = sample_beta_last(s.eta[j], d.n_alpha[j], rng);
    // Random effects start from one conditional draw rather than zero, which would pin tau at its prior scale.
    if (!d.blocks.empty()) {
        const auto [Q, mu] = eta_conditional(d, spec, s.omega, s.tau);
        s.eta = sample_tn_canonical(Q, mu, d.bounds(s.v), s.eta, rng, spec.tn_sweeps);
        refresh_linear(s, d);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Gibbs scan

Vector kappa_star(const DesignSystem& d, const ModelSpec& spec) {
    return 0.5 * ((d.y.array() - spec.epsilon) * d.w.array()).matrix();
}

std::pair<Matrix, Vector> eta_conditional(const DesignSystem& d, const ModelSpec& spec, const Vector& omega,
                                          const Vector& tau) {
    const Matrix A = d.prior_precision(tau);
    Matrix Q = A;
    Q.noalias() += d.M.transpose() * (omega.asDiagonal() * d.M);
    Vector mu = A * d.prior_mean;
    mu.noalias() += d.M.transpose() * (kappa_star(d, spec) - d.eta_epsilon * omega);
    return {std::move(Q), std::move(mu)};
}

ChainState gibbs_step(const ChainState& prev, const DesignSystem& d, const ModelSpec& spec, RngStream& rng,
                      StepTimings* timings) {
    ChainState s = prev;
    auto t0 = Clock::now();

    for (Eigen::Index i = 0; i < d.rows(); ++i)
        s.omega[i] = d.w[i] > 0.0 ? sample_pg((d.y[i] + spec.epsilon) * d.w[i], s.psi[i], rng, spec.pg_exact_cutoff)
                                  : 0.0;
    if (timings) timings->omega += seconds_since(t0), t0 = Clock::now();

    for (Eigen::Index j = 0; j < d.J_total; ++j)
        s.v[j] = d.n_alpha[j] > 0.0 ? sample_beta_last(s.eta[j], d.n_alpha[j], rng) : 0.0;
    if (timings) timings->v += seconds_since(t0), t0 = Clock::now();

    for (std::size_t b = 0; b < d.blocks.size(); ++b) {
        const auto& blk = d.blocks[b];
        const auto u = s.eta.segment(blk.offset, blk.size);
        const auto bb = d.prior_mean.segment(blk.offset, blk.size);
        const double shape = spec.a0 + 0.5 * static_cast<double>(blk.size);
        const double rate = spec.b0 + 0.5 * (u - bb).squaredNorm();
        s.tau[static_cast<Eigen::Index>(b)] = sample_trunc_gamma(shape, rate, spec.tau0, rng);
    }
    if (timings) timings->tau += seconds_since(t0), t0 = Clock::now();

    const auto [Q, mu] = eta_conditional(d, spec, s.omega, s.tau);
    s.eta = sample_tn_canonical(Q, mu, d.bounds(s.v), s.eta, rng, spec.tn_sweeps);
    refresh_linear(s, d);
    if (timings) timings->eta += seconds_since(t0);
    return s;
}

double log_mh_ratio(const ChainState& prev, const ChainState& prop, const DesignSystem& d, const ModelSpec& spec) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d.w[i] == 0.0) continue;
        r += d.w[i] * (prev.lambda[i] - prop.lambda[i] +
                       (d.y[i] + spec.epsilon) * (log1pexp(prop.psi[i]) - log1pexp(prev.psi[i])));
    }
    return r;
}

std::pair<bool, ChainState> mh_accept(const ChainState& prev, const ChainState& prop, const DesignSystem& d,
                                      const ModelSpec& spec, RngStream& rng) {
    const double log_r = log_mh_ratio(prev, prop, d, spec);
    if (log_r >= 0.0 || std::log(rng.uniform()) < log_r) return {true, prop};
    return {false, prev};
}

// ---------------------------------------------------------------------------

int retained_count(const ModelSpec& spec) { return (spec.draws - spec.burnin) / spec.thin; }

PosteriorDraws run_chain(const DesignSystem& d, const ModelSpec& spec, RngStream& rng,
                         const std::function<void(int, const ChainState&)>& observer) {
    validate(spec, d.block_sizes());
    PosteriorDraws out;
    out.spec = spec;
    out.names = d.coef_names;
    for (const auto& b : d.blocks) out.block_names.push_back(b.name);
    const int keep = retained_count(spec);
    out.eta.resize(keep, d.dim());
    out.tau.resize(keep, static_cast<Eigen::Index>(d.blocks.size()));

    ChainState state = init_state(d, spec, rng);
    int row = 0;
    for (int it = 1; it <= spec.draws; ++it) {
        ChainState prop = gibbs_step(state, d, spec, rng, &out.timings);
        if (spec.mh_calibration) {
            const auto t0 = Clock::now();
            auto [accepted, next] = mh_accept(state, prop, d, spec, rng);
            state = std::move(next);
            out.timings.mh += seconds_since(t0);
            if (it > spec.burnin) {
                ++out.mh_proposals;
                out.mh_accepted += accepted ? 1 : 0;
            }
        } else {
            state = std::move(prop);
        }
        if (observer) observer(it, state);
        if (it > spec.burnin && (it - spec.burnin) % spec.thin == 0 && row < keep) {
            out.eta.row(row) = state.eta.transpose();
            if (out.tau.cols() > 0) out.tau.row(row) = state.tau.transpose();
            ++row;
        }
    }
    out.mh_accept_rate =
        out.mh_proposals > 0 ? static_cast<double>(out.mh_accepted) / static_cast<double>(out.mh_proposals) : 1.0;
    return out;
}

}  // namespace coxpg
