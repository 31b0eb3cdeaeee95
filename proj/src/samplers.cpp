#include "coxpg/samplers.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace coxpg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPgTrunc = 0.64;

}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_norm_cdf(double x) {
    if (x > -30.0) return std::log(norm_cdf(x));
    // Asymptotic series of the Mills ratio.
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log(series);
}

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile: p must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------

double pg_mean(double b, double c) {
    const double x = std::abs(c);
    if (x < 1e-4) return b * 0.25 * (1.0 - x * x / 12.0);
    return b * std::tanh(0.5 * x) / (2.0 * x);
}

double pg_variance(double b, double c) {
    const double x = std::abs(c);
    if (x < 1e-3) return b * (1.0 / 24.0 - x * x / 120.0);
    const double ch = std::cosh(0.5 * x);
    const double sech2 = std::isfinite(ch) ? 1.0 / (ch * ch) : 0.0;
    return b * (2.0 * std::tanh(0.5 * x) - x * sech2) / (4.0 * x * x * x);
}

namespace {

// Coefficient a_n(x) of the alternating series for J*(1, z).
double pg_series_term(int n, double x) {
    const double k = (n + 0.5) * kPi;
    if (x > kPgTrunc) return k * std::exp(-0.5 * k * k * x);
    if (x <= 0.0) return 0.0;
    const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(expnt);
}

// Probability of the truncated-exponential branch of the proposal.
double pg_mass_texpon(double z) {
    const double t = kPgTrunc;
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
    const double x0 = std::log(fz) + fz * t;
    const double xb = x0 - z + log_norm_cdf(b);
    const double xa = x0 + z + log_norm_cdf(a);
    const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + q_over_p);
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, t].
double pg_trunc_inv_gauss(double z, RngStream& rng) {
    const double t = kPgTrunc;
    double x = t + 1.0;
    if (1.0 / t > z) {
        double alpha = 0.0;
        while (rng.uniform() > alpha) {
            double e1 = rng.exponential(), e2 = rng.exponential();
            while (e1 * e1 > 2.0 * e2 / t) {
                e1 = rng.exponential();
                e2 = rng.exponential();
            }
            x = 1.0 + e1 * t;
            x = t / (x * x);
            alpha = std::exp(-0.5 * z * z * x);
        }
    } else {
        const double mu = 1.0 / z;
        while (x > t) {
            double y = rng.normal();
            y *= y;
            const double half_mu = 0.5 * mu;
            const double mu_y = mu * y;
            x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
            if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
        }
    }
    return x;
}

// Fractional part b in (0, 1): truncated series of gamma variates with the
// mean of the omitted tail added back.
double sample_pg_series(double b, double c, RngStream& rng) {
    constexpr int kTerms = 200;
    const double d = c * c / (4.0 * kPi * kPi);
    double sum = 0.0, partial_mean = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
        const double denom = (k - 0.5) * (k - 0.5) + d;
        sum += rng.gamma(b) / denom;
        partial_mean += b / denom;
    }
    const double scale = 1.0 / (2.0 * kPi * kPi);
    const double tail = std::max(0.0, pg_mean(b, c) - scale * partial_mean);
    return scale * sum + tail;
}

}  // namespace

double sample_pg1(double c, RngStream& rng) {
    const double z = 0.5 * std::abs(c);
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double p_expon = pg_mass_texpon(z);
    for (;;) {
        double x;
        if (rng.uniform() < p_expon)
            x = kPgTrunc + rng.exponential() / fz;
        else
            x = pg_trunc_inv_gauss(z, rng);
        double s = pg_series_term(0, x);
        const double y = rng.uniform() * s;
        for (int n = 1;; ++n) {
            if (n % 2 == 1) {
                s -= pg_series_term(n, x);
                if (y <= s) return 0.25 * x;
            } else {
                s += pg_series_term(n, x);
                if (y > s) break;
            }
        }
    }
}

double sample_pg(double b, double c, RngStream& rng, double exact_cutoff) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("sample_pg: b must be positive");
    if (!std::isfinite(c)) throw DomainError("sample_pg: c must be finite");
    if (b > exact_cutoff) {
        const double m = pg_mean(b, c);
        const double sd = std::sqrt(pg_variance(b, c));
        return sample_trunc_normal(m, sd, 0.0, std::numeric_limits<double>::infinity(), rng);
    }
    const double whole = std::floor(b);
    const double frac = b - whole;
    double out = 0.0;
    for (int k = 0; k < static_cast<int>(whole); ++k) out += sample_pg1(c, rng);
    if (frac > 1e-12) out += sample_pg_series(frac, c, rng);
    return out;
}

// ---------------------------------------------------------------------------

double sample_beta_last(double u, double n, RngStream& rng) {
    if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("sample_beta_last: u must be positive");
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("sample_beta_last: n must be positive");
    return u * std::exp(std::log(rng.uniform()) / n);
}

double sample_trunc_gamma(double shape, double rate, double tau0, RngStream& rng) {
    if (!(shape > 0.0) || !(rate > 0.0) || !(tau0 >= 0.0) || !std::isfinite(shape) || !std::isfinite(rate) ||
        !std::isfinite(tau0))
        throw DomainError("sample_trunc_gamma: need shape > 0, rate > 0, tau0 >= 0");
    const double x0 = rate * tau0;
    const double mass = tau0 > 0.0 ? boost::math::gamma_q(shape, x0) : 1.0;
    if (mass >= 1e-3) {
        for (;;) {
            const double g = rng.gamma(shape) / rate;
            if (g >= tau0) return g;
        }
    }
    if (mass > 1e-280) {
        const double q = mass * rng.uniform();
        return std::max(tau0, boost::math::gamma_q_inv(shape, q) / rate);
    }
    // Mass underflows: the truncation point is far beyond the mode, so an
    // exponential proposal from tau0 with rate matched to the log-density
    // slope at tau0 dominates the target.
    const double lambda = rate - (shape - 1.0) / tau0;
    for (;;) {
        const double tau = tau0 + rng.exponential() / lambda;
        const double log_accept = (shape - 1.0) * (std::log(tau / tau0) - (tau - tau0) / tau0);
        if (std::log(rng.uniform()) <= log_accept) return tau;
    }
}

namespace {

// Standard normal restricted to [a, b) with a > 4 (far right tail).
double std_tn_right_tail(double a, double b, RngStream& rng) {
    if (b - a < 1.0 / a) {
        for (;;) {
            const double z = a + (b - a) * rng.uniform();
            if (rng.uniform() <= std::exp(-0.5 * (z * z - a * a))) return z;
        }
    }
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double z = a + rng.exponential() / lambda;
        if (z >= b) continue;
        if (rng.uniform() <= std::exp(-0.5 * (z - lambda) * (z - lambda))) return z;
    }
}

double std_trunc_normal(double a, double b, RngStream& rng) {
    constexpr double kTail = 4.0;
    if (a > kTail) return std_tn_right_tail(a, b, rng);
    if (b < -kTail) return -std_tn_right_tail(-b, -a, rng);
    const double u = rng.uniform();
    if (a >= 0.0) {
        // Work with upper-tail probabilities for accuracy.
        const double qa = norm_cdf(-a), qb = norm_cdf(-b);
        const double q = qb + u * (qa - qb);
        return q > 0.0 ? -norm_quantile(q) : a;
    }
    if (b <= 0.0) {
        const double pa = norm_cdf(a), pb = norm_cdf(b);
        const double p = pa + u * (pb - pa);
        return p > 0.0 ? norm_quantile(p) : b;
    }
    const double pa = norm_cdf(a), pb = norm_cdf(b);
    return norm_quantile(pa + u * (pb - pa));
}

}  // namespace

double sample_trunc_normal(double mean, double sd, double lower, double upper, RngStream& rng) {
    if (!(lower < upper)) throw DomainError("sample_trunc_normal: empty interval");
    if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
        throw DomainError("sample_trunc_normal: mean must be finite and sd positive");
    const double a = (lower - mean) / sd;
    const double b = (upper - mean) / sd;
    double x = mean + sd * std_trunc_normal(a, b, rng);
    if (x < lower) x = lower;
    if (x >= upper) x = std::nextafter(upper, -std::numeric_limits<double>::infinity());
    if (x < lower) x = lower;
    return x;
}

// ---------------------------------------------------------------------------

ConstraintBox ConstraintBox::unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

bool ConstraintBox::contains(const Vector& x) const {
    for (Eigen::Index k = 0; k < x.size(); ++k)
        if (!(x[k] >= lower[k]) || !(x[k] < upper[k] || upper[k] == std::numeric_limits<double>::infinity()))
            return false;
    return true;
}

void ConstraintBox::check_feasible() const {
    if (lower.size() != upper.size()) throw DomainError("constraint box bounds have different sizes");
    for (Eigen::Index k = 0; k < lower.size(); ++k)
        if (!(lower[k] < upper[k])) throw DomainError("constraint box is infeasible at coordinate " + std::to_string(k));
}

Vector sample_tn_canonical(const Matrix& Q, const Vector& h, const ConstraintBox& box, Vector x, RngStream& rng,
                           int sweeps) {
    const Eigen::Index d = Q.rows();
    if (Q.cols() != d || h.size() != d || box.size() != d || x.size() != d)
        throw DomainError("sample_tn_canonical: dimension mismatch");
    if (!Q.allFinite() || !h.allFinite()) throw NumericalError("conditional precision or mean is not finite");
    box.check_feasible();

    std::vector<Eigen::Index> con, unc;
    for (Eigen::Index k = 0; k < d; ++k) (box.constrained(k) ? con : unc).push_back(k);

    for (Eigen::Index k : con) {
        if (!(Q(k, k) > 0.0)) throw NumericalError("precision matrix has a nonpositive diagonal entry");
        if (x[k] < box.lower[k]) x[k] = box.lower[k];
        if (x[k] >= box.upper[k]) x[k] = std::nextafter(box.upper[k], box.lower[k]);
    }

    const auto nu = static_cast<Eigen::Index>(unc.size());
    Matrix q_uu(nu, nu);
    for (Eigen::Index r = 0; r < nu; ++r)
        for (Eigen::Index c = 0; c < nu; ++c) q_uu(r, c) = Q(unc[r], unc[c]);
    Eigen::LLT<Matrix> llt;
    if (nu > 0) {
        llt.compute(q_uu);
        if (llt.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
    }

    const int passes = con.empty() ? 1 : std::max(1, sweeps);
    for (int s = 0; s < passes; ++s) {
        for (Eigen::Index k : con) {
            const double qkk = Q(k, k);
            const double m = (h[k] - Q.row(k).dot(x) + qkk * x[k]) / qkk;
            x[k] = sample_trunc_normal(m, 1.0 / std::sqrt(qkk), box.lower[k], box.upper[k], rng);
        }
        if (nu > 0) {
            Vector rhs(nu);
            for (Eigen::Index r = 0; r < nu; ++r) {
                double acc = h[unc[r]];
                for (Eigen::Index k : con) acc -= Q(unc[r], k) * x[k];
                rhs[r] = acc;
            }
            Vector z(nu);
            for (Eigen::Index r = 0; r < nu; ++r) z[r] = rng.normal();
            const Vector mean = llt.solve(rhs);
            const Vector dev = llt.matrixU().solve(z);
            for (Eigen::Index r = 0; r < nu; ++r) x[unc[r]] = mean[r] + dev[r];
        }
    }
    return x;
}

Vector sample_tn_constrained(const Vector& mean, const Matrix& precision, const ConstraintBox& box, RngStream& rng,
                             int sweeps) {
    return sample_tn_canonical(precision, precision * mean, box, mean, rng, sweeps);
}

}  // namespace coxpg
