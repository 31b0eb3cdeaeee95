#include "coxpg/ergodicity.hpp"

#include <cmath>
#include <numbers>

#include "coxpg/gibbs.hpp"

namespace coxpg {

namespace {

// log(4 cosh x) for x >= 0.
double log_4cosh(double x) { return std::numbers::ln2 + x + std::log1p(std::exp(-2.0 * x)); }

}  // namespace

MinorizationTerms minorization_terms(const DesignSystem& d, const ModelSpec& spec) {
    const Eigen::Index f = d.fixed_dim();
    MinorizationTerms t;
    t.A0 = d.prior_precision(Vector::Constant(static_cast<Eigen::Index>(d.blocks.size()), spec.tau0));
    Eigen::LLT<Matrix> a_llt(t.A0);
    if (a_llt.info() != Eigen::Success) throw NumericalError("A(tau0) is not positive definite");
    t.log_det_A0 = 2.0 * a_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    const Vector lambda = ((d.y.array() + spec.epsilon) * d.w.array()).matrix();
    t.N_epsilon = lambda.sum();
    t.mu_tilde = d.M.transpose() * kappa_star(d, spec);
    t.mu_tilde.head(f) += d.fixed_precision * d.prior_mean.head(f);
    t.mu_bar = -0.5 * d.eta_epsilon * (d.M.transpose() * lambda);
    t.mu_Lambda = t.mu_tilde + t.mu_bar;
    t.S = 0.5 * d.M.transpose() * lambda.asDiagonal() * d.M + t.A0;
    t.S = 0.5 * (t.S + t.S.transpose()).eval();

    Eigen::LLT<Matrix> s_llt(t.S);
    if (s_llt.info() != Eigen::Success) throw NumericalError("S is not positive definite");
    t.log_det_S = 2.0 * s_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    const Vector a_inv_mu = a_llt.solve(t.mu_tilde);
    t.C1 = (2.0 * d.eta_epsilon * (d.M * a_inv_mu)).norm();
    t.log_R1 = -t.N_epsilon * log_4cosh(0.5 * std::sqrt(t.C1)) - 0.25 * t.N_epsilon - 0.5 * t.mu_tilde.dot(a_inv_mu) -
               0.25 * d.eta_epsilon * d.eta_epsilon * lambda.sum();
    return t;
}

double log_minorization_weight(const DesignSystem& d, const ModelSpec& spec, const Vector& eta) {
    double lw = 0.0;
    for (Eigen::Index j = 0; j < d.J_total; ++j) {
        if (!(eta[j] > 0.0 && eta[j] < d.u_plus[j])) return -std::numeric_limits<double>::infinity();
        lw += d.n_alpha[j] * std::log(eta[j] / d.u_plus[j]);
    }
    for (const auto& b : d.blocks) {
        const double ss = eta.segment(b.offset, b.size).squaredNorm();
        const double shape = spec.a0 + 0.5 * static_cast<double>(b.size);
        lw += shape * (std::log(spec.b0) - std::log(spec.b0 + 0.5 * ss));
    }
    return lw;
}

DeltaEstimate log_minorization_delta(const DesignSystem& d, const ModelSpec& spec, const Matrix& z) {
    DeltaEstimate est;
    est.terms = minorization_terms(d, spec);
    est.n_mc = z.rows();
    if (est.n_mc < 2) throw DomainError("need at least 2 Monte Carlo draws");
    if (z.cols() != d.dim()) throw DomainError("normal draws have the wrong dimension");
    const auto& t = est.terms;

    Eigen::LLT<Matrix> llt(t.S);
    const Vector mean = llt.solve(t.mu_Lambda);
    const Matrix U = llt.matrixU();

    Vector lw(est.n_mc);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < est.n_mc; ++k) {
        const Vector eta = mean + U.triangularView<Eigen::Upper>().solve(z.row(k).transpose());
        lw[k] = log_minorization_weight(d, spec, eta);
        if (std::isfinite(lw[k])) {
            ++est.n_inside;
            mx = std::max(mx, lw[k]);
        }
    }
    if (est.n_inside == 0) {
        est.log_mean_w = est.log_delta = -std::numeric_limits<double>::infinity();
        est.mc_se = std::numeric_limits<double>::infinity();
        est.warnings.push_back("every Monte Carlo draw violated the slope constraints; log delta is -inf");
        return est;
    }
    const auto n = static_cast<double>(est.n_mc);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index k = 0; k < est.n_mc; ++k) {
        if (!std::isfinite(lw[k])) continue;
        const double e = std::exp(lw[k] - mx);
        s1 += e;
        s2 += e * e;
    }
    const double m = s1 / n;
    const double var = std::max(0.0, (s2 / n - m * m) * n / (n - 1.0));
    est.log_mean_w = mx + std::log(m);
    est.mc_se = std::sqrt(var / n) / m;
    est.log_delta = est.log_mean_w + 0.5 * t.log_det_A0 - 0.5 * t.log_det_S + t.log_R1;
    return est;
}

DeltaEstimate log_minorization_delta(const DesignSystem& d, const ModelSpec& spec, long n_mc, RngStream& rng) {
    if (n_mc < 2) throw DomainError("need at least 2 Monte Carlo draws");
    Matrix z(n_mc, d.dim());
    for (Eigen::Index k = 0; k < z.rows(); ++k)
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(k, c) = rng.normal();
    return log_minorization_delta(d, spec, z);
}

CouplingBound coupling_bound(double log_delta, double tol) {
    if (!(tol > 0.0 && tol < 1.0)) throw DomainError("coupling_bound: tol must lie in (0, 1)");
    if (!(log_delta <= 0.0)) throw DomainError("coupling_bound: need log delta <= 0");
    CouplingBound cb;
    const double delta = std::exp(log_delta);
    if (delta >= 1.0) {
        cb.n = 1.0;
        cb.log10_n = 0.0;
        return cb;
    }
    if (delta >= 1e-15) {
        const double x = std::log(tol) / std::log1p(-delta);
        // Relative slack absorbs rounding when x is an exact integer.
        cb.n = std::max(1.0, std::ceil(x * (1.0 - 1e-12)));
        cb.log10_n = std::log10(cb.n);
        return cb;
    }
    cb.log10_n = std::log10(-std::log(tol)) - log_delta / std::numbers::ln10;
    cb.n = std::pow(10.0, cb.log10_n);
    return cb;
}

}  // namespace coxpg
