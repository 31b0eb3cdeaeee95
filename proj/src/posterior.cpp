#include "coxpg/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace coxpg {

double quantile(Vector values, double p) {
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    return sorted_quantile(v, p);
}

std::string CoefSummary::p_value_text(Eigen::Index draws) const {
    char buf[64];
    if (p_value == 0.0 && draws > 0)
        std::snprintf(buf, sizeof buf, "<%.6g", 2.0 / static_cast<double>(draws));
    else
        std::snprintf(buf, sizeof buf, "%.6g", p_value);
    return buf;
}

std::vector<CoefSummary> summarize_coefs(const Matrix& draws, const std::vector<std::string>& names, double level) {
    if (draws.rows() < 2) throw InputError("need at least 2 retained draws to summarize");
    const double tail = 0.5 * (1.0 - level);
    const auto n = static_cast<double>(draws.rows());
    std::vector<CoefSummary> out;
    for (Eigen::Index k = 0; k < draws.cols(); ++k) {
        const Vector x = draws.col(k);
        CoefSummary c;
        c.name = k < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(k)] : std::to_string(k);
        c.mean = x.mean();
        c.sd = std::sqrt((x.array() - c.mean).square().sum() / (n - 1.0));
        c.lower = quantile(x, tail);
        c.upper = quantile(x, 1.0 - tail);
        const double pos = static_cast<double>((x.array() > 0.0).count()) / n;
        const double neg = static_cast<double>((x.array() < 0.0).count()) / n;
        c.p_value = std::min(1.0, 2.0 * std::min(pos, neg));
        c.ess = effective_sample_size(x);
        c.lag1 = lag1_autocorrelation(x);
        out.push_back(c);
    }
    return out;
}

std::vector<CoefSummary> summarize_coefs(const PosteriorDraws& draws, double level) {
    return summarize_coefs(draws.eta, draws.names, level);
}

std::pair<Vector, Vector> joint_band(const Matrix& curves, double level) {
    const Eigen::Index n = curves.rows(), T = curves.cols();
    if (n < 1) throw InputError("joint band needs at least one draw");
    const Vector mean = curves.colwise().mean();
    Vector sd(T);
    for (Eigen::Index t = 0; t < T; ++t)
        sd[t] = n > 1 ? std::sqrt((curves.col(t).array() - mean[t]).square().sum() / static_cast<double>(n - 1)) : 0.0;
    Vector m = Vector::Zero(n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index t = 0; t < T; ++t)
            if (sd[t] > 0.0) m[r] = std::max(m[r], std::abs(curves(r, t) - mean[t]) / sd[t]);
    std::vector<double> sorted(m.data(), m.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const auto k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(level * static_cast<double>(n) - 1e-9)),
                                           1, n);
    const double q = sorted[static_cast<std::size_t>(k - 1)];
    return {mean - q * sd, mean + q * sd};
}

std::pair<Vector, Vector> pointwise_band(const Matrix& curves, double level) {
    const double tail = 0.5 * (1.0 - level);
    Vector lo(curves.cols()), hi(curves.cols());
    for (Eigen::Index t = 0; t < curves.cols(); ++t) {
        lo[t] = quantile(curves.col(t), tail);
        hi[t] = quantile(curves.col(t), 1.0 - tail);
    }
    return {lo, hi};
}

Matrix alpha_draws(const PosteriorDraws& draws, const DesignSystem& d, std::size_t s, const Vector& tgrid) {
    const auto& g = d.grids[s];
    const Eigen::Index J = g.partitions();
    Matrix Z(tgrid.size(), J);
    for (Eigen::Index k = 0; k < tgrid.size(); ++k) Z.row(k) = eval_basis(g, d.transform.forward(tgrid[k])).transpose();
    Matrix out = draws.eta.middleCols(d.alpha_offset[s], J) * Z.transpose();
    if (d.intercept_col[s] >= 0) out.colwise() += draws.eta.col(d.intercept_col[s]);
    return out;
}

Vector default_tgrid(const DesignSystem& d, std::size_t s, int n) {
    const auto [L, U] = death_range(d, s);
    return Vector::LinSpaced(n, L, U);
}

std::vector<CurveEstimate> posterior_curves(const PosteriorDraws& draws, const DesignSystem& d,
                                            const std::vector<Vector>& tgrids, double level, double offset) {
    if (!tgrids.empty() && tgrids.size() != d.strata.size())
        throw InputError("need one evaluation grid per stratum");
    std::vector<CurveEstimate> out;
    for (std::size_t s = 0; s < d.strata.size(); ++s) {
        CurveEstimate c;
        c.stratum = d.strata[s];
        c.level = level;
        c.tgrid = tgrids.empty() ? default_tgrid(d, s) : tgrids[s];
        for (Eigen::Index k = 0; k < c.tgrid.size(); ++k)
            if (!(c.tgrid[k] >= 0.0 && c.tgrid[k] <= d.transform.t_max * (1.0 + 1e-9)))
                throw InputError("evaluation time " + std::to_string(c.tgrid[k]) + " is outside [0, " +
                                 std::to_string(d.transform.t_max) + "]");
        c.draws = alpha_draws(draws, d, s, c.tgrid);
        c.mean = c.draws.colwise().mean();
        std::tie(c.lower, c.upper) = joint_band(c.draws, level);
        const Matrix surv = (-(c.draws.array() + offset).exp()).exp();
        c.surv_mean = surv.colwise().mean();
        c.surv_lower = (-(c.upper.array() + offset).exp()).exp();
        c.surv_upper = (-(c.lower.array() + offset).exp()).exp();
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------

double KaplanMeier::operator()(double t) const {
    const auto* first = times.data();
    const auto* last = times.data() + times.size();
    const auto k = std::upper_bound(first, last, t) - first;
    return k == 0 ? 1.0 : survival[k - 1];
}

KaplanMeier km_product_limit(const SurvivalDataset& data) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return data.time[a] < data.time[b]; });
    double at_risk = data.weight.sum();
    double s = 1.0;
    std::vector<double> times, surv;
    for (std::size_t k = 0; k < order.size();) {
        const double t = data.time[order[k]];
        double deaths = 0.0, leaving = 0.0;
        std::size_t m = k;
        for (; m < order.size() && data.time[order[m]] == t; ++m) {
            deaths += data.weight[order[m]] * data.event[order[m]];
            leaving += data.weight[order[m]];
        }
        if (deaths > 0.0 && at_risk > 0.0) {
            s *= 1.0 - deaths / at_risk;
            times.push_back(t);
            surv.push_back(s);
        }
        at_risk -= leaving;
        k = m;
    }
    KaplanMeier km;
    km.times = Eigen::Map<const Vector>(times.data(), static_cast<Eigen::Index>(times.size()));
    km.survival = Eigen::Map<const Vector>(surv.data(), static_cast<Eigen::Index>(surv.size()));
    return km;
}

double effective_sample_size(const Vector& x) {
    const Eigen::Index n = x.size();
    if (n < 2) return static_cast<double>(n);
    const auto b = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(std::cbrt(static_cast<double>(n)))));
    const Eigen::Index a = n / b;
    if (a < 2) return 1.0;
    const Eigen::Index used = a * b;
    const Vector y = x.head(used);
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / static_cast<double>(used - 1);
    if (!(var > 0.0)) return 1.0;
    double var_bm = 0.0;
    for (Eigen::Index k = 0; k < a; ++k) {
        const double bm = y.segment(k * b, b).mean();
        var_bm += (bm - mean) * (bm - mean);
    }
    var_bm /= static_cast<double>(a - 1);
    if (!(var_bm > 0.0)) return static_cast<double>(used);
    return static_cast<double>(used) * var / (static_cast<double>(b) * var_bm);
}

double lag1_autocorrelation(const Vector& x) {
    const Eigen::Index n = x.size();
    if (n < 3) return 0.0;
    const double mean = x.mean();
    const Vector c = x.array() - mean;
    const double denom = c.squaredNorm();
    if (!(denom > 0.0)) return 1.0;
    return c.head(n - 1).dot(c.tail(n - 1)) / denom;
}

DiagnosticsReport diagnostics(const PosteriorDraws& draws) {
    DiagnosticsReport r;
    r.names = draws.names;
    r.ess.resize(draws.eta.cols());
    r.lag1.resize(draws.eta.cols());
    for (Eigen::Index k = 0; k < draws.eta.cols(); ++k) {
        r.ess[k] = effective_sample_size(draws.eta.col(k));
        r.lag1[k] = lag1_autocorrelation(draws.eta.col(k));
    }
    r.mh_accept_rate = draws.mh_accept_rate;
    return r;
}

// ---------------------------------------------------------------------------

namespace {

double interp(const Vector& x, const Vector& y, double t) {
    const Eigen::Index n = x.size();
    if (n == 1 || t <= x[0]) return y[0];
    if (t >= x[n - 1]) return y[n - 1];
    const auto k = std::upper_bound(x.data(), x.data() + n, t) - x.data();
    const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    return (1.0 - w) * y[k - 1] + w * y[k];
}

}  // namespace

CurveMetrics metrics_ise_coverage(const CurveEstimate& e, const std::function<double(double)>& truth, double L,
                                  double U, int points) {
    if (!(U > L)) throw DomainError("metrics_ise_coverage: need L < U");
    if (points < 2) throw DomainError("metrics_ise_coverage: need at least 2 grid points");
    const Vector t = Vector::LinSpaced(points, L, U);
    const double h = (U - L) / (points - 1);
    CurveMetrics m;
    for (Eigen::Index k = 0; k < points; ++k) {
        const double wk = (k == 0 || k == points - 1) ? 0.5 * h : h;
        const double a = truth(t[k]);
        const double est = interp(e.tgrid, e.mean, t[k]);
        const double lo = interp(e.tgrid, e.lower, t[k]);
        const double hi = interp(e.tgrid, e.upper, t[k]);
        m.ise += wk * (a - est) * (a - est);
        m.coverage += wk * ((lo <= a && a <= hi) ? 1.0 : 0.0);
    }
    m.ise /= (U - L);
    m.coverage /= (U - L);
    return m;
}

std::pair<double, double> death_range(const DesignSystem& d, std::size_t s) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d.row_stratum[static_cast<std::size_t>(i)] != static_cast<int>(s) || d.y[i] != 1.0 || !(d.w[i] > 0.0))
            continue;
        lo = std::min(lo, d.time[i]);
        hi = std::max(hi, d.time[i]);
    }
    return {d.transform.inverse(lo), d.transform.inverse(hi)};
}

}  // namespace coxpg
