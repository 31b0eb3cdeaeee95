#ifndef COXPG_POSTERIOR_HPP
#define COXPG_POSTERIOR_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coxpg/gibbs.hpp"

namespace coxpg {

/// Type-7 sample quantile of unsorted values.
double quantile(Vector values, double p);

struct CoefSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double p_value = 1.0;  ///< 2 min(P(> 0), P(< 0)); 0 means below 2 / draws
    double ess = 0.0;
    double lag1 = 0.0;

    /// p_value as text, "<2/N" style bound when no draw falls on the minority side.
    std::string p_value_text(Eigen::Index draws) const;
};

/// Per-column summaries of a draws matrix with an equal-tailed interval.
std::vector<CoefSummary> summarize_coefs(const Matrix& draws, const std::vector<std::string>& names,
                                         double level = 0.95);
std::vector<CoefSummary> summarize_coefs(const PosteriorDraws& draws, double level = 0.95);

/// Simultaneous band mean +- q sd, where q is the ceil(level N)-th order
/// statistic of max_t |draw(t) - mean(t)| / sd(t). Rows are draws.
std::pair<Vector, Vector> joint_band(const Matrix& curve_draws, double level = 0.95);
/// Equal-tailed pointwise band.
std::pair<Vector, Vector> pointwise_band(const Matrix& curve_draws, double level = 0.95);

/// Baseline log cumulative hazard alpha(t) per draw for one stratum, with the
/// stratum intercept included; t is in original units.
Matrix alpha_draws(const PosteriorDraws& draws, const DesignSystem& design, std::size_t stratum, const Vector& tgrid);

struct CurveEstimate {
    std::string stratum;
    Vector tgrid;   ///< original units
    Matrix draws;   ///< retained draws x tgrid
    Vector mean;
    Vector lower;   ///< joint band
    Vector upper;
    double level = 0.95;
    Vector surv_mean;   ///< mean over draws of exp(-exp(alpha + offset))
    Vector surv_lower;  ///< band mapped through the survival transform
    Vector surv_upper;
};

/// Evenly spaced grid of n points from the first to the last event of a stratum.
Vector default_tgrid(const DesignSystem& design, std::size_t stratum, int n = 200);

/// Curves for every stratum on per-stratum default grids (tgrids empty) or
/// on the given grids. `offset` is a linear predictor added before the
/// survival transform. Throws InputError for grid points outside [0, t_max].
std::vector<CurveEstimate> posterior_curves(const PosteriorDraws& draws, const DesignSystem& design,
                                            const std::vector<Vector>& tgrids = {}, double level = 0.95,
                                            double offset = 0.0);

/// Step function from the product-limit estimator.
struct KaplanMeier {
    Vector times;     ///< distinct event times
    Vector survival;  ///< S just after each event time

    double operator()(double t) const;
};

/// Product-limit estimator with case weights (deaths and risk sets weighted).
KaplanMeier km_product_limit(const SurvivalDataset& data);

/// Batch-means effective sample size with batch length floor(n^{1/3});
/// constant draws give 1.
double effective_sample_size(const Vector& x);
double lag1_autocorrelation(const Vector& x);

struct DiagnosticsReport {
    std::vector<std::string> names;
    Vector ess;
    Vector lag1;
    double mh_accept_rate = 1.0;
};

DiagnosticsReport diagnostics(const PosteriorDraws& draws);

struct CurveMetrics {
    double ise = 0.0;
    double coverage = 0.0;
};

/// Trapezoid-rule ISE of mean vs truth and integrated coverage of the band
/// over [L, U] on a 400-point grid; the estimate is linearly interpolated.
CurveMetrics metrics_ise_coverage(const CurveEstimate& estimate, const std::function<double(double)>& truth, double L,
                                  double U, int points = 400);

/// First and last observed death in a stratum, original units.
std::pair<double, double> death_range(const DesignSystem& design, std::size_t stratum);

}  // namespace coxpg

#endif  // COXPG_POSTERIOR_HPP
