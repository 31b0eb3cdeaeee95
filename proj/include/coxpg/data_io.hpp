#ifndef COXPG_DATA_IO_HPP
#define COXPG_DATA_IO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "coxpg/types.hpp"

namespace coxpg {

/// A named real-valued column used as a smooth (GAM) input.
struct NamedColumn {
    std::string name;
    Vector values;

    bool operator==(const NamedColumn&) const = default;
};

/// Right-censored survival data. Optional roles are empty when absent.
struct SurvivalDataset {
    Vector time;     ///< study time T_i > 0 (event or censoring)
    Vector event;    ///< y_i in {0, 1}, 1 = death
    Matrix covariates;  ///< N x P
    std::vector<std::string> covariate_names;
    Vector weight;   ///< w_i, all ones unless a weight column was given
    std::vector<std::string> cluster;  ///< frailty group label per row, or empty
    std::vector<std::string> stratum;  ///< baseline hazard group label per row, or empty
    std::vector<NamedColumn> smooth;

    Eigen::Index size() const { return time.size(); }
    Eigen::Index num_covariates() const { return covariates.cols(); }
    bool has_clusters() const { return !cluster.empty(); }
    bool has_strata() const { return !stratum.empty(); }

    double total_events() const { return event.sum(); }

    bool operator==(const SurvivalDataset& other) const;
};

/// Throws InputError on violated dataset invariants. Zero weights are legal
/// only when `allow_zero_weights` is set (historical rows under a power prior
/// with a = 0).
void validate(const SurvivalDataset& data, bool allow_zero_weights = false);

/// Keep only the rows in `rows`, in that order.
SurvivalDataset subset_rows(const SurvivalDataset& data, const std::vector<Eigen::Index>& rows);

/// Column-name mapping for CSV ingestion. When `covariates` is unset, every
/// column that is not bound to another role is read as a covariate.
struct CsvSchema {
    std::string time = "time";
    std::string event = "event";
    std::optional<std::vector<std::string>> covariates;
    std::string weight;
    std::string cluster;
    std::string stratum;
    std::vector<std::string> smooth;
};

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema);
SurvivalDataset parse_csv(const std::string& text, const CsvSchema& schema);

/// Linear map t' = scale * t with scale = 0.5 / t_max.
struct TimeTransform {
    double t_max = 1.0;
    double scale = 0.5;

    double forward(double t) const { return scale * t; }
    double inverse(double t_scaled) const { return t_scaled / scale; }
    template <typename Derived>
    auto forward(const Eigen::MatrixBase<Derived>& t) const {
        return (t * scale).eval();
    }
    template <typename Derived>
    auto inverse(const Eigen::MatrixBase<Derived>& t) const {
        return (t / scale).eval();
    }
};

/// Maps all times into (0, 0.5]; the largest time lands on exactly 0.5.
std::pair<SurvivalDataset, TimeTransform> rescale_times(const SurvivalDataset& data);

/// Sampler and prior configuration for one fit.
struct ModelSpec {
    int J = 5;                       ///< partitions per stratum
    double epsilon = 100.0;          ///< gamma frailty parameter
    bool mh_calibration = true;
    bool intercept = true;

    double prior_variance = 1e6;     ///< Sigma_0 = prior_variance * I unless prior_cov is set
    std::optional<Matrix> prior_cov; ///< full Sigma_0 over (u_alpha | beta)
    std::optional<Vector> prior_mean;///< mu_0 over (u_alpha | beta); zero by default

    double a0 = 1.0;
    double b0 = 1e-3;
    double tau0 = 1e-4;
    double u_alpha_plus = 1e4;       ///< upper slope bound on the rescaled axis

    int draws = 11000;               ///< total iterations including burn-in
    int burnin = 1000;
    int thin = 10;
    std::uint64_t seed = 1;

    int tn_sweeps = 1;               ///< coordinate sweeps per truncated-normal update
    double pg_exact_cutoff = 30.0;   ///< PG(b, c) is moment-matched Gaussian above this b
    int smooth_basis = 7;            ///< oscillation columns per smooth term
    int newton_iterations = 25;

    double eta_epsilon() const;
};

/// Throws InputError unless `spec` satisfies its invariants. `random_effect_sizes`
/// lists the dimension of each random-effect block so condition a0 + M/2 >= 1
/// can be checked.
void validate(const ModelSpec& spec, const std::vector<int>& random_effect_sizes = {});

/// Every ModelSpec field, defaults included.
nlohmann::json to_json(const ModelSpec& spec);
/// Inverse of to_json; absent keys keep their defaults.
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace coxpg

#endif  // COXPG_DATA_IO_HPP
