#ifndef COXPG_SIMULATE_HPP
#define COXPG_SIMULATE_HPP

#include <map>
#include <string>
#include <vector>

#include "coxpg/posterior.hpp"

namespace coxpg {

enum class CaseId { base, frailty, weighting, gam, stratified };

std::string to_string(CaseId id);
/// Throws InputError for an unknown name.
CaseId parse_case(const std::string& name);

/// Weibull PH study configuration: beta = (0.5, -0.5), baseline log
/// cumulative hazard log(0.1) + 2 log t, Exp(0.1) censoring.
struct SimCase {
    CaseId id = CaseId::base;
    int n = 200;
    int replicates = 50;
    std::uint64_t seed = 1;
};

/// log(0.1) + 2 log t
double alpha1_truth(double t);
/// Inverse-transform event time under alpha1: (-log u / (0.1 e^lp))^{1/2}.
double alpha1_event_time(double u, double lp);
/// Inverse-transform event time under alpha2: -log u / (0.2 e^lp).
double alpha2_event_time(double u, double lp);
/// log(0.2) + log t
double alpha2_truth(double t);

struct SimTruth {
    Vector beta;                 ///< (0.5, -0.5)
    Vector lp;                   ///< exact linear predictor per row (covariates, frailty, smooth)
    Vector event_time;           ///< latent event times
    Vector censor_time;
    std::vector<int> baseline;   ///< 1 for alpha1, 2 for alpha2, per row
    Vector frailty;              ///< cluster effects (frailty case)
    Vector x3;                   ///< smooth input (gam case)
};

struct SimData {
    SurvivalDataset data;
    SimTruth truth;
};

/// Generates one replicate. Covariates x1 ~ N(0, 1), x2 ~ U(-1, 1).
SimData gen_case(const SimCase& c, RngStream& rng);

/// A named model configuration fitted in the study.
struct StudyMethod {
    std::string name;
    ModelSpec spec;
};

/// Cox-PG1 (eps = 1000, no MH, J = 5), Cox-PG2 (eps = 100, MH, J = 5),
/// Cox-PG3 (eps = 100, MH, J = 10), all sharing `base` sampler settings.
std::vector<StudyMethod> default_methods(const ModelSpec& base = {});

struct MetricRow {
    int replicate = 0;
    std::string method;
    std::string metric;
    double value = 0.0;
};

struct StudyResult {
    SimCase sim;
    std::vector<std::string> methods;
    std::vector<MetricRow> rows;
    std::vector<std::string> failures;  ///< "replicate r, method m: message"
    /// Mean of each (method, metric) over the replicates that produced it.
    std::map<std::string, std::map<std::string, double>> means;
};

/// Fits one method to one dataset and returns its metric rows.
std::vector<MetricRow> evaluate_fit(const SimData& sim, const StudyMethod& method, int replicate, RngStream& rng);

/// Runs every replicate and method. Replicates run on up to `threads` workers
/// with per-replicate streams; rows are merged in replicate order. Writes
/// metrics.csv and study.json to `out_dir` when it is non-empty.
StudyResult run_study(const SimCase& c, const std::vector<StudyMethod>& methods, const std::string& out_dir = {},
                      int threads = 0);

}  // namespace coxpg

#endif  // COXPG_SIMULATE_HPP
