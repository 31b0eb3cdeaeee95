#ifndef COXPG_CLI_HPP
#define COXPG_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coxpg/data_io.hpp"

namespace coxpg {

/// Every effective option of one CLI run.
struct CliConfig {
    std::string subcommand;
    std::string data;
    std::string out = "out";

    std::string time_col = "time";
    std::string event_col = "event";
    std::vector<std::string> covariates;  ///< empty: every unbound column
    bool covariates_set = false;
    std::string weight_col;
    std::string cluster_col;
    std::string stratum_col;
    std::vector<std::string> smooth_cols;
    std::string historical;               ///< power-prior historical data, same schema
    double power_a = 1.0;

    ModelSpec model;
    double level = 0.95;
    int grid_points = 200;
    bool timings = false;

    std::string sim_case = "base";
    int sim_n = 200;
    int replicates = 50;
    int threads = 0;
    std::vector<std::string> methods = {"Cox-PG1", "Cox-PG2", "Cox-PG3"};

    long n_mc = 100000;
    double tol = 0.01;
};

nlohmann::ordered_json to_json(const CliConfig& cfg);
/// Absent keys keep the values already in `cfg`.
void merge_json(CliConfig& cfg, const nlohmann::json& j);

/// Exit codes: 0 success, 1 input error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coxpg

#endif  // COXPG_CLI_HPP
