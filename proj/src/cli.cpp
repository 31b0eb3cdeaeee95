#include "coxpg/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "coxpg/ergodicity.hpp"
#include "coxpg/simulate.hpp"

namespace coxpg {

namespace {

namespace fs = std::filesystem;

// Stream ids derived from --seed, one per workflow.
constexpr std::uint64_t kFitStream = 1;
constexpr std::uint64_t kKmStream = 2;
constexpr std::uint64_t kDeltaStream = 3;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw InputError("cannot write '" + (fs::path(dir) / name).string() + "'");
    return f;
}

void write_json(const std::string& dir, const std::string& name, const nlohmann::ordered_json& j) {
    auto f = open_out(dir, name);
    f << j.dump(2) << '\n';
}

CsvSchema schema_of(const CliConfig& cfg) {
    CsvSchema s;
    s.time = cfg.time_col;
    s.event = cfg.event_col;
    if (cfg.covariates_set) s.covariates = cfg.covariates;
    s.weight = cfg.weight_col;
    s.cluster = cfg.cluster_col;
    s.stratum = cfg.stratum_col;
    s.smooth = cfg.smooth_cols;
    return s;
}

SurvivalDataset load_inputs(const CliConfig& cfg, const CsvSchema& schema) {
    if (cfg.data.empty()) throw InputError("--data is required for '" + cfg.subcommand + "'");
    SurvivalDataset d = load_csv(cfg.data, schema);
    if (!cfg.historical.empty()) d = apply_power_prior(d, load_csv(cfg.historical, schema), cfg.power_a);
    return d;
}

nlohmann::ordered_json vec_json(const Vector& v) {
    return nlohmann::ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

void write_coefs(const std::string& dir, const std::vector<CoefSummary>& coefs, Eigen::Index draws) {
    auto f = open_out(dir, "coefs.csv");
    f << "name,mean,sd,lower,upper,p_value,ess,lag1\n";
    for (const auto& c : coefs)
        f << c.name << ',' << num(c.mean) << ',' << num(c.sd) << ',' << num(c.lower) << ',' << num(c.upper) << ','
          << c.p_value_text(draws) << ',' << num(c.ess) << ',' << num(c.lag1) << '\n';
}

void write_trace(const std::string& dir, const PosteriorDraws& draws) {
    auto f = open_out(dir, "trace.csv");
    f << "draw";
    for (const auto& n : draws.names) f << ',' << n;
    for (const auto& n : draws.block_names) f << ",tau[" << n << ']';
    f << '\n';
    for (Eigen::Index r = 0; r < draws.count(); ++r) {
        f << r + 1;
        for (Eigen::Index c = 0; c < draws.eta.cols(); ++c) f << ',' << num(draws.eta(r, c));
        for (Eigen::Index c = 0; c < draws.tau.cols(); ++c) f << ',' << num(draws.tau(r, c));
        f << '\n';
    }
}

nlohmann::ordered_json fit_summary(const CliConfig& cfg, const DesignSystem& design, const PosteriorDraws& draws) {
    nlohmann::ordered_json j;
    j["subcommand"] = cfg.subcommand;
    j["retained_draws"] = draws.count();
    j["mh_calibration"] = draws.spec.mh_calibration;
    j["mh_accept_rate"] = draws.mh_accept_rate;
    j["mh_accepted"] = draws.mh_accepted;
    j["mh_proposals"] = draws.mh_proposals;
    j["u_alpha_plus"] = draws.spec.u_alpha_plus;
    j["design"] = design.describe();
    j["model"] = to_json(draws.spec);
    const auto diag = diagnostics(draws);
    j["diagnostics"] = {{"names", diag.names}, {"ess", vec_json(diag.ess)}, {"lag1", vec_json(diag.lag1)}};
    std::vector<std::string> warnings;
    for (const auto& g : design.grids) warnings.insert(warnings.end(), g.warnings.begin(), g.warnings.end());
    j["warnings"] = warnings;
    if (cfg.timings)
        j["timings_seconds"] = {{"omega", draws.timings.omega},
                                {"v", draws.timings.v},
                                {"tau", draws.timings.tau},
                                {"eta", draws.timings.eta},
                                {"mh", draws.timings.mh}};
    return j;
}

std::vector<Vector> grids_for(const DesignSystem& d, int points) {
    std::vector<Vector> g;
    for (std::size_t s = 0; s < d.strata.size(); ++s) g.push_back(default_tgrid(d, s, points));
    return g;
}

int cmd_fit(const CliConfig& cfg, std::ostream& out) {
    const SurvivalDataset data = load_inputs(cfg, schema_of(cfg));
    const DesignSystem design = build_design(data, cfg.model);
    RngStream rng(cfg.model.seed, kFitStream);
    const PosteriorDraws draws = run_chain(design, cfg.model, rng);
    const auto coefs = summarize_coefs(draws, cfg.level);
    const auto curves = posterior_curves(draws, design, grids_for(design, cfg.grid_points), cfg.level);

    write_coefs(cfg.out, coefs, draws.count());
    {
        auto f = open_out(cfg.out, "curves.csv");
        f << "stratum,t,mean,lower,upper,surv_mean,surv_lower,surv_upper\n";
        for (const auto& c : curves)
            for (Eigen::Index k = 0; k < c.tgrid.size(); ++k)
                f << c.stratum << ',' << num(c.tgrid[k]) << ',' << num(c.mean[k]) << ',' << num(c.lower[k]) << ','
                  << num(c.upper[k]) << ',' << num(c.surv_mean[k]) << ',' << num(c.surv_lower[k]) << ','
                  << num(c.surv_upper[k]) << '\n';
    }
    write_trace(cfg.out, draws);
    write_json(cfg.out, "fit.json", fit_summary(cfg, design, draws));
    write_json(cfg.out, "config.json", to_json(cfg));
    out << "fit: " << draws.count() << " draws, MH acceptance " << num(draws.mh_accept_rate) << ", outputs in "
        << cfg.out << '\n';
    return 0;
}

int cmd_km(const CliConfig& cfg, std::ostream& out) {
    CsvSchema schema;
    schema.time = cfg.time_col;
    schema.event = cfg.event_col;
    schema.weight = cfg.weight_col;
    schema.covariates = std::vector<std::string>{};
    const SurvivalDataset data = load_inputs(cfg, schema);
    ModelSpec spec = cfg.model;
    spec.intercept = true;
    const DesignSystem design = build_design(data, spec);
    RngStream rng(spec.seed, kKmStream);
    const PosteriorDraws draws = run_chain(design, spec, rng);
    const auto curves = posterior_curves(draws, design, grids_for(design, cfg.grid_points), cfg.level);
    const KaplanMeier km = km_product_limit(data);

    {
        auto f = open_out(cfg.out, "curves.csv");
        f << "t,coxpg_mean,lower,upper,km\n";
        const auto& c = curves.front();
        for (Eigen::Index k = 0; k < c.tgrid.size(); ++k)
            f << num(c.tgrid[k]) << ',' << num(c.surv_mean[k]) << ',' << num(c.surv_lower[k]) << ','
              << num(c.surv_upper[k]) << ',' << num(km(c.tgrid[k])) << '\n';
    }
    write_coefs(cfg.out, summarize_coefs(draws, cfg.level), draws.count());
    write_json(cfg.out, "fit.json", fit_summary(cfg, design, draws));
    write_json(cfg.out, "config.json", to_json(cfg));
    out << "km: " << draws.count() << " draws, outputs in " << cfg.out << '\n';
    return 0;
}

int cmd_simulate(const CliConfig& cfg, std::ostream& out) {
    SimCase c;
    c.id = parse_case(cfg.sim_case);
    c.n = cfg.sim_n;
    c.replicates = cfg.replicates;
    c.seed = cfg.model.seed;
    std::vector<StudyMethod> methods;
    for (const auto& m : default_methods(cfg.model)) {
        if (std::find(cfg.methods.begin(), cfg.methods.end(), m.name) != cfg.methods.end()) methods.push_back(m);
    }
    for (const auto& name : cfg.methods)
        if (std::none_of(methods.begin(), methods.end(), [&](const StudyMethod& m) { return m.name == name; }))
            throw InputError("unknown method '" + name + "' (expected Cox-PG1, Cox-PG2, Cox-PG3)");
    const StudyResult res = run_study(c, methods, cfg.out, cfg.threads);
    write_json(cfg.out, "config.json", to_json(cfg));
    out << "simulate: " << res.rows.size() << " metric rows, " << res.failures.size() << " failures, outputs in "
        << cfg.out << '\n';
    return 0;
}

int cmd_delta(const CliConfig& cfg, std::ostream& out) {
    const SurvivalDataset data = load_inputs(cfg, schema_of(cfg));
    const DesignSystem design = build_design(data, cfg.model);
    RngStream rng(cfg.model.seed, kDeltaStream);
    const DeltaEstimate est = log_minorization_delta(design, cfg.model, cfg.n_mc, rng);
    nlohmann::ordered_json j;
    const double ln10 = std::log(10.0);
    j["log10_delta"] = std::isfinite(est.log_delta) ? nlohmann::ordered_json(est.log_delta / ln10) : nullptr;
    j["mc_se"] = std::isfinite(est.mc_se) ? nlohmann::ordered_json(est.mc_se / ln10) : nullptr;
    if (std::isfinite(est.log_delta)) {
        const auto cb = coupling_bound(est.log_delta, cfg.tol);
        j["log10_n_for_tol"] = cb.log10_n;
    } else {
        j["log10_n_for_tol"] = nullptr;
    }
    j["tol"] = cfg.tol;
    j["n_mc"] = est.n_mc;
    j["n_inside"] = est.n_inside;
    j["log10_mean_w"] = std::isfinite(est.log_mean_w) ? nlohmann::ordered_json(est.log_mean_w / ln10) : nullptr;
    j["log10_R1"] = est.terms.log_R1 / ln10;
    j["C1"] = est.terms.C1;
    j["N_epsilon"] = est.terms.N_epsilon;
    j["warnings"] = est.warnings;
    write_json(cfg.out, "delta.json", j);
    write_json(cfg.out, "config.json", to_json(cfg));
    out << j.dump(2) << '\n';
    return 0;
}

}  // namespace

nlohmann::ordered_json to_json(const CliConfig& c) {
    nlohmann::ordered_json j;
    j["subcommand"] = c.subcommand;
    j["data"] = c.data;
    j["out"] = c.out;
    j["time"] = c.time_col;
    j["event"] = c.event_col;
    j["covariates"] = c.covariates_set ? nlohmann::ordered_json(c.covariates) : nlohmann::ordered_json(nullptr);
    j["weights"] = c.weight_col;
    j["cluster"] = c.cluster_col;
    j["strata"] = c.stratum_col;
    j["smooth"] = c.smooth_cols;
    j["historical"] = c.historical;
    j["power_a"] = c.power_a;
    j["model"] = to_json(c.model);
    j["level"] = c.level;
    j["grid_points"] = c.grid_points;
    j["timings"] = c.timings;
    j["case"] = c.sim_case;
    j["n"] = c.sim_n;
    j["replicates"] = c.replicates;
    j["threads"] = c.threads;
    j["methods"] = c.methods;
    j["n_mc"] = c.n_mc;
    j["tol"] = c.tol;
    return j;
}

void merge_json(CliConfig& c, const nlohmann::json& j) {
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("subcommand", c.subcommand);
        get("data", c.data);
        get("out", c.out);
        get("time", c.time_col);
        get("event", c.event_col);
        if (j.contains("covariates")) {
            c.covariates_set = !j.at("covariates").is_null();
            c.covariates = c.covariates_set ? j.at("covariates").get<std::vector<std::string>>() : std::vector<std::string>{};
        }
        get("weights", c.weight_col);
        get("cluster", c.cluster_col);
        get("strata", c.stratum_col);
        get("smooth", c.smooth_cols);
        get("historical", c.historical);
        get("power_a", c.power_a);
        if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
        get("level", c.level);
        get("grid_points", c.grid_points);
        get("timings", c.timings);
        get("case", c.sim_case);
        get("n", c.sim_n);
        get("replicates", c.replicates);
        get("threads", c.threads);
        get("methods", c.methods);
        get("n_mc", c.n_mc);
        get("tol", c.tol);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid configuration file: ") + e.what());
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CliConfig cfg;
    try {
        // --config is applied first so explicit flags override it.
        for (std::size_t k = 1; k < args.size(); ++k) {
            std::string path;
            if (args[k] == "--config" && k + 1 < args.size())
                path = args[k + 1];
            else if (args[k].rfind("--config=", 0) == 0)
                path = args[k].substr(9);
            if (path.empty()) continue;
            std::ifstream f(path);
            if (!f) throw InputError("cannot open config file '" + path + "'");
            nlohmann::json j;
            try {
                f >> j;
            } catch (const nlohmann::json::exception& e) {
                throw InputError("config file '" + path + "' is not valid JSON: " + e.what());
            }
            merge_json(cfg, j);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    CLI::App app{"Cox proportional hazards via Polya-Gamma augmented Gibbs sampling"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_subcommand("fit", "fit a Cox-PG model and write coefficient, curve and trace outputs");
    app.add_subcommand("km", "intercept-only fit next to the product-limit estimate");
    app.add_subcommand("simulate", "run the Weibull simulation study");
    app.add_subcommand("delta", "estimate the minorization constant and coupling bound");

    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration; explicit flags override it");
    app.add_option("--data", cfg.data, "input CSV");
    app.add_option("--out", cfg.out, "output directory")->capture_default_str();
    app.add_option("--time", cfg.time_col, "time column")->capture_default_str();
    app.add_option("--event", cfg.event_col, "event indicator column (1 = death)")->capture_default_str();
    auto* cov_opt = app.add_option("--covariates", cfg.covariates, "covariate columns (default: all unbound columns)")
                        ->delimiter(',');
    app.add_option("--weights", cfg.weight_col, "case-weight column");
    app.add_option("--cluster", cfg.cluster_col, "frailty cluster column");
    app.add_option("--strata", cfg.stratum_col, "baseline-hazard stratum column");
    app.add_option("--smooth", cfg.smooth_cols, "columns entered as penalized smooths")->delimiter(',');
    app.add_option("--historical", cfg.historical, "historical CSV for a power prior");
    app.add_option("--power-a", cfg.power_a, "power prior exponent in [0, 1]")->capture_default_str();

    auto& m = cfg.model;
    app.add_option("--J", m.J, "partitions per stratum")->capture_default_str();
    app.add_option("--epsilon", m.epsilon, "negative-binomial frailty parameter")->capture_default_str();
    app.add_option("--mh", m.mh_calibration, "Metropolis-Hastings calibration (true/false)")->capture_default_str();
    app.add_option("--intercept", m.intercept, "include intercept(s) (true/false)")->capture_default_str();
    app.add_option("--prior-variance", m.prior_variance, "prior variance of u_alpha and beta")->capture_default_str();
    app.add_option("--a0", m.a0, "gamma shape for random-effect precisions")->capture_default_str();
    app.add_option("--b0", m.b0, "gamma rate for random-effect precisions")->capture_default_str();
    app.add_option("--tau0", m.tau0, "lower truncation of random-effect precisions")->capture_default_str();
    app.add_option("--u-plus", m.u_alpha_plus, "upper bound on baseline slopes (rescaled axis)")->capture_default_str();
    app.add_option("--draws", m.draws, "total iterations including burn-in")->capture_default_str();
    app.add_option("--burnin", m.burnin, "burn-in iterations")->capture_default_str();
    app.add_option("--thin", m.thin, "thinning interval")->capture_default_str();
    app.add_option("--seed", m.seed, "random seed")->capture_default_str();
    app.add_option("--tn-sweeps", m.tn_sweeps, "truncated-normal sweeps per iteration")->capture_default_str();
    app.add_option("--pg-cutoff", m.pg_exact_cutoff, "largest PG shape drawn exactly")->capture_default_str();
    app.add_option("--smooth-basis", m.smooth_basis, "oscillation columns per smooth")->capture_default_str();
    app.add_option("--newton-iterations", m.newton_iterations, "Newton steps at initialization")->capture_default_str();

    app.add_option("--level", cfg.level, "credible level for intervals and bands")->capture_default_str();
    app.add_option("--grid-points", cfg.grid_points, "curve evaluation points per stratum")->capture_default_str();
    app.add_flag("--timings", cfg.timings, "record per-update timings in fit.json");
    app.add_option("--case", cfg.sim_case, "simulation case")->capture_default_str();
    app.add_option("--n", cfg.sim_n, "subjects per simulated replicate")->capture_default_str();
    app.add_option("--replicates", cfg.replicates, "simulation replicates")->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)")->capture_default_str();
    app.add_option("--methods", cfg.methods, "methods to fit")->delimiter(',');
    app.add_option("--n-mc", cfg.n_mc, "Monte Carlo draws for delta")->capture_default_str();
    app.add_option("--tol", cfg.tol, "total-variation tolerance for the coupling bound")->capture_default_str();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("coxpg");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return 1;
    }
    if (cov_opt->count() > 0) cfg.covariates_set = true;
    cfg.subcommand = app.get_subcommands().front()->get_name();

    try {
        if (cfg.subcommand == "fit") return cmd_fit(cfg, out);
        if (cfg.subcommand == "km") return cmd_km(cfg, out);
        if (cfg.subcommand == "simulate") return cmd_simulate(cfg, out);
        return cmd_delta(cfg, out);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        err << "input error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace coxpg
