#include "coxpg/simulate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <thread>

namespace coxpg {

std::string to_string(CaseId id) {
    switch (id) {
        case CaseId::base: return "base";
        case CaseId::frailty: return "frailty";
        case CaseId::weighting: return "weighting";
        case CaseId::gam: return "gam";
        case CaseId::stratified: return "stratified";
    }
    return "base";
}

CaseId parse_case(const std::string& name) {
    for (auto id : {CaseId::base, CaseId::frailty, CaseId::weighting, CaseId::gam, CaseId::stratified})
        if (to_string(id) == name) return id;
    throw InputError("unknown simulation case '" + name + "' (expected base, frailty, weighting, gam, stratified)");
}

double alpha1_truth(double t) { return std::log(0.1) + 2.0 * std::log(t); }
double alpha2_truth(double t) { return std::log(0.2) + std::log(t); }
double alpha1_event_time(double u, double lp) { return std::sqrt(-std::log(u) / (0.1 * std::exp(lp))); }
double alpha2_event_time(double u, double lp) { return -std::log(u) / (0.2 * std::exp(lp)); }

SimData gen_case(const SimCase& c, RngStream& rng) {
    if (c.n < 2) throw InputError("simulation needs n >= 2");
    constexpr int kClusters = 25;
    const Eigen::Index n = c.n;
    SimData out;
    auto& d = out.data;
    auto& tr = out.truth;
    tr.beta = Vector(2);
    tr.beta << 0.5, -0.5;

    if (c.id == CaseId::frailty) {
        tr.frailty.resize(kClusters);
        for (int k = 0; k < kClusters; ++k) tr.frailty[k] = rng.normal();
    }

    d.covariates.resize(n, 2);
    d.covariate_names = {"x1", "x2"};
    d.time.resize(n);
    d.event.resize(n);
    d.weight = Vector::Ones(n);
    tr.lp.resize(n);
    tr.event_time.resize(n);
    tr.censor_time.resize(n);
    tr.baseline.assign(static_cast<std::size_t>(n), 1);
    if (c.id == CaseId::gam) tr.x3.resize(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = rng.normal();
        const double x2 = 2.0 * rng.uniform() - 1.0;
        d.covariates(i, 0) = x1;
        d.covariates(i, 1) = x2;
        double lp = tr.beta[0] * x1 + tr.beta[1] * x2;
        if (c.id == CaseId::frailty) {
            const auto k = static_cast<int>(i % kClusters);
            lp += tr.frailty[k];
            char label[16];
            std::snprintf(label, sizeof label, "c%02d", k + 1);
            d.cluster.emplace_back(label);
        }
        if (c.id == CaseId::gam) {
            tr.x3[i] = 2.0 * std::numbers::pi * rng.uniform();
            lp += std::sin(tr.x3[i]);
        }
        int baseline = 1;
        if (c.id == CaseId::stratified) {
            baseline = rng.uniform() < 0.25 ? 2 : 1;
            d.stratum.push_back(std::to_string(baseline));
        }
        tr.baseline[static_cast<std::size_t>(i)] = baseline;
        tr.lp[i] = lp;
        const double u = rng.uniform();
        tr.event_time[i] = baseline == 1 ? alpha1_event_time(u, lp) : alpha2_event_time(u, lp);
        tr.censor_time[i] = rng.exponential() / 0.1;
        d.time[i] = std::min(tr.event_time[i], tr.censor_time[i]);
        d.event[i] = tr.event_time[i] <= tr.censor_time[i] ? 1.0 : 0.0;
    }
    if (c.id == CaseId::gam) d.smooth.push_back({"x3", tr.x3});

    if (c.id == CaseId::weighting) {
        // Contaminate a random 10% of rows after the event times are fixed.
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        const auto m = static_cast<std::size_t>(n / 10);
        for (std::size_t k = 0; k < m; ++k) {
            const auto j = k + static_cast<std::size_t>(rng.next_u64() % (idx.size() - k));
            std::swap(idx[k], idx[j]);
            const auto i = idx[k];
            d.covariates(i, 0) = -10.0 + 20.0 * rng.uniform();
            d.covariates(i, 1) = -10.0 + 20.0 * rng.uniform();
            d.weight[i] = 0.001;
        }
    }
    return out;
}

std::vector<StudyMethod> default_methods(const ModelSpec& base) {
    StudyMethod pg1{"Cox-PG1", base}, pg2{"Cox-PG2", base}, pg3{"Cox-PG3", base};
    pg1.spec.epsilon = 1000.0;
    pg1.spec.mh_calibration = false;
    pg1.spec.J = 5;
    pg2.spec.epsilon = 100.0;
    pg2.spec.mh_calibration = true;
    pg2.spec.J = 5;
    pg3.spec.epsilon = 100.0;
    pg3.spec.mh_calibration = true;
    pg3.spec.J = 10;
    return {pg1, pg2, pg3};
}

std::vector<MetricRow> evaluate_fit(const SimData& sim, const StudyMethod& method, int replicate, RngStream& rng) {
    const DesignSystem design = build_design(sim.data, method.spec);
    const PosteriorDraws draws = run_chain(design, method.spec, rng);
    const auto coefs = summarize_coefs(draws);
    std::vector<MetricRow> rows;
    auto add = [&](const std::string& metric, double value) { rows.push_back({replicate, method.name, metric, value}); };

    const char* beta_names[] = {"x1", "x2"};
    for (int b = 0; b < 2; ++b) {
        const auto it = std::find_if(coefs.begin(), coefs.end(), [&](const CoefSummary& c) { return c.name == beta_names[b]; });
        if (it == coefs.end()) throw NumericalError("coefficient summary lacks " + std::string(beta_names[b]));
        const double truth = sim.truth.beta[b];
        const std::string prefix = "beta" + std::to_string(b + 1);
        add(prefix + "_sq_err", (it->mean - truth) * (it->mean - truth));
        add(prefix + "_ci_length", it->upper - it->lower);
        add(prefix + "_coverage", (it->lower <= truth && truth <= it->upper) ? 1.0 : 0.0);
    }

    const auto curves = posterior_curves(draws, design);
    for (std::size_t s = 0; s < design.strata.size(); ++s) {
        const bool second = design.strata[s] == "2";
        const auto truth = second ? alpha2_truth : alpha1_truth;
        const auto [L, U] = death_range(design, s);
        const auto m = metrics_ise_coverage(curves[s], truth, L, U);
        const std::string suffix = design.strata.size() > 1 ? "[" + design.strata[s] + "]" : "";
        add("alpha_ise" + suffix, m.ise);
        add("alpha_coverage" + suffix, m.coverage);
    }

    if (!design.smooths.empty()) {
        const auto& st = design.smooths[0];
        const auto& blk = design.blocks.back();
        const Vector u_mean = draws.eta.middleCols(blk.offset, blk.size).colwise().mean();
        const double lin_mean = draws.eta.col(design.smooth_linear_col[0]).mean();
        const Vector x = Vector::LinSpaced(100, st.x_min, st.x_min + st.x_range);
        Vector f(x.size()), g(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            f[k] = lin_mean * st.eval_linear(x[k]) + st.eval_oscillation(x[k]).dot(u_mean);
            g[k] = std::sin(x[k]);
        }
        const Vector fc = f.array() - f.mean(), gc = g.array() - g.mean();
        add("smooth_corr", fc.dot(gc) / std::sqrt(fc.squaredNorm() * gc.squaredNorm()));
    }

    if (method.spec.mh_calibration) add("mh_accept_rate", draws.mh_accept_rate);
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

StudyResult run_study(const SimCase& c, const std::vector<StudyMethod>& methods, const std::string& out_dir,
                      int threads) {
    if (c.replicates < 1) throw InputError("replicates must be at least 1");
    StudyResult res;
    res.sim = c;
    for (const auto& m : methods) res.methods.push_back(m.name);

    struct Slot {
        std::vector<MetricRow> rows;
        std::vector<std::string> failures;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(c.replicates));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int r = next++; r < c.replicates; r = next++) {
            auto& slot = slots[static_cast<std::size_t>(r)];
            RngStream data_rng(c.seed, 2 * static_cast<std::uint64_t>(r));
            const RngStream fit_root(c.seed, 2 * static_cast<std::uint64_t>(r) + 1);
            SimData sim;
            try {
                sim = gen_case(c, data_rng);
            } catch (const std::exception& e) {
                slot.failures.push_back("replicate " + std::to_string(r + 1) + ": " + e.what());
                continue;
            }
            for (std::size_t m = 0; m < methods.size(); ++m) {
                RngStream rng = fit_root.substream(m);
                try {
                    auto rows = evaluate_fit(sim, methods[m], r + 1, rng);
                    slot.rows.insert(slot.rows.end(), rows.begin(), rows.end());
                } catch (const std::exception& e) {
                    slot.failures.push_back("replicate " + std::to_string(r + 1) + ", method " + methods[m].name + ": " +
                                            e.what());
                }
            }
        }
    };
    const int hw = threads > 0 ? threads : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    const int n_workers = std::min(hw, c.replicates);
    std::vector<std::future<void>> jobs;
    for (int k = 1; k < n_workers; ++k) jobs.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& j : jobs) j.get();

    std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
    for (const auto& slot : slots) {
        res.rows.insert(res.rows.end(), slot.rows.begin(), slot.rows.end());
        res.failures.insert(res.failures.end(), slot.failures.begin(), slot.failures.end());
        for (const auto& row : slot.rows) {
            auto& a = acc[row.method][row.metric];
            a.first += row.value;
            a.second += 1;
        }
    }
    for (const auto& [method, metrics] : acc)
        for (const auto& [metric, a] : metrics) res.means[method][metric] = a.first / a.second;

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream csv(std::filesystem::path(out_dir) / "metrics.csv", std::ios::binary);
        if (!csv) throw InputError("cannot write metrics.csv in '" + out_dir + "'");
        csv << "replicate,method,metric,value\n";
        for (const auto& row : res.rows)
            csv << row.replicate << ',' << row.method << ',' << row.metric << ',' << fmt(row.value) << '\n';

        nlohmann::ordered_json j;
        j["case"] = to_string(c.id);
        j["n"] = c.n;
        j["replicates"] = c.replicates;
        j["seed"] = c.seed;
        nlohmann::ordered_json mj = nlohmann::ordered_json::array();
        for (const auto& m : methods) mj.push_back({{"name", m.name}, {"spec", to_json(m.spec)}});
        j["methods"] = mj;
        nlohmann::ordered_json means;
        for (const auto& [method, metrics] : res.means)
            for (const auto& [metric, v] : metrics) means[method][metric] = v;
        j["means"] = means;
        j["failures"] = res.failures;
        std::ofstream js(std::filesystem::path(out_dir) / "study.json", std::ios::binary);
        if (!js) throw InputError("cannot write study.json in '" + out_dir + "'");
        js << j.dump(2) << '\n';
    }
    return res;
}

}  // namespace coxpg
