// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coxpg/basis.hpp"
#include "coxpg/ergodicity.hpp"
#include "coxpg/gibbs.hpp"
#include "coxpg/posterior.hpp"
#include "coxpg/samplers.hpp"
#include "coxpg/simulate.hpp"
#include "../test_util.hpp"

using namespace coxpg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [failed]");
        pass = pass && ok;
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StudyMethod cox_pg2() { return default_methods(ModelSpec{})[1]; }

// Base-case study shared by the acceptance-rate and coverage criteria.
struct BaseStudy {
    StudyResult res;
    double seconds = 0.0;
};

BaseStudy run_base_study() {
    BaseStudy b;
    SimCase c;
    c.id = CaseId::base;
    c.replicates = 50;
    c.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    b.res = run_study(c, {cox_pg2()}, {}, 1);
    b.seconds = seconds_since(t0);
    return b;
}

Outcome mh_acceptance(const BaseStudy& b) {
    Outcome o;
    o.require(b.res.failures.empty(), fmt("%g failed replicates", static_cast<double>(b.res.failures.size())));
    const double rate = b.res.means.at("Cox-PG2").at("mh_accept_rate");
    o.require(rate > 0.90, fmt("mean acceptance %.4f over 50 replicates (> 0.90)", rate));
    o.require(b.seconds <= 900.0, fmt("runtime %.1f s (<= 900 s)", b.seconds));
    return o;
}

Outcome coefficient_coverage(const BaseStudy& b) {
    Outcome o;
    const auto& m = b.res.means.at("Cox-PG2");
    const double c1 = m.at("beta1_coverage"), c2 = m.at("beta2_coverage");
    o.require(c1 >= 0.88 && c1 <= 0.99, fmt("beta1 coverage %.2f in [0.88, 0.99]", c1));
    o.require(c2 >= 0.88 && c2 <= 0.99, fmt("beta2 coverage %.2f in [0.88, 0.99]", c2));
    return o;
}

Outcome km_agreement() {
    Outcome o;
    RngStream data_rng(6);
    SurvivalDataset d;
    const int n = 50;
    d.time.resize(n);
    for (int i = 0; i < n; ++i) d.time[i] = alpha1_event_time(data_rng.uniform(), 0.0);
    d.event = Vector::Ones(n);
    d.weight = Vector::Ones(n);
    d.covariates.resize(n, 0);

    ModelSpec spec;
    const auto ds = build_design(d, spec);
    RngStream rng(1);
    const auto draws = run_chain(ds, spec, rng);
    const Vector mids = ds.transform.inverse(ds.grids[0].midpoints());
    const auto curve = posterior_curves(draws, ds, {mids})[0];
    const auto km = km_product_limit(d);
    int inside = 0;
    for (Eigen::Index k = 0; k < mids.size(); ++k)
        inside += curve.surv_lower[k] <= km(mids[k]) && km(mids[k]) <= curve.surv_upper[k];
    o.require(inside == mids.size(),
              fmt("%g of %g knot midpoints inside the joint band", inside, static_cast<double>(mids.size())));
    return o;
}

Outcome sufficient_statistic() {
    Outcome o;
    RngStream rng(2024);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 20 + static_cast<int>(rng.uniform() * 200.0);
        Vector t(n), y(n);
        for (int i = 0; i < n; ++i) {
            t[i] = 0.01 + 10.0 * rng.uniform();
            y[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
        }
        y[0] = 1.0;
        const int events = static_cast<int>(y.sum());
        const int J = 1 + static_cast<int>(rng.uniform() * std::min(8, events));
        const auto g = select_knots(t, y, std::min(J, events));
        Vector u(g.partitions());
        for (auto& v : u) v = 0.1 + 5.0 * rng.uniform();
        double lhs = 0.0;
        for (int i = 0; i < n; ++i)
            if (y[i] == 1.0) lhs += std::log(eval_deriv(g, t[i]).dot(u));
        const Vector counts = event_counts(g, t, y);
        const double rhs = counts.dot(u.array().log().matrix());
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    o.require(worst <= 1e-10, fmt("max |difference| %.3g over 200 random fixtures (<= 1e-10)", worst));
    return o;
}

Outcome sampler_suite() {
    Outcome o;
    const int n = 1000000;
    {  // Exact draws throughout: the Gaussian shortcut is disabled for PG(101, 2).
        RngStream rng(11);
        std::vector<double> x(n);
        for (auto& v : x) v = sample_pg(1.0, 0.0, rng, INFINITY);
        const auto m = testutil::moments(x);
        o.require(std::abs(m.mean - 0.25) < 3.0 * m.se, fmt("PG(1,0) mean %.6f, |z| %.2f", m.mean, std::abs(m.mean - 0.25) / m.se));
        const double target = 101.0 / 4.0 * std::tanh(1.0);
        RngStream rng2(12);
        for (auto& v : x) v = sample_pg(101.0, 2.0, rng2, INFINITY);
        const auto m2 = testutil::moments(x);
        o.require(std::abs(m2.mean - target) < 3.0 * m2.se,
                  fmt("PG(101,2) mean %.5f vs %.5f, |z| %.2f", m2.mean, target, std::abs(m2.mean - target) / m2.se));
    }
    {
        RngStream rng(41);
        std::vector<double> x(100000);
        for (auto& v : x) v = sample_beta_last(5.0, 3.0, rng);
        const double p =
            testutil::ks_pvalue(x, [](double v) { return std::pow(std::clamp(v / 5.0, 0.0, 1.0), 3.0); });
        o.require(p > 0.01, fmt("beta-last KS p %.3f", p));
    }
    {
        RngStream rng(61);
        std::vector<double> x(n);
        for (auto& v : x) v = sample_trunc_normal(0.0, 1.0, 3.0, INFINITY, rng);
        const auto m = testutil::moments(x);
        o.require(std::abs(m.mean - 3.2831) < 3.0 * m.se, fmt("TN tail mean %.5f, |z| %.2f", m.mean, std::abs(m.mean - 3.2831) / m.se));
    }
    {
        const double a = 1.0, b = 2.0, kappa = a - b / 2.0;
        RngStream rng(31);
        std::vector<double> omega(n);
        for (auto& v : omega) v = sample_pg(b, 0.0, rng);
        double worst = 0.0;
        for (double psi : {-3.0, -1.0, 0.5, 2.0, 3.0}) {
            double s = 0.0;
            for (double w : omega) s += std::exp(-0.5 * w * psi * psi);
            const double lhs = std::pow(2.0, -b) * std::exp(kappa * psi) * s / n;
            const double rhs = std::exp(a * psi) / std::pow(1.0 + std::exp(psi), b);
            worst = std::max(worst, std::abs(lhs / rhs - 1.0));
        }
        o.require(worst < 0.01, fmt("Esscher max relative error %.4f", worst));
    }
    return o;
}

Outcome exact_posterior() {
    Outcome o;
    const auto data = testutil::km_slope_fixture(100, 5);
    ModelSpec spec;
    spec.J = 1;
    spec.intercept = false;
    spec.draws = 101000;
    spec.burnin = 1000;
    spec.thin = 20;
    const auto ds = build_design(data, spec);
    const double oracle = testutil::exact_slope_posterior_mean(ds, spec.prior_variance);
    RngStream rng(1, 1);
    const auto draws = run_chain(ds, spec, rng);
    const Vector u = draws.eta.col(0);
    const double sd = std::sqrt((u.array() - u.mean()).square().sum() / (u.size() - 1.0));
    const double se = sd / std::sqrt(effective_sample_size(u));
    o.require(std::abs(u.mean() - oracle) < 3.0 * se,
              fmt("posterior mean %.5f vs quadrature %.5f, |z| %.2f", u.mean(), oracle, std::abs(u.mean() - oracle) / se));
    return o;
}

Outcome ergodicity() {
    Outcome o;
    double worst = -INFINITY;
    for (CaseId id : {CaseId::base, CaseId::frailty, CaseId::stratified})
        for (std::uint64_t seed : {1, 2}) {
            SimCase c;
            c.id = id;
            c.n = 100;
            RngStream rng(seed);
            ModelSpec spec;
            const auto d = build_design(gen_case(c, rng).data, spec);
            RngStream mc(seed, 7);
            worst = std::max(worst, log_minorization_delta(d, spec, 4000, mc).log_delta);
        }
    o.require(worst < 0.0, fmt("max log delta %.4g over 6 fixtures (< 0)", worst));

    SurvivalDataset d;
    d.time = Vector::Constant(1, 2.0);
    d.event = d.weight = Vector::Ones(1);
    d.covariates.resize(1, 0);
    ModelSpec spec;
    spec.J = 1;
    spec.epsilon = 1.0;
    spec.intercept = false;
    const auto ds = build_design(d, spec);
    const auto t = minorization_terms(ds, spec);
    const double sd = 1.0 / std::sqrt(t.S(0, 0)), m = t.mu_Lambda[0] / t.S(0, 0), up = spec.u_alpha_plus;
    const double ew = testutil::simpson(
        [&](double u) { return std::pow(u / up, ds.n_alpha[0]) * testutil::std_normal_pdf((u - m) / sd) / sd; }, 0.0,
        std::min(up, m + 12.0 * sd), 200000);
    RngStream rng(10);
    const auto est = log_minorization_delta(ds, spec, 200000, rng);
    const double z = std::abs(est.log_mean_w - std::log(ew)) / est.mc_se;
    o.require(z < 3.0, fmt("minimal fixture |z| %.2f against quadrature", z));

    const bool ex1 = coupling_bound(std::log(0.5), 0.25).n == 2.0;
    const bool ex2 = coupling_bound(std::log1p(-std::exp(-1.0)), std::exp(-10.0)).n == 10.0;
    const double l10 = coupling_bound(std::log(1e-30), 0.01).log10_n;
    const bool ex3 = std::abs(l10 - 30.663) < 5e-4;
    o.require(ex1 && ex2 && ex3, fmt("coupling examples n=2, n=10, log10 n=%.4f", l10));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int shell(const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "coxpg_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);

    SimCase c;
    c.n = 120;
    RngStream rng(3);
    const auto sim = gen_case(c, rng);
    {
        std::ofstream f(root / "data.csv");
        f << "time,status,x1,x2\n";
        char buf[160];
        for (Eigen::Index i = 0; i < sim.data.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g\n", sim.data.time[i], static_cast<int>(sim.data.event[i]),
                          sim.data.covariates(i, 0), sim.data.covariates(i, 1));
            f << buf;
        }
    }
    const std::string bin = COXPG_CLI_PATH, data = (root / "data.csv").string();
    const std::string quick = " --draws 2000 --burnin 200 --thin 5";
    struct Command {
        std::string name, args;
        std::vector<std::string> files;
    };
    const std::vector<Command> commands = {
        {"fit", "fit --data " + data + " --event status --covariates x1,x2 --seed 5" + quick,
         {"coefs.csv", "curves.csv", "trace.csv", "fit.json", "config.json"}},
        {"km", "km --data " + data + " --event status --seed 5" + quick, {"curves.csv", "coefs.csv", "fit.json"}},
        {"simulate", "simulate --case frailty --replicates 2 --n 100 --seed 9" + quick, {"metrics.csv", "study.json"}},
        {"delta", "delta --data " + data + " --event status --covariates x1,x2 --n-mc 5000", {"delta.json"}},
    };
    // Identical flags include --out, so both runs target one directory and the first is snapshotted.
    for (const auto& cmd : commands) {
        const auto dir = root / cmd.name;
        const std::string line = bin + " " + cmd.args + " --out " + dir.string();
        const int first = shell(line);
        std::vector<std::string> snapshot;
        for (const auto& f : cmd.files) snapshot.push_back(slurp(dir / f));
        fs::remove_all(dir);
        bool same = first == 0 && shell(line) == 0;
        for (std::size_t k = 0; k < cmd.files.size(); ++k)
            same = same && !snapshot[k].empty() && snapshot[k] == slurp(dir / cmd.files[k]);
        o.require(same, cmd.name + " byte-identical");
    }
    fs::remove_all(root);
    return o;
}

Outcome stratified_coverage() {
    Outcome o;
    SimCase c;
    c.id = CaseId::stratified;
    c.replicates = 50;
    c.seed = 1;
    const auto res = run_study(c, {cox_pg2()}, {}, 1);
    o.require(res.failures.empty(), fmt("%g failed replicates", static_cast<double>(res.failures.size())));
    const auto& m = res.means.at("Cox-PG2");
    const double c1 = m.at("alpha_coverage[1]"), c2 = m.at("alpha_coverage[2]");
    o.require(c1 >= 0.80, fmt("stratum 1 integrated coverage %.3f (>= 0.80)", c1));
    o.require(c2 >= 0.80, fmt("stratum 2 integrated coverage %.3f (>= 0.80)", c2));
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, auto&& check) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s  %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    };

    BaseStudy base;
    report("MH acceptance rate", [&] {
        base = run_base_study();
        return mh_acceptance(base);
    });
    report("Coefficient recovery", [&] { return coefficient_coverage(base); });
    report("KM agreement", km_agreement);
    report("Exact sufficient-statistic algebra", sufficient_statistic);
    report("Sampler distribution suite", sampler_suite);
    report("Exact-posterior oracle", exact_posterior);
    report("Ergodicity module", ergodicity);
    report("Determinism", cli_determinism);
    report("Stratified correctness", stratified_coverage);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
