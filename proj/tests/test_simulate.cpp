#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"

#include "coxpg/simulate.hpp"

using namespace coxpg;

namespace {

ModelSpec quick_spec() {
    ModelSpec s;
    s.draws = 600;
    s.burnin = 100;
    s.thin = 5;
    return s;
}

int count_lines(const std::filesystem::path& p) {
    std::ifstream f(p);
    int n = 0;
    for (std::string line; std::getline(f, line);) ++n;
    return n;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("inverse-transform identities") {
    CHECK(alpha1_event_time(std::exp(-0.1), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(alpha2_event_time(std::exp(-0.2), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    // H(t) = exp(alpha(t) + lp) evaluated at the generated time returns -log U.
    for (double u : {0.1, 0.5, 0.93})
        for (double lp : {-1.0, 0.0, 2.0}) {
            CHECK(std::exp(alpha1_truth(alpha1_event_time(u, lp)) + lp) == doctest::Approx(-std::log(u)));
            CHECK(std::exp(alpha2_truth(alpha2_event_time(u, lp)) + lp) == doctest::Approx(-std::log(u)));
        }
    CHECK(alpha1_truth(1.0) == std::log(0.1));
}

TEST_CASE("generated base times follow the Weibull survival curve") {
    RngStream rng(1);
    const int n = 100000;
    int alive[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const double t = alpha1_event_time(rng.uniform(), 0.0);
        for (int k = 0; k < 3; ++k) alive[k] += t > k + 1.0;
    }
    for (int k = 0; k < 3; ++k) {
        const double t = k + 1.0;
        const double s = std::exp(-0.1 * t * t);
        const double se = std::sqrt(s * (1.0 - s) / n);
        CHECK(std::abs(alive[k] / double(n) - s) < 3.0 * se);
    }
}

TEST_CASE("base case structure") {
    RngStream rng(2);
    SimCase c;
    const auto sim = gen_case(c, rng);
    const auto& d = sim.data;
    CHECK(d.size() == 200);
    CHECK(d.covariate_names == std::vector<std::string>{"x1", "x2"});
    CHECK(sim.truth.beta == (Vector(2) << 0.5, -0.5).finished());
    CHECK((d.time.array() > 0.0).all());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        CHECK(d.time[i] == std::min(sim.truth.event_time[i], sim.truth.censor_time[i]));
        CHECK(d.event[i] == (sim.truth.event_time[i] <= sim.truth.censor_time[i] ? 1.0 : 0.0));
        CHECK(sim.truth.lp[i] == doctest::Approx(0.5 * d.covariates(i, 0) - 0.5 * d.covariates(i, 1)));
        CHECK(std::abs(d.covariates(i, 1)) < 1.0);
    }
    CHECK_NOTHROW(validate(d));
}

TEST_CASE("censoring fraction is stable across seeds") {
    // Regression pin: mean censored fraction over 200 replicates of n = 200.
    double total = 0.0;
    std::vector<double> fractions;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RngStream rng(seed);
        SimCase c;
        const auto sim = gen_case(c, rng);
        const double f = 1.0 - sim.data.event.mean();
        fractions.push_back(f);
        total += f;
    }
    const double pin = total / 200.0;
    CHECK(pin == doctest::Approx(0.2442).epsilon(1e-4));
    const double se = std::sqrt(pin * (1.0 - pin) / 200.0);
    int outside = 0;
    for (double f : fractions) outside += std::abs(f - pin) > 3.5 * se;
    CHECK(outside <= 2);
}

TEST_CASE("case modifiers") {
    RngStream rng(3);
    SimCase c;

    c.id = CaseId::frailty;
    const auto fr = gen_case(c, rng);
    CHECK(fr.truth.frailty.size() == 25);
    CHECK(fr.data.cluster.size() == 200);
    CHECK(fr.data.cluster[0] == "c01");
    CHECK(fr.data.cluster[24] == "c25");
    CHECK(fr.data.cluster[25] == "c01");
    for (Eigen::Index i = 0; i < 200; ++i)
        CHECK(fr.truth.lp[i] == doctest::Approx(0.5 * fr.data.covariates(i, 0) - 0.5 * fr.data.covariates(i, 1) +
                                                fr.truth.frailty[i % 25]));

    c.id = CaseId::weighting;
    const auto wt = gen_case(c, rng);
    CHECK((wt.data.weight.array() == 0.001).count() == 20);
    CHECK((wt.data.weight.array() == 1.0).count() == 180);
    for (Eigen::Index i = 0; i < 200; ++i)
        if (wt.data.weight[i] == 1.0) CHECK(std::abs(wt.data.covariates(i, 1)) < 1.0);

    c.id = CaseId::gam;
    const auto gm = gen_case(c, rng);
    REQUIRE(gm.data.smooth.size() == 1);
    CHECK(gm.data.smooth[0].name == "x3");
    CHECK(gm.data.smooth[0].values.minCoeff() >= 0.0);
    CHECK(gm.data.smooth[0].values.maxCoeff() <= 2.0 * std::numbers::pi);
    for (Eigen::Index i = 0; i < 200; ++i)
        CHECK(gm.truth.lp[i] == doctest::Approx(0.5 * gm.data.covariates(i, 0) - 0.5 * gm.data.covariates(i, 1) +
                                                std::sin(gm.truth.x3[i])));

    c.id = CaseId::stratified;
    c.n = 20000;
    const auto st = gen_case(c, rng);
    const double frac = std::count(st.data.stratum.begin(), st.data.stratum.end(), "2") / 20000.0;
    CHECK(std::abs(frac - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / 20000.0));
    for (Eigen::Index i = 0; i < 20000; ++i)
        CHECK(st.truth.baseline[static_cast<std::size_t>(i)] == std::stoi(st.data.stratum[static_cast<std::size_t>(i)]));

    CHECK(parse_case("gam") == CaseId::gam);
    CHECK(to_string(CaseId::stratified) == "stratified");
    CHECK_THROWS_AS(parse_case("nope"), InputError);
}

TEST_CASE("generation is reproducible") {
    for (auto id : {CaseId::base, CaseId::frailty, CaseId::weighting, CaseId::gam, CaseId::stratified}) {
        SimCase c;
        c.id = id;
        RngStream a(9, 3), b(9, 3);
        const auto da = gen_case(c, a), db = gen_case(c, b);
        CHECK(da.data == db.data);
        CHECK(da.truth.event_time == db.truth.event_time);
    }
}

TEST_CASE("default methods") {
    const auto m = default_methods(quick_spec());
    REQUIRE(m.size() == 3);
    CHECK(m[0].name == "Cox-PG1");
    CHECK(m[0].spec.epsilon == 1000.0);
    CHECK_FALSE(m[0].spec.mh_calibration);
    CHECK(m[1].spec.epsilon == 100.0);
    CHECK(m[1].spec.mh_calibration);
    CHECK(m[2].spec.J == 10);
    CHECK(m[2].spec.draws == 600);
}

TEST_CASE("study bookkeeping") {
    const auto dir = std::filesystem::temp_directory_path() / "coxpg_study_test";
    std::filesystem::remove_all(dir);
    SimCase c;
    c.replicates = 2;
    c.n = 100;
    const auto methods = default_methods(quick_spec());
    const auto res = run_study(c, methods, dir.string(), 2);
    CHECK(res.failures.empty());
    // 6 beta metrics + 2 alpha metrics, plus the acceptance rate for the two MH methods.
    CHECK(res.rows.size() == 2 * (3 * 8 + 2));
    CHECK(count_lines(dir / "metrics.csv") == 1 + static_cast<int>(res.rows.size()));
    CHECK(std::filesystem::exists(dir / "study.json"));
    for (std::size_t k = 1; k < res.rows.size(); ++k) CHECK(res.rows[k].replicate >= res.rows[k - 1].replicate);
    CHECK(res.means.at("Cox-PG2").count("mh_accept_rate") == 1);

    // Thread count does not change the rows.
    const auto single = run_study(c, methods, {}, 1);
    REQUIRE(single.rows.size() == res.rows.size());
    for (std::size_t k = 0; k < res.rows.size(); ++k) {
        CHECK(single.rows[k].metric == res.rows[k].metric);
        CHECK(single.rows[k].value == res.rows[k].value);
    }

    c.id = CaseId::stratified;
    const auto strat = run_study(c, {methods[1]}, {}, 1);
    CHECK(strat.failures.empty());
    CHECK(strat.rows.size() == 2 * (6 + 4 + 1));
    CHECK(strat.means.at("Cox-PG2").count("alpha_coverage[2]") == 1);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
