#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "coxpg/samplers.hpp"
#include "test_util.hpp"

using namespace coxpg;
using testutil::moments;

namespace {

std::vector<double> pg_draws(double b, double c, int n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = sample_pg(b, c, rng);
    return x;
}

// Var[PG(b, c)] = b / (4 pi^4) sum_k 1 / ((k - 1/2)^2 + c^2 / (4 pi^2))^2.
double pg_variance_series(double b, double c) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double d = c * c / (4.0 * pi2);
    double s = 0.0;
    for (int k = 1; k <= 200000; ++k) {
        const double a = (k - 0.5) * (k - 0.5) + d;
        s += 1.0 / (a * a);
    }
    return b * s / (4.0 * pi2 * pi2);
}

}  // namespace

TEST_SUITE("samplers") {

TEST_CASE("scalar helpers") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(log_norm_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-10));
    CHECK(log_norm_cdf(3.0) == doctest::Approx(std::log(testutil::std_normal_cdf(3.0))).epsilon(1e-12));
    CHECK(log1pexp(800.0) == 800.0);
    CHECK(log1pexp(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(log1pexp(-800.0) == 0.0);
    CHECK_THROWS_AS(norm_quantile(1.0), DomainError);
}

TEST_CASE("PG moment formulas agree with the series representation") {
    for (double b : {1.0, 2.5, 101.0})
        for (double c : {0.0, 1e-5, 0.3, 2.0, 9.0, 40.0}) {
            CHECK(pg_mean(b, c) == doctest::Approx(testutil::pg_mean_series(b, c)).epsilon(1e-6));
            CHECK(pg_variance(b, c) == doctest::Approx(pg_variance_series(b, c)).epsilon(1e-6));
            CHECK(pg_mean(b, -c) == pg_mean(b, c));
        }
    CHECK(pg_mean(1.0, 0.0) == 0.25);
    CHECK(pg_variance(1.0, 0.0) == doctest::Approx(1.0 / 24.0));
    CHECK(std::isfinite(pg_variance(1.0, 2000.0)));
}

TEST_CASE("PG(1, 0) mean") {
    const auto m = moments(pg_draws(1.0, 0.0, 1000000, 11));
    CHECK(std::abs(m.mean - 0.25) < 3.0 * m.se);
}

TEST_CASE("PG(101, 2) mean") {
    const double target = 101.0 / 4.0 * std::tanh(1.0);
    CHECK(pg_mean(101.0, 2.0) == doctest::Approx(target).epsilon(1e-14));
    const auto m = moments(pg_draws(101.0, 2.0, 200000, 12));
    CHECK(std::abs(m.mean - target) < 3.0 * m.se);
}

TEST_CASE("exact PG draws match mean and variance across tilts") {
    int k = 0;
    for (double b : {1.0, 3.0, 2.5, 0.4})
        for (double c : {0.0, 0.7, 4.0, 25.0}) {
            const auto x = pg_draws(b, c, 100000, 100 + k++);
            const auto m = moments(x);
            CHECK(std::abs(m.mean - pg_mean(b, c)) < 3.5 * m.se);
            double ss = 0.0;
            for (double v : x) ss += (v - m.mean) * (v - m.mean);
            const double var = ss / (x.size() - 1.0);
            CHECK(var == doctest::Approx(pg_variance(b, c)).epsilon(0.05));
            CHECK(*std::min_element(x.begin(), x.end()) > 0.0);
        }
}

TEST_CASE("PG is symmetric in the sign of c") {
    const auto a = pg_draws(1.0, 2.0, 100000, 21);
    const auto b = pg_draws(1.0, -2.0, 100000, 22);
    CHECK(testutil::ks2_pvalue(a, b) > 0.01);
}

TEST_CASE("Esscher identity") {
    // (a, b, psi) = (1, 2, 0): e^0 / (1 + e^0)^2 = 2^-2 E[e^0].
    CHECK(std::exp(0.0) / std::pow(1.0 + std::exp(0.0), 2) == std::pow(2.0, -2.0));

    const double a = 1.0, b = 2.0, kappa = a - b / 2.0;
    const auto omega = pg_draws(b, 0.0, 1000000, 31);
    RngStream rng(32);
    for (int rep = 0; rep < 5; ++rep) {
        const double psi = -3.0 + 6.0 * rng.uniform();
        double s = 0.0;
        for (double w : omega) s += std::exp(-0.5 * w * psi * psi);
        const double lhs = std::pow(2.0, -b) * std::exp(kappa * psi) * s / omega.size();
        const double rhs = std::exp(a * psi) / std::pow(1.0 + std::exp(psi), b);
        CHECK(std::abs(lhs / rhs - 1.0) < 0.01);
    }
}

TEST_CASE("PG domain errors") {
    RngStream rng(1);
    CHECK_THROWS_AS(sample_pg(0.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_pg(-1.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_pg(1.0, NAN, rng), DomainError);
}

TEST_CASE("last order statistic") {
    RngStream rng(41);
    std::vector<double> x(100000);
    for (auto& v : x) v = sample_beta_last(2.0, 1.0, rng);
    const auto m = moments(x);
    CHECK(std::abs(m.mean - 1.0) < 3.0 * m.se);

    for (auto& v : x) v = sample_beta_last(1.0, 1e6, rng);
    std::sort(x.begin(), x.end());
    CHECK(x[x.size() / 100] > 0.99999);
    CHECK(x.back() < 1.0);

    for (auto& v : x) v = sample_beta_last(5.0, 3.0, rng);
    CHECK(testutil::ks_pvalue(x, [](double v) { return std::pow(std::clamp(v / 5.0, 0.0, 1.0), 3.0); }) > 0.01);

    for (auto& v : x) v = sample_beta_last(1.5, 0.37, rng);
    CHECK(testutil::ks_pvalue(x, [](double v) { return std::pow(std::clamp(v / 1.5, 0.0, 1.0), 0.37); }) > 0.01);

    CHECK_THROWS_AS(sample_beta_last(0.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_beta_last(1.0, 0.0, rng), DomainError);
}

TEST_CASE("truncated gamma") {
    RngStream rng(51);
    std::vector<double> x(200000);

    for (auto& v : x) v = sample_trunc_gamma(3.0, 2.0, 0.0, rng);
    auto m = moments(x);
    CHECK(std::abs(m.mean - 1.5) < 3.0 * m.se);

    for (auto& v : x) v = sample_trunc_gamma(2.0, 1.0, 1.0, rng);
    m = moments(x);
    const auto dens = [](double t) { return t * std::exp(-t); };
    const double oracle = testutil::simpson([&](double t) { return t * dens(t); }, 1.0, 80.0) /
                          testutil::simpson(dens, 1.0, 80.0);
    CHECK(oracle == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(std::abs(m.mean - oracle) < 1e-2);
    CHECK(*std::min_element(x.begin(), x.end()) >= 1.0);

    // Upper-tail mass ~3.5e-7 beyond tau0 and far beyond both fallbacks.
    for (double tau0 : {17.8, 900.0}) {
        for (int k = 0; k < 10000; ++k) {
            const double v = sample_trunc_gamma(2.0, 1.0, tau0, rng);
            REQUIRE(v >= tau0);
            REQUIRE(std::isfinite(v));
        }
    }
    CHECK_THROWS_AS(sample_trunc_gamma(0.0, 1.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_trunc_gamma(1.0, -1.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_trunc_gamma(1.0, 1.0, -1.0, rng), DomainError);
}

TEST_CASE("univariate truncated normal") {
    RngStream rng(61);
    std::vector<double> x(1000000);
    for (auto& v : x) v = sample_trunc_normal(0.0, 1.0, 3.0, INFINITY, rng);
    const auto m = moments(x);
    const double oracle = testutil::std_normal_pdf(3.0) / (1.0 - testutil::std_normal_cdf(3.0));
    CHECK(oracle == doctest::Approx(3.2831).epsilon(1e-4));
    CHECK(std::abs(m.mean - oracle) < 3.0 * m.se);

    struct Interval {
        double mean, sd, lo, hi;
    };
    const Interval cases[] = {{0, 1, 3, INFINITY},  {0, 1, -INFINITY, -6}, {2, 0.1, -1, 0},      {0, 1, 8, 8.0001},
                              {5, 2, 4.9, 5.1},     {0, 1, 1e-300, 1e-299}, {0, 1e-8, 1, 2},     {-30, 1, 0, INFINITY},
                              {0, 1, -INFINITY, INFINITY}};
    for (const auto& c : cases)
        for (int k = 0; k < 20000; ++k) {
            const double v = sample_trunc_normal(c.mean, c.sd, c.lo, c.hi, rng);
            REQUIRE(v >= c.lo);
            REQUIRE(v < c.hi);
        }
    CHECK_THROWS_AS(sample_trunc_normal(0.0, 1.0, 1.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(sample_trunc_normal(0.0, 0.0, 0.0, 1.0, rng), DomainError);
}

TEST_CASE("truncated multivariate normal") {
    RngStream rng(71);
    const int n = 100000;

    SUBCASE("no finite bounds is an exact MVN draw") {
        Matrix Q(3, 3);
        Q << 4.0, 1.0, 0.5, 1.0, 3.0, -0.7, 0.5, -0.7, 2.0;
        const Vector mean = (Vector(3) << 1.0, -2.0, 0.5).finished();
        Matrix draws(n, 3);
        for (int k = 0; k < n; ++k)
            draws.row(k) = sample_tn_constrained(mean, Q, ConstraintBox::unbounded(3), rng).transpose();
        const Vector mu = draws.colwise().mean().transpose();
        const Matrix centered = draws.rowwise() - mu.transpose();
        const Matrix cov = centered.transpose() * centered / (n - 1.0);
        const Matrix target = Q.inverse();
        CHECK((cov - target).norm() / target.norm() < 0.02);
        CHECK((mu - mean).norm() < 0.02);
    }

    SUBCASE("1-D tail box") {
        ConstraintBox box{Vector::Constant(1, 3.0), Vector::Constant(1, INFINITY)};
        std::vector<double> x(n);
        for (auto& v : x) v = sample_tn_constrained(Vector::Zero(1), Matrix::Identity(1, 1), box, rng)[0];
        const auto m = moments(x);
        CHECK(std::abs(m.mean - 3.2831) < 3.0 * m.se + 5e-5);
    }

    SUBCASE("box on the first coordinate leaves the second N(0, 1)") {
        ConstraintBox box{(Vector(2) << 0.5, -INFINITY).finished(), (Vector(2) << 2.0, INFINITY).finished()};
        std::vector<double> second(n);
        Vector state = (Vector(2) << 1.0, 0.0).finished();
        for (auto& v : second) {
            state = sample_tn_canonical(Matrix::Identity(2, 2), Vector::Zero(2), box, state, rng);
            REQUIRE(box.contains(state));
            v = state[1];
        }
        CHECK(testutil::ks_pvalue(second, testutil::std_normal_cdf) > 0.01);
    }

    SUBCASE("correlated box draws stay inside and match a long reference chain") {
        Matrix Q(2, 2);
        Q << 2.0, 1.2, 1.2, 2.0;
        const Vector h = (Vector(2) << 1.0, -0.5).finished();
        ConstraintBox box{(Vector(2) << 0.2, -INFINITY).finished(), (Vector(2) << 1.5, INFINITY).finished()};
        Vector state = (Vector(2) << 0.5, 0.0).finished();
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            state = sample_tn_canonical(Q, h, box, state, rng, 2);
            REQUIRE(box.contains(state));
            sum += state[0];
        }
        // Marginal of x0 has density prop. to exp(-x0^2 (q00 - q01^2/q11)/2 + x0 (h0 - q01 h1/q11)).
        const double a = Q(0, 0) - Q(0, 1) * Q(0, 1) / Q(1, 1);
        const double b = h[0] - Q(0, 1) * h[1] / Q(1, 1);
        const auto f = [&](double t) { return std::exp(-0.5 * a * t * t + b * t); };
        const double oracle =
            testutil::simpson([&](double t) { return t * f(t); }, 0.2, 1.5) / testutil::simpson(f, 0.2, 1.5);
        CHECK(sum / n == doctest::Approx(oracle).epsilon(0.01));
    }

    SUBCASE("errors") {
        ConstraintBox bad{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
        CHECK_THROWS_AS(bad.check_feasible(), DomainError);
        CHECK_THROWS_AS(sample_tn_constrained(Vector::Zero(1), Matrix::Identity(1, 1), bad, rng), DomainError);
        Matrix notpd(2, 2);
        notpd << 1.0, 2.0, 2.0, 1.0;
        CHECK_THROWS_AS(sample_tn_constrained(Vector::Zero(2), notpd, ConstraintBox::unbounded(2), rng),
                        NumericalError);
    }
}

TEST_CASE("streams are deterministic and distinct") {
    RngStream a(123, 4), b(123, 4), c(123, 5);
    RngStream s1 = a.substream(2), s2 = b.substream(2);
    bool differs = false;
    for (int k = 0; k < 1000; ++k) {
        const double x = sample_pg(1.0, 1.5, a), y = sample_pg(1.0, 1.5, b);
        CHECK(x == y);
        differs |= x != sample_pg(1.0, 1.5, c);
        CHECK(s1.normal() == s2.normal());
    }
    CHECK(differs);
    RngStream d(123, 4);
    CHECK(d.next_u64() != RngStream(124, 4).next_u64());
}

}  // TEST_SUITE
