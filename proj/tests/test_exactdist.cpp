#include "opcal/errors.hpp"
#include "opcal/exactdist.hpp"

#include <doctest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <random>

using namespace opcal;
using namespace opcal::exactdist;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// pmf in 50 significant digits: C(m, x) B(x + a, m - x + b) / B(a, b)
Big oracle_pmf(long x, long m, double a, double b) {
    using boost::math::lgamma;
    const Big A(a);
    const Big B(b);
    const Big lc = lgamma(Big(m + 1)) - lgamma(Big(x + 1)) - lgamma(Big(m - x + 1));
    const Big lb1 = lgamma(Big(x) + A) + lgamma(Big(m - x) + B) - lgamma(Big(m) + A + B);
    const Big lb0 = lgamma(A) + lgamma(B) - lgamma(A + B);
    return exp(lc + lb1 - lb0);
}

double oracle_cdf(long x, long m, double a, double b) {
    Big s = 0;
    for (long i = 0; i <= x && i <= m; ++i) s += oracle_pmf(i, m, a, b);
    return static_cast<double>(s);
}

long oracle_quantile(double q, long m, double a, double b) {
    Big s = 0;
    for (long x = 0; x <= m; ++x) {
        s += oracle_pmf(x, m, a, b);
        if (s >= Big(q)) return x;
    }
    return m;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

} // namespace

TEST_CASE("beta_cdf reference points") {
    CHECK(beta_cdf(0.9, {95, 6}) == doctest::Approx(0.057576886487033887613).epsilon(1e-13));
    CHECK(std::round(beta_cdf(0.9, {95, 6}) * 1e4) / 1e4 == doctest::Approx(0.0576));
    CHECK(beta_cdf(0.37, {1, 1}) == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(beta_cdf(0.5, {3, 3}) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(beta_cdf(0.2, {0.5, 5}) == doctest::Approx(0.85507239459591959242).epsilon(1e-13));
    CHECK(beta_cdf(0.93, {30.5, 2.25}) == doctest::Approx(0.40927909204646372931).epsilon(1e-13));
    CHECK(beta_cdf(0.0, {2, 3}) == 0.0);
    CHECK(beta_cdf(1.0, {2, 3}) == 1.0);
}

TEST_CASE("beta_cdf rejects bad arguments") {
    CHECK_THROWS_AS(beta_cdf(-0.1, {1, 1}), DomainError);
    CHECK_THROWS_AS(beta_cdf(1.1, {1, 1}), DomainError);
    CHECK_THROWS_AS(beta_cdf(0.5, {0, 1}), DomainError);
    CHECK_THROWS_AS(beta_cdf(0.5, {1, -2}), DomainError);
}

TEST_CASE("beta_cdf matches Boost ibeta across shapes up to 1e6") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> logshape(std::log(0.5), std::log(5e5));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double a = std::exp(logshape(gen));
        const double b = std::exp(logshape(gen));
        // concentrate t near the mean so both tails are exercised with non-negligible values
        const double mean = a / (a + b);
        const double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1)));
        const double t = std::clamp(mean + sd * (6.0 * unit(gen) - 3.0), 1e-12, 1.0 - 1e-12);
        const double want = boost::math::ibeta(a, b, t);
        if (want < 1e-280) continue;
        worst = std::max(worst, rel_err(beta_cdf(t, {a, b}), want));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("beta_cdf is monotone in t") {
    for (const BetaParams p : {BetaParams{95, 6}, BetaParams{0.5, 0.5}, BetaParams{2000, 3}}) {
        double prev = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double v = beta_cdf(i / 1000.0, p);
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("log_gamma and log_beta against the standard library") {
    for (double x : {0.1, 0.5, 1.0, 2.5, 10.0, 123.4, 1e5}) {
        CHECK(log_gamma(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
    }
    CHECK(log_beta(95, 6) == doctest::Approx(std::lgamma(95.0) + std::lgamma(6.0) - std::lgamma(101.0)).epsilon(1e-13));
    CHECK(log_beta(5e5, 3) ==
          doctest::Approx(std::log(boost::math::beta(5e5, 3.0))).epsilon(1e-12));
}

TEST_CASE("Beta-Binomial table point and uniform special case") {
    // violation event for alpha* = 0.10, m = 100 is S_100 <= 89
    CHECK(betabinom_cdf(89, {100, 95, 6}) == doctest::Approx(0.0956359600089).epsilon(1e-9));
    for (long k = 0; k <= 5; ++k) {
        CHECK(betabinom_cdf(k, {5, 1, 1}) == doctest::Approx((k + 1) / 6.0).epsilon(1e-14));
    }
    CHECK(betabinom_cdf(-1, {5, 1, 1}) == 0.0);
    CHECK(betabinom_cdf(5, {5, 1, 1}) == 1.0);
    CHECK(betabinom_cdf(9, {5, 1, 1}) == 1.0);
    CHECK_THROWS_AS(betabinom_cdf(2, {5, 0, 1}), DomainError);
}

TEST_CASE("Beta-Binomial cdf against 50-digit pmf summation") {
    CHECK(betabinom_cdf(42, {100, 51, 451}) == doctest::Approx(oracle_cdf(42, 100, 51, 451)).epsilon(1e-13));
    CHECK(betabinom_cdf(8, {100, 51, 451}) == doctest::Approx(0.32341768267592553).epsilon(1e-12));
    CHECK(betabinom_cdf(12, {100, 51, 451}) == doctest::Approx(0.76926280053977980).epsilon(1e-12));

    std::mt19937_64 gen(5);
    std::uniform_int_distribution<long> mdist(0, 200);
    std::uniform_real_distribution<double> shape(0.05, 50.0);
    for (int i = 0; i < 40; ++i) {
        const long m = mdist(gen);
        const double a = shape(gen);
        const double b = shape(gen);
        std::uniform_int_distribution<long> xdist(0, m);
        const long x = xdist(gen);
        CHECK(std::abs(betabinom_cdf(x, {m, a, b}) - oracle_cdf(x, m, a, b)) < 1e-12);
        CHECK(std::abs(betabinom_sf(x, {m, a, b}) - (1.0 - oracle_cdf(x - 1, m, a, b))) < 1e-12);
    }
}

TEST_CASE("Beta-Binomial pmf normalizes and is mirror-symmetric") {
    for (const BetaBinomialParams p : {BetaBinomialParams{100, 95, 6}, BetaBinomialParams{37, 0.3, 7.5},
                                       BetaBinomialParams{500, 1001, 1}, BetaBinomialParams{0, 2, 2}}) {
        double total = 0.0;
        for (long x = 0; x <= p.m; ++x) {
            total += betabinom_pmf(x, p);
            CHECK(betabinom_pmf(x, p) == doctest::Approx(betabinom_pmf(p.m - x, {p.m, p.b, p.a})).epsilon(1e-12));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(betabinom_pmf(-1, p) == 0.0);
        CHECK(betabinom_pmf(p.m + 1, p) == 0.0);
    }
}

TEST_CASE("mixture identity: Binomial cdf integrated against the Beta density") {
    using boost::math::quadrature::gauss_kronrod;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> shape(1.0, 40.0);
    std::uniform_int_distribution<long> mdist(1, 200);
    for (int i = 0; i < 12; ++i) {
        const long m = mdist(gen);
        const double a = shape(gen);
        const double b = shape(gen);
        std::uniform_int_distribution<long> xdist(0, m - 1);
        const long x = xdist(gen);
        const boost::math::beta_distribution<double> beta(a, b);
        auto integrand = [&](double p) {
            if (p <= 0.0 || p >= 1.0) return 0.0;
            return boost::math::cdf(boost::math::binomial_distribution<double>(static_cast<double>(m), p),
                                    static_cast<double>(x)) *
                   boost::math::pdf(beta, p);
        };
        const double q = gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-13);
        CHECK(std::abs(betabinom_cdf(x, {m, a, b}) - q) < 1e-8);
    }
}

TEST_CASE("S_m / m approaches the Beta law as m grows") {
    const double a = 9.5;
    const double b = 2.5;
    const double t = 0.8;
    const double limit = beta_cdf(t, {a, b});
    double prev_gap = 1.0;
    for (long m : {100L, 1000L, 10000L}) {
        // P(S_m / m < t)
        const double v = betabinom_cdf(static_cast<long>(std::ceil(t * m)) - 1, {m, a, b});
        const double gap = std::abs(v - limit);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-3);
}

TEST_CASE("quantile inverse consistency") {
    CHECK(betabinom_quantile(0.5, {5, 1, 1}) == 2);
    CHECK(betabinom_quantile(0.999999, {5, 1, 1}) == 5);
    CHECK(betabinom_quantile(0.999999, {100, 2, 2}) == 100);
    CHECK(betabinom_quantile(0.025, {100, 51, 451}) == 4);
    CHECK(betabinom_quantile(0.025, {100, 51, 451}) == oracle_quantile(0.025, 100, 51, 451));
    CHECK(betabinom_quantile(0.975, {100, 51, 451}) == 17);
    CHECK_THROWS_AS(betabinom_quantile(0.0, {5, 1, 1}), DomainError);
    CHECK_THROWS_AS(betabinom_quantile(1.0, {5, 1, 1}), DomainError);

    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> shape(0.2, 60.0);
    std::uniform_real_distribution<double> unit(0.001, 0.999);
    for (int i = 0; i < 200; ++i) {
        const BetaBinomialParams p{static_cast<long>(unit(gen) * 300), shape(gen), shape(gen)};
        const double q = unit(gen);
        const long x = betabinom_quantile(q, p);
        CHECK(betabinom_cdf(x, p) >= q);
        if (x > 0) CHECK(betabinom_cdf(x - 1, p) < q);
    }
}

TEST_CASE("predictive intervals") {
    CHECK(predictive_interval(0.95, {5, 1, 1}) == CountInterval{0, 5});
    CHECK(predictive_interval(0.95, {100, 51, 451}) ==
          CountInterval{oracle_quantile(0.025, 100, 51, 451), oracle_quantile(0.975, 100, 51, 451)});
    CHECK(predictive_interval(0.95, {100, 26, 226}) == CountInterval{4, 18});
    CHECK(predictive_interval(0.95, {1000, 1001, 1}) == CountInterval{995, 1000});
    CHECK(predictive_interval(0.95, {1000, 1001, 1}).lo == oracle_quantile(0.025, 1000, 1001, 1));
    CHECK(predictive_interval(0.95, {10, 1, 101}) == CountInterval{0, 1});
    CHECK(predictive_interval(0.95, {100, 1, 1}) == CountInterval{2, 98});

    // discrete conservatism: the interval carries at least the requested mass
    for (const BetaBinomialParams p : {BetaBinomialParams{100, 51, 451}, BetaBinomialParams{40, 3, 3},
                                       BetaBinomialParams{250, 0.7, 12}}) {
        const auto iv = predictive_interval(0.9, p);
        CHECK(betabinom_cdf(iv.hi, p) - betabinom_cdf(iv.lo - 1, p) >= 0.9);
    }
    CHECK_THROWS_AS(predictive_interval(1.0, {5, 1, 1}), DomainError);
}
