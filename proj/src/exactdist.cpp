#include "opcal/exactdist.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace opcal::exactdist {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_shapes(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("beta shapes must be positive and finite");
    }
}

void check_params(const BetaBinomialParams& p) {
    if (p.m < 0) {
        throw DomainError("beta-binomial window size must be nonnegative");
    }
    check_shapes(p.a, p.b);
}

// Stirling remainder: log Gamma(x) - [(x - 1/2) log x - x + log sqrt(2 pi)], x >= 10.
double stirling_remainder(double x) {
    const double r = 1.0 / (x * x);
    return (1.0 / 12.0 +
            r * (-1.0 / 360.0 + r * (1.0 / 1260.0 + r * (-1.0 / 1680.0 + r * (1.0 / 1188.0 + r * (-691.0 / 360360.0)))))) /
           x;
}

// e - log(1 + e), accurate near e = 0.
double log1p_gap(double e) {
    if (std::abs(e) < 0.1) {
        // sum_{j>=2} (-1)^j e^j / j
        double term = e * e;
        double sum = 0.0;
        for (int j = 2; j < 40; ++j) {
            const double add = term / j;
            sum += (j % 2 == 0) ? add : -add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) {
                break;
            }
            term *= e;
        }
        return sum;
    }
    return e - std::log1p(e);
}

// log( x^a y^b / B(a, b) ) with y = 1 - x supplied separately to keep precision.
double log_power_term(double a, double b, double x, double y) {
    if (std::min(a, b) >= 10.0) {
        const double s = a + b;
        const double lambda = (a <= b) ? a - s * x : s * y - b;
        const double u = log1p_gap(-lambda / a);
        const double v = log1p_gap(lambda / b);
        const double corr = stirling_remainder(a) + stirling_remainder(b) - stirling_remainder(s);
        return -(a * u + b * v) + 0.5 * std::log(a * b / s) - kLogSqrt2Pi - corr;
    }
    const double log_x = (x < 0.5) ? std::log(x) : std::log1p(-y);
    const double log_y = (y < 0.5) ? std::log(y) : std::log1p(-x);
    return a * log_x + b * log_y - log_beta(a, b);
}

// Continued fraction for I_x(a, b) (modified Lentz); converges fast for x < a / (a + b).
// Near x = (a + 1) / (a + b) the leading denominators 1 - (a + b) x / (a + 1) cancel and
// the fraction is dominated by their reciprocals, so the recursion runs in extended
// precision; the result is still rounded to double.
double incbeta_fraction(double a_in, double b_in, double x_in, double y_in) {
    using real = long double;
    constexpr real kTiny = 1e-300L;
    constexpr real kEps = 1e-18L;
    const int max_iter = 1000 + static_cast<int>(20.0 * std::sqrt(std::max(a_in, b_in)));

    const real a = a_in;
    const real b = b_in;
    // x = 1 - y is rounded in double; rebuild it from y when that is the exact input.
    const real x = (x_in < 0.5) ? static_cast<real>(x_in) : 1.0L - static_cast<real>(y_in);
    const real qab = a + b;
    const real qap = a + 1.0L;
    const real qam = a - 1.0L;
    real c = 1.0L;
    real d = 1.0L - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0L / d;
    real h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const real m2 = 2.0L * m;
        real aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0L + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0L + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0L / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0L + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0L + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0L / d;
        const real del = d * c;
        h *= del;
        if (std::abs(del - 1.0L) < kEps) {
            break;
        }
    }
    return static_cast<double>(h);
}

// I_x(a, b) with no tail switch; caller guarantees x <= a / (a + b).
double incbeta_lower(double a, double b, double x, double y) {
    return std::exp(log_power_term(a, b, x, y)) * incbeta_fraction(a, b, x, y) / a;
}

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

double pmf_range_sum(long from, long to, const BetaBinomialParams& p) {
    CompensatedSum acc;
    if (from <= to) {
        for (long x = from; x <= to; ++x) acc.add(betabinom_pmf(x, p));
    }
    return acc.value();
}

double pmf_range_sum_desc(long from, long to, const BetaBinomialParams& p) {
    CompensatedSum acc;
    for (long x = to; x >= from; --x) acc.add(betabinom_pmf(x, p));
    return acc.value();
}

double mean_count(const BetaBinomialParams& p) { return static_cast<double>(p.m) * p.a / (p.a + p.b); }

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("log_gamma requires a positive finite argument");
    }
    if (x < 0.5) {
        return log_gamma(x + 1.0) - std::log(x);
    }
    static constexpr std::array<double, 9> kCoef = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double kG = 7.0;
    const double z = x - 1.0;
    double series = kCoef[0];
    for (std::size_t i = 1; i < kCoef.size(); ++i) {
        series += kCoef[i] / (z + static_cast<double>(i));
    }
    const double t = z + kG + 0.5;
    return kLogSqrt2Pi + (z + 0.5) * std::log(t) - t + std::log(series);
}

double log_beta(double a, double b) {
    check_shapes(a, b);
    const double p = std::min(a, b);
    const double q = std::max(a, b);
    const double s = p + q;
    if (p >= 10.0) {
        const double corr = stirling_remainder(p) + stirling_remainder(q) - stirling_remainder(s);
        return -0.5 * std::log(q) + kLogSqrt2Pi + corr + (p - 0.5) * std::log(p / s) + q * std::log1p(-p / s);
    }
    if (q >= 10.0) {
        const double corr = stirling_remainder(q) - stirling_remainder(s);
        return log_gamma(p) + corr + p - p * std::log(s) + (q - 0.5) * std::log1p(-p / s);
    }
    return log_gamma(p) + log_gamma(q) - log_gamma(s);
}

double beta_cdf(double t, BetaParams p) {
    check_shapes(p.a, p.b);
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("beta_cdf argument must lie in [0, 1]");
    }
    if (t == 0.0) return 0.0;
    if (t == 1.0) return 1.0;
    if (t > p.a / (p.a + p.b)) {
        const double upper = incbeta_lower(p.b, p.a, 1.0 - t, t);
        return std::clamp(1.0 - upper, 0.0, 1.0);
    }
    return std::clamp(incbeta_lower(p.a, p.b, t, 1.0 - t), 0.0, 1.0);
}

double betabinom_log_pmf(long x, BetaBinomialParams p) {
    check_params(p);
    if (x < 0 || x > p.m) {
        return -std::numeric_limits<double>::infinity();
    }
    const double xd = static_cast<double>(x);
    const double rest = static_cast<double>(p.m - x);
    // C(m, x) = 1 / ((m + 1) B(x + 1, m - x + 1))
    return -std::log(static_cast<double>(p.m) + 1.0) - log_beta(xd + 1.0, rest + 1.0) +
           log_beta(xd + p.a, rest + p.b) - log_beta(p.a, p.b);
}

double betabinom_pmf(long x, BetaBinomialParams p) { return std::exp(betabinom_log_pmf(x, p)); }

double betabinom_cdf(long x, BetaBinomialParams p) {
    check_params(p);
    if (x < 0) return 0.0;
    if (x >= p.m) return 1.0;
    if (static_cast<double>(x) < mean_count(p)) {
        return std::min(1.0, pmf_range_sum(0, x, p));
    }
    return std::clamp(1.0 - pmf_range_sum_desc(x + 1, p.m, p), 0.0, 1.0);
}

double betabinom_sf(long x, BetaBinomialParams p) {
    check_params(p);
    if (x <= 0) return 1.0;
    if (x > p.m) return 0.0;
    if (static_cast<double>(x - 1) >= mean_count(p)) {
        return std::min(1.0, pmf_range_sum_desc(x, p.m, p));
    }
    return std::clamp(1.0 - pmf_range_sum(0, x - 1, p), 0.0, 1.0);
}

long betabinom_quantile(double q, BetaBinomialParams p) {
    check_params(p);
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("quantile level must lie in (0, 1)");
    }
    if (betabinom_cdf(0, p) >= q) {
        return 0;
    }
    // invariant: cdf(below) < q <= cdf(above)
    long below = 0;
    long above = p.m;
    long step = 1;
    while (below + step < p.m) {
        const long probe = below + step;
        if (betabinom_cdf(probe, p) >= q) {
            above = probe;
            break;
        }
        below = probe;
        step *= 2;
    }
    while (above - below > 1) {
        const long mid = below + (above - below) / 2;
        if (betabinom_cdf(mid, p) >= q) {
            above = mid;
        } else {
            below = mid;
        }
    }
    return above;
}

CountInterval predictive_interval(double level, BetaBinomialParams p) {
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("interval level must lie in (0, 1)");
    }
    const double tail = 0.5 * (1.0 - level);
    return {betabinom_quantile(tail, p), betabinom_quantile(1.0 - tail, p)};
}

} // namespace opcal::exactdist
