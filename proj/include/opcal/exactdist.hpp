#pragma once

#include <utility>

namespace opcal::exactdist {

struct BetaParams {
    double a;
    double b;
};

struct BetaBinomialParams {
    long m;
    double a;
    double b;
};

struct CountInterval {
    long lo;
    long hi;

    bool contains(long x) const noexcept { return lo <= x && x <= hi; }
    friend bool operator==(const CountInterval&, const CountInterval&) = default;
};

/// log Gamma(x) for x > 0 (Lanczos approximation, g = 7).
double log_gamma(double x);

/// log B(a, b), evaluated without cancellation when either shape is large.
double log_beta(double a, double b);

/// Regularized incomplete beta I_t(a, b).
double beta_cdf(double t, BetaParams p);

/// log P(S = x) for S ~ BetaBinomial(m; a, b); -inf outside the support.
double betabinom_log_pmf(long x, BetaBinomialParams p);
double betabinom_pmf(long x, BetaBinomialParams p);

/// P(S <= x). Summed from whichever tail of the support is nearer to x.
double betabinom_cdf(long x, BetaBinomialParams p);

/// P(S >= x), the complement computed from the same nearer-tail sum.
double betabinom_sf(long x, BetaBinomialParams p);

/// Smallest x in [0, m] with betabinom_cdf(x) >= q, for q in (0, 1).
long betabinom_quantile(double q, BetaBinomialParams p);

/// Equal-tailed interval [quantile((1-level)/2), quantile(1-(1-level)/2)].
CountInterval predictive_interval(double level, BetaBinomialParams p);

} // namespace opcal::exactdist
