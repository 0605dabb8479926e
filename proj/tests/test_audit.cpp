#include "opcal/audit.hpp"
#include "opcal/errors.hpp"
#include "opcal/rng.hpp"
#include "opcal/simlab.hpp"

#include <doctest.h>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include <algorithm>
#include <cmath>

using namespace opcal;
using namespace opcal::audit;

namespace {

RegionLabelTable toy_table() {
    ScoreSample s;
    s.items = {{0.3, 0.7, 0}, {0.6, 0.4, 1}, {0.9, 0.1, 1}};
    return tabulate(s, {0.5, 0.5, 1, 1, 1, 1});
}

double oracle_bb_pmf(long x, long m, double a, double b) {
    return boost::math::binomial_coefficient<double>(static_cast<unsigned>(m), static_cast<unsigned>(x)) *
           std::exp(std::log(boost::math::beta(x + a, m - x + b)) - std::log(boost::math::beta(a, b)));
}

// Equal-tailed interval by cumulative scan.
std::pair<long, long> oracle_interval(double level, long m, double a, double b) {
    const double lo_q = (1.0 - level) / 2.0;
    const double hi_q = 1.0 - lo_q;
    double acc = 0.0;
    long lo = -1, hi = -1;
    for (long x = 0; x <= m; ++x) {
        acc += oracle_bb_pmf(x, m, a, b);
        if (lo < 0 && acc >= lo_q) lo = x;
        if (hi < 0 && acc >= hi_q) hi = x;
    }
    if (hi < 0) hi = m;
    return {lo, hi};
}

GridSelection selection(Method method, double alpha, double delta, long n, const Regime& r) {
    return *gridselect::select_index(method, {alpha, delta, n, r});
}

// Refit every fold from scratch: drop item i, re-select at the reduced class size, sort, classify i.
RegionLabelTable naive_loo(const ScoreSample& s, const GridSelection& sel0, const GridSelection& sel1) {
    RegionLabelTable t;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<double> c0, c1;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j == i) continue;
            (s.items[j].label == 0 ? c0 : c1).push_back(s.items[j].label == 0 ? s.items[j].s0 : s.items[j].s1);
        }
        std::sort(c0.begin(), c0.end());
        std::sort(c1.begin(), c1.end());
        auto tau = [](const std::vector<double>& c, const GridSelection& sel) {
            CoverageRequest req = sel.request;
            req.n_cal = static_cast<long>(c.size());
            const long u = gridselect::select_index(sel.method, req)->u;
            return c[c.size() - static_cast<std::size_t>(u)];
        };
        const double t0 = tau(c0, sel0);
        const double t1 = tau(c1, sel1);
        const auto& it = s.items[i];
        const Region r = region_from_bits(it.s0 <= t0, it.s1 <= t1);
        ++t.counts[index(r)][static_cast<std::size_t>(it.label)];
    }
    t.n_total = static_cast<long>(s.size());
    return t;
}

ScoreSample synthetic(const simlab::EnvelopeConfig& cfg, long n, std::uint64_t seed) {
    const auto d = simlab::draw_synthetic(cfg, n, seed, 0);
    return sample_from_probabilities(d.p1, d.labels);
}

} // namespace

TEST_CASE("tabulate the toy audit") {
    const auto t = toy_table();
    CHECK(t.count(Region::R10, 0) == 1);
    CHECK(t.count(Region::R01, 1) == 2);
    CHECK(t.region_count(Region::R11) == 0);
    CHECK(t.region_count(Region::R00) == 0);
    CHECK(t.n_total == 3);
    CHECK(t.prob(Region::R01, 1) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(tabulate(ScoreSample{}, {0.5, 0.5, 1, 1, 1, 1}), EmptyAudit);
}

TEST_CASE("cell probabilities match the closed-form mixture") {
    const simlab::EnvelopeConfig cfg{0.5, 4, 3, 2, 7};
    const Thresholds t{0.6, 0.55, 1, 1, 1, 1};
    const long n = 500;
    const auto table = tabulate(synthetic(cfg, n, 41), t);
    // p1 interval per region under s0 = p1, s1 = 1 - p1 with tau0 + tau1 > 1
    const double lo11 = 1.0 - t.tau1, hi11 = t.tau0;
    auto mass = [&](int y, double a, double b) {
        const double pa = y == 1 ? cfg.a1 : cfg.a0;
        const double pb = y == 1 ? cfg.b1 : cfg.b0;
        return boost::math::ibeta(pa, pb, b) - boost::math::ibeta(pa, pb, a);
    };
    for (int y : {0, 1}) {
        const double py = y == 1 ? cfg.p_class : 1.0 - cfg.p_class;
        const double want[4] = {py * mass(y, 0.0, lo11), py * mass(y, lo11, hi11), py * mass(y, hi11, 1.0), 0.0};
        for (auto r : kRegions) {
            const double p = want[index(r)];
            const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
            INFO("region " << to_string(r) << " y=" << y);
            CHECK(std::abs(table.prob(r, y) - p) <= 3.0 * se);
        }
    }
    // purity of the hedged region against the mixture value
    const double p11_1 = cfg.p_class * mass(1, lo11, hi11);
    const double p11_0 = (1 - cfg.p_class) * mass(0, lo11, hi11);
    const double eta = p11_1 / (p11_0 + p11_1);
    const auto got = purity(table, Region::R11, 1);
    REQUIRE(got.has_value());
    CHECK(std::abs(*got - eta) <= 3.0 * std::sqrt(eta * (1 - eta) / (n * (p11_0 + p11_1))));
}

TEST_CASE("projection and built-in masks") {
    const auto t = RegionLabelTable::from_counts({{{3, 1}, {2, 4}, {1, 6}, {0, 0}}});
    const auto si = Policy::set_inclusion();
    const auto cov = mask_by_name(si, "coverage");
    CHECK(cov.selects(Region::R10, 0));
    CHECK_FALSE(cov.selects(Region::R10, 1));
    CHECK(cov.selects(Region::R11, 0));
    CHECK(cov.selects(Region::R11, 1));
    CHECK(cov.selects(Region::R01, 1));
    CHECK_FALSE(cov.selects(Region::R00, 0));
    CHECK(project(t, cov).count == 3 + 2 + 4 + 6);
    CHECK(project(t, cov).rate == doctest::Approx(15.0 / 17.0));

    const auto q10 = mask_by_name(si, "missed_positive");
    int cells = 0;
    for (auto r : kRegions) cells += q10.selects(r, 0) + q10.selects(r, 1);
    CHECK(cells == 1);
    CHECK(q10.selects(Region::R10, 1));

    const auto abst = mask_by_name(Policy::commit_reject(), "abstention");
    for (int y : {0, 1}) {
        CHECK(abst.selects(Region::R11, y));
        CHECK(abst.selects(Region::R00, y));
        CHECK_FALSE(abst.selects(Region::R10, y));
    }

    KpiMask all{"all", {}};
    for (auto& row : all.cells) row = {true, true};
    CHECK(project(t, all).rate == 1.0);
    const auto ws = mask_by_name(si, "wrong_singleton");
    CHECK(project(RegionLabelTable::from_counts({{{3, 0}, {2, 4}, {0, 6}, {1, 1}}}), ws).count == 0);
    CHECK_THROWS_AS(mask_by_name(si, "nope"), NotFound);
}

TEST_CASE("projection identities") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<std::array<long, 2>, 4> c{};
        for (auto& row : c) row = {static_cast<long>(rng() % 40), static_cast<long>(rng() % 40)};
        c[0][0] += 1;
        const auto t = RegionLabelTable::from_counts(c);
        const auto si = Policy::set_inclusion();
        const auto cov = project(t, mask_by_name(si, "coverage"));
        const auto ws = project(t, mask_by_name(si, "wrong_singleton"));
        const auto ab = project(t, mask_by_name(si, "abstention"));
        CHECK(cov.count == t.n_total - ws.count - ab.count);
        // disjoint union adds
        const auto s0 = mask_by_name(si, "singleton_0");
        const auto s1 = mask_by_name(si, "singleton_1");
        CHECK(project(t, s0.unite(s1)).count == project(t, s0).count + project(t, s1).count);
        CHECK(project(t, s0.unite(s1)).count == project(t, mask_by_name(si, "singleton")).count);
        for (const auto& p : {si, Policy::commit_reject(), Policy::set_exclusion()}) {
            long total = 0;
            for (const auto& m : outcome_masks(p)) total += project(t, m).count;
            CHECK(total == t.n_total);
        }
        long mass = 0;
        for (auto r : kRegions) mass += t.region_count(r);
        CHECK(mass == t.n_total);
    }
}

TEST_CASE("purity") {
    const auto t = RegionLabelTable::from_counts({{{3, 1}, {0, 0}, {1, 9}, {2, 2}}});
    CHECK(*purity(t, Region::R01, 1) == doctest::Approx(0.9));
    CHECK_FALSE(purity(t, Region::R11, 1).has_value());
}

TEST_CASE("two-sample envelopes") {
    auto e = envelope_two_sample(0, 100, 10, 0.95);
    CHECK(e.lo == 0);
    CHECK(e.point == 0.0);
    e = envelope_two_sample(100, 100, 10, 0.95);
    CHECK(e.hi == 10);
    e = envelope_two_sample(50, 500, 100, 0.95);
    const auto [lo, hi] = oracle_interval(0.95, 100, 51, 451);
    CHECK(e.lo == lo);
    CHECK(e.hi == hi);
    CHECK(e.point == doctest::Approx(10.0));
    CHECK(e.source == EnvelopeSource::TwoSample);
    const auto half = envelope_two_sample(50, 500, 100, 0.95, 0.5);
    const auto [hlo, hhi] = oracle_interval(0.95, 100, 50.5, 450.5);
    CHECK(half.lo == hlo);
    CHECK(half.hi == hhi);
    CHECK_THROWS_AS(envelope_two_sample(11, 10, 5, 0.95), DomainError);
    CHECK_THROWS_AS(envelope_two_sample(1, 10, 0, 0.95), DomainError);
}

TEST_CASE("loo envelopes widen with inflation") {
    const LooSummary s{"singleton", 50, 500, {}};
    const auto e1 = envelope_loo(s, 100, 0.95, 1.0);
    const auto ts = envelope_two_sample(50, 500, 100, 0.95);
    CHECK(e1.lo == ts.lo);
    CHECK(e1.hi == ts.hi);
    CHECK(e1.source == EnvelopeSource::LOO);
    const auto e2 = envelope_loo(s, 100, 0.95, 2.0);
    const auto [lo, hi] = oracle_interval(0.95, 100, 26, 226);
    CHECK(e2.lo == lo);
    CHECK(e2.hi == hi);
    CHECK(e2.hi - e2.lo > e1.hi - e1.lo);
    CHECK(e2.point == e1.point);
    long width = -1;
    for (double infl : {1.0, 1.5, 2.0, 4.0, 16.0, 1e6}) {
        const auto e = envelope_loo(s, 100, 0.95, infl);
        CHECK(e.hi - e.lo >= width);
        width = e.hi - e.lo;
    }
    const auto diffuse = envelope_loo(s, 100, 0.95, 1e9);
    const auto [dlo, dhi] = oracle_interval(0.95, 100, 1.0, 1.0);
    CHECK(diffuse.lo == dlo);
    CHECK(diffuse.hi == dhi);
    CHECK_THROWS_AS(envelope_loo(s, 100, 0.95, 0.5), DomainError);
}

TEST_CASE("loo counts equal a naive per-fold refit") {
    ScoreSample s;
    s.items = {{0.2, 0.8, 0}, {0.35, 0.65, 0}, {0.7, 0.3, 0}, {0.55, 0.45, 1}, {0.1, 0.9, 1}, {0.8, 0.2, 1}};
    s.prob_normalized = true;
    const auto sel0 = selection(Method::Nominal, 0.3, 0.1, 3, Regime::infinite());
    const auto sel1 = selection(Method::Nominal, 0.3, 0.1, 3, Regime::infinite());
    CHECK(loo_table(s, sel0, sel1) == naive_loo(s, sel0, sel1));
    const auto masks = builtin_masks(Policy::set_inclusion());
    const auto sums = loo_counts(s, sel0, sel1, masks);
    const auto naive = naive_loo(s, sel0, sel1);
    for (std::size_t j = 0; j < masks.size(); ++j) {
        CHECK(sums[j].n == 6);
        CHECK(sums[j].n_loo == project(naive, masks[j]).count);
    }

    // larger random sample with SSBC re-selection at the reduced size
    const auto big = synthetic({0.5, 4, 3, 2, 7}, 120, 77);
    const auto b0 = selection(Method::SSBC, 0.2, 0.2, big.class_count(0), Regime::finite(50));
    const auto b1 = selection(Method::SSBC, 0.2, 0.2, big.class_count(1), Regime::finite(50));
    CHECK(loo_table(big, b0, b1) == naive_loo(big, b0, b1));
}

TEST_CASE("degenerate constant-score folds") {
    ScoreSample s;
    for (int i = 0; i < 5; ++i) s.items.push_back({0.3, 0.7, i % 2});
    s.prob_normalized = true;
    const auto sel0 = selection(Method::Nominal, 0.3, 0.1, 3, Regime::infinite());
    const auto sel1 = selection(Method::Nominal, 0.3, 0.1, 2, Regime::infinite());
    const auto t = loo_table(s, sel0, sel1);
    // every fold puts every item in r11 or r10 the same way as the full fit
    long same = 0;
    for (auto r : kRegions) same = std::max(same, t.region_count(r));
    CHECK(same == 5);
}

TEST_CASE("freeze mode keeps the index") {
    const auto big = synthetic({0.5, 4, 3, 2, 7}, 80, 5);
    const auto s0 = selection(Method::Nominal, 0.2, 0.2, big.class_count(0), Regime::infinite());
    const auto s1 = selection(Method::Nominal, 0.2, 0.2, big.class_count(1), Regime::infinite());
    const auto t = loo_table(big, s0, s1, LooIndexMode::Freeze);
    CHECK(t.n_total == 80);
}

TEST_CASE("hoeffding guardrail") {
    auto h = hoeffding_envelope(0.5, 100, 0.05);
    CHECK(h.eps == doctest::Approx(0.1358).epsilon(1e-3));
    CHECK(h.lo == doctest::Approx(0.5 - h.eps));
    CHECK(h.hi == doctest::Approx(0.5 + h.eps));
    CHECK(hoeffding_envelope(0.0, 40, 0.05).lo == 0.0);
    const long m = 250;
    h = hoeffding_envelope(0.3, m, 2.0 * std::exp(-2.0 * m * 0.01));
    CHECK(h.eps == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("loo variance diagnostic") {
    CHECK(loo_variance_diag(std::vector<double>(7, 0.3)).var == doctest::Approx(0.0));
    const std::vector<double> two = {0.0, 1.0};
    CHECK(loo_variance_diag(two).mean == 0.5);
    CHECK(loo_variance_diag(two).var == 0.5);
    Rng rng(2);
    std::vector<double> f;
    for (int i = 0; i < 10; ++i) f.push_back(rng.uniform());
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= 10;
    double ss = 0.0;
    for (double v : f) ss += (v - mean) * (v - mean);
    const auto d = loo_variance_diag(f);
    CHECK(d.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(d.var == doctest::Approx(ss / 9).epsilon(1e-12));
    CHECK_THROWS_AS(loo_variance_diag(std::vector<double>{0.1}), DomainError);
}

TEST_CASE("fold rates come back when requested") {
    const auto big = synthetic({0.5, 4, 3, 2, 7}, 60, 13);
    const auto s0 = selection(Method::Nominal, 0.2, 0.2, big.class_count(0), Regime::infinite());
    const auto s1 = selection(Method::Nominal, 0.2, 0.2, big.class_count(1), Regime::infinite());
    const auto masks = builtin_masks(Policy::set_inclusion());
    const auto sums = loo_counts(big, s0, s1, masks, LooIndexMode::Rederive, true);
    for (const auto& s : sums) {
        CHECK(s.fold_rates.size() == 60);
        for (double r : s.fold_rates) CHECK((r >= 0.0 && r <= 1.0));
    }
}
