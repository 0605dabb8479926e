#include "opcal/audit.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace opcal {

RegionLabelTable RegionLabelTable::from_counts(const std::array<std::array<long, 2>, 4>& counts) {
    RegionLabelTable t;
    t.counts = counts;
    for (const auto& row : counts) {
        for (long c : row) {
            if (c < 0) throw DomainError("region-label counts must be nonnegative");
            t.n_total += c;
        }
    }
    return t;
}

double RegionLabelTable::prob(Region r, int y) const noexcept {
    return n_total > 0 ? static_cast<double>(count(r, y)) / static_cast<double>(n_total) : 0.0;
}

double RegionLabelTable::mass(Region r) const noexcept {
    return n_total > 0 ? static_cast<double>(region_count(r)) / static_cast<double>(n_total) : 0.0;
}

long RegionLabelTable::label_count(int y) const noexcept {
    long total = 0;
    for (Region r : kRegions) total += count(r, y);
    return total;
}

bool KpiMask::any() const noexcept {
    for (const auto& row : cells) {
        if (row[0] || row[1]) return true;
    }
    return false;
}

KpiMask KpiMask::unite(const KpiMask& other) const {
    KpiMask out{name + "+" + other.name, cells};
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t y = 0; y < 2; ++y) out.cells[r][y] = cells[r][y] || other.cells[r][y];
    }
    return out;
}

std::string to_string(EnvelopeSource s) {
    switch (s) {
    case EnvelopeSource::TwoSample: return "two_sample";
    case EnvelopeSource::LOO: return "loo";
    case EnvelopeSource::Hoeffding: return "hoeffding";
    }
    return "?";
}

namespace audit {

namespace {

KpiMask build_mask(std::string name, const Policy& policy, const std::function<bool(LabelSet, int)>& pick) {
    KpiMask m{std::move(name), {}};
    for (Region r : kRegions) {
        for (int y = 0; y < 2; ++y) m.cells[index(r)][static_cast<std::size_t>(y)] = pick(policy(r), y);
    }
    return m;
}

void check_probability(double level, const char* what) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError(std::string(what) + " must lie in (0, 1)");
}

// Order statistics of one class, with the per-fold replacement threshold.
struct ClassFolds {
    std::vector<double> sorted;
    long fold_k = 0; // order-statistic index after removing one item

    double threshold_without(double score) const {
        const auto pos = static_cast<long>(std::lower_bound(sorted.begin(), sorted.end(), score) - sorted.begin());
        const long j = fold_k - 1; // 0-based index in the reduced list
        return j < pos ? sorted[static_cast<std::size_t>(j)] : sorted[static_cast<std::size_t>(j + 1)];
    }
};

ClassFolds prepare_folds(const ScoreSample& sample, int y, const GridSelection& sel, LooIndexMode mode) {
    ClassFolds f;
    f.sorted = conformal::class_scores(sample, y);
    std::sort(f.sorted.begin(), f.sorted.end());
    const long n = static_cast<long>(f.sorted.size());
    if (n == 0) {
        return f;
    }
    const long reduced = n - 1;
    if (reduced < 1) {
        throw InsufficientClassData(y, reduced, 1);
    }
    long u = sel.u;
    if (mode == LooIndexMode::Rederive) {
        CoverageRequest req = sel.request;
        req.n_cal = reduced;
        const auto again = gridselect::select_index(sel.method, req);
        if (!again) {
            throw InsufficientClassData(y, reduced, n);
        }
        u = again->u;
    }
    if (u > reduced) {
        throw InsufficientClassData(y, reduced, u);
    }
    f.fold_k = reduced + 1 - u;
    return f;
}

} // namespace

RegionLabelTable tabulate(const ScoreSample& sample, const Thresholds& t) {
    if (sample.empty()) {
        throw EmptyAudit();
    }
    RegionLabelTable table;
    for (const auto& it : sample.items) {
        if (it.label != 0 && it.label != 1) throw DomainError("audit label outside {0,1}");
        ++table.counts[index(conformal::region_of(it.s0, it.s1, t))][static_cast<std::size_t>(it.label)];
    }
    table.n_total = static_cast<long>(sample.size());
    return table;
}

Projection project(const RegionLabelTable& table, const KpiMask& mask) {
    long count = 0;
    for (Region r : kRegions) {
        for (int y = 0; y < 2; ++y) {
            if (mask.selects(r, y)) count += table.count(r, y);
        }
    }
    const double rate = table.n_total > 0 ? static_cast<double>(count) / static_cast<double>(table.n_total) : 0.0;
    return {count, rate};
}

std::vector<KpiMask> outcome_masks(const Policy& policy) {
    std::vector<KpiMask> out;
    const std::pair<const char*, LabelSet> sets[] = {
        {"set0", LabelSet::only(0)}, {"set1", LabelSet::only(1)}, {"set01", LabelSet::both()}, {"empty", LabelSet::empty()}};
    for (const auto& [prefix, target] : sets) {
        for (int label = 0; label < 2; ++label) {
            out.push_back(build_mask(std::string(prefix) + "_y" + std::to_string(label), policy,
                                     [target, label](LabelSet s, int y) { return s == target && y == label; }));
        }
    }
    return out;
}

std::vector<KpiMask> builtin_masks(const Policy& policy) {
    std::vector<KpiMask> out;
    out.push_back(build_mask("coverage", policy, [](LabelSet s, int y) { return s.contains(y); }));
    out.push_back(build_mask("singleton_0", policy, [](LabelSet s, int) { return s == LabelSet::only(0); }));
    out.push_back(build_mask("singleton_1", policy, [](LabelSet s, int) { return s == LabelSet::only(1); }));
    out.push_back(build_mask("singleton", policy, [](LabelSet s, int) { return s.size() == 1; }));
    out.push_back(build_mask("doublet", policy, [](LabelSet s, int) { return s.size() == 2; }));
    out.push_back(build_mask("abstention", policy, [](LabelSet s, int) { return s.size() == 0; }));
    out.push_back(build_mask("wrong_singleton", policy,
                             [](LabelSet s, int y) { return s.size() == 1 && !s.contains(y); }));
    out.push_back(build_mask("missed_positive", policy,
                             [](LabelSet s, int y) { return s == LabelSet::only(0) && y == 1; }));
    out.push_back(build_mask("hedged_positive", policy,
                             [](LabelSet s, int y) { return s == LabelSet::both() && y == 1; }));
    for (auto& m : outcome_masks(policy)) out.push_back(std::move(m));
    return out;
}

KpiMask mask_by_name(const Policy& policy, const std::string& name) {
    for (auto& m : builtin_masks(policy)) {
        if (m.name == name) return m;
    }
    throw NotFound("unknown KPI '" + name + "'");
}

std::optional<double> purity(const RegionLabelTable& table, Region region, int label) {
    const long total = table.region_count(region);
    if (total == 0) {
        return std::nullopt;
    }
    return static_cast<double>(table.count(region, label)) / static_cast<double>(total);
}

PredictiveEnvelope envelope_from_counts(double count, double n, long m, double level, double infl, double offset,
                                        EnvelopeSource source, std::string kpi) {
    check_probability(level, "envelope level");
    if (m < 1) throw DomainError("window size must be >= 1");
    if (!(n > 0.0)) throw DomainError("envelope sample size must be positive");
    if (!(count >= 0.0 && count <= n)) throw DomainError("envelope count must lie in [0, n]");
    if (!(infl >= 1.0)) throw DomainError("inflation must be >= 1");
    if (!(offset > 0.0)) throw DomainError("prior offset must be positive");
    const double n_eff = n / infl;
    const double k_eff = count / infl;
    const exactdist::BetaBinomialParams law{m, k_eff + offset, (n_eff - k_eff) + offset};
    const auto iv = exactdist::predictive_interval(level, law);
    PredictiveEnvelope env;
    env.kpi = std::move(kpi);
    env.m = m;
    env.point = static_cast<double>(m) * count / n;
    env.lo = iv.lo;
    env.hi = iv.hi;
    env.level = level;
    env.source = source;
    env.infl = infl;
    env.offset = offset;
    return env;
}

PredictiveEnvelope envelope_two_sample(long count, long n_audit, long m, double level, double offset,
                                       std::string kpi) {
    if (n_audit < 1) throw DomainError("audit size must be >= 1");
    if (count < 0 || count > n_audit) throw DomainError("audit count must lie in [0, n_audit]");
    return envelope_from_counts(static_cast<double>(count), static_cast<double>(n_audit), m, level, 1.0, offset,
                                EnvelopeSource::TwoSample, std::move(kpi));
}

RegionLabelTable loo_table(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1,
                           LooIndexMode mode) {
    if (sample.empty()) {
        throw EmptyAudit();
    }
    const Thresholds full = conformal::fit_thresholds(sample, sel0, sel1);
    const ClassFolds folds[2] = {prepare_folds(sample, 0, sel0, mode), prepare_folds(sample, 1, sel1, mode)};
    RegionLabelTable table;
    for (const auto& it : sample.items) {
        Thresholds t = full;
        if (it.label == 0) {
            t.tau0 = folds[0].threshold_without(it.s0);
        } else {
            t.tau1 = folds[1].threshold_without(it.s1);
        }
        ++table.counts[index(conformal::region_of(it.s0, it.s1, t))][static_cast<std::size_t>(it.label)];
    }
    table.n_total = static_cast<long>(sample.size());
    return table;
}

std::vector<LooSummary> loo_counts(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1,
                                   std::span<const KpiMask> masks, LooIndexMode mode, bool with_fold_rates) {
    const RegionLabelTable table = loo_table(sample, sel0, sel1, mode);
    std::vector<LooSummary> out;
    out.reserve(masks.size());
    for (const auto& mask : masks) {
        out.push_back({mask.name, project(table, mask).count, table.n_total, {}});
    }
    if (!with_fold_rates) {
        return out;
    }
    // Fold rate: KPI rate over the n - 1 remaining items under the fold-i rule.
    const Thresholds full = conformal::fit_thresholds(sample, sel0, sel1);
    const ClassFolds folds[2] = {prepare_folds(sample, 0, sel0, mode), prepare_folds(sample, 1, sel1, mode)};
    const auto n = sample.size();
    for (auto& s : out) s.fold_rates.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& held = sample.items[i];
        Thresholds t = full;
        if (held.label == 0) {
            t.tau0 = folds[0].threshold_without(held.s0);
        } else {
            t.tau1 = folds[1].threshold_without(held.s1);
        }
        RegionLabelTable rest;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& it = sample.items[j];
            ++rest.counts[index(conformal::region_of(it.s0, it.s1, t))][static_cast<std::size_t>(it.label)];
        }
        rest.n_total = static_cast<long>(n) - 1;
        for (std::size_t k = 0; k < masks.size(); ++k) {
            out[k].fold_rates.push_back(rest.n_total > 0 ? project(rest, masks[k]).rate : 0.0);
        }
    }
    return out;
}

PredictiveEnvelope envelope_loo(const LooSummary& s, long m, double level, double infl, double offset) {
    if (s.n < 1) throw DomainError("LOO summary has no folds");
    return envelope_from_counts(static_cast<double>(s.n_loo), static_cast<double>(s.n), m, level, infl, offset,
                                EnvelopeSource::LOO, s.kpi);
}

HoeffdingBand hoeffding_envelope(double rate, long m, double budget) {
    if (m < 1) throw DomainError("window size must be >= 1");
    check_probability(budget, "Hoeffding budget");
    const double eps = std::sqrt(std::log(2.0 / budget) / (2.0 * static_cast<double>(m)));
    return {std::max(0.0, rate - eps), std::min(1.0, rate + eps), eps};
}

LooStats loo_variance_diag(std::span<const double> fold_rates) {
    const auto n = fold_rates.size();
    if (n < 2) throw DomainError("variance diagnostic needs at least two folds");
    const double mean = std::accumulate(fold_rates.begin(), fold_rates.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double r : fold_rates) ss += (r - mean) * (r - mean);
    return {mean, ss / static_cast<double>(n - 1)};
}

} // namespace audit
} // namespace opcal
