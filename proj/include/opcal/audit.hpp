#pragma once

#include "opcal/conformal.hpp"
#include "opcal/exactdist.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opcal {

/// Region-label cell counts K_{r,y} on an audit sample, rows in Region order.
struct RegionLabelTable {
    std::array<std::array<long, 2>, 4> counts{};
    long n_total = 0;

    static RegionLabelTable from_counts(const std::array<std::array<long, 2>, 4>& counts);

    long count(Region r, int y) const noexcept { return counts[index(r)][static_cast<std::size_t>(y)]; }
    double prob(Region r, int y) const noexcept;
    long region_count(Region r) const noexcept { return count(r, 0) + count(r, 1); }
    /// mu_r
    double mass(Region r) const noexcept;
    long label_count(int y) const noexcept;

    friend bool operator==(const RegionLabelTable&, const RegionLabelTable&) = default;
};

/// 4x2 cell selector g(r, y); the rate of a KPI is the sum of selected cells.
struct KpiMask {
    std::string name;
    std::array<std::array<bool, 2>, 4> cells{};

    bool selects(Region r, int y) const noexcept { return cells[index(r)][static_cast<std::size_t>(y)]; }
    bool any() const noexcept;
    /// Cellwise union; name is the two names joined by '+'.
    KpiMask unite(const KpiMask& other) const;
};

struct Projection {
    long count;
    double rate;
};

enum class EnvelopeSource { TwoSample, LOO, Hoeffding };
std::string to_string(EnvelopeSource s);

/// Equal-tailed finite-window interval for a future KPI count out of m.
struct PredictiveEnvelope {
    std::string kpi;
    long m = 0;
    double point = 0.0;
    long lo = 0;
    long hi = 0;
    double level = 0.95;
    EnvelopeSource source = EnvelopeSource::TwoSample;
    double infl = 1.0;
    double offset = 1.0;

    bool contains(long count) const noexcept { return lo <= count && count <= hi; }
};

/// Pooled leave-one-out indicators for one KPI.
struct LooSummary {
    std::string kpi;
    long n_loo = 0;
    long n = 0;
    std::vector<double> fold_rates;
};

/// How a leave-one-out fold picks its grid index at the reduced class size.
enum class LooIndexMode { Rederive, Freeze };

struct HoeffdingBand {
    double lo;
    double hi;
    double eps;
};

struct LooStats {
    double mean;
    double var;
};

namespace audit {

RegionLabelTable tabulate(const ScoreSample& sample, const Thresholds& t);

Projection project(const RegionLabelTable& table, const KpiMask& mask);

/// coverage, singleton_0, singleton_1, singleton, doublet, abstention, wrong_singleton,
/// missed_positive (q10), hedged_positive (q11), then the outcome masks.
std::vector<KpiMask> builtin_masks(const Policy& policy);

/// The eight (reported set, true label) outcome categories; they partition every table.
std::vector<KpiMask> outcome_masks(const Policy& policy);

/// Mask by name from builtin_masks(policy); throws NotFound for unknown names.
KpiMask mask_by_name(const Policy& policy, const std::string& name);

/// p_{r,label} / mu_r; nullopt when the region is empty.
std::optional<double> purity(const RegionLabelTable& table, Region region, int label);

/// Beta-Binomial envelope with shapes (k/infl + offset, (n - k)/infl + offset).
PredictiveEnvelope envelope_from_counts(double count, double n, long m, double level, double infl, double offset,
                                        EnvelopeSource source, std::string kpi = {});

PredictiveEnvelope envelope_two_sample(long count, long n_audit, long m, double level, double offset = 1.0,
                                       std::string kpi = {});

/// Region-label table of (R under the fold-i thresholds, y_i), one entry per calibration item.
RegionLabelTable loo_table(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1,
                           LooIndexMode mode = LooIndexMode::Rederive);

std::vector<LooSummary> loo_counts(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1,
                                   std::span<const KpiMask> masks, LooIndexMode mode = LooIndexMode::Rederive,
                                   bool with_fold_rates = false);

PredictiveEnvelope envelope_loo(const LooSummary& s, long m, double level, double infl, double offset = 1.0);

HoeffdingBand hoeffding_envelope(double rate, long m, double budget);

LooStats loo_variance_diag(std::span<const double> fold_rates);

} // namespace audit
} // namespace opcal
