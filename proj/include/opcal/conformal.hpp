#pragma once

#include "opcal/gridselect.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace opcal {

/// One scored item: nonconformity to each class plus the true label.
struct ScoredItem {
    double s0;
    double s1;
    int label;
};

struct ScoreSample {
    std::vector<ScoredItem> items;
    bool prob_normalized = false;

    std::size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }
    long class_count(int label) const;

    /// Throws DomainError on labels outside {0,1} or broken normalization.
    void validate() const;
};

/// Builds a probability-normalized sample from P(Y=1|x): s0 = p1, s1 = 1 - p1.
ScoreSample sample_from_probabilities(std::span<const double> p1, std::span<const int> labels);

struct Thresholds {
    double tau0;
    double tau1;
    long u0;
    long u1;
    long n0;
    long n1;

    double tau(int label) const noexcept { return label == 0 ? tau0 : tau1; }
};

/// Binary region label; the enumerator order r10, r11, r01, r00 is the table row order.
enum class Region : std::uint8_t { R10 = 0, R11 = 1, R01 = 2, R00 = 3 };

inline constexpr std::array<Region, 4> kRegions = {Region::R10, Region::R11, Region::R01, Region::R00};

constexpr std::size_t index(Region r) noexcept { return static_cast<std::size_t>(r); }
std::string to_string(Region r);
Region parse_region(const std::string& text);
Region region_from_bits(bool in0, bool in1) noexcept;
/// Indicator bit for class y in the region label (1 iff s_y <= tau_y).
bool region_bit(Region r, int label) noexcept;

/// Subset of {0, 1}; bit y set means label y is in the set.
class LabelSet {
public:
    constexpr LabelSet() = default;
    static constexpr LabelSet empty() { return LabelSet{0}; }
    static constexpr LabelSet only(int y) { return LabelSet{static_cast<std::uint8_t>(1u << y)}; }
    static constexpr LabelSet both() { return LabelSet{3}; }

    constexpr bool contains(int y) const noexcept { return (bits_ >> y) & 1u; }
    constexpr int size() const noexcept { return (bits_ & 1u) + ((bits_ >> 1) & 1u); }
    constexpr std::uint8_t bits() const noexcept { return bits_; }
    std::string to_string() const;

    friend constexpr bool operator==(LabelSet, LabelSet) = default;

private:
    constexpr explicit LabelSet(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

/// Deployment policy: a total map from region to reported label set.
struct Policy {
    std::string name;
    std::array<LabelSet, 4> sets;

    LabelSet operator()(Region r) const noexcept { return sets[index(r)]; }

    static Policy set_inclusion();
    static Policy commit_reject();
    static Policy set_exclusion();
    /// Commit to {action} when the region is in the trigger set, otherwise report the empty set.
    static Policy region_triggered(std::span<const Region> trigger, int action);
    /// "si", "cr", "se".
    static Policy by_name(const std::string& name);
};

enum class ScoreRegime { Hedging, Rejection, Boundary };
std::string to_string(ScoreRegime r);

namespace conformal {

/// k-th smallest score (1-based) without interpolation.
double order_statistic(std::vector<double> scores, long k);

/// Class-y nonconformity scores s_y of the items whose true label is y.
std::vector<double> class_scores(const ScoreSample& sample, int label);

Thresholds fit_thresholds(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1);

Region region_of(double s0, double s1, const Thresholds& t) noexcept;

LabelSet apply_policy(const Policy& p, Region r) noexcept;

ScoreRegime regime_of(const Thresholds& t, double tol = 1e-9) noexcept;

/// Per-class request pair, evaluated at each class's calibration count.
struct ClassRequests {
    double alpha0;
    double delta0;
    double alpha1;
    double delta1;
    Regime regime = Regime::infinite();
    Method method = Method::SSBC;
};

struct Calibration {
    GridSelection sel0;
    GridSelection sel1;
    Thresholds thresholds;
};

/// Selects a grid index for each class at its own size and fits the thresholds.
/// Returns nullopt (with `infeasible_label` set) when SSBC finds no admissible index.
std::optional<Calibration> calibrate(const ScoreSample& sample, const ClassRequests& req, int* infeasible_label = nullptr);

/// K-class generalization: bit y set iff scores[y] <= taus[y].
std::vector<bool> region_bits(std::span<const double> scores, std::span<const double> taus);

} // namespace conformal
} // namespace opcal
