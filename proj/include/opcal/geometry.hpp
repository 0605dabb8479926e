#pragma once

#include "opcal/audit.hpp"
#include "opcal/conformal.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace opcal {

/// Chow-style consequence prices.
struct CostRates {
    double c01;   ///< false negative: commit 0 when y = 1
    double c10;   ///< false positive: commit 1 when y = 0
    double c_rej; ///< rejection, either label

    void validate() const;
    double lambda() const noexcept { return c01 / c10; }
    double rho() const noexcept { return c_rej / c10; }
    /// Costs with c10 = 1 at the given ratios.
    static CostRates from_ratios(double lambda, double rho) { return {lambda, 1.0, rho}; }
};

enum class Action : std::uint8_t { Commit0 = 0, Commit1 = 1, Reject = 2 };
std::string to_string(Action a);
Action parse_action(const std::string& text);

/// Set of actions, used to report argmin ties.
class ActionSet {
public:
    constexpr ActionSet() = default;
    constexpr void insert(Action a) noexcept { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(a)); }
    constexpr bool contains(Action a) const noexcept { return (bits_ >> static_cast<unsigned>(a)) & 1u; }
    constexpr int size() const noexcept { return (bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
    constexpr std::uint8_t bits() const noexcept { return bits_; }
    std::vector<Action> members() const;
    friend constexpr bool operator==(ActionSet, ActionSet) = default;

private:
    std::uint8_t bits_ = 0;
};

/// Region-measurable action convention.
struct Convention {
    std::string name;
    std::array<Action, 4> actions;

    Action operator()(Region r) const noexcept { return actions[index(r)]; }

    /// 10 -> 0, 01 -> 1, 11 and 00 -> reject.
    static Convention commit_on_singletons();
    static Convention all_reject();
    /// "commit_singletons", "all_reject", or four comma-separated actions for r10,r11,r01,r00 (e.g. "0,R,1,R").
    static Convention parse(const std::string& text);
};

struct RegionRisks {
    double commit0;
    double commit1;
    double reject;

    double of(Action a) const noexcept;
};

/// a_lambda * lambda + a_rho * rho <= rhs
struct HalfPlane {
    double a_lambda;
    double a_rho;
    double rhs;

    bool holds(double lambda, double rho) const noexcept;
};

struct RegionVerdict {
    Region region;
    long count = 0;
    double mu = 0.0;
    std::optional<double> eta;
    Action action = Action::Reject;
    ActionSet optimal;
    bool occupied = false;
    bool coherent = true;
};

struct CoherenceReport {
    std::array<RegionVerdict, 4> regions;
    bool coherent = true;
    double expected_cost = 0.0;
    /// The convention rejects on an occupied region while rho > lambda / (1 + lambda).
    bool reject_band_empty = false;
};

struct CoherenceWedge {
    Region region;
    std::vector<HalfPlane> constraints;
    /// feasible[i * rho_grid.size() + j] at (lambda_grid[i], rho_grid[j]).
    std::vector<std::uint8_t> feasible;
};

struct PricingEnvelope {
    std::vector<double> lambda_grid;
    std::vector<double> rho_grid;
    std::vector<CoherenceWedge> wedges; ///< one per occupied region
    std::vector<std::uint8_t> intersection;
    std::vector<std::uint8_t> union_;
    std::vector<std::uint8_t> reject_band_empty;
    long feasible_points = 0;

    std::size_t cell(std::size_t lambda_idx, std::size_t rho_idx) const noexcept {
        return lambda_idx * rho_grid.size() + rho_idx;
    }
};

namespace geometry {

RegionRisks region_risks(double eta, const CostRates& costs);

/// Every action attaining the minimum conditional risk (ties within 1e-12 relative).
ActionSet coherent_action(double eta, const CostRates& costs);

CoherenceReport check_convention(const RegionLabelTable& table, const Convention& conv, const CostRates& costs);

/// Half-planes in (lambda, rho) under which `action` is optimal at within-region frequency eta.
std::vector<HalfPlane> wedge_constraints(Action action, double eta);

PricingEnvelope pricing_envelope(const RegionLabelTable& table, const Convention& conv,
                                 const std::vector<double>& lambda_grid, const std::vector<double>& rho_grid);

/// Log-spaced lambda in [0.1, 10] and linear rho in [0, 1], 41 points each.
std::vector<double> default_lambda_grid(std::size_t points = 41);
std::vector<double> default_rho_grid(std::size_t points = 41);

/// c_rej <= c01 c10 / (c01 + c10), equivalently rho <= lambda / (1 + lambda).
bool rejection_band_nonempty(const CostRates& costs);

/// Fraction of tables whose pricing envelope contains each lattice point.
std::vector<double> coherence_fraction(const std::vector<RegionLabelTable>& tables, const Convention& conv,
                                       const std::vector<double>& lambda_grid, const std::vector<double>& rho_grid);

} // namespace geometry
} // namespace opcal
