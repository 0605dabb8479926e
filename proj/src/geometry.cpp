#include "opcal/geometry.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace opcal {

namespace {

constexpr double kTieTol = 1e-12;

} // namespace

void CostRates::validate() const {
    if (!(c01 > 0.0) || !(c10 > 0.0) || !(c_rej >= 0.0) || !std::isfinite(c01) || !std::isfinite(c10) ||
        !std::isfinite(c_rej)) {
        throw DomainError("costs must satisfy c01 > 0, c10 > 0, c_rej >= 0");
    }
}

std::string to_string(Action a) {
    switch (a) {
    case Action::Commit0: return "commit0";
    case Action::Commit1: return "commit1";
    case Action::Reject: return "reject";
    }
    return "?";
}

Action parse_action(const std::string& text) {
    if (text == "0" || text == "commit0") return Action::Commit0;
    if (text == "1" || text == "commit1") return Action::Commit1;
    if (text == "R" || text == "r" || text == "reject" || text == "rej") return Action::Reject;
    throw DomainError("unknown action '" + text + "'");
}

std::vector<Action> ActionSet::members() const {
    std::vector<Action> out;
    for (Action a : {Action::Commit0, Action::Commit1, Action::Reject}) {
        if (contains(a)) out.push_back(a);
    }
    return out;
}

Convention Convention::commit_on_singletons() {
    return {"commit_singletons", {Action::Commit0, Action::Reject, Action::Commit1, Action::Reject}};
}

Convention Convention::all_reject() {
    return {"all_reject", {Action::Reject, Action::Reject, Action::Reject, Action::Reject}};
}

Convention Convention::parse(const std::string& text) {
    if (text == "commit_singletons") return commit_on_singletons();
    if (text == "all_reject") return all_reject();
    std::stringstream ss(text);
    std::string part;
    Convention c{text, {}};
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 4) throw DomainError("convention '" + text + "' lists more than four actions");
        c.actions[i++] = parse_action(part);
    }
    if (i != 4) throw DomainError("convention '" + text + "' must list four actions for r10,r11,r01,r00");
    return c;
}

double RegionRisks::of(Action a) const noexcept {
    switch (a) {
    case Action::Commit0: return commit0;
    case Action::Commit1: return commit1;
    case Action::Reject: return reject;
    }
    return reject;
}

bool HalfPlane::holds(double lambda, double rho) const noexcept {
    const double l = a_lambda * lambda;
    const double r = a_rho * rho;
    const double scale = std::max({std::abs(l), std::abs(r), std::abs(rhs)});
    return l + r <= rhs + kTieTol * scale;
}

namespace geometry {

RegionRisks region_risks(double eta, const CostRates& costs) {
    costs.validate();
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
    return {eta * costs.c01, (1.0 - eta) * costs.c10, costs.c_rej};
}

ActionSet coherent_action(double eta, const CostRates& costs) {
    const RegionRisks risks = region_risks(eta, costs);
    const double lowest = std::min({risks.commit0, risks.commit1, risks.reject});
    const double scale = std::max({risks.commit0, risks.commit1, risks.reject});
    ActionSet set;
    for (Action a : {Action::Commit0, Action::Commit1, Action::Reject}) {
        if (risks.of(a) <= lowest + kTieTol * scale) set.insert(a);
    }
    return set;
}

bool rejection_band_nonempty(const CostRates& costs) {
    costs.validate();
    return costs.c_rej <= costs.c01 * costs.c10 / (costs.c01 + costs.c10);
}

CoherenceReport check_convention(const RegionLabelTable& table, const Convention& conv, const CostRates& costs) {
    costs.validate();
    CoherenceReport report;
    bool rejects_on_occupied = false;
    for (Region r : kRegions) {
        RegionVerdict& v = report.regions[index(r)];
        v.region = r;
        v.count = table.region_count(r);
        v.mu = table.mass(r);
        v.action = conv(r);
        v.occupied = v.count > 0;
        if (!v.occupied) {
            continue; // vacuously coherent
        }
        v.eta = static_cast<double>(table.count(r, 1)) / static_cast<double>(v.count);
        v.optimal = coherent_action(*v.eta, costs);
        v.coherent = v.optimal.contains(v.action);
        report.coherent = report.coherent && v.coherent;
        rejects_on_occupied = rejects_on_occupied || v.action == Action::Reject;

        const double loss_y0 = v.action == Action::Commit1 ? costs.c10 : (v.action == Action::Reject ? costs.c_rej : 0.0);
        const double loss_y1 = v.action == Action::Commit0 ? costs.c01 : (v.action == Action::Reject ? costs.c_rej : 0.0);
        report.expected_cost += loss_y0 * table.prob(r, 0) + loss_y1 * table.prob(r, 1);
    }
    report.reject_band_empty = rejects_on_occupied && !rejection_band_nonempty(costs);
    return report;
}

std::vector<HalfPlane> wedge_constraints(Action action, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
    // With c10 = 1: C(0|r) = eta * lambda, C(1|r) = 1 - eta, C(rej|r) = rho.
    switch (action) {
    case Action::Commit1:
        return {{-eta, 0.0, -(1.0 - eta)},  // 1 - eta <= eta * lambda
                {0.0, -1.0, -(1.0 - eta)}}; // 1 - eta <= rho
    case Action::Commit0:
        return {{eta, 0.0, 1.0 - eta}, // eta * lambda <= 1 - eta
                {eta, -1.0, 0.0}};     // eta * lambda <= rho
    case Action::Reject:
        return {{-eta, 1.0, 0.0},       // rho <= eta * lambda
                {0.0, 1.0, 1.0 - eta}}; // rho <= 1 - eta
    }
    return {};
}

PricingEnvelope pricing_envelope(const RegionLabelTable& table, const Convention& conv,
                                 const std::vector<double>& lambda_grid, const std::vector<double>& rho_grid) {
    for (double l : lambda_grid) {
        if (!(l > 0.0) || !std::isfinite(l)) throw DomainError("lambda grid must be positive and finite");
    }
    for (double r : rho_grid) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("rho grid must be nonnegative and finite");
    }
    PricingEnvelope env;
    env.lambda_grid = lambda_grid;
    env.rho_grid = rho_grid;
    const std::size_t cells = lambda_grid.size() * rho_grid.size();
    env.intersection.assign(cells, 1);
    env.union_.assign(cells, 0);
    env.reject_band_empty.assign(cells, 0);

    bool rejects_on_occupied = false;
    for (Region r : kRegions) {
        const long count = table.region_count(r);
        if (count == 0) continue;
        const double eta = static_cast<double>(table.count(r, 1)) / static_cast<double>(count);
        CoherenceWedge w{r, wedge_constraints(conv(r), eta), std::vector<std::uint8_t>(cells, 0)};
        rejects_on_occupied = rejects_on_occupied || conv(r) == Action::Reject;
        for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
            for (std::size_t j = 0; j < rho_grid.size(); ++j) {
                const bool ok = std::all_of(w.constraints.begin(), w.constraints.end(), [&](const HalfPlane& h) {
                    return h.holds(lambda_grid[i], rho_grid[j]);
                });
                const std::size_t c = env.cell(i, j);
                w.feasible[c] = ok ? 1 : 0;
                env.intersection[c] = env.intersection[c] && ok;
                env.union_[c] = env.union_[c] || ok;
            }
        }
        env.wedges.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        for (std::size_t j = 0; j < rho_grid.size(); ++j) {
            const double band = lambda_grid[i] / (1.0 + lambda_grid[i]);
            env.reject_band_empty[env.cell(i, j)] = rejects_on_occupied && rho_grid[j] > band;
        }
    }
    env.feasible_points = std::count(env.intersection.begin(), env.intersection.end(), std::uint8_t{1});
    return env;
}

std::vector<double> default_lambda_grid(std::size_t points) {
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double t = points > 1 ? static_cast<double>(i) / static_cast<double>(points - 1) : 0.5;
        g[i] = std::pow(10.0, -1.0 + 2.0 * t);
    }
    return g;
}

std::vector<double> default_rho_grid(std::size_t points) {
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) {
        g[i] = points > 1 ? static_cast<double>(i) / static_cast<double>(points - 1) : 0.5;
    }
    return g;
}

std::vector<double> coherence_fraction(const std::vector<RegionLabelTable>& tables, const Convention& conv,
                                       const std::vector<double>& lambda_grid, const std::vector<double>& rho_grid) {
    std::vector<double> frac(lambda_grid.size() * rho_grid.size(), 0.0);
    if (tables.empty()) return frac;
    for (const auto& t : tables) {
        const auto env = pricing_envelope(t, conv, lambda_grid, rho_grid);
        for (std::size_t c = 0; c < frac.size(); ++c) frac[c] += env.intersection[c];
    }
    for (double& f : frac) f /= static_cast<double>(tables.size());
    return frac;
}

} // namespace geometry
} // namespace opcal
