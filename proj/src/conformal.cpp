#include "opcal/conformal.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <cmath>

namespace opcal {

long ScoreSample::class_count(int label) const {
    return static_cast<long>(
        std::count_if(items.begin(), items.end(), [label](const ScoredItem& it) { return it.label == label; }));
}

void ScoreSample::validate() const {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        if (it.label != 0 && it.label != 1) {
            throw DomainError("item " + std::to_string(i) + " has label outside {0,1}");
        }
        if (!std::isfinite(it.s0) || !std::isfinite(it.s1)) {
            throw DomainError("item " + std::to_string(i) + " has a non-finite score");
        }
        if (prob_normalized && std::abs(it.s0 + it.s1 - 1.0) > 1e-9) {
            throw DomainError("item " + std::to_string(i) + " violates s0 + s1 = 1");
        }
    }
}

ScoreSample sample_from_probabilities(std::span<const double> p1, std::span<const int> labels) {
    if (p1.size() != labels.size()) {
        throw DomainError("probability and label sequences differ in length");
    }
    ScoreSample out;
    out.prob_normalized = true;
    out.items.reserve(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        // s_y = 1 - P(y|x): s0 = 1 - (1 - p1) = p1
        out.items.push_back({p1[i], 1.0 - p1[i], labels[i]});
    }
    out.validate();
    return out;
}

std::string to_string(Region r) {
    switch (r) {
    case Region::R10: return "10";
    case Region::R11: return "11";
    case Region::R01: return "01";
    case Region::R00: return "00";
    }
    return "?";
}

Region parse_region(const std::string& text) {
    std::string t = text;
    if (!t.empty() && (t[0] == 'r' || t[0] == 'R')) t.erase(0, 1);
    for (Region r : kRegions) {
        if (to_string(r) == t) return r;
    }
    throw DomainError("unknown region '" + text + "'");
}

Region region_from_bits(bool in0, bool in1) noexcept {
    if (in0) return in1 ? Region::R11 : Region::R10;
    return in1 ? Region::R01 : Region::R00;
}

bool region_bit(Region r, int label) noexcept {
    switch (r) {
    case Region::R10: return label == 0;
    case Region::R11: return true;
    case Region::R01: return label == 1;
    case Region::R00: return false;
    }
    return false;
}

std::string LabelSet::to_string() const {
    switch (bits_) {
    case 0: return "{}";
    case 1: return "{0}";
    case 2: return "{1}";
    default: return "{0,1}";
    }
}

Policy Policy::set_inclusion() {
    return {"si", {LabelSet::only(0), LabelSet::both(), LabelSet::only(1), LabelSet::empty()}};
}

Policy Policy::commit_reject() {
    return {"cr", {LabelSet::only(0), LabelSet::empty(), LabelSet::only(1), LabelSet::empty()}};
}

Policy Policy::set_exclusion() {
    return {"se", {LabelSet::only(1), LabelSet::empty(), LabelSet::only(0), LabelSet::both()}};
}

Policy Policy::region_triggered(std::span<const Region> trigger, int action) {
    if (action != 0 && action != 1) {
        throw DomainError("region-triggered action must be 0 or 1");
    }
    Policy p{"trigger", {LabelSet::empty(), LabelSet::empty(), LabelSet::empty(), LabelSet::empty()}};
    for (Region r : trigger) {
        p.sets[index(r)] = LabelSet::only(action);
        p.name += "_" + to_string(r);
    }
    p.name += "_to" + std::to_string(action);
    return p;
}

Policy Policy::by_name(const std::string& name) {
    if (name == "si") return set_inclusion();
    if (name == "cr") return commit_reject();
    if (name == "se") return set_exclusion();
    throw DomainError("unknown policy '" + name + "', expected si, cr or se");
}

std::string to_string(ScoreRegime r) {
    switch (r) {
    case ScoreRegime::Hedging: return "hedging";
    case ScoreRegime::Rejection: return "rejection";
    case ScoreRegime::Boundary: return "boundary";
    }
    return "?";
}

namespace conformal {

double order_statistic(std::vector<double> scores, long k) {
    if (k < 1 || k > static_cast<long>(scores.size())) {
        throw DomainError("order statistic index out of range");
    }
    auto nth = scores.begin() + (k - 1);
    std::nth_element(scores.begin(), nth, scores.end());
    return *nth;
}

std::vector<double> class_scores(const ScoreSample& sample, int label) {
    std::vector<double> out;
    for (const auto& it : sample.items) {
        if (it.label == label) out.push_back(label == 0 ? it.s0 : it.s1);
    }
    return out;
}

Thresholds fit_thresholds(const ScoreSample& sample, const GridSelection& sel0, const GridSelection& sel1) {
    Thresholds t{};
    const GridSelection* sels[2] = {&sel0, &sel1};
    double taus[2] = {0.0, 0.0};
    long ns[2] = {0, 0};
    for (int y = 0; y < 2; ++y) {
        auto scores = class_scores(sample, y);
        const long n = static_cast<long>(scores.size());
        const long u = sels[y]->u;
        if (u < 1 || n < std::max(u, 1L)) {
            throw InsufficientClassData(y, n, std::max(u, 1L));
        }
        taus[y] = order_statistic(std::move(scores), n + 1 - u);
        ns[y] = n;
    }
    t.tau0 = taus[0];
    t.tau1 = taus[1];
    t.u0 = sel0.u;
    t.u1 = sel1.u;
    t.n0 = ns[0];
    t.n1 = ns[1];
    return t;
}

Region region_of(double s0, double s1, const Thresholds& t) noexcept {
    return region_from_bits(s0 <= t.tau0, s1 <= t.tau1);
}

LabelSet apply_policy(const Policy& p, Region r) noexcept { return p(r); }

ScoreRegime regime_of(const Thresholds& t, double tol) noexcept {
    const double total = t.tau0 + t.tau1;
    if (std::abs(total - 1.0) <= tol) return ScoreRegime::Boundary;
    return total > 1.0 ? ScoreRegime::Hedging : ScoreRegime::Rejection;
}

std::optional<Calibration> calibrate(const ScoreSample& sample, const ClassRequests& req, int* infeasible_label) {
    const long n0 = sample.class_count(0);
    const long n1 = sample.class_count(1);
    if (n0 < 1) throw InsufficientClassData(0, n0, 1);
    if (n1 < 1) throw InsufficientClassData(1, n1, 1);
    auto sel0 = gridselect::select_index(req.method, {req.alpha0, req.delta0, n0, req.regime});
    if (!sel0) {
        if (infeasible_label) *infeasible_label = 0;
        return std::nullopt;
    }
    auto sel1 = gridselect::select_index(req.method, {req.alpha1, req.delta1, n1, req.regime});
    if (!sel1) {
        if (infeasible_label) *infeasible_label = 1;
        return std::nullopt;
    }
    Thresholds t = fit_thresholds(sample, *sel0, *sel1);
    return Calibration{*sel0, *sel1, t};
}

std::vector<bool> region_bits(std::span<const double> scores, std::span<const double> taus) {
    if (scores.size() != taus.size()) {
        throw DomainError("score and threshold vectors differ in length");
    }
    std::vector<bool> bits(scores.size());
    for (std::size_t y = 0; y < scores.size(); ++y) bits[y] = scores[y] <= taus[y];
    return bits;
}

} // namespace conformal
} // namespace opcal
