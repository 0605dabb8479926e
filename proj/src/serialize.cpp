#include "opcal/serialize.hpp"

#include "opcal/errors.hpp"

namespace opcal {

namespace {

template <class E>
E from_names(const std::string& text, std::initializer_list<std::pair<const char*, E>> names, const char* what) {
    for (const auto& [n, v] : names) {
        if (text == n) return v;
    }
    throw SpecError(std::string("unknown ") + what + " '" + text + "'");
}

ScoreRegime parse_score_regime(const std::string& s) {
    return from_names<ScoreRegime>(
        s, {{"hedging", ScoreRegime::Hedging}, {"rejection", ScoreRegime::Rejection}, {"boundary", ScoreRegime::Boundary}},
        "score regime");
}

EnvelopeSource parse_source(const std::string& s) {
    return from_names<EnvelopeSource>(
        s, {{"two_sample", EnvelopeSource::TwoSample}, {"loo", EnvelopeSource::LOO}, {"hoeffding", EnvelopeSource::Hoeffding}},
        "envelope source");
}

EvalMode parse_eval(const std::string& s) {
    return from_names<EvalMode>(s, {{"two_sample", EvalMode::TwoSample}, {"loo", EvalMode::LOO}}, "evaluation mode");
}

std::string loo_mode_name(LooIndexMode m) { return m == LooIndexMode::Rederive ? "rederive" : "freeze"; }

LooIndexMode parse_loo_mode(const std::string& s) {
    return from_names<LooIndexMode>(s, {{"rederive", LooIndexMode::Rederive}, {"freeze", LooIndexMode::Freeze}},
                                    "loo index mode");
}

LabelSet label_set_from(const json& j) {
    bool has0 = false;
    bool has1 = false;
    for (const auto& v : j) {
        const int y = v.get<int>();
        if (y == 0) has0 = true;
        else if (y == 1) has1 = true;
        else throw SpecError("label set entries must be 0 or 1");
    }
    if (has0 && has1) return LabelSet::both();
    if (has0) return LabelSet::only(0);
    if (has1) return LabelSet::only(1);
    return LabelSet::empty();
}

json label_set_json(LabelSet s) {
    json a = json::array();
    for (int y = 0; y < 2; ++y) {
        if (s.contains(y)) a.push_back(y);
    }
    return a;
}

json bitmap(const std::vector<std::uint8_t>& v) {
    std::string s(v.size(), '0');
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] ? '1' : '0';
    return s;
}

} // namespace

json document(const std::string& kind, json body) {
    json doc = json::object();
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = kind;
    for (auto& [key, value] : body.items()) doc[key] = std::move(value);
    return doc;
}

void check_document(const json& doc, const std::string& kind) {
    if (!doc.is_object() || !doc.contains("schema_version") || !doc.contains("kind")) {
        throw SpecError("document is missing schema_version/kind");
    }
    if (doc.at("schema_version").get<int>() != kSchemaVersion) {
        throw SpecError("unsupported schema_version " + doc.at("schema_version").dump());
    }
    if (doc.at("kind").get<std::string>() != kind) {
        throw SpecError("expected a '" + kind + "' document, found '" + doc.at("kind").get<std::string>() + "'");
    }
}

void to_json(json& j, const CoverageRequest& r) {
    j = {{"alpha_star", r.alpha_star}, {"delta", r.delta}, {"n_cal", r.n_cal}, {"regime", r.regime}};
}

void from_json(const json& j, CoverageRequest& r) {
    r.alpha_star = j.at("alpha_star").get<double>();
    r.delta = j.at("delta").get<double>();
    r.n_cal = j.at("n_cal").get<long>();
    r.regime = j.at("regime").get<Regime>();
}

void to_json(json& j, const GridSelection& s) {
    j = {{"u", s.u},
         {"k", s.k},
         {"n_cal", s.n_cal},
         {"method", to_string(s.method)},
         {"alpha_grid", s.alpha_grid()},
         {"request", s.request},
         {"alpha_cont", s.alpha_cont ? json(*s.alpha_cont) : json(nullptr)}};
}

void from_json(const json& j, GridSelection& s) {
    s.u = j.at("u").get<long>();
    s.k = j.at("k").get<long>();
    s.n_cal = j.at("n_cal").get<long>();
    s.method = parse_method(j.at("method").get<std::string>());
    s.request = j.at("request").get<CoverageRequest>();
    const auto& ac = j.at("alpha_cont");
    s.alpha_cont = ac.is_null() ? std::nullopt : std::optional<double>(ac.get<double>());
}

void to_json(json& j, const Thresholds& t) {
    j = {{"tau0", t.tau0}, {"tau1", t.tau1}, {"u0", t.u0}, {"u1", t.u1}, {"n0", t.n0}, {"n1", t.n1}};
}

void from_json(const json& j, Thresholds& t) {
    t.tau0 = j.at("tau0").get<double>();
    t.tau1 = j.at("tau1").get<double>();
    t.u0 = j.at("u0").get<long>();
    t.u1 = j.at("u1").get<long>();
    t.n0 = j.at("n0").get<long>();
    t.n1 = j.at("n1").get<long>();
}

void to_json(json& j, const Policy& p) {
    json sets = json::object();
    for (Region r : kRegions) sets[to_string(r)] = label_set_json(p(r));
    j = {{"name", p.name}, {"sets", sets}};
}

void from_json(const json& j, Policy& p) {
    p.name = j.at("name").get<std::string>();
    for (Region r : kRegions) p.sets[index(r)] = label_set_from(j.at("sets").at(to_string(r)));
}

void to_json(json& j, const ScoreSample& s) {
    json items = json::array();
    for (const auto& it : s.items) items.push_back(json::array({it.s0, it.s1, it.label}));
    j = {{"prob_normalized", s.prob_normalized}, {"items", std::move(items)}};
}

void from_json(const json& j, ScoreSample& s) {
    s.prob_normalized = j.at("prob_normalized").get<bool>();
    s.items.clear();
    for (const auto& row : j.at("items")) {
        s.items.push_back({row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<int>()});
    }
}

void to_json(json& j, const RegionLabelTable& t) {
    json counts = json::object();
    for (Region r : kRegions) counts[to_string(r)] = {t.count(r, 0), t.count(r, 1)};
    j = {{"n_total", t.n_total}, {"counts", counts}};
}

void from_json(const json& j, RegionLabelTable& t) {
    std::array<std::array<long, 2>, 4> counts{};
    for (Region r : kRegions) {
        const auto& row = j.at("counts").at(to_string(r));
        counts[index(r)] = {row.at(0).get<long>(), row.at(1).get<long>()};
    }
    t = RegionLabelTable::from_counts(counts);
    if (j.contains("n_total") && j.at("n_total").get<long>() != t.n_total) {
        throw SpecError("region-label table n_total does not match its counts");
    }
}

void to_json(json& j, const PredictiveEnvelope& e) {
    j = {{"kpi", e.kpi},   {"m", e.m},         {"point", e.point},
         {"lo", e.lo},     {"hi", e.hi},       {"level", e.level},
         {"source", to_string(e.source)}, {"infl", e.infl}, {"offset", e.offset}};
}

void from_json(const json& j, PredictiveEnvelope& e) {
    e.kpi = j.at("kpi").get<std::string>();
    e.m = j.at("m").get<long>();
    e.point = j.at("point").get<double>();
    e.lo = j.at("lo").get<long>();
    e.hi = j.at("hi").get<long>();
    e.level = j.at("level").get<double>();
    e.source = parse_source(j.at("source").get<std::string>());
    e.infl = j.at("infl").get<double>();
    e.offset = j.at("offset").get<double>();
}

void to_json(json& j, const Request4& r) {
    j = {{"alpha0", r.alpha0}, {"delta0", r.delta0}, {"alpha1", r.alpha1}, {"delta1", r.delta1}};
}

void from_json(const json& j, Request4& r) {
    r.alpha0 = j.at("alpha0").get<double>();
    r.delta0 = j.at("delta0").get<double>();
    r.alpha1 = j.at("alpha1").get<double>();
    r.delta1 = j.at("delta1").get<double>();
}

void to_json(json& j, const KpiValue& v) {
    j = {{"name", v.name}, {"count", v.count}, {"rate", v.rate}, {"envelope", v.envelope}};
}

void from_json(const json& j, KpiValue& v) {
    v.name = j.at("name").get<std::string>();
    v.count = j.at("count").get<long>();
    v.rate = j.at("rate").get<double>();
    v.envelope = j.at("envelope").get<PredictiveEnvelope>();
}

void to_json(json& j, const OperatingPoint& p) {
    j = {{"regime_id", p.regime_id},
         {"multiplicity", p.multiplicity},
         {"request", p.request},
         {"sel0", p.sel0},
         {"sel1", p.sel1},
         {"thresholds", p.thresholds},
         {"regime", to_string(p.regime)},
         {"eval", to_string(p.eval)},
         {"table", p.table},
         {"kpis", p.kpis},
         {"nondominated", p.nondominated}};
}

void from_json(const json& j, OperatingPoint& p) {
    p.regime_id = j.at("regime_id").get<long>();
    p.multiplicity = j.at("multiplicity").get<long>();
    p.request = j.at("request").get<Request4>();
    p.sel0 = j.at("sel0").get<GridSelection>();
    p.sel1 = j.at("sel1").get<GridSelection>();
    p.thresholds = j.at("thresholds").get<Thresholds>();
    p.regime = parse_score_regime(j.at("regime").get<std::string>());
    p.eval = parse_eval(j.at("eval").get<std::string>());
    p.table = j.at("table").get<RegionLabelTable>();
    p.kpis = j.at("kpis").get<std::vector<KpiValue>>();
    p.nondominated = j.at("nondominated").get<bool>();
}

void to_json(json& j, const SweepSpec& s) {
    j = {{"alpha0", s.alpha0_grid}, {"delta0", s.delta0_grid}, {"alpha1", s.alpha1_grid},
         {"delta1", s.delta1_grid}, {"regime", s.regime},      {"method", to_string(s.method)},
         {"policy", s.policy},      {"kpis", s.kpis},          {"orientation", s.orientation},
         {"m", s.m},                {"level", s.level},        {"infl", s.infl},
         {"offset", s.offset},      {"loo_mode", loo_mode_name(s.loo_mode)}};
}

void from_json(const json& j, SweepSpec& s) {
    s.alpha0_grid = j.at("alpha0").get<std::vector<double>>();
    s.delta0_grid = j.at("delta0").get<std::vector<double>>();
    s.alpha1_grid = j.at("alpha1").get<std::vector<double>>();
    s.delta1_grid = j.at("delta1").get<std::vector<double>>();
    s.regime = j.at("regime").get<Regime>();
    s.method = parse_method(j.at("method").get<std::string>());
    s.policy = j.at("policy").is_string() ? Policy::by_name(j.at("policy").get<std::string>()) : j.at("policy").get<Policy>();
    s.kpis = j.at("kpis").get<std::vector<std::string>>();
    s.orientation = j.at("orientation").get<std::vector<int>>();
    s.m = j.at("m").get<long>();
    s.level = j.at("level").get<double>();
    s.infl = j.at("infl").get<double>();
    s.offset = j.at("offset").get<double>();
    s.loo_mode = parse_loo_mode(j.at("loo_mode").get<std::string>());
}

void to_json(json& j, const CoherenceReport& r) {
    json regions = json::array();
    for (const auto& v : r.regions) {
        json optimal = json::array();
        for (Action a : v.optimal.members()) optimal.push_back(to_string(a));
        regions.push_back({{"region", to_string(v.region)},
                           {"count", v.count},
                           {"mu", v.mu},
                           {"eta", v.eta ? json(*v.eta) : json(nullptr)},
                           {"action", to_string(v.action)},
                           {"optimal", optimal},
                           {"occupied", v.occupied},
                           {"coherent", v.coherent}});
    }
    j = {{"regions", regions},
         {"coherent", r.coherent},
         {"expected_cost", r.expected_cost},
         {"reject_band_empty", r.reject_band_empty}};
}

void to_json(json& j, const PricingEnvelope& e) {
    json wedges = json::array();
    for (const auto& w : e.wedges) {
        json cons = json::array();
        for (const auto& h : w.constraints) cons.push_back({{"a_lambda", h.a_lambda}, {"a_rho", h.a_rho}, {"rhs", h.rhs}});
        wedges.push_back({{"region", to_string(w.region)}, {"constraints", cons}, {"feasible", bitmap(w.feasible)}});
    }
    j = {{"lambda_grid", e.lambda_grid},
         {"rho_grid", e.rho_grid},
         {"layout", "row-major, lambda outer"},
         {"wedges", wedges},
         {"intersection", bitmap(e.intersection)},
         {"union", bitmap(e.union_)},
         {"reject_band_empty", bitmap(e.reject_band_empty)},
         {"feasible_points", e.feasible_points}};
}

namespace simlab {

void to_json(json& j, const CoverageRow& r) {
    j = {{"n_cal", r.n}, {"method", opcal::to_string(r.method)}, {"infeasible", r.infeasible}};
    if (r.infeasible) return;
    j["u"] = r.u;
    j["alpha_grid"] = r.alpha_grid;
    j["violations"] = r.violations;
    j["obs"] = r.obs;
    j["obs_se"] = r.obs_se;
    j["beta_theory"] = r.beta_theory;
    j["bb_theory"] = r.bb_theory;
    j["alpha_cont"] = r.alpha_cont ? json(*r.alpha_cont) : json(nullptr);
}

void to_json(json& j, const EnvelopeKpiReport& r) {
    j = {{"config", r.config},
         {"kpi", r.kpi},
         {"reps_used", r.reps_used},
         {"reps_skipped", r.reps_skipped},
         {"contained_freq", r.contained_freq()},
         {"contained_se", r.contained_se()},
         {"loo_inside_freq", r.loo_inside_freq()},
         {"nested_freq", r.nested_freq()},
         {"mean_center_offset", r.mean_center_offset},
         {"mean_two_sample_width", r.mean_two_sample_width},
         {"mean_loo_width", r.mean_loo_width}};
}

void to_json(json& j, const CouplingEstimate& e) {
    j = {{"n", e.n}, {"k", e.k}, {"reps", e.reps}, {"estimate", e.estimate}, {"se", e.se}, {"closed_form", e.closed_form}};
}

} // namespace simlab
} // namespace opcal
