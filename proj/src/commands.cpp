#include "opcal/commands.hpp"

#include "opcal/errors.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace opcal::opsd {

namespace {

using planner::format_double;

json request_json(const conformal::ClassRequests& r) {
    return {{"alpha0", r.alpha0}, {"delta0", r.delta0}, {"alpha1", r.alpha1},
            {"delta1", r.delta1}, {"regime", r.regime}, {"method", to_string(r.method)}};
}

json convention_json(const Convention& c) {
    json actions = json::object();
    for (Region r : kRegions) actions[to_string(r)] = to_string(c(r));
    return {{"name", c.name}, {"actions", actions}};
}

std::pair<long, long> line_column(const std::string& text, std::size_t byte) {
    long line = 1;
    long col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

template <class T>
T field(const json& j, const std::string& name, T fallback) {
    if (!j.contains(name) || j.at(name).is_null()) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception& e) {
        throw SpecError("field '" + name + "': " + e.what());
    }
}

template <class T>
T required(const json& j, const std::string& name) {
    if (!j.contains(name)) throw SpecError("field '" + name + "' is required");
    return field<T>(j, name, T{});
}

/// A grid may be given as a list or as a single number.
std::vector<double> grid_field(const json& j, const std::string& name) {
    if (!j.contains(name)) throw SpecError("field '" + name + "' is required");
    const json& v = j.at(name);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw SpecError("field '" + name + "': expected a number or a nonempty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw SpecError("field '" + name + "': every entry must be a number");
        out.push_back(x.get<double>());
    }
    return out;
}

void print_calibration(std::ostream& log, int label, const GridSelection& s, double tau) {
    log << "class " << label << ": n=" << s.n_cal << " u=" << s.u << " k=" << s.k
        << " alpha_grid=" << format_double(s.alpha_grid()) << " tau=" << format_double(tau) << '\n';
}

} // namespace

Dataset cmd_ingest(ArtifactStore& store, const IngestArgs& args, std::ostream& log) {
    Dataset d = ingest_csv(args.csv, args.id, args.schema, args.filter);
    store.put_dataset(d);
    log << "ingested " << d.id << ": " << d.provenance.rows_kept << " of " << d.provenance.rows_read
        << " rows kept (class 0: " << d.sample.class_count(0) << ", class 1: " << d.sample.class_count(1) << ")\n";
    return d;
}

CalibrateResult cmd_calibrate(ArtifactStore& store, const CalibrateArgs& args, std::ostream& log) {
    const Dataset d = store.get_dataset(args.dataset);
    int bad = -1;
    const auto calib = conformal::calibrate(d.sample, args.request, &bad);
    if (!calib) {
        const long n = d.sample.class_count(bad);
        const double delta = bad == 0 ? args.request.delta0 : args.request.delta1;
        throw Error("class " + std::to_string(bad) + " is infeasible at n=" + std::to_string(n) +
                    ": no grid index meets delta; feasibility floor is " +
                    format_double(gridselect::feasibility_floor(delta, n)));
    }
    CalibrateResult r{args.id.empty() ? args.dataset : args.id, args.dataset, *calib};
    store.put("calibrations", r.id,
              document("calibration", {{"id", r.id},
                                       {"dataset", r.dataset},
                                       {"request", request_json(args.request)},
                                       {"sel0", calib->sel0},
                                       {"sel1", calib->sel1},
                                       {"thresholds", calib->thresholds},
                                       {"score_regime", to_string(conformal::regime_of(calib->thresholds))}}));
    print_calibration(log, 0, calib->sel0, calib->thresholds.tau0);
    print_calibration(log, 1, calib->sel1, calib->thresholds.tau1);
    return r;
}

CalibrateResult load_calibration(const ArtifactStore& store, const std::string& id) {
    const json doc = store.get("calibrations", id);
    check_document(doc, "calibration");
    CalibrateResult r;
    r.id = doc.at("id").get<std::string>();
    r.dataset = doc.at("dataset").get<std::string>();
    r.calibration = {doc.at("sel0").get<GridSelection>(), doc.at("sel1").get<GridSelection>(),
                     doc.at("thresholds").get<Thresholds>()};
    return r;
}

AuditMode AuditMode::parse(const std::string& text) {
    if (text == "two-sample" || text == "two_sample") return {EvalMode::TwoSample, 1.0};
    if (text == "loo") return {EvalMode::LOO, 1.0};
    if (text.rfind("loo:", 0) == 0) {
        double infl = 0.0;
        try {
            infl = planner::parse_double(text.substr(4));
        } catch (const SpecError&) {
            infl = 0.0;
        }
        if (!(infl >= 1.0)) throw DomainError("bad audit mode '" + text + "', inflation must be a number >= 1");
        return {EvalMode::LOO, infl};
    }
    throw DomainError("bad audit mode '" + text + "', expected two-sample or loo:<infl>");
}

std::string AuditMode::to_string() const {
    return eval == EvalMode::TwoSample ? "two-sample" : "loo:" + format_double(infl);
}

AuditResult cmd_audit(ArtifactStore& store, const AuditArgs& args, std::ostream& log) {
    const CalibrateResult cal = load_calibration(store, args.calibration);
    const Policy policy = Policy::by_name(args.policy);
    AuditResult r;
    r.id = args.id.empty() ? args.calibration + "__" + args.dataset : args.id;
    validate_id(r.id);
    if (args.mode.eval == EvalMode::TwoSample) {
        if (args.dataset == cal.dataset) throw SameSplitReuse(args.dataset);
        const Dataset audit = store.get_dataset(args.dataset);
        r.table = audit::tabulate(audit.sample, cal.calibration.thresholds);
    } else {
        if (args.dataset != cal.dataset) {
            throw DomainError("loo audits run on the calibration dataset '" + cal.dataset + "', not '" + args.dataset + "'");
        }
        const Dataset d = store.get_dataset(cal.dataset);
        r.table = audit::loo_table(d.sample, cal.calibration.sel0, cal.calibration.sel1, args.loo_mode);
    }
    for (const auto& mask : audit::builtin_masks(policy)) {
        const Projection p = audit::project(r.table, mask);
        KpiValue v{mask.name, p.count, p.rate, {}};
        if (args.mode.eval == EvalMode::TwoSample) {
            v.envelope = audit::envelope_two_sample(p.count, r.table.n_total, args.m, args.level, args.offset, mask.name);
        } else {
            v.envelope = audit::envelope_loo({mask.name, p.count, r.table.n_total, {}}, args.m, args.level,
                                             args.mode.infl, args.offset);
        }
        r.kpis.push_back(std::move(v));
    }
    store.put("audits", r.id,
              document("audit", {{"id", r.id},
                                 {"dataset", args.dataset},
                                 {"calibration", args.calibration},
                                 {"policy", policy},
                                 {"mode", args.mode.to_string()},
                                 {"m", args.m},
                                 {"level", args.level},
                                 {"offset", args.offset},
                                 {"loo_mode", args.loo_mode == LooIndexMode::Rederive ? "rederive" : "freeze"},
                                 {"table", r.table},
                                 {"kpis", r.kpis}}));
    log << "audit " << r.id << " (" << args.mode.to_string() << ", n=" << r.table.n_total << ")\n";
    for (const auto& k : r.kpis) {
        log << "  " << k.name << ": rate=" << format_double(k.rate) << " envelope[" << k.envelope.m << "]=["
            << k.envelope.lo << ", " << k.envelope.hi << "]\n";
    }
    return r;
}

SweepJob parse_sweep_job(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw SpecError("sweep spec parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                        ": " + e.what());
    }
    if (!j.is_object()) throw SpecError("sweep spec must be a JSON object");
    static const std::set<std::string> kKnown = {"id",     "calibration", "audit", "alpha0",  "delta0",   "alpha1",
                                                 "delta1", "regime",      "method", "policy", "kpis",     "orientation",
                                                 "m",      "level",       "infl",   "offset", "loo_mode", "dedup",
                                                 "geometry"};
    for (const auto& [key, value] : j.items()) {
        if (!kKnown.count(key)) throw SpecError("field '" + key + "' is not a sweep spec field");
    }
    SweepJob job;
    job.id = required<std::string>(j, "id");
    job.calibration = required<std::string>(j, "calibration");
    try {
        validate_id(job.id);
        validate_id(job.calibration);
    } catch (const DomainError& e) {
        throw SpecError(std::string("field 'id'/'calibration': ") + e.what());
    }
    if (j.contains("audit") && !j.at("audit").is_null()) job.audit = field<std::string>(j, "audit", "");

    SweepSpec& s = job.spec;
    s.alpha0_grid = grid_field(j, "alpha0");
    s.delta0_grid = grid_field(j, "delta0");
    s.alpha1_grid = grid_field(j, "alpha1");
    s.delta1_grid = grid_field(j, "delta1");
    auto guarded = [](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const SpecError&) {
            throw;
        } catch (const Error& e) {
            throw SpecError(std::string("field '") + name + "': " + e.what());
        } catch (const json::exception& e) {
            throw SpecError(std::string("field '") + name + "': " + e.what());
        }
    };
    guarded("regime", [&] { s.regime = Regime::parse(field<std::string>(j, "regime", "win:100")); });
    guarded("method", [&] { s.method = parse_method(field<std::string>(j, "method", "ssbc")); });
    guarded("policy", [&] {
        if (j.contains("policy") && j.at("policy").is_object()) {
            s.policy = j.at("policy").get<Policy>();
        } else {
            s.policy = Policy::by_name(field<std::string>(j, "policy", "si"));
        }
    });
    const bool custom_kpis = j.contains("kpis");
    s.kpis = field<std::vector<std::string>>(j, "kpis", SweepSpec::default_kpis());
    if (j.contains("orientation")) {
        s.orientation = field<std::vector<int>>(j, "orientation", {});
    } else if (!custom_kpis) {
        s.orientation = SweepSpec::default_orientation();
    } else {
        throw SpecError("field 'orientation' is required when 'kpis' is given");
    }
    guarded("kpis", [&] {
        for (const auto& k : s.kpis) audit::mask_by_name(s.policy, k);
    });
    s.m = field<long>(j, "m", 100);
    s.level = field<double>(j, "level", 0.95);
    s.infl = field<double>(j, "infl", 1.0);
    s.offset = field<double>(j, "offset", 1.0);
    const std::string loo = field<std::string>(j, "loo_mode", "rederive");
    if (loo != "rederive" && loo != "freeze") throw SpecError("field 'loo_mode': expected rederive or freeze");
    s.loo_mode = loo == "rederive" ? LooIndexMode::Rederive : LooIndexMode::Freeze;
    job.dedup = field<bool>(j, "dedup", true);
    guarded("spec", [&] { s.validate(); });

    if (j.contains("geometry") && !j.at("geometry").is_null()) {
        const json& g = j.at("geometry");
        if (!g.is_object()) throw SpecError("field 'geometry': expected an object");
        GeometrySpec geo;
        guarded("geometry.convention",
                [&] { geo.convention = Convention::parse(field<std::string>(g, "convention", "commit_singletons")); });
        if (g.contains("lambda")) geo.lambda_grid = grid_field(g, "lambda");
        if (g.contains("rho")) geo.rho_grid = grid_field(g, "rho");
        for (double l : geo.lambda_grid) {
            if (!(l > 0.0)) throw SpecError("field 'geometry.lambda': values must be positive");
        }
        for (double r : geo.rho_grid) {
            if (!(r >= 0.0)) throw SpecError("field 'geometry.rho': values must be nonnegative");
        }
        job.geometry = std::move(geo);
    }
    return job;
}

SweepJob load_sweep_job(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open sweep spec '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_sweep_job(os.str());
}

// Spec-file text for a convention: its name when that parses back to it, else the four actions.
std::string convention_text(const Convention& c) {
    try {
        if (Convention::parse(c.name).actions == c.actions) return c.name;
    } catch (const Error&) {
    }
    std::string out;
    for (Region r : kRegions) out += (out.empty() ? "" : ",") + to_string(c(r));
    return out;
}

json sweep_job_json(const SweepJob& job) {
    json j = job.spec;
    j["id"] = job.id;
    j["calibration"] = job.calibration;
    j["audit"] = job.audit ? json(*job.audit) : json(nullptr);
    j["dedup"] = job.dedup;
    try {
        if (Policy::by_name(job.spec.policy.name).sets == job.spec.policy.sets) j["policy"] = job.spec.policy.name;
    } catch (const Error&) {
    }
    if (job.geometry) {
        j["geometry"] = {{"convention", convention_text(job.geometry->convention)},
                         {"lambda", job.geometry->lambda_grid},
                         {"rho", job.geometry->rho_grid}};
    }
    return j;
}

json wedge_document(const std::string& menu_id, const std::vector<OperatingPoint>& points, const GeometrySpec& g) {
    json entries = json::array();
    for (const auto& p : points) {
        entries.push_back({{"regime_id", p.regime_id},
                           {"envelope", geometry::pricing_envelope(p.table, g.convention, g.lambda_grid, g.rho_grid)}});
    }
    return document("wedges", {{"menu", menu_id}, {"convention", convention_json(g.convention)}, {"points", entries}});
}

SweepOutcome run_sweep(ArtifactStore& store, const SweepJob& job) {
    validate_id(job.id);
    const Dataset cal = store.get_dataset(job.calibration);
    std::optional<Dataset> audit;
    if (job.audit) {
        if (*job.audit == job.calibration) throw SameSplitReuse(*job.audit);
        audit = store.get_dataset(*job.audit);
    }
    SweepResult res = planner::sweep(job.spec, cal.sample, audit ? &audit->sample : nullptr);
    SweepOutcome out;
    out.id = job.id;
    out.raw_points = static_cast<long>(res.points.size());
    out.failures = std::move(res.failures);
    if (res.points.empty()) {
        out.total_failure = true;
        return out;
    }
    if (job.dedup) {
        out.points = planner::dedup(res.points);
    } else {
        out.points = std::move(res.points);
        for (std::size_t i = 0; i < out.points.size(); ++i) out.points[i].regime_id = static_cast<long>(i + 1);
    }
    planner::mark_front(out.points, job.spec.orientation);
    for (const auto& p : out.points) out.front_size += p.nondominated ? 1 : 0;

    json failures = json::array();
    for (const auto& f : out.failures) failures.push_back({{"request", f.request}, {"reason", f.reason}});
    const json doc = document("menu", {{"id", job.id},
                                       {"job", sweep_job_json(job)},
                                       {"eval", to_string(audit ? EvalMode::TwoSample : EvalMode::LOO)},
                                       {"kpis", job.spec.kpis},
                                       {"orientation", job.spec.orientation},
                                       {"raw_points", out.raw_points},
                                       {"points", out.points},
                                       {"failures", failures}});
    std::ostringstream csv;
    planner::write_menu_csv(csv, planner::to_menu_table(out.points, job.spec.kpis));
    store.put_text("menus", job.id, ".csv", csv.str());
    if (job.geometry) store.put("wedges", job.id, wedge_document(job.id, out.points, *job.geometry));
    // The JSON document goes last: its presence marks the menu complete.
    store.put("menus", job.id, doc);
    return out;
}

SweepOutcome cmd_sweep(ArtifactStore& store, const std::filesystem::path& spec_path, std::ostream& log) {
    const SweepJob job = load_sweep_job(spec_path);
    SweepOutcome out = run_sweep(store, job);
    for (const auto& f : out.failures) log << "cell failed: " << f.reason << '\n';
    if (out.total_failure) {
        log << "sweep " << job.id << ": every cell failed (" << out.failures.size() << " cells)\n";
        return out;
    }
    log << "sweep " << job.id << ": " << out.raw_points << " points, " << out.points.size() << " regimes, front size "
        << out.front_size << ", " << out.failures.size() << " failed cells\n";
    return out;
}

std::vector<OperatingPoint> load_menu_points(const json& menu_doc) {
    check_document(menu_doc, "menu");
    return menu_doc.at("points").get<std::vector<OperatingPoint>>();
}

} // namespace opcal::opsd
