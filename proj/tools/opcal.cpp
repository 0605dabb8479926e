// opcal: command-line front end over the artifact store.

#include "opcal/commands.hpp"
#include "opcal/errors.hpp"
#include "opcal/serialize.hpp"
#include "opcal/service.hpp"
#include "opcal/simlab.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace opcal;

/// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    fn(out);
}

std::string persist_sim(ArtifactStore& store, const std::string& id, const json& doc) {
    if (id.empty()) return {};
    store.put("sims", id, doc);
    return id;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operational calibration planner: grid selection, audits, menus and pricing geometry"};
    app.require_subcommand(1);
    std::string store_root = "opcal-store";
    app.add_option("--store", store_root, "Artifact store directory")->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load a labeled score CSV into the store");
    opsd::IngestArgs ingest_args;
    std::string csv_path;
    std::string schema_text = "p1";
    std::string filter_text;
    ingest->add_option("csv", csv_path, "CSV with header y,p1[,...] or y,s0,s1[,...]")->required();
    ingest->add_option("--id", ingest_args.id, "Dataset id")->required();
    ingest->add_option("--schema", schema_text, "Probability column, or two score columns 's0,s1'")->capture_default_str();
    ingest->add_option("--filter", filter_text, "Keep rows where e.g. 'feat > 3.5'");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Pick per-class grid indices and fit thresholds");
    opsd::CalibrateArgs cal_args;
    std::string regime_text = "win:100";
    std::string method_text = "ssbc";
    calibrate->add_option("--dataset", cal_args.dataset, "Calibration dataset id")->required();
    calibrate->add_option("--id", cal_args.id, "Calibration artifact id (default: dataset id)");
    calibrate->add_option("--alpha0", cal_args.request.alpha0)->capture_default_str();
    calibrate->add_option("--delta0", cal_args.request.delta0)->capture_default_str();
    calibrate->add_option("--alpha1", cal_args.request.alpha1)->capture_default_str();
    calibrate->add_option("--delta1", cal_args.request.delta1)->capture_default_str();
    calibrate->add_option("--regime", regime_text, "inf or win:<m>")->capture_default_str();
    calibrate->add_option("--method", method_text, "ssbc, dkwm or nominal")->capture_default_str();

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "Tabulate region/label counts and predictive envelopes");
    opsd::AuditArgs audit_args;
    std::string mode_text = "two-sample";
    std::string loo_mode_text = "rederive";
    audit_cmd->add_option("--dataset", audit_args.dataset, "Audit dataset id")->required();
    audit_cmd->add_option("--calibration", audit_args.calibration, "Calibration artifact id")->required();
    audit_cmd->add_option("--id", audit_args.id, "Audit artifact id");
    audit_cmd->add_option("--policy", audit_args.policy, "si, cr or se")->capture_default_str();
    audit_cmd->add_option("--m", audit_args.m, "Deployment window size")->capture_default_str();
    audit_cmd->add_option("--level", audit_args.level, "Envelope level")->capture_default_str();
    audit_cmd->add_option("--mode", mode_text, "two-sample or loo:<infl>")->capture_default_str();
    audit_cmd->add_option("--loo-index", loo_mode_text, "rederive or freeze")->capture_default_str();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a sweep spec and persist the menu");
    std::string spec_path;
    sweep_cmd->add_option("spec", spec_path, "Sweep spec JSON file")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo studies");
    simulate->require_subcommand(1);
    std::uint64_t seed = 0;
    bool seed_given = false;
    long reps = 0;
    std::string out_path;
    std::string sim_id;
    auto add_common = [&](CLI::App* c) {
        c->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) { seed_given = true; });
        c->add_option("--reps", reps, "Replicates");
        c->add_option("--out", out_path, "CSV output path (default stdout)");
        c->add_option("--id", sim_id, "Also persist the report under sims/<id>");
    };
    auto* coverage = simulate->add_subcommand("coverage", "Window-coverage violation study");
    add_common(coverage);
    auto* envelope = simulate->add_subcommand("envelope", "Envelope calibration and LOO alignment study");
    add_common(envelope);
    auto* coupling = simulate->add_subcommand("coupling", "Exchangeability coupling check");
    add_common(coupling);
    long coupling_n = 10;
    long coupling_k = 5;
    coupling->add_option("--n", coupling_n)->capture_default_str();
    coupling->add_option("--k", coupling_k)->capture_default_str();

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON service over the store");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            std::cerr << "serving " << store_root << " on " << host << ":" << port << '\n';
            opsd::serve(store_root, host, port);
            return 0;
        }
        ArtifactStore store(store_root);
        if (*ingest) {
            ingest_args.csv = csv_path;
            ingest_args.schema = IngestSchema::parse(schema_text);
            if (!filter_text.empty()) ingest_args.filter = RowFilter::parse(filter_text);
            opsd::cmd_ingest(store, ingest_args, std::cout);
        } else if (*calibrate) {
            cal_args.request.regime = Regime::parse(regime_text);
            cal_args.request.method = parse_method(method_text);
            opsd::cmd_calibrate(store, cal_args, std::cout);
        } else if (*audit_cmd) {
            audit_args.mode = opsd::AuditMode::parse(mode_text);
            if (loo_mode_text != "rederive" && loo_mode_text != "freeze") throw DomainError("--loo-index must be rederive or freeze");
            audit_args.loo_mode = loo_mode_text == "rederive" ? LooIndexMode::Rederive : LooIndexMode::Freeze;
            opsd::cmd_audit(store, audit_args, std::cout);
        } else if (*sweep_cmd) {
            const auto out = opsd::cmd_sweep(store, spec_path, std::cout);
            return out.total_failure ? 2 : 0;
        } else if (*coverage) {
            simlab::CoverageStudySpec spec;
            if (seed_given) spec.seed = seed;
            if (reps > 0) spec.reps = reps;
            const auto rows = simlab::run_coverage_study(spec);
            emit(out_path, [&](std::ostream& os) { simlab::write_coverage_csv(os, rows); });
            persist_sim(store, sim_id, document("coverage_study", {{"seed", spec.seed}, {"reps", spec.reps}, {"rows", rows}}));
        } else if (*envelope) {
            simlab::EnvelopeStudySpec spec;
            if (seed_given) spec.seed = seed;
            if (reps > 0) spec.reps = reps;
            const auto rows = simlab::run_envelope_study(spec);
            emit(out_path, [&](std::ostream& os) { simlab::write_envelope_csv(os, rows); });
            persist_sim(store, sim_id, document("envelope_study", {{"seed", spec.seed}, {"reps", spec.reps}, {"rows", rows}}));
        } else if (*coupling) {
            const auto est = simlab::run_coupling_check(coupling_n, coupling_k, reps > 0 ? reps : 200000, seed_given ? seed : 7);
            emit(out_path, [&](std::ostream& os) {
                os << "n,k,reps,estimate,se,closed_form\n"
                   << est.n << ',' << est.k << ',' << est.reps << ',' << planner::format_double(est.estimate) << ','
                   << planner::format_double(est.se) << ',' << planner::format_double(est.closed_form) << '\n';
            });
            persist_sim(store, sim_id, document("coupling_check", json(est)));
        }
    } catch (const opcal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
