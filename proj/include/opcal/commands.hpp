#pragma once

#include "opcal/geometry.hpp"
#include "opcal/ingest.hpp"
#include "opcal/planner.hpp"
#include "opcal/store.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace opcal::opsd {

struct IngestArgs {
    std::filesystem::path csv;
    std::string id;
    IngestSchema schema;
    std::optional<RowFilter> filter;
};

Dataset cmd_ingest(ArtifactStore& store, const IngestArgs& args, std::ostream& log);

struct CalibrateArgs {
    std::string dataset;
    /// Artifact id; defaults to the dataset id.
    std::string id;
    conformal::ClassRequests request{0.1, 0.1, 0.1, 0.1, Regime::finite(100), Method::SSBC};
};

struct CalibrateResult {
    std::string id;
    std::string dataset;
    conformal::Calibration calibration;
};

/// Per-class index selection + thresholds. Infeasible classes raise Error quoting the feasibility floor.
CalibrateResult cmd_calibrate(ArtifactStore& store, const CalibrateArgs& args, std::ostream& log);
/// Reads back a persisted calibration.
CalibrateResult load_calibration(const ArtifactStore& store, const std::string& id);

/// "two-sample", "loo" or "loo:<infl>".
struct AuditMode {
    EvalMode eval = EvalMode::TwoSample;
    double infl = 1.0;

    static AuditMode parse(const std::string& text);
    std::string to_string() const;
};

struct AuditArgs {
    std::string dataset;
    std::string calibration;
    std::string policy = "si";
    long m = 100;
    double level = 0.95;
    double offset = 1.0;
    AuditMode mode;
    LooIndexMode loo_mode = LooIndexMode::Rederive;
    /// Artifact id; defaults to "<calibration>__<dataset>".
    std::string id;
};

struct AuditResult {
    std::string id;
    RegionLabelTable table;
    std::vector<KpiValue> kpis; ///< one per built-in KPI, envelope included
};

/// Two-sample audits refuse the calibration dataset itself (SameSplitReuse); LOO audits
/// recalibrate on the calibration dataset.
AuditResult cmd_audit(ArtifactStore& store, const AuditArgs& args, std::ostream& log);

struct GeometrySpec {
    Convention convention = Convention::commit_on_singletons();
    std::vector<double> lambda_grid = geometry::default_lambda_grid();
    std::vector<double> rho_grid = geometry::default_rho_grid();
};

/// A parsed sweep spec file. `audit` absent means leave-one-out evaluation on `calibration`.
struct SweepJob {
    std::string id;
    std::string calibration;
    std::optional<std::string> audit;
    SweepSpec spec;
    bool dedup = true;
    std::optional<GeometrySpec> geometry;
};

/// Throws SpecError naming the line/column (syntax) or the field (content).
SweepJob parse_sweep_job(const std::string& text);
SweepJob load_sweep_job(const std::filesystem::path& path);
json sweep_job_json(const SweepJob& job);

struct SweepOutcome {
    std::string id;
    std::vector<OperatingPoint> points; ///< deduplicated when requested, front marked
    std::vector<SweepFailure> failures;
    long raw_points = 0;
    long front_size = 0;
    bool total_failure = false;
};

/// Runs the planner pipeline and persists menus/<id>.json, menus/<id>.csv and (with a
/// geometry block) wedges/<id>.json. Nothing is written on total failure.
SweepOutcome run_sweep(ArtifactStore& store, const SweepJob& job);
SweepOutcome cmd_sweep(ArtifactStore& store, const std::filesystem::path& spec_path, std::ostream& log);

/// Menu document as persisted; `points` come back through load_menu_points.
std::vector<OperatingPoint> load_menu_points(const json& menu_doc);

/// Wedge bitmaps for each operating point of a menu.
json wedge_document(const std::string& menu_id, const std::vector<OperatingPoint>& points, const GeometrySpec& g);

} // namespace opcal::opsd
