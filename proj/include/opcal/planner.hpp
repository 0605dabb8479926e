#pragma once

#include "opcal/audit.hpp"
#include "opcal/conformal.hpp"
#include "opcal/gridselect.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opcal {

struct SweepSpec {
    std::vector<double> alpha0_grid;
    std::vector<double> delta0_grid;
    std::vector<double> alpha1_grid;
    std::vector<double> delta1_grid;
    Regime regime = Regime::finite(100);
    Method method = Method::SSBC;
    Policy policy = Policy::set_inclusion();
    std::vector<std::string> kpis;
    /// +1: larger is better, -1: smaller is better; one per KPI.
    std::vector<int> orientation;
    long m = 100;
    double level = 0.95;
    double infl = 1.0;
    double offset = 1.0;
    LooIndexMode loo_mode = LooIndexMode::Rederive;

    void validate() const;
    /// The six set/label outcome rates plus the two abstention cells, all minimized
    /// except the decisive-correct pair.
    static std::vector<std::string> default_kpis();
    static std::vector<int> default_orientation();
};

struct Request4 {
    double alpha0;
    double delta0;
    double alpha1;
    double delta1;

    friend bool operator==(const Request4&, const Request4&) = default;
};

enum class EvalMode { TwoSample, LOO };
std::string to_string(EvalMode m);

struct KpiValue {
    std::string name;
    long count = 0;
    double rate = 0.0;
    PredictiveEnvelope envelope;
};

struct OperatingPoint {
    Request4 request{};
    GridSelection sel0;
    GridSelection sel1;
    Thresholds thresholds{};
    RegionLabelTable table;
    EvalMode eval = EvalMode::TwoSample;
    std::vector<KpiValue> kpis;
    ScoreRegime regime = ScoreRegime::Boundary;
    bool nondominated = false;
    long regime_id = 0;
    long multiplicity = 1;

    const KpiValue& kpi(const std::string& name) const;
    std::vector<double> rate_vector() const;
};

struct SweepFailure {
    Request4 request;
    std::string reason;
};

struct SweepResult {
    std::vector<OperatingPoint> points;
    std::vector<SweepFailure> failures;
};

namespace planner {

/// Calibrates, evaluates and annotates a single request cell.
OperatingPoint evaluate_cell(const SweepSpec& spec, const Request4& req, const ScoreSample& cal,
                             const ScoreSample* audit);

/// `audit == nullptr` selects leave-one-out evaluation on the calibration sample.
SweepResult sweep(const SweepSpec& spec, const ScoreSample& cal, const ScoreSample* audit);

/// Collapses points sharing (u0, u1); keeps the least conservative request, sorted by regime_id.
std::vector<OperatingPoint> dedup(const std::vector<OperatingPoint>& points);

/// Nondominated flags under s * r, larger preferred.
std::vector<bool> pareto_filter(const std::vector<std::vector<double>>& vectors, std::span<const int> orientation);

/// Recomputes every point's nondominated flag.
void mark_front(std::vector<OperatingPoint>& points, std::span<const int> orientation);

/// Optional post-processing: merge points whose rate vectors coincide exactly.
std::vector<OperatingPoint> collapse_kpi_duplicates(const std::vector<OperatingPoint>& points);

// Menu CSV

struct MenuRow {
    long regime_id = 0;
    long multiplicity = 1;
    Request4 request{};
    double alpha_ssbc_0 = 0.0;
    double alpha_ssbc_1 = 0.0;
    long u0 = 0;
    long u1 = 0;
    double tau0 = 0.0;
    double tau1 = 0.0;
    std::string regime;
    struct Kpi {
        double rate = 0.0;
        long lo = 0;
        long hi = 0;
        friend bool operator==(const Kpi&, const Kpi&) = default;
    };
    std::vector<Kpi> kpis;
    bool nondominated = false;

    friend bool operator==(const MenuRow&, const MenuRow&) = default;
};

struct MenuTable {
    std::vector<std::string> kpi_names;
    std::vector<MenuRow> rows;
};

MenuRow to_menu_row(const OperatingPoint& p);
MenuTable to_menu_table(const std::vector<OperatingPoint>& points, const std::vector<std::string>& kpi_names);

void write_menu_csv(std::ostream& out, const MenuTable& menu);
MenuTable read_menu_csv(std::istream& in);

/// Writes the menu CSV (rows sorted by regime_id); throws Error with the path on I/O failure.
void export_menu(const std::vector<OperatingPoint>& points, const std::vector<std::string>& kpi_names,
                 const std::filesystem::path& path);
MenuTable import_menu(const std::filesystem::path& path);

/// Locale-independent shortest round-trip rendering.
std::string format_double(double v);
double parse_double(const std::string& text);

} // namespace planner
} // namespace opcal
