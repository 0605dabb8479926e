#pragma once

#include "opcal/audit.hpp"
#include "opcal/conformal.hpp"
#include "opcal/geometry.hpp"
#include "opcal/gridselect.hpp"
#include "opcal/planner.hpp"
#include "opcal/simlab.hpp"

#include <json.hpp>

#include <string>

namespace opcal {

using json = nlohmann::json;

/// Bumped whenever a persisted document changes shape.
inline constexpr int kSchemaVersion = 1;

/// Wraps a body with the schema_version and kind fields every artifact carries.
json document(const std::string& kind, json body);
/// Throws SpecError unless `doc` is a current-version document of the given kind.
void check_document(const json& doc, const std::string& kind);

void to_json(json& j, const CoverageRequest& r);
void from_json(const json& j, CoverageRequest& r);

void to_json(json& j, const GridSelection& s);
void from_json(const json& j, GridSelection& s);

void to_json(json& j, const Thresholds& t);
void from_json(const json& j, Thresholds& t);

void to_json(json& j, const Policy& p);
void from_json(const json& j, Policy& p);

void to_json(json& j, const ScoreSample& s);
void from_json(const json& j, ScoreSample& s);

/// Rows keyed by region label ("10", "11", "01", "00"), each [count_y0, count_y1].
void to_json(json& j, const RegionLabelTable& t);
void from_json(const json& j, RegionLabelTable& t);

void to_json(json& j, const PredictiveEnvelope& e);
void from_json(const json& j, PredictiveEnvelope& e);

void to_json(json& j, const Request4& r);
void from_json(const json& j, Request4& r);

void to_json(json& j, const KpiValue& v);
void from_json(const json& j, KpiValue& v);

void to_json(json& j, const OperatingPoint& p);
void from_json(const json& j, OperatingPoint& p);

void to_json(json& j, const SweepSpec& s);
void from_json(const json& j, SweepSpec& s);

void to_json(json& j, const CoherenceReport& r);
void to_json(json& j, const PricingEnvelope& e);

namespace simlab {
void to_json(json& j, const CoverageRow& r);
void to_json(json& j, const EnvelopeKpiReport& r);
void to_json(json& j, const CouplingEstimate& e);
} // namespace simlab

} // namespace opcal

// Regime has no default state, so it needs the non-default-constructible hook.
template <>
struct nlohmann::adl_serializer<opcal::Regime> {
    static opcal::Regime from_json(const json& j) { return opcal::Regime::parse(j.get<std::string>()); }
    static void to_json(json& j, const opcal::Regime& r) { j = r.to_string(); }
};
