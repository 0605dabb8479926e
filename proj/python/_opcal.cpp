// Python bindings. Structured results cross the boundary as plain dicts/lists built from
// the same JSON documents the store writes, so both front ends agree field for field.

#include "opcal/commands.hpp"
#include "opcal/errors.hpp"
#include "opcal/exactdist.hpp"
#include "opcal/geometry.hpp"
#include "opcal/gridselect.hpp"
#include "opcal/planner.hpp"
#include "opcal/serialize.hpp"
#include "opcal/simlab.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace opcal;

namespace {

py::object to_py(const json& j) {
    switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
        py::list out;
        for (const auto& v : j) out.append(to_py(v));
        return out;
    }
    case json::value_t::object: {
        py::dict out;
        for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
        return out;
    }
    default: throw DomainError("unsupported JSON value");
    }
}

ScoreSample make_sample(const std::vector<double>& p1, const std::vector<int>& y) {
    return sample_from_probabilities(p1, y);
}

py::object select_grid(const std::string& method, double alpha, double delta, long n, const std::string& regime) {
    const auto sel = gridselect::select_index(parse_method(method), {alpha, delta, n, Regime::parse(regime)});
    if (!sel) return py::none();
    return to_py(json(*sel));
}

py::dict calibrate(const std::vector<double>& p1, const std::vector<int>& y, double alpha0, double delta0,
                   double alpha1, double delta1, const std::string& regime, const std::string& method) {
    int bad = -1;
    const auto cal = conformal::calibrate(make_sample(p1, y),
                                          {alpha0, delta0, alpha1, delta1, Regime::parse(regime), parse_method(method)},
                                          &bad);
    if (!cal) throw Error("class " + std::to_string(bad) + " request is below the feasibility floor");
    py::dict out;
    out["sel0"] = to_py(json(cal->sel0));
    out["sel1"] = to_py(json(cal->sel1));
    out["thresholds"] = to_py(json(cal->thresholds));
    return out;
}

py::object tabulate(const std::vector<double>& p1, const std::vector<int>& y, double tau0, double tau1) {
    Thresholds t{tau0, tau1, 0, 0, 0, 0};
    return to_py(json(audit::tabulate(make_sample(p1, y), t)));
}

py::object sweep(const std::vector<double>& cal_p1, const std::vector<int>& cal_y,
                 const std::optional<std::vector<double>>& aud_p1, const std::optional<std::vector<int>>& aud_y,
                 const std::string& spec_json) {
    if (aud_p1.has_value() != aud_y.has_value()) throw DomainError("audit scores and labels go together");
    const auto job = opsd::parse_sweep_job(spec_json);
    const auto cal = make_sample(cal_p1, cal_y);
    std::optional<ScoreSample> aud;
    if (aud_p1) aud = make_sample(*aud_p1, *aud_y);
    auto res = planner::sweep(job.spec, cal, aud ? &*aud : nullptr);
    std::vector<OperatingPoint> points;
    if (job.dedup) {
        points = planner::dedup(res.points);
    } else {
        points = std::move(res.points);
        for (std::size_t i = 0; i < points.size(); ++i) points[i].regime_id = static_cast<long>(i + 1);
    }
    planner::mark_front(points, job.spec.orientation);
    json failures = json::array();
    for (const auto& f : res.failures) failures.push_back({{"request", f.request}, {"reason", f.reason}});
    return to_py(json{{"kpis", job.spec.kpis}, {"orientation", job.spec.orientation}, {"points", points}, {"failures", failures}});
}

std::vector<std::string> coherent_action(double eta, double c01, double c10, double c_rej) {
    std::vector<std::string> out;
    for (auto a : geometry::coherent_action(eta, {c01, c10, c_rej}).members()) out.push_back(to_string(a));
    return out;
}

py::list coverage_study(const std::vector<long>& n_grid, long reps, std::uint64_t seed) {
    simlab::CoverageStudySpec spec;
    spec.n_cal_grid = n_grid;
    spec.reps = reps;
    spec.seed = seed;
    py::list out;
    for (const auto& r : simlab::run_coverage_study(spec)) out.append(to_py(json(r)));
    return out;
}

} // namespace

PYBIND11_MODULE(_opcal, m) {
    m.doc() = "Conformal operating-point calibration core";

    static py::exception<Error> error_type(m, "OpcalError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error_type.ptr(), e.what());
        }
    });

    // distributions
    m.def("beta_cdf", [](double t, double a, double b) { return exactdist::beta_cdf(t, {a, b}); }, py::arg("t"),
          py::arg("a"), py::arg("b"));
    m.def("betabinom_pmf", [](long x, long n, double a, double b) { return exactdist::betabinom_pmf(x, {n, a, b}); },
          py::arg("x"), py::arg("m"), py::arg("a"), py::arg("b"));
    m.def("betabinom_cdf", [](long x, long n, double a, double b) { return exactdist::betabinom_cdf(x, {n, a, b}); },
          py::arg("x"), py::arg("m"), py::arg("a"), py::arg("b"));
    m.def("betabinom_quantile",
          [](double q, long n, double a, double b) { return exactdist::betabinom_quantile(q, {n, a, b}); },
          py::arg("q"), py::arg("m"), py::arg("a"), py::arg("b"));
    m.def("predictive_interval",
          [](double level, long n, double a, double b) {
              const auto iv = exactdist::predictive_interval(level, {n, a, b});
              return std::make_pair(iv.lo, iv.hi);
          },
          py::arg("level"), py::arg("m"), py::arg("a"), py::arg("b"));

    // grid selection
    m.def("select_index", &select_grid, py::arg("method"), py::arg("alpha"), py::arg("delta"), py::arg("n"),
          py::arg("regime") = "inf", "Grid selection as a dict, or None when SSBC is infeasible.");
    m.def("violation_probability",
          [](double alpha, long n, long u, const std::string& regime) {
              return gridselect::violation_probability(alpha, n, u, Regime::parse(regime));
          },
          py::arg("alpha"), py::arg("n"), py::arg("u"), py::arg("regime") = "inf");
    m.def("feasibility_floor", &gridselect::feasibility_floor, py::arg("delta"), py::arg("n"));
    m.def("window_success_threshold", &gridselect::window_success_threshold, py::arg("alpha"), py::arg("m"));

    // calibration and audit
    m.def("calibrate", &calibrate, py::arg("p1"), py::arg("y"), py::arg("alpha0") = 0.1, py::arg("delta0") = 0.1,
          py::arg("alpha1") = 0.1, py::arg("delta1") = 0.1, py::arg("regime") = "win:100",
          py::arg("method") = "ssbc");
    m.def("tabulate", &tabulate, py::arg("p1"), py::arg("y"), py::arg("tau0"), py::arg("tau1"));
    m.def("envelope_two_sample",
          [](long count, long n, long window, double level, double offset) {
              return to_py(json(audit::envelope_two_sample(count, n, window, level, offset)));
          },
          py::arg("count"), py::arg("n"), py::arg("m"), py::arg("level") = 0.95, py::arg("offset") = 1.0);

    // planning
    m.def("sweep", &sweep, py::arg("cal_p1"), py::arg("cal_y"), py::arg("aud_p1"), py::arg("aud_y"),
          py::arg("spec_json"));
    m.def("pareto_filter",
          [](const std::vector<std::vector<double>>& v, const std::vector<int>& s) { return planner::pareto_filter(v, s); }, py::arg("vectors"), py::arg("orientation"));

    // geometry
    m.def("coherent_action", &coherent_action, py::arg("eta"), py::arg("c01"), py::arg("c10"), py::arg("c_rej"));
    m.def("rejection_band_nonempty",
          [](double c01, double c10, double c_rej) { return geometry::rejection_band_nonempty({c01, c10, c_rej}); },
          py::arg("c01"), py::arg("c10"), py::arg("c_rej"));

    // simulation
    m.def("coverage_study", &coverage_study, py::arg("n_grid"), py::arg("reps"), py::arg("seed") = 20240601);
    m.def("coupling_check",
          [](long n, long k, long reps, std::uint64_t seed) {
              return to_py(json(simlab::run_coupling_check(n, k, reps, seed)));
          },
          py::arg("n"), py::arg("k"), py::arg("reps"), py::arg("seed") = 7);
    m.def("coupling_closed_form", &simlab::coupling_closed_form, py::arg("n"), py::arg("k"));
}
