#include "opcal/gridselect.hpp"

#include "opcal/errors.hpp"
#include "opcal/exactdist.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opcal {

namespace {

// Guards floor() against products such as 0.29 * 100 landing one ulp under an integer.
constexpr double kGridSlack = 1e-9;

long floor_index(double value) { return static_cast<long>(std::floor(value + kGridSlack)); }

bool strictly_increasing(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) == v.end();
}

} // namespace

Regime Regime::finite(long window) {
    if (window < 1) {
        throw DomainError("finite window size must be >= 1");
    }
    return Regime{window};
}

std::string Regime::to_string() const { return is_finite() ? "win:" + std::to_string(window_) : "inf"; }

Regime Regime::parse(const std::string& text) {
    if (text == "inf") {
        return infinite();
    }
    if (text.rfind("win:", 0) == 0) {
        std::size_t used = 0;
        long m = 0;
        try {
            m = std::stol(text.substr(4), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size() - 4) {
            throw DomainError("bad regime '" + text + "', expected inf or win:<m>");
        }
        return finite(m);
    }
    throw DomainError("bad regime '" + text + "', expected inf or win:<m>");
}

std::string to_string(Method m) {
    switch (m) {
    case Method::Nominal: return "nominal";
    case Method::DKWM: return "dkwm";
    case Method::SSBC: return "ssbc";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    if (text == "nominal" || text == "none") return Method::Nominal;
    if (text == "dkwm") return Method::DKWM;
    if (text == "ssbc") return Method::SSBC;
    throw DomainError("unknown selection method '" + text + "'");
}

void CoverageRequest::validate() const {
    if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw DomainError("alpha* must lie in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (n_cal < 1) throw DomainError("calibration size must be >= 1");
}

namespace gridselect {

namespace {

GridSelection make_selection(long u, Method method, const CoverageRequest& req) {
    return GridSelection{u, req.n_cal + 1 - u, req.n_cal, method, req, std::nullopt};
}

} // namespace

GridSelection nominal_index(const CoverageRequest& req) {
    req.validate();
    const long u = std::clamp(floor_index(req.alpha_star * static_cast<double>(req.n_cal + 1)), 1L, req.n_cal);
    return make_selection(u, Method::Nominal, req);
}

GridSelection dkwm_index(const CoverageRequest& req) {
    req.validate();
    // two-sided DKW constant
    const double eps = std::sqrt(std::log(2.0 / req.delta) / (2.0 * static_cast<double>(req.n_cal)));
    const double alpha_cont = req.alpha_star - eps;
    long u = 1;
    if (alpha_cont > 0.0) {
        u = std::clamp(floor_index(alpha_cont * static_cast<double>(req.n_cal + 1)), 1L, req.n_cal);
    }
    GridSelection sel = make_selection(u, Method::DKWM, req);
    sel.alpha_cont = alpha_cont;
    return sel;
}

long window_success_threshold(double alpha_star, long m) {
    const double target = (1.0 - alpha_star) * static_cast<double>(m);
    return static_cast<long>(std::ceil(target - kGridSlack * static_cast<double>(m)));
}

double violation_probability(double alpha_star, long n_cal, long u, const Regime& regime) {
    const double k = static_cast<double>(n_cal + 1 - u);
    const double shape_u = static_cast<double>(u);
    if (!regime.is_finite()) {
        return exactdist::beta_cdf(1.0 - alpha_star, {k, shape_u});
    }
    const long x_star = window_success_threshold(alpha_star, regime.window());
    if (x_star > regime.window()) {
        return 1.0;
    }
    return exactdist::betabinom_cdf(x_star - 1, {regime.window(), k, shape_u});
}

std::optional<GridSelection> ssbc_index(const CoverageRequest& req) {
    req.validate();
    auto admissible = [&](long u) {
        return violation_probability(req.alpha_star, req.n_cal, u, req.regime) <= req.delta;
    };
    // The violation probability is nondecreasing in u (Beta(n+1-u, u) shifts mass
    // downward as u grows), so the admissible set is a prefix {1..u*}.
    if (!admissible(1)) {
        return std::nullopt;
    }
    long good = 1;
    long bad = req.n_cal + 1;
    while (bad - good > 1) {
        const long mid = good + (bad - good) / 2;
        if (admissible(mid)) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    return make_selection(good, Method::SSBC, req);
}

std::optional<GridSelection> select_index(Method method, const CoverageRequest& req) {
    switch (method) {
    case Method::Nominal: return nominal_index(req);
    case Method::DKWM: return dkwm_index(req);
    case Method::SSBC: return ssbc_index(req);
    }
    throw DomainError("unknown selection method");
}

double feasibility_floor(double delta, long n_cal) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (n_cal < 1) throw DomainError("calibration size must be >= 1");
    return -std::expm1(std::log(delta) / static_cast<double>(n_cal));
}

SemanticMap semantic_map(const std::vector<double>& alpha_grid, const std::vector<double>& delta_grid, long n_cal,
                         const Regime& regime) {
    if (alpha_grid.empty() || delta_grid.empty()) {
        throw DomainError("semantic map grids must be nonempty");
    }
    if (!strictly_increasing(alpha_grid) || !strictly_increasing(delta_grid)) {
        throw DomainError("semantic map grids must be strictly increasing");
    }
    SemanticMap map{alpha_grid, delta_grid, n_cal, regime, {}};
    map.cells.reserve(alpha_grid.size() * delta_grid.size());
    for (double alpha : alpha_grid) {
        for (double delta : delta_grid) {
            const auto sel = ssbc_index({alpha, delta, n_cal, regime});
            map.cells.push_back(sel ? std::optional<double>(sel->alpha_grid()) : std::nullopt);
        }
    }
    return map;
}

} // namespace gridselect
} // namespace opcal
